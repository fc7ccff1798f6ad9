//! Dirac matrix algebra and spinor projections.
//!
//! The matrices satisfy `g^u g^v + g^v g^u = -2 g^{uv} I` and
//! `(g^u)^* = -g_{uv} g^v` with metric `diag(-1, 1, ..., 1)`. The
//! concrete representation is fixed here:
//!
//! * `n = 2` (N0 = 2): `g^0 = s3`, `g^1 = i s1`, `g^2 = i s2`
//!   (Pauli matrices `s1, s2, s3`);
//! * `n = 3` (N0 = 4): `g^0 = diag(I2, -I2)`,
//!   `g^a = [[0, s_a], [-s_a, 0]]`.
//!
//! Everything downstream is representation-aware only through the two
//! defining identities; tests check those rather than matrix entries.



use crate::error::{Error, Result};
use crate::field::{GridFn, C};
use crate::real::Real;

pub const MAX_N0: usize = 4;

/// Dense `N0 x N0` complex matrix, `N0 <= 4`.
#[derive(Clone, Copy, Debug)]
pub struct SpinMat<R> {
    pub n: usize,
    m: [[C<R>; MAX_N0]; MAX_N0],
}

impl<R: Real> SpinMat<R> {
    pub fn zero(n: usize) -> Self {
        SpinMat {
            n,
            m: [[C::new(R::zero(), R::zero()); MAX_N0]; MAX_N0],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = Self::zero(n);
        for i in 0..n {
            s.m[i][i] = C::new(R::one(), R::zero());
        }
        s
    }

    pub fn from_rows(rows: &[&[C<R>]]) -> Self {
        let n = rows.len();
        let mut s = Self::zero(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s.m[i][j] = *v;
            }
        }
        s
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C<R> {
        self.m[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C<R>) {
        self.m[i][j] = v;
    }

    pub fn mul(&self, other: &SpinMat<R>) -> SpinMat<R> {
        let mut out = SpinMat::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = C::new(R::zero(), R::zero());
                for k in 0..self.n {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn add(&self, other: &SpinMat<R>) -> SpinMat<R> {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &SpinMat<R>) -> SpinMat<R> {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] -= other.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: C<R>) -> SpinMat<R> {
        let mut out = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] *= s;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SpinMat<R> {
        let mut out = SpinMat::zero(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> R {
        let mut m = R::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.m[i][j].norm());
            }
        }
        m
    }

    pub fn apply(&self, v: &Spinor<R>) -> Spinor<R> {
        let mut out = Spinor::zero(self.n);
        for i in 0..self.n {
            let mut s = C::new(R::zero(), R::zero());
            for j in 0..self.n {
                s += self.m[i][j] * v.c[j];
            }
            out.c[i] = s;
        }
        out
    }
}

/// One spinor value, `N0` complex components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor<R> {
    pub n: usize,
    pub c: [C<R>; MAX_N0],
}

impl<R: Real> Spinor<R> {
    pub fn zero(n: usize) -> Self {
        Spinor {
            n,
            c: [C::new(R::zero(), R::zero()); MAX_N0],
        }
    }

    pub fn from_slice(c: &[C<R>]) -> Self {
        let mut s = Self::zero(c.len());
        s.c[..c.len()].copy_from_slice(c);
        s
    }

    pub fn norm_sqr(&self) -> R {
        let mut s = R::zero();
        for i in 0..self.n {
            s = s + self.c[i].norm_sqr();
        }
        s
    }

    pub fn norm(&self) -> R {
        self.norm_sqr().sqrt()
    }

    pub fn add(&self, o: &Spinor<R>) -> Spinor<R> {
        let mut out = *self;
        for i in 0..self.n {
            out.c[i] += o.c[i];
        }
        out
    }

    pub fn sub(&self, o: &Spinor<R>) -> Spinor<R> {
        let mut out = *self;
        for i in 0..self.n {
            out.c[i] -= o.c[i];
        }
        out
    }

    pub fn scale(&self, s: C<R>) -> Spinor<R> {
        let mut out = *self;
        for i in 0..self.n {
            out.c[i] *= s;
        }
        out
    }

    /// `self^* other` (conjugate on the left).
    pub fn inner(&self, o: &Spinor<R>) -> C<R> {
        let mut s = C::new(R::zero(), R::zero());
        for i in 0..self.n {
            s += self.c[i].conj() * o.c[i];
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct GammaRep<R> {
    pub dim: usize,
    pub n0: usize,
    /// `gamma[mu]` for `mu = 0..=dim`.
    gamma: Vec<SpinMat<R>>,
    /// `gamma^0 gamma^a` for `a = 1..=dim` (index `a-1`), the workhorse
    /// products in projections and the Dirac evolution.
    g0g: Vec<SpinMat<R>>,
}

fn cx<R: Real>(re: f64, im: f64) -> C<R> {
    C::new(R::lit(re), R::lit(im))
}

/// Fixed representation satisfying the defining identities; see the
/// module docs for the matrices.
pub fn build_gamma<R: Real>(dim: usize) -> Result<GammaRep<R>> {
    let (n0, gamma) = match dim {
        2 => {
            let g0 = SpinMat::from_rows(&[&[cx(1., 0.), cx(0., 0.)], &[cx(0., 0.), cx(-1., 0.)]]);
            let g1 = SpinMat::from_rows(&[&[cx(0., 0.), cx(0., 1.)], &[cx(0., 1.), cx(0., 0.)]]);
            let g2 = SpinMat::from_rows(&[&[cx(0., 0.), cx(1., 0.)], &[cx(-1., 0.), cx(0., 0.)]]);
            (2usize, vec![g0, g1, g2])
        }
        3 => {
            let z = || cx::<R>(0., 0.);
            let mut g0 = SpinMat::zero(4);
            g0.set(0, 0, cx(1., 0.));
            g0.set(1, 1, cx(1., 0.));
            g0.set(2, 2, cx(-1., 0.));
            g0.set(3, 3, cx(-1., 0.));
            // Pauli blocks
            let s1 = [[z(), cx(1., 0.)], [cx(1., 0.), z()]];
            let s2 = [[z(), cx(0., -1.)], [cx(0., 1.), z()]];
            let s3 = [[cx(1., 0.), z()], [z(), cx(-1., 0.)]];
            let block = |s: [[C<R>; 2]; 2]| {
                let mut g = SpinMat::zero(4);
                for i in 0..2 {
                    for j in 0..2 {
                        g.set(i, 2 + j, s[i][j]);
                        g.set(2 + i, j, -s[i][j]);
                    }
                }
                g
            };
            (4usize, vec![g0, block(s1), block(s2), block(s3)])
        }
        d => return Err(Error::UnsupportedDimension(d)),
    };
    let g0g = (1..=dim).map(|a| gamma[0].mul(&gamma[a])).collect();
    Ok(GammaRep {
        dim,
        n0,
        gamma,
        g0g,
    })
}

impl<R: Real> GammaRep<R> {
    pub fn gamma(&self, mu: usize) -> &SpinMat<R> {
        &self.gamma[mu]
    }

    /// `gamma^0 gamma^a`, spatial index `a` in `1..=dim`.
    pub fn g0g(&self, a: usize) -> &SpinMat<R> {
        &self.g0g[a - 1]
    }

    pub fn metric(&self, mu: usize, nu: usize) -> R {
        if mu != nu {
            R::zero()
        } else if mu == 0 {
            -R::one()
        } else {
            R::one()
        }
    }

    /// Largest deviation from the two defining identities; zero to
    /// rounding for the shipped representations.
    pub fn identity_defect(&self) -> R {
        let mut worst = R::zero();
        let id = SpinMat::identity(self.n0);
        for mu in 0..=self.dim {
            for nu in 0..=self.dim {
                let anti = self.gamma[mu]
                    .mul(&self.gamma[nu])
                    .add(&self.gamma[nu].mul(&self.gamma[mu]));
                let want = id.scale(cx(-2.0, 0.0).scale(self.metric(mu, nu)));
                worst = worst.max(anti.sub(&want).max_abs());
            }
            let adj = self.gamma[mu].adjoint();
            let want = self.gamma[mu].scale(cx(-1.0, 0.0).scale(self.metric(mu, mu)));
            worst = worst.max(adj.sub(&want).max_abs());
        }
        worst
    }

    /// `I +- dir_a g^0 g^a` for a unit (radial) or sub-unit
    /// (hyperboloidal) direction vector.
    pub fn direction_projector(&self, dir: &[R], sign: Sign) -> SpinMat<R> {
        let mut m = SpinMat::identity(self.n0);
        for a in 1..=self.dim {
            let s = match sign {
                Sign::Plus => dir[a - 1],
                Sign::Minus => -dir[a - 1],
            };
            m = m.add(&self.g0g(a).scale(C::new(s, R::zero())));
        }
        m
    }

    /// Radial projection `[psi]_-+ = psi -+ (x_a/r) g^0 g^a psi`.
    pub fn project_radial(&self, psi: &Spinor<R>, x: &[R], sign: Sign) -> Result<Spinor<R>> {
        let mut r2 = R::zero();
        for a in 0..self.dim {
            r2 = r2 + x[a] * x[a];
        }
        if r2 == R::zero() {
            return Err(Error::SingularDirection);
        }
        let r = r2.sqrt();
        let mut out = *psi;
        for a in 1..=self.dim {
            let coeff = match sign {
                Sign::Minus => -(x[a - 1] / r),
                Sign::Plus => x[a - 1] / r,
            };
            let gpsi = self.g0g(a).apply(psi);
            out = out.add(&gpsi.scale(C::new(coeff, R::zero())));
        }
        Ok(out)
    }

    /// Hyperboloidal projection `(psi)_-+ = psi -+ (x_a/t) g^0 g^a psi`.
    pub fn project_hyperbolic(
        &self,
        psi: &Spinor<R>,
        x: &[R],
        t: R,
        sign: Sign,
    ) -> Result<Spinor<R>> {
        if t <= R::zero() {
            return Err(Error::rejected("project_hyperbolic requires t > 0"));
        }
        let mut out = *psi;
        for a in 1..=self.dim {
            let coeff = match sign {
                Sign::Minus => -(x[a - 1] / t),
                Sign::Plus => x[a - 1] / t,
            };
            let gpsi = self.g0g(a).apply(psi);
            out = out.add(&gpsi.scale(C::new(coeff, R::zero())));
        }
        Ok(out)
    }

    /// `phi^* g^0 chi` together with its exact radial and hyperboloidal
    /// decompositions; both reproduce the direct product to rounding.
    pub fn gamma0_bilinear(
        &self,
        phi: &Spinor<R>,
        chi: &Spinor<R>,
        x: &[R],
        t: R,
    ) -> Result<BilinearDecomposition<R>> {
        let g0phi = self.gamma[0].apply(chi);
        let value = phi.inner(&g0phi);

        let quarter = C::new(R::lit(0.25), R::zero());
        let pm = self.project_radial(phi, x, Sign::Minus)?;
        let pp = self.project_radial(phi, x, Sign::Plus)?;
        let cm = self.project_radial(chi, x, Sign::Minus)?;
        let cp = self.project_radial(chi, x, Sign::Plus)?;
        let radial = (pm.inner(&self.gamma[0].apply(&cp)) + pp.inner(&self.gamma[0].apply(&cm)))
            * quarter;

        let hm = self.project_hyperbolic(phi, x, t, Sign::Minus)?;
        let hp = self.project_hyperbolic(phi, x, t, Sign::Plus)?;
        let km = self.project_hyperbolic(chi, x, t, Sign::Minus)?;
        let kp = self.project_hyperbolic(chi, x, t, Sign::Plus)?;
        let mut r2 = R::zero();
        for a in 0..self.dim {
            r2 = r2 + x[a] * x[a];
        }
        let two = C::new(R::lit(2.0) * (R::one() - r2 / (t * t)), R::zero());
        let hyperbolic = (hm.inner(&self.gamma[0].apply(&kp))
            + hp.inner(&self.gamma[0].apply(&km))
            + value * two)
            * quarter;

        Ok(BilinearDecomposition {
            value,
            radial,
            hyperbolic,
        })
    }

    /// `psi^* psi - (x_a/r) psi^* g^0 g^a psi`; equals `|[psi]_-|^2 / 2`.
    pub fn radial_density(&self, psi: &Spinor<R>, x: &[R]) -> Result<R> {
        let mut r2 = R::zero();
        for a in 0..self.dim {
            r2 = r2 + x[a] * x[a];
        }
        if r2 == R::zero() {
            return Err(Error::SingularDirection);
        }
        let r = r2.sqrt();
        let mut val = psi.norm_sqr();
        for a in 1..=self.dim {
            val = val - x[a - 1] / r * psi.inner(&self.g0g(a).apply(psi)).re;
        }
        Ok(val)
    }

    /// `psi^* psi - (x_a/t) psi^* g^0 g^a psi`; equals
    /// `(|(psi)_-|^2 + (s/t)^2 |psi|^2) / 2` with `s^2 = t^2 - r^2`.
    pub fn hyperbolic_density(&self, psi: &Spinor<R>, x: &[R], t: R) -> Result<R> {
        if t <= R::zero() {
            return Err(Error::rejected("hyperbolic_density requires t > 0"));
        }
        let mut val = psi.norm_sqr();
        for a in 1..=self.dim {
            val = val - x[a - 1] / t * psi.inner(&self.g0g(a).apply(psi)).re;
        }
        Ok(val)
    }

    /// Apply a constant matrix to every node of a spinor field:
    /// plane-level linear combination, no per-node gathers.
    pub fn apply_matrix_field(&self, m: &SpinMat<R>, f: &GridFn<R>) -> GridFn<R> {
        use rayon::prelude::*;
        let mut out = GridFn::zeros(f.grid, f.comps);
        let nodes = f.nodes();
        for i in 0..self.n0 {
            let terms: Vec<(C<R>, &[C<R>])> = (0..self.n0)
                .filter_map(|j| {
                    let coef = m.at(i, j);
                    (coef.norm_sqr() > R::zero()).then(|| (coef, f.plane(j)))
                })
                .collect();
            if terms.is_empty() {
                continue;
            }
            let dst = out.plane_mut(i);
            dst.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
                let base = ci * 8192;
                for (o, v) in chunk.iter_mut().enumerate() {
                    let idx = base + o;
                    let mut acc = C::new(R::zero(), R::zero());
                    for (coef, src) in &terms {
                        acc += *coef * src[idx];
                    }
                    *v = acc;
                }
            });
            let _ = nodes;
        }
        out
    }

    /// Field-level projection `[psi]_sign` (radial, `dir = x/r`) or
    /// `(psi)_sign` (hyperboloidal, `dir = x/t`). Masked nodes are set
    /// to zero so they contribute nothing downstream.
    pub fn project_field(
        &self,
        f: &GridFn<R>,
        sign: Sign,
        dir: Direction<R>,
    ) -> GridFn<R> {
        use rayon::prelude::*;
        let grid = f.grid;
        let nodes = grid.nodes();
        // gpsi[a-1] = g0g(a) psi, computed plane-wise.
        let gpsi: Vec<GridFn<R>> = (1..=self.dim)
            .map(|a| self.apply_matrix_field(self.g0g(a), f))
            .collect();
        let mut out = f.clone();
        let s = match sign {
            Sign::Minus => -R::one(),
            Sign::Plus => R::one(),
        };
        for c in 0..f.comps {
            let planes: Vec<&[C<R>]> = gpsi.iter().map(|g| g.plane(c)).collect();
            let dimn = self.dim;
            let plane: Vec<C<R>> = (0..nodes)
                .into_par_iter()
                .map(|i| match dir.at(&grid, i) {
                    Some(d) => {
                        let mut v = f.at(c, i);
                        for a in 0..dimn {
                            v += planes[a][i] * C::new(s * d[a], R::zero());
                        }
                        v
                    }
                    None => C::new(R::zero(), R::zero()),
                })
                .collect();
            out.plane_mut(c).copy_from_slice(&plane);
        }
        out
    }
}

/// Direction provider for field-level projections.
#[derive(Clone, Copy)]
pub enum Direction<R> {
    /// `x / r`, `None` inside the origin mask.
    Radial,
    /// `x / t` at fixed `t`.
    Hyperboloidal(R),
}

impl<R: Real> Direction<R> {
    #[inline]
    pub fn at(&self, grid: &crate::grid::GridSpec<R>, idx: usize) -> Option<[R; 3]> {
        let x = grid.position(idx);
        match self {
            Direction::Radial => {
                if grid.origin_masked(idx) {
                    return None;
                }
                let r = grid.radius(idx);
                let mut d = [R::zero(); 3];
                for a in 0..grid.dim {
                    d[a] = x[a] / r;
                }
                Some(d)
            }
            Direction::Hyperboloidal(t) => {
                let mut d = [R::zero(); 3];
                for a in 0..grid.dim {
                    d[a] = x[a] / *t;
                }
                Some(d)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BilinearDecomposition<R> {
    pub value: C<R>,
    pub radial: C<R>,
    pub hyperbolic: C<R>,
}

trait ScaleExt<R: Real> {
    fn scale(self, s: R) -> Self;
}

impl<R: Real> ScaleExt<R> for C<R> {
    fn scale(self, s: R) -> Self {
        C::new(self.re * s, self.im * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_spinor<R: Real>(rng: &mut ChaCha8Rng, n: usize) -> Spinor<R> {
        let mut s = Spinor::zero(n);
        for i in 0..n {
            s.c[i] = C::new(
                R::lit(rng.gen_range(-1.0..1.0)),
                R::lit(rng.gen_range(-1.0..1.0)),
            );
        }
        s
    }

    fn rand_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            if x.iter().map(|v| v * v).sum::<f64>() > 0.01 {
                return x;
            }
        }
    }

    #[test]
    fn defining_identities_both_dims() {
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            assert_eq!(rep.n0, if dim == 2 { 2 } else { 4 });
            assert!(rep.identity_defect() <= 1e-15, "dim {dim}");
        }
        assert!(build_gamma::<f64>(4).is_err());
        assert!(build_gamma::<f64>(1).is_err());
    }

    #[test]
    fn gamma0_squares_to_identity() {
        let rep = build_gamma::<f64>(2).unwrap();
        let sq = rep.gamma(0).mul(rep.gamma(0));
        assert!(sq.sub(&SpinMat::identity(2)).max_abs() == 0.0);
    }

    #[test]
    fn projections_sum_to_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..100 {
                let psi = rand_spinor(&mut rng, rep.n0);
                let x = rand_point(&mut rng, dim);
                let pm = rep.project_radial(&psi, &x, Sign::Minus).unwrap();
                let pp = rep.project_radial(&psi, &x, Sign::Plus).unwrap();
                let sum = pm.add(&pp);
                let twice = psi.scale(C::new(2.0, 0.0));
                assert!(sum.sub(&twice).norm() <= 1e-14 * psi.norm().max(1.0));
            }
        }
    }

    #[test]
    fn projection_rejects_origin() {
        let rep = build_gamma::<f64>(2).unwrap();
        let psi = Spinor::from_slice(&[C::new(1.0, 0.0), C::new(0.0, 0.0)]);
        assert!(matches!(
            rep.project_radial(&psi, &[0.0, 0.0], Sign::Minus),
            Err(Error::SingularDirection)
        ));
        assert!(rep.project_hyperbolic(&psi, &[1.0, 0.0], 0.0, Sign::Minus).is_err());
    }

    #[test]
    fn hyperbolic_at_origin_is_identity() {
        let rep = build_gamma::<f64>(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = rand_spinor::<f64>(&mut rng, 4);
        let p = rep
            .project_hyperbolic(&psi, &[0.0, 0.0, 0.0], 2.0, Sign::Minus)
            .unwrap();
        assert!(p.sub(&psi).norm() == 0.0);
    }

    #[test]
    fn projector_algebra() {
        // P_+- = I +- eta.g0g satisfies P^2 = 2P and P_+ P_- = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..50 {
                let x = rand_point(&mut rng, dim);
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let eta: Vec<f64> = x.iter().map(|v| v / r).collect();
                let pp = rep.direction_projector(&eta, Sign::Plus);
                let pm = rep.direction_projector(&eta, Sign::Minus);
                let two_pp = pp.scale(C::new(2.0, 0.0));
                let two_pm = pm.scale(C::new(2.0, 0.0));
                assert!(pp.mul(&pp).sub(&two_pp).max_abs() <= 1e-14);
                assert!(pm.mul(&pm).sub(&two_pm).max_abs() <= 1e-14);
                assert!(pp.mul(&pm).max_abs() <= 1e-14);
                assert!(pm.mul(&pp).max_abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn annihilation_identity() {
        // (I - eta_b g0 g^b) g0 (I - eta_a g0 g^a) = 0 for unit eta.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..50 {
                let x = rand_point(&mut rng, dim);
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let eta: Vec<f64> = x.iter().map(|v| v / r).collect();
                let pm = rep.direction_projector(&eta, Sign::Minus);
                let prod = pm.mul(rep.gamma(0)).mul(&pm);
                assert!(prod.max_abs() <= 1e-14, "dim {dim}: {}", prod.max_abs());
            }
        }
    }

    #[test]
    fn cone_boundary_projections_coincide() {
        // On r = t the radial and hyperboloidal projections agree.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..20 {
                let psi = rand_spinor(&mut rng, rep.n0);
                let x = rand_point(&mut rng, dim);
                let t = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let a = rep.project_radial(&psi, &x, Sign::Minus).unwrap();
                let b = rep.project_hyperbolic(&psi, &x, t, Sign::Minus).unwrap();
                assert!(a.sub(&b).norm() <= 1e-13);
            }
        }
    }

    #[test]
    fn bilinear_decompositions_match_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..200 {
                let phi = rand_spinor(&mut rng, rep.n0);
                let chi = rand_spinor(&mut rng, rep.n0);
                let x = rand_point(&mut rng, dim);
                let t = rng.gen_range(2.0..8.0);
                let d = rep.gamma0_bilinear(&phi, &chi, &x, t).unwrap();
                let scale = phi.norm() * chi.norm() + 1e-30;
                assert!((d.value - d.radial).norm() <= 1e-13 * scale);
                assert!((d.value - d.hyperbolic).norm() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn bilinear_zero_inputs() {
        let rep = build_gamma::<f64>(2).unwrap();
        let z = Spinor::zero(2);
        let d = rep.gamma0_bilinear(&z, &z, &[1.0, 0.5], 3.0).unwrap();
        assert_eq!(d.value.norm(), 0.0);
    }

    #[test]
    fn bilinear_radial_bound() {
        // |phi^* g0 chi| <= (|[phi]_-||chi| + |phi||[chi]_-|) / 2
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rep = build_gamma::<f64>(2).unwrap();
        for _ in 0..1000 {
            let phi = rand_spinor(&mut rng, 2);
            let chi = rand_spinor(&mut rng, 2);
            let x = rand_point(&mut rng, 2);
            let d = rep.gamma0_bilinear(&phi, &chi, &x, 2.0).unwrap();
            let pm = rep.project_radial(&phi, &x, Sign::Minus).unwrap();
            let cm = rep.project_radial(&chi, &x, Sign::Minus).unwrap();
            let rhs = 0.5 * (pm.norm() * chi.norm() + phi.norm() * cm.norm());
            assert!(d.value.norm() <= rhs + 1e-12);
        }
    }

    #[test]
    fn density_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for dim in [2usize, 3] {
            let rep = build_gamma::<f64>(dim).unwrap();
            for _ in 0..100 {
                let psi = rand_spinor(&mut rng, rep.n0);
                let x = rand_point(&mut rng, dim);
                let t = rng.gen_range(2.0..6.0);
                let r2: f64 = x.iter().map(|v| v * v).sum();

                let lhs = rep.radial_density(&psi, &x).unwrap();
                let pm = rep.project_radial(&psi, &x, Sign::Minus).unwrap();
                assert!((lhs - 0.5 * pm.norm_sqr()).abs() <= 1e-13 * psi.norm_sqr().max(1.0));

                let lhs2 = rep.hyperbolic_density(&psi, &x, t).unwrap();
                let hm = rep.project_hyperbolic(&psi, &x, t, Sign::Minus).unwrap();
                let s2 = t * t - r2;
                let rhs2 = 0.5 * (hm.norm_sqr() + s2 / (t * t) * psi.norm_sqr());
                assert!((lhs2 - rhs2).abs() <= 1e-13 * psi.norm_sqr().max(1.0));
            }
        }
    }

    #[test]
    fn generic_scalar_smoke_f32() {
        let rep = build_gamma::<f32>(2).unwrap();
        assert!(rep.identity_defect() <= 1e-6);
    }
}
