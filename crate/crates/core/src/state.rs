//! Coupled field state `(psi, v, d_t v)` at a fixed time and the
//! first-order-in-time right-hand side used by the RK4 integrator.
//!
//! The Dirac time derivative is obtained by solving the equation for
//! `d_t psi` ("on shell"):
//!
//! ```text
//!   d_t psi = -g^0 g^a d_a psi + i M g^0 psi - i g^0 (v psi)
//! ```
//!
//! and the Klein-Gordon pair evolves as `d_t v = vt`,
//! `d_t vt = Lap v - v + psi^* g^0 psi`. An optional wave-equation
//! potential (spinor-valued, `Box P = v psi`) is co-evolved alongside.

use num_complex::Complex;

use crate::clifford::GammaRep;
use crate::error::Result;
use crate::fft::SpectralOps;
use crate::field::{GridFn, SupMask};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct WaveState<R> {
    pub pot: GridFn<R>,
    pub pot_t: GridFn<R>,
}

#[derive(Clone, Debug)]
pub struct SimState<R> {
    pub t: R,
    pub mass: R,
    /// Spinor field, `N0` components.
    pub psi: GridFn<R>,
    /// Real scalar field (1 component, imaginary part identically zero).
    pub v: GridFn<R>,
    /// `d_t v`.
    pub vt: GridFn<R>,
    /// Optional co-evolved wave potential.
    pub wave: Option<WaveState<R>>,
}

impl<R: Real> SimState<R> {
    pub fn zeros(grid: crate::grid::GridSpec<R>, n0: usize, t: R, mass: R) -> Self {
        SimState {
            t,
            mass,
            psi: GridFn::zeros(grid, n0),
            v: GridFn::zeros(grid, 1),
            vt: GridFn::zeros(grid, 1),
            wave: None,
        }
    }

    pub fn grid(&self) -> crate::grid::GridSpec<R> {
        self.psi.grid
    }

    pub fn sup_psi(&self) -> R {
        self.psi.sup_norm(SupMask::STANDARD)
    }

    pub fn sup_v(&self) -> R {
        self.v.sup_norm(SupMask::STANDARD)
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite()
            && self.v.is_finite()
            && self.vt.is_finite()
            && self
                .wave
                .as_ref()
                .map(|w| w.pot.is_finite() && w.pot_t.is_finite())
                .unwrap_or(true)
    }

    fn axpy(&mut self, s: R, slope: &StateSlope<R>) {
        let sc = Complex::new(s, R::zero());
        self.psi.axpy(sc, &slope.dpsi);
        self.v.axpy(sc, &slope.dv);
        self.vt.axpy(sc, &slope.dvt);
        if let (Some(w), Some(dw)) = (self.wave.as_mut(), slope.dwave.as_ref()) {
            w.pot.axpy(sc, &dw.0);
            w.pot_t.axpy(sc, &dw.1);
        }
    }
}

pub struct StateSlope<R> {
    pub dpsi: GridFn<R>,
    pub dv: GridFn<R>,
    pub dvt: GridFn<R>,
    pub dwave: Option<(GridFn<R>, GridFn<R>)>,
}

/// Pointwise `a^* g^0 b` as a 1-component complex field.
pub fn gamma0_pair_density<R: Real>(
    rep: &GammaRep<R>,
    a: &GridFn<R>,
    b: &GridFn<R>,
) -> GridFn<R> {
    use rayon::prelude::*;
    let mut out = GridFn::zeros(a.grid, 1);
    let mut terms: Vec<(Complex<R>, &[Complex<R>], &[Complex<R>])> = Vec::new();
    for c in 0..rep.n0 {
        for d in 0..rep.n0 {
            let coef = rep.gamma(0).at(c, d);
            if coef.norm_sqr() > R::zero() {
                terms.push((coef, a.plane(c), b.plane(d)));
            }
        }
    }
    let po = out.plane_mut(0);
    po.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
        let base = ci * 8192;
        for (o, v) in chunk.iter_mut().enumerate() {
            let idx = base + o;
            let mut acc = Complex::new(R::zero(), R::zero());
            for (coef, pa, pb) in &terms {
                acc += *coef * pa[idx].conj() * pb[idx];
            }
            *v = acc;
        }
    });
    out
}

/// `psi^* g^0 psi`, returned as a real plane plus the worst relative
/// imaginary contamination (which must sit at rounding level).
pub fn source_density<R: Real>(rep: &GammaRep<R>, psi: &GridFn<R>) -> (GridFn<R>, R) {
    let dens = gamma0_pair_density(rep, psi, psi);
    let mut out = GridFn::zeros(psi.grid, 1);
    let mut worst = R::zero();
    let pd = dens.plane(0);
    let po = out.plane_mut(0);
    for i in 0..po.len() {
        let z = pd[i];
        let scale = psi.abs2_at(i);
        if scale > R::zero() {
            worst = worst.max(z.im.abs() / scale);
        }
        po[i] = Complex::new(z.re, R::zero());
    }
    (out, worst)
}

/// Multiply every component of `f` by the real part of the
/// 1-component field `s`.
pub fn mul_real_scalar<R: Real>(s: &GridFn<R>, f: &GridFn<R>) -> GridFn<R> {
    use rayon::prelude::*;
    let mut out = f.clone();
    let sp = s.plane(0);
    for c in 0..f.comps {
        let po = out.plane_mut(c);
        po.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
            let base = ci * 8192;
            for (o, v) in chunk.iter_mut().enumerate() {
                let w = sp[base + o].re;
                *v = Complex::new(v.re * w, v.im * w);
            }
        });
    }
    out
}

/// On-shell Dirac time derivative for a spinor field `psi` in the
/// potential `v` (both at the same time).
pub fn dirac_time_derivative<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    psi: &GridFn<R>,
    v: &GridFn<R>,
    mass: R,
) -> Result<GridFn<R>> {
    let mut out = match ops.scheme {
        crate::fft::DerivativeScheme::Spectral => dirac_spatial_fused(ops, rep, psi)?,
        crate::fft::DerivativeScheme::Fd4 => {
            let mut out = GridFn::zeros(psi.grid, psi.comps);
            let minus_one = Complex::new(-R::one(), R::zero());
            for a in 1..=rep.dim {
                let da = ops.derivative(psi, a - 1)?;
                let term = rep.apply_matrix_field(rep.g0g(a), &da);
                out.axpy(minus_one, &term);
            }
            out
        }
    };
    if mass != R::zero() {
        let g0psi = rep.apply_matrix_field(rep.gamma(0), psi);
        out.axpy(Complex::new(R::zero(), mass), &g0psi);
    }
    let vpsi = mul_real_scalar(v, psi);
    let g0vpsi = rep.apply_matrix_field(rep.gamma(0), &vpsi);
    out.axpy(Complex::new(R::zero(), -R::one()), &g0vpsi);
    Ok(out)
}

/// `-g^0 g^a d_a psi` in one Fourier roundtrip: mode-wise the operator
/// is the matrix `-i k_a g^0 g^a`, applied as plane-pair multipliers.
fn dirac_spatial_fused<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    psi: &GridFn<R>,
) -> Result<GridFn<R>> {
    use rayon::prelude::*;
    psi.assert_finite("dirac rhs input")?;
    let grid = psi.grid;
    let mut hat = psi.clone();
    ops.to_spectrum_inplace(&mut hat);
    let mut out_hat = GridFn::zeros(grid, psi.comps);
    for c in 0..rep.n0 {
        // coefficient vectors per source component d: entries of g0g(a)
        let pairs: Vec<(usize, Vec<Complex<R>>)> = (0..rep.n0)
            .filter_map(|d| {
                let coefs: Vec<Complex<R>> =
                    (1..=rep.dim).map(|a| rep.g0g(a).at(c, d)).collect();
                coefs
                    .iter()
                    .any(|z| z.norm_sqr() > R::zero())
                    .then_some((d, coefs))
            })
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let srcs: Vec<(&[Complex<R>], &Vec<Complex<R>>)> =
            pairs.iter().map(|(d, coefs)| (hat.plane(*d), coefs)).collect();
        let dst = out_hat.plane_mut(c);
        dst.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
            let base = ci * 8192;
            for (o, v) in chunk.iter_mut().enumerate() {
                let idx = base + o;
                let k = grid.wavevector(idx);
                let mut acc = Complex::new(R::zero(), R::zero());
                for (src, coefs) in &srcs {
                    // -i k_a * coef_a
                    let mut m = Complex::new(R::zero(), R::zero());
                    for (a, coef) in coefs.iter().enumerate() {
                        m += *coef * Complex::new(R::zero(), -k[a]);
                    }
                    acc += m * src[idx];
                }
                *v = acc;
            }
        });
    }
    ops.from_spectrum_inplace(&mut out_hat);
    Ok(out_hat)
}

/// Diagnostics recorded once per full RK4 step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepDiagnostics {
    /// Worst `|Im(psi^* g^0 psi)| / |psi|^2` seen in the step's source
    /// evaluations.
    pub source_imag: f64,
}

pub fn state_slope<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    state: &SimState<R>,
    coupled: bool,
    diag: &mut StepDiagnostics,
) -> Result<StateSlope<R>> {
    let dpsi = if coupled {
        dirac_time_derivative(ops, rep, &state.psi, &state.v, state.mass)?
    } else {
        let zero_v = GridFn::zeros(state.grid(), 1);
        dirac_time_derivative(ops, rep, &state.psi, &zero_v, state.mass)?
    };
    let dv = state.vt.clone();
    let mut dvt = ops.laplacian(&state.v)?;
    dvt.axpy(Complex::new(-R::one(), R::zero()), &state.v);
    if coupled {
        let (fv, imag) = source_density(rep, &state.psi);
        diag.source_imag = diag.source_imag.max(imag.as_f64());
        dvt.axpy(Complex::new(R::one(), R::zero()), &fv);
    }
    let dwave = match state.wave.as_ref() {
        Some(w) => {
            let dpot = w.pot_t.clone();
            let mut dpot_t = ops.laplacian(&w.pot)?;
            let vpsi = mul_real_scalar(&state.v, &state.psi);
            dpot_t.axpy(Complex::new(-R::one(), R::zero()), &vpsi);
            Some((dpot, dpot_t))
        }
        None => None,
    };
    Ok(StateSlope {
        dpsi,
        dv,
        dvt,
        dwave,
    })
}

/// One classical RK4 step of the coupled first-order system.
pub fn rk4_step<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    state: &SimState<R>,
    dt: R,
) -> Result<(SimState<R>, StepDiagnostics)> {
    rk4_step_mode(ops, rep, state, dt, true)
}

/// RK4 step with the nonlinear coupling optionally disabled (free
/// Dirac and Klein-Gordon flows used for comparisons).
pub fn rk4_step_mode<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    state: &SimState<R>,
    dt: R,
    coupled: bool,
) -> Result<(SimState<R>, StepDiagnostics)> {
    let mut diag = StepDiagnostics::default();
    let half = dt * R::lit(0.5);

    let k1 = state_slope(ops, rep, state, coupled, &mut diag)?;
    let mut s2 = state.clone();
    s2.t = state.t + half;
    s2.axpy(half, &k1);
    let k2 = state_slope(ops, rep, &s2, coupled, &mut diag)?;

    let mut s3 = state.clone();
    s3.t = state.t + half;
    s3.axpy(half, &k2);
    let k3 = state_slope(ops, rep, &s3, coupled, &mut diag)?;

    let mut s4 = state.clone();
    s4.t = state.t + dt;
    s4.axpy(dt, &k3);
    let k4 = state_slope(ops, rep, &s4, coupled, &mut diag)?;

    let sixth = dt / R::lit(6.0);
    let third = dt / R::lit(3.0);
    let mut out = state.clone();
    out.t = state.t + dt;
    out.axpy(sixth, &k1);
    out.axpy(third, &k2);
    out.axpy(third, &k3);
    out.axpy(sixth, &k4);
    Ok((out, diag))
}
