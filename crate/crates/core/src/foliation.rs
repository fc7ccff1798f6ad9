//! Space-time geometry: interior/exterior regions split at `r = t - 1`,
//! truncated hyperboloids `t^2 = s^2 + |x|^2` with `t(s) = (s^2+1)/2`,
//! `r(s) = (s^2-1)/2`, and flux accumulation along the light-cone
//! boundary `r = tau - 1`.
//!
//! Cone measure convention: the accumulator stores the raw space-time
//! integral `int int f dS dtau` over the cone. With the cone's surface
//! element `dsigma = sqrt(2) dS dtau` and the `2^{-1/2}` factor carried
//! by the upward unit normal, the raw value is exactly the boundary
//! term appearing in the discrete energy balance; the paper-normalized
//! `int f dsigma` is `sqrt(2)` times it. Both are exposed.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{GridFn, C};
use crate::grid::GridSpec;
use crate::real::Real;
use crate::solver::History;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Interior,
    Exterior,
}

/// Exact region membership; the boundary `r = t - 1` is exterior.
pub fn classify<R: Real>(t: R, x: &[R]) -> Result<Region> {
    if t < R::lit(2.0) {
        return Err(Error::rejected("region classification requires t >= 2"));
    }
    let mut r2 = R::zero();
    for v in x {
        r2 = r2 + *v * *v;
    }
    if r2.sqrt() >= t - R::one() {
        Ok(Region::Exterior)
    } else {
        Ok(Region::Interior)
    }
}

pub fn t_of_s<R: Real>(s: R) -> R {
    (s * s + R::one()) * R::lit(0.5)
}

pub fn r_of_s<R: Real>(s: R) -> R {
    (s * s - R::one()) * R::lit(0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlicePart {
    Interior,
    Exterior,
    Full,
}

/// Node set of a truncated hyperboloid: grid positions with their
/// lifted times `t(x) = sqrt(s^2 + |x|^2)`.
#[derive(Clone, Debug)]
pub struct SliceGeometry<R> {
    pub s: R,
    pub part: SlicePart,
    pub grid: GridSpec<R>,
    /// (flat grid index, t on the hyperboloid)
    pub nodes: Vec<(usize, R)>,
}

pub fn slice_geometry<R: Real>(
    grid: GridSpec<R>,
    s: R,
    part: SlicePart,
    t_cap: Option<R>,
) -> Result<SliceGeometry<R>> {
    if s < R::lit(2.0) {
        return Err(Error::rejected("hyperboloid slices require s >= 2"));
    }
    let rs = r_of_s(s);
    let mut nodes = Vec::new();
    for idx in 0..grid.nodes() {
        let r = grid.radius(idx);
        let keep = match part {
            SlicePart::Interior => r < rs,
            SlicePart::Exterior => r >= rs,
            SlicePart::Full => true,
        };
        if !keep {
            continue;
        }
        let t = (s * s + r * r).sqrt();
        if let Some(cap) = t_cap {
            if t > cap {
                continue;
            }
        }
        nodes.push((idx, t));
    }
    Ok(SliceGeometry {
        s,
        part,
        grid,
        nodes,
    })
}

/// Field values interpolated onto a slice, component-major.
#[derive(Clone, Debug)]
pub struct SliceField<R> {
    pub comps: usize,
    pub values: Vec<C<R>>,
}

impl<R: Real> SliceField<R> {
    #[inline]
    pub fn at(&self, c: usize, node: usize) -> C<R> {
        self.values[c * (self.values.len() / self.comps) + node]
    }
}

/// Interpolate a derived plane of the history onto the slice by
/// centered cubic interpolation in time. `plane_of` maps each needed
/// snapshot to the plane being interpolated; it is invoked once per
/// contributing snapshot and cached.
pub fn interp_on_slice<R: Real>(
    history: &History<R>,
    slice: &SliceGeometry<R>,
    comps: usize,
    mut plane_of: impl FnMut(&crate::state::SimState<R>) -> Result<GridFn<R>>,
) -> Result<SliceField<R>> {
    let n = slice.nodes.len();
    let mut cache: Vec<Option<GridFn<R>>> = vec![None; history.len()];
    // Determine stencils first so coverage errors carry the full range.
    let mut stencils = Vec::with_capacity(n);
    for &(_, t) in &slice.nodes {
        stencils.push(history.cubic_stencil(t)?);
    }
    for &(start, _) in &stencils {
        for j in start..start + 4 {
            if cache[j].is_none() {
                cache[j] = Some(plane_of(&history.states[j])?);
            }
        }
    }
    let zero = Complex::new(R::zero(), R::zero());
    let mut values = vec![zero; comps * n];
    for (node, (&(idx, _), &(start, w))) in
        slice.nodes.iter().zip(stencils.iter()).enumerate()
    {
        for c in 0..comps {
            let mut acc = zero;
            for j in 0..4 {
                let plane = cache[start + j].as_ref().unwrap();
                acc += plane.at(c, idx) * Complex::new(w[j], R::zero());
            }
            values[c * n + node] = acc;
        }
    }
    Ok(SliceField { comps, values })
}

/// Quadrature of a per-node integrand over the slice (weight `dx^n`).
pub fn slice_integral<R: Real>(
    slice: &SliceGeometry<R>,
    f: impl Fn(usize, usize, R) -> R + Sync,
) -> R {
    // f(slice node number, grid idx, t)
    let vol = slice.grid.cell_volume();
    crate::real::indexed_sum(slice.nodes.len(), |i| {
        let (idx, t) = slice.nodes[i];
        f(i, idx, t)
    }) * vol
}

// ---------------------------------------------------------------------
// Spatial interpolation and cone rings
// ---------------------------------------------------------------------

/// Bilinear (2D) / trilinear (3D) interpolation of a component plane at
/// an arbitrary point inside the box, with periodic wrap.
pub fn interp_spatial<R: Real>(f: &GridFn<R>, comp: usize, x: &[R]) -> C<R> {
    let g = f.grid;
    let p = g.points;
    let dx = g.dx();
    let mut i0 = [0usize; 3];
    let mut frac = [R::zero(); 3];
    for a in 0..g.dim {
        let u = (x[a] + g.half_width) / dx;
        let fl = u.floor();
        let mut i = fl.to_isize().unwrap_or(0);
        frac[a] = u - fl;
        i = i.rem_euclid(p as isize);
        i0[a] = i as usize;
    }
    let plane = f.plane(comp);
    let stride = |a: usize| p.pow((g.dim - 1 - a) as u32);
    let mut acc = Complex::new(R::zero(), R::zero());
    let corners = 1usize << g.dim;
    for corner in 0..corners {
        let mut w = R::one();
        let mut idx = 0usize;
        for a in 0..g.dim {
            let hi = (corner >> a) & 1 == 1;
            let ia = if hi { (i0[a] + 1) % p } else { i0[a] };
            w = w * if hi { frac[a] } else { R::one() - frac[a] };
            idx += ia * stride(a);
        }
        acc += plane[idx] * Complex::new(w, R::zero());
    }
    acc
}

/// Surface integral of a real integrand over the sphere/circle
/// `r = radius`. Returns `None` when the radius sits inside the origin
/// mask. 2D uses a uniform angular grid; 3D a Fibonacci sphere.
pub fn ring_integral<R: Real>(
    grid: &GridSpec<R>,
    radius: R,
    f: impl Fn(&[R]) -> R,
) -> Option<R> {
    if radius < grid.dx() * R::lit(2.0) {
        return None;
    }
    match grid.dim {
        2 => {
            let circumference = R::lit(2.0) * R::PI() * radius;
            let m = ((circumference / grid.dx()).as_f64() * 2.0).ceil().max(64.0) as usize;
            let dtheta = R::lit(2.0) * R::PI() / R::from_usize(m).unwrap();
            let mut acc = R::zero();
            for j in 0..m {
                let th = dtheta * R::from_usize(j).unwrap();
                let x = [radius * th.cos(), radius * th.sin(), R::zero()];
                acc = acc + f(&x[..2]);
            }
            Some(acc * radius * dtheta)
        }
        3 => {
            let area = R::lit(4.0) * R::PI() * radius * radius;
            let m = ((area / (grid.dx() * grid.dx())).as_f64() * 2.0)
                .ceil()
                .max(256.0) as usize;
            let golden = R::PI() * (R::lit(3.0) - R::lit(5.0).sqrt());
            let mut acc = R::zero();
            for j in 0..m {
                let jf = R::from_usize(j).unwrap();
                let z = R::one() - (R::lit(2.0) * jf + R::one()) / R::from_usize(m).unwrap();
                let rho = (R::one() - z * z).max(R::zero()).sqrt();
                let th = golden * jf;
                let x = [radius * rho * th.cos(), radius * rho * th.sin(), radius * z];
                acc = acc + f(&x);
            }
            Some(acc * area / R::from_usize(m).unwrap())
        }
        _ => None,
    }
}

/// Running integral over the light-cone boundary `{r = tau - 1}`,
/// advanced in time order with trapezoidal weights in `tau`.
#[derive(Clone, Debug)]
pub struct ConeAccumulator<R> {
    raw: R,
    last: Option<(R, R)>, // (tau, ring integral)
    pub skipped: usize,
}

impl<R: Real> ConeAccumulator<R> {
    pub fn new() -> Self {
        ConeAccumulator {
            raw: R::zero(),
            last: None,
            skipped: 0,
        }
    }

    /// Feed the ring integral of the integrand at time `tau` over
    /// `r = tau - 1`; `None` marks a skipped (too-small) ring.
    pub fn update(&mut self, tau: R, ring: Option<R>) {
        match ring {
            None => {
                self.skipped += 1;
                self.last = None;
            }
            Some(value) => {
                if let Some((t0, v0)) = self.last {
                    debug_assert!(tau > t0, "cone accumulation must advance in time");
                    self.raw = self.raw + (tau - t0) * (v0 + value) * R::lit(0.5);
                }
                self.last = Some((tau, value));
            }
        }
    }

    /// `int int f dS dtau`; this is the boundary term of the discrete
    /// energy balance.
    pub fn raw(&self) -> R {
        self.raw
    }

    /// `int f dsigma` with the cone's intrinsic surface measure.
    pub fn paper_normalized(&self) -> R {
        self.raw * R::lit(2.0).sqrt()
    }
}

impl<R: Real> Default for ConeAccumulator<R> {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use crate::fft::SpectralOps;
    use crate::solver::History;
    use crate::state::SimState;

    #[test]
    fn classification_matches_definitions() {
        assert_eq!(classify(2.0, &[1.0, 0.0]).unwrap(), Region::Exterior); // boundary
        assert_eq!(classify(10.0, &[3.0, 4.0]).unwrap(), Region::Interior); // r = 5 < 9
        assert!(classify(1.5, &[0.0, 0.0]).is_err());
        // the s = 2 hyperboloid meets the cone at (t, r) = (5/2, 3/2)
        assert_eq!(t_of_s(2.0), 2.5);
        assert_eq!(r_of_s(2.0), 1.5);
        assert_eq!(classify(2.5, &[1.5, 0.0]).unwrap(), Region::Exterior);
    }

    #[test]
    fn slice_parts_partition() {
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let s = 3.0;
        let interior = slice_geometry(grid, s, SlicePart::Interior, None).unwrap();
        let exterior = slice_geometry(grid, s, SlicePart::Exterior, None).unwrap();
        let full = slice_geometry(grid, s, SlicePart::Full, None).unwrap();
        assert_eq!(interior.nodes.len() + exterior.nodes.len(), full.nodes.len());
        let rs = r_of_s(s);
        for &(idx, t) in &interior.nodes {
            assert!(grid.radius(idx) < rs);
            assert!(t >= s && t <= t_of_s(s) + 1e-12);
        }
        for &(idx, _) in &exterior.nodes {
            assert!(grid.radius(idx) >= rs);
        }
        assert!(slice_geometry(grid, 1.0, SlicePart::Full, None).is_err());
    }

    #[test]
    fn constant_field_slices_to_constant() {
        let grid = GridSpec::new(2, 32, 10.0).unwrap();
        let mut hist = History::new();
        for j in 0..40 {
            let t = 2.0 + 0.25 * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            st.v = GridFn::scalar_from(grid, |_| 7.5);
            hist.push(st);
        }
        let slice = slice_geometry(grid, 2.5, SlicePart::Interior, None).unwrap();
        let vals = interp_on_slice(&hist, &slice, 1, |st| Ok(st.v.clone())).unwrap();
        for i in 0..slice.nodes.len() {
            assert!((vals.at(0, i).re - 7.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_in_time_field_slices_to_t_of_x() {
        // u(t,x) = t sliced on H_s gives sqrt(s^2 + |x|^2).
        let grid = GridSpec::new(2, 32, 10.0).unwrap();
        let mut hist = History::new();
        for j in 0..800 {
            let t = 2.0 + 0.01 * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            st.v = GridFn::scalar_from(grid, |_| t);
            hist.push(st);
        }
        let slice = slice_geometry(grid, 2.5, SlicePart::Full, Some(9.9)).unwrap();
        let vals = interp_on_slice(&hist, &slice, 1, |st| Ok(st.v.clone())).unwrap();
        let mut err = 0.0f64;
        for (i, &(_, t)) in slice.nodes.iter().enumerate() {
            err = err.max((vals.at(0, i).re - t).abs());
        }
        assert!(err <= 1e-9, "interpolation error {err}");
    }

    #[test]
    fn interior_slice_volume() {
        // integral of 1 over the interior part approximates the ball
        // volume pi r(s)^2 within 2%.
        let grid = GridSpec::new(2, 128, 12.0).unwrap();
        let s = 4.0; // r(s) = 7.5
        let slice = slice_geometry(grid, s, SlicePart::Interior, None).unwrap();
        let vol = slice_integral(&slice, |_, _, _| 1.0);
        let exact = std::f64::consts::PI * r_of_s(s) * r_of_s(s);
        assert!(
            (vol - exact).abs() / exact <= 0.02,
            "quadrature volume {vol} vs {exact}"
        );
    }

    #[test]
    fn coverage_error_is_explicit() {
        let grid = GridSpec::new(2, 32, 10.0).unwrap();
        let mut hist = History::new();
        for j in 0..10 {
            let t = 2.0 + 0.1 * j as f64;
            hist.push(SimState::zeros(grid, 2, t, 0.0));
        }
        // s = 2.5 needs t up to sqrt(6.25 + 200) ~ 14.4, have only 2.9
        let slice = slice_geometry(grid, 2.5, SlicePart::Full, None).unwrap();
        let r = interp_on_slice(&hist, &slice, 1, |st| Ok(st.v.clone()));
        assert!(matches!(r, Err(Error::Coverage { .. })), "{r:?}");
    }

    #[test]
    fn ring_integral_circumference() {
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let v = ring_integral(&grid, 2.0, |_| 1.0).unwrap();
        let exact = 2.0 * std::f64::consts::PI * 2.0;
        assert!((v - exact).abs() / exact <= 1e-12);
        // tiny radii are masked
        assert!(ring_integral(&grid, 0.1, |_| 1.0).is_none());
    }

    #[test]
    fn ring_integral_sphere_area_3d() {
        let grid = GridSpec::new(3, 32, 8.0).unwrap();
        let v = ring_integral(&grid, 1.5, |_| 1.0).unwrap();
        let exact = 4.0 * std::f64::consts::PI * 1.5 * 1.5;
        assert!((v - exact).abs() / exact <= 1e-12);
        // a linear function integrates to zero by symmetry
        let w = ring_integral(&grid, 1.5, |x| x[2]).unwrap();
        assert!(w.abs() <= 1e-10 * exact);
    }

    #[test]
    fn cone_accumulator_closed_form() {
        // integrand 1 in 2D from tau = 2 to 3:
        // int sqrt(2) * 2 pi (tau-1) dtau / sqrt(2) -> raw = 2 pi * 3/2
        let grid = GridSpec::new(2, 128, 12.0).unwrap();
        let mut acc = ConeAccumulator::new();
        let n = 200;
        for j in 0..=n {
            let tau = 2.0 + j as f64 / n as f64;
            let ring = ring_integral(&grid, tau - 1.0, |_| 1.0);
            acc.update(tau, ring);
        }
        let exact = 2.0 * std::f64::consts::PI * 1.5;
        assert!(
            (acc.raw() - exact).abs() / exact <= 0.01,
            "raw cone integral {} vs {}",
            acc.raw(),
            exact
        );
        assert!((acc.paper_normalized() / acc.raw() - 2.0f64.sqrt()).abs() <= 1e-15);
        // a zero integrand accumulates nothing
        let mut zero_acc = ConeAccumulator::new();
        for j in 0..=10 {
            zero_acc.update(2.0 + 0.1 * j as f64, Some(0.0));
        }
        assert_eq!(zero_acc.raw(), 0.0);
    }

    #[test]
    fn spatial_interpolation_exact_on_bilinear() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let f = GridFn::scalar_from(grid, |x| 2.0 + 0.5 * x[0] - 0.25 * x[1]);
        // bilinear interpolation reproduces affine functions exactly
        let v = interp_spatial(&f, 0, &[1.137, -2.42]);
        let want: f64 = 2.0 + 0.5 * 1.137 - 0.25 * (-2.42);
        assert!((v.re - want).abs() <= 1e-12);
    }

    #[test]
    fn free_wave_cone_flux_balances_energy() {
        // Unit-weight balance over the exterior region for a free KG
        // pulse: E_ex(t) + ghostless cone flux = E_ex(2) (no source).
        // Checked loosely here; the tight version lives in functionals.
        let grid = GridSpec::new(2, 128, 16.0).unwrap();
        let ops = SpectralOps::new(grid);
        let rep = build_gamma::<f64>(2).unwrap();
        let mut st = crate::solver::initial_state(
            grid,
            &rep,
            0.0,
            crate::solver::InitialData {
                amplitude: 0.1,
                width: 2.0,
            },
            false,
        );
        st.psi = GridFn::zeros(grid, 2);
        let dt = 0.08 * grid.dx();
        let mut evo =
            crate::solver::Evolution::new(ops, rep, st, dt, crate::solver::Coupling::Free)
                .unwrap();
        // exterior energy with unit weight: |dv|^2 + v^2 over r >= t-1
        let ext_energy = |state: &SimState<f64>, ops: &SpectralOps<f64>| -> f64 {
            let g = state.grid();
            let mut grads = Vec::new();
            for a in 0..g.dim {
                grads.push(ops.derivative(&state.v, a).unwrap());
            }
            crate::real::indexed_sum(g.nodes(), |i| {
                let r = g.radius(i);
                let w = crate::grid::exterior_weight(r, state.t, g.dx());
                if w == 0.0 {
                    return 0.0;
                }
                let mut e = state.vt.at(0, i).norm_sqr() + state.v.at(0, i).norm_sqr();
                for d in &grads {
                    e += d.at(0, i).norm_sqr();
                }
                w * e
            }) * g.cell_volume()
        };
        let e0 = ext_energy(&evo.state, &evo.ops);
        let mut cone = ConeAccumulator::new();
        // |Gv|^2 + v^2 on the ring
        let feed = |state: &SimState<f64>, ops: &SpectralOps<f64>, cone: &mut ConeAccumulator<f64>| {
            let g = state.grid();
            let mut grads = Vec::new();
            for a in 0..g.dim {
                grads.push(ops.derivative(&state.v, a).unwrap());
            }
            let tau = state.t;
            let ring = ring_integral(&g, tau - 1.0, |x| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let vt = interp_spatial(&state.vt, 0, x).re;
                let v = interp_spatial(&state.v, 0, x).re;
                let mut gv2 = 0.0;
                for (a, d) in grads.iter().enumerate() {
                    let da = interp_spatial(d, 0, x).re;
                    let ga = da + x[a] / r * vt;
                    gv2 += ga * ga;
                }
                gv2 + v * v
            });
            cone.update(tau, ring);
        };
        feed(&evo.state, &evo.ops, &mut cone);
        let ops2 = SpectralOps::new(grid);
        evo.run_until(6.0, |_, next, e| {
            feed(next, &e.ops, &mut cone);
            Ok(())
        })
        .unwrap();
        let e1 = ext_energy(&evo.state, &ops2);
        let lhs = e1 + cone.raw();
        let rel = (lhs - e0).abs() / e0;
        assert!(rel <= 0.02, "exterior balance defect {rel:.4}");
    }
}
