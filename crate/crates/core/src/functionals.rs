//! The measured quantities: weighted flat-slice energies in the
//! exterior region, truncated-hyperboloid energies, ghost space-time
//! norms with their light-cone flux terms, discrete energy-identity
//! balances, the bootstrap space-time density, pointwise decay fits,
//! and mass-weighted sup monitors.
//!
//! The ghost weight is `omega(z) = (2 + z)^{1+lambda}` evaluated at
//! `z = r - t`, whose derivative produces the sign-definite space-time
//! terms. Exterior quadrature uses a one-cell smoothed indicator of
//! `r >= t - 1` so region integrals stay second-order accurate.


use crate::clifford::{Direction, GammaRep, Sign};
use crate::error::{Error, Result};
use crate::fft::SpectralOps;
use crate::field::{GridFn, SupMask};
use crate::foliation::{
    interp_on_slice, ring_integral, slice_geometry, ConeAccumulator, SliceGeometry, SlicePart,
};
use crate::grid::exterior_weight;
use crate::jet::{gamma_derivatives, state_jets};
use crate::real::{indexed_max, indexed_sum, Real};
use crate::solver::History;
use crate::state::{gamma0_pair_density, SimState};

#[derive(Clone, Copy, Debug)]
pub struct FunctionalParams<R> {
    /// Ghost weight exponent, `lambda > 0`.
    pub lambda: R,
    /// Time-weight exponent, `delta >= 0`.
    pub delta: R,
}

impl<R: Real> FunctionalParams<R> {
    pub fn new(lambda: R, delta: R) -> Result<Self> {
        if lambda <= R::zero() {
            return Err(Error::rejected("lambda must be positive"));
        }
        if delta < R::zero() {
            return Err(Error::rejected("delta must be non-negative"));
        }
        Ok(FunctionalParams { lambda, delta })
    }

    /// `lambda_0 = min(lambda, 1) / 2`.
    pub fn lambda0(&self) -> R {
        self.lambda.min(R::one()) * R::lit(0.5)
    }
}

impl<R: Real> Default for FunctionalParams<R> {
    fn default() -> Self {
        FunctionalParams {
            lambda: R::one(),
            delta: R::lit(0.05),
        }
    }
}

#[inline]
pub fn ghost_weight<R: Real>(z: R, lambda: R) -> R {
    (R::lit(2.0) + z).powf(R::one() + lambda)
}

#[inline]
pub fn ghost_weight_prime<R: Real>(z: R, lambda: R) -> R {
    (R::one() + lambda) * (R::lit(2.0) + z).powf(lambda)
}

/// Spatial gradient planes of a 1-component or multi-component field.
pub fn grad_planes<R: Real>(ops: &SpectralOps<R>, f: &GridFn<R>) -> Result<Vec<GridFn<R>>> {
    ops.gradient(f)
}

// ---------------------------------------------------------------------
// Flat-slice exterior energies
// ---------------------------------------------------------------------

/// `int_{r >= t-1} t^{-delta} (2+r-t)^{1+lambda} (|du|^2 + m^2 u^2) dx`
/// for a scalar field given by its value, time derivative and gradient.
pub fn exterior_flat_energy<R: Real>(
    u: &GridFn<R>,
    ut: &GridFn<R>,
    grads: &[GridFn<R>],
    t: R,
    m: R,
    params: &FunctionalParams<R>,
) -> R {
    let g = u.grid;
    let dx = g.dx();
    let tfac = t.powf(-params.delta);
    indexed_sum(g.nodes(), |i| {
        let r = g.radius(i);
        let w = exterior_weight(r, t, dx);
        if w == R::zero() {
            return R::zero();
        }
        let mut dens = ut.abs2_at(i) + m * m * u.abs2_at(i);
        for d in grads {
            dens = dens + d.abs2_at(i);
        }
        w * tfac * ghost_weight(r - t, params.lambda) * dens
    }) * g.cell_volume()
}

/// `int_{r >= t-1} (2+r-t)^{1+lambda} |psi|^2 dx`.
pub fn dirac_exterior_energy<R: Real>(psi: &GridFn<R>, t: R, lambda: R) -> R {
    let g = psi.grid;
    let dx = g.dx();
    indexed_sum(g.nodes(), |i| {
        let r = g.radius(i);
        let w = exterior_weight(r, t, dx);
        if w == R::zero() {
            return R::zero();
        }
        w * ghost_weight(r - t, lambda) * psi.abs2_at(i)
    }) * g.cell_volume()
}

/// Unweighted exterior energy `int_{r >= t-1} (|du|^2 + m^2 u^2) dx`.
pub fn exterior_plain_energy<R: Real>(
    u: &GridFn<R>,
    ut: &GridFn<R>,
    grads: &[GridFn<R>],
    t: R,
    m: R,
) -> R {
    let g = u.grid;
    let dx = g.dx();
    indexed_sum(g.nodes(), |i| {
        let r = g.radius(i);
        let w = exterior_weight(r, t, dx);
        if w == R::zero() {
            return R::zero();
        }
        let mut dens = ut.abs2_at(i) + m * m * u.abs2_at(i);
        for d in grads {
            dens = dens + d.abs2_at(i);
        }
        w * dens
    }) * g.cell_volume()
}

// ---------------------------------------------------------------------
// Hyperboloid energies
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct HyperboloidEnergy<R> {
    pub value: R,
    /// Worst relative disagreement between the three algebraically equal
    /// forms of the energy density (rounding-level when exact).
    pub forms_max_rel_dev: R,
}

/// Energy of the scalar field `v` on a truncated hyperboloid, computed
/// from the first of the three density forms and cross-checked against
/// the other two:
///
/// ```text
/// e_m[u] = |du|^2 + m^2 u^2 + 2 (x^a/t) u_t u_a
///        = (s/t)^2 u_t^2 + t^{-2} |L u|^2 + m^2 u^2
///        = (s/t)^2 |grad u|^2 + t^{-2}(L_0 u)^2 + t^{-2}|O u|^2 + m^2 u^2
/// ```
pub fn hyperboloid_energy<R: Real>(
    ops: &SpectralOps<R>,
    history: &History<R>,
    s: R,
    part: SlicePart,
    t_cap: Option<R>,
    m: R,
    delta: R,
) -> Result<HyperboloidEnergy<R>> {
    let grid = history.states[0].grid();
    let slice = slice_geometry(grid, s, part, t_cap)?;
    let u = interp_on_slice(history, &slice, 1, |st| Ok(st.v.clone()))?;
    let ut = interp_on_slice(history, &slice, 1, |st| Ok(st.vt.clone()))?;
    let mut du = Vec::new();
    for a in 0..grid.dim {
        du.push(interp_on_slice(history, &slice, 1, |st| {
            ops.derivative(&st.v, a)
        })?);
    }
    let n = slice.nodes.len();
    let dim = grid.dim;
    let mut value = R::zero();
    let mut dev = R::zero();
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let (idx, t) = slice.nodes[i];
        let x = grid.position(idx);
        let uv = u.values[i].re;
        let utv = ut.values[i].re;
        let da: Vec<R> = (0..dim).map(|a| du[a].values[i].re).collect();
        let r2: R = (0..dim).fold(R::zero(), |acc, a| acc + x[a] * x[a]);
        let s2 = t * t - r2;

        let mut grad2 = R::zero();
        let mut xdot = R::zero();
        for a in 0..dim {
            grad2 = grad2 + da[a] * da[a];
            xdot = xdot + x[a] * da[a];
        }
        let form1 = utv * utv + grad2 + m * m * uv * uv
            + R::lit(2.0) * xdot * utv / t;
        // form 2: (s/t)^2 u_t^2 + t^-2 sum_a (x_a u_t + t u_a)^2 + m^2 u^2
        let mut lu2 = R::zero();
        for a in 0..dim {
            let la = x[a] * utv + t * da[a];
            lu2 = lu2 + la * la;
        }
        let form2 = s2 / (t * t) * utv * utv + lu2 / (t * t) + m * m * uv * uv;
        // form 3: (s/t)^2 |grad u|^2 + t^-2 (L_0 u)^2 + t^-2 |O u|^2 + m^2 u^2
        let l0 = t * utv + xdot;
        let mut om2 = R::zero();
        for a in 0..dim {
            for b in (a + 1)..dim {
                let o = x[a] * da[b] - x[b] * da[a];
                om2 = om2 + o * o;
            }
        }
        let form3 = s2 / (t * t) * grad2 + (l0 * l0 + om2) / (t * t) + m * m * uv * uv;

        let scale = form1.abs().max(form2.abs()).max(form3.abs());
        if scale > R::lit(1e-14) {
            let d = ((form2 - form1).abs().max((form3 - form1).abs())) / scale;
            dev = dev.max(d);
        }
        let tf = t.powf(-delta);
        vals.push(tf * form1);
        let _ = &mut value;
    }
    let total = crate::real::pairwise_sum(&vals) * grid.cell_volume();
    Ok(HyperboloidEnergy {
        value: total,
        forms_max_rel_dev: dev,
    })
}

/// Dirac energy on a truncated hyperboloid:
/// `int { |(psi)_-|^2 + (s/t)^2 |psi|^2 } dx`.
pub fn dirac_hyperboloid_energy<R: Real>(
    rep: &GammaRep<R>,
    history: &History<R>,
    s: R,
    part: SlicePart,
    t_cap: Option<R>,
) -> Result<R> {
    let grid = history.states[0].grid();
    let slice = slice_geometry(grid, s, part, t_cap)?;
    let psi = interp_on_slice(history, &slice, rep.n0, |st| Ok(st.psi.clone()))?;
    let n = slice.nodes.len();
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let (idx, t) = slice.nodes[i];
        let x = grid.position(idx);
        let sp = crate::clifford::Spinor::from_slice(
            &(0..rep.n0).map(|c| psi.at(c, i)).collect::<Vec<_>>(),
        );
        // 2 * (psi^* psi - (x_a/t) psi^* g0 g^a psi)
        //   = |(psi)_-|^2 + (s/t)^2 |psi|^2
        let dens = rep.hyperbolic_density(&sp, &x[..grid.dim], t)?;
        vals.push(dens * R::lit(2.0));
    }
    Ok(crate::real::pairwise_sum(&vals) * grid.cell_volume())
}

pub fn interior_slice<R: Real>(grid: crate::grid::GridSpec<R>, s: R) -> Result<SliceGeometry<R>> {
    slice_geometry(grid, s, SlicePart::Interior, None)
}

// ---------------------------------------------------------------------
// Ghost ledger: space-time accumulators + energy-identity balances
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// `omega = (2 + r - t)^{1+lambda}`, time weight `t^{-delta}`.
    Ghost,
    /// `omega = 1`, `delta = 0` (plain energy identity).
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Integrals over `r >= t - 1` with light-cone flux terms.
    Exterior,
    /// Integrals over the whole box; no cone boundary.
    FullSpace,
}

#[derive(Clone, Copy, Debug, Default)]
struct VolumeSample<R> {
    kg_ghost: R,
    kg_ghost_flat: R,
    dirac_ghost: R,
    delta_sink: R,
    kg_source: R,
    dirac_source: R,
}

/// Incrementally accumulated space-time integrals of one run, enough to
/// assemble ghost norms and both discrete energy identities.
pub struct GhostLedger<R: Real> {
    pub params: FunctionalParams<R>,
    pub weight: WeightKind,
    pub domain: Domain,
    /// KG mass flag (1 for the Klein-Gordon field of the system).
    pub m: R,
    pub kg_ghost: R,
    /// `delta = 0` variant of the KG ghost term.
    pub kg_ghost_flat: R,
    pub dirac_ghost: R,
    pub delta_sink: R,
    pub kg_source: R,
    pub dirac_source: R,
    pub dirac_source_abs: R,
    pub cone_kg: ConeAccumulator<R>,
    pub cone_dirac: ConeAccumulator<R>,
    initial_head: Option<(R, R)>, // (E_kg, E_dirac) at first update
    last: Option<(R, VolumeSample<R>)>,
}

impl<R: Real> GhostLedger<R> {
    pub fn new(params: FunctionalParams<R>, weight: WeightKind, domain: Domain) -> Result<Self> {
        if weight == WeightKind::Ghost && domain == Domain::FullSpace {
            return Err(Error::rejected(
                "ghost weight is defined on the exterior region only",
            ));
        }
        Ok(GhostLedger {
            params,
            weight,
            domain,
            m: R::one(),
            kg_ghost: R::zero(),
            kg_ghost_flat: R::zero(),
            dirac_ghost: R::zero(),
            delta_sink: R::zero(),
            kg_source: R::zero(),
            dirac_source: R::zero(),
            dirac_source_abs: R::zero(),
            cone_kg: ConeAccumulator::new(),
            cone_dirac: ConeAccumulator::new(),
            initial_head: None,
            last: None,
        })
    }

    fn region_weight(&self, r: R, t: R, dx: R) -> R {
        match self.domain {
            Domain::Exterior => exterior_weight(r, t, dx),
            Domain::FullSpace => R::one(),
        }
    }

    fn omega(&self, z: R) -> R {
        match self.weight {
            WeightKind::Ghost => ghost_weight(z, self.params.lambda),
            WeightKind::Unit => R::one(),
        }
    }

    fn tfac(&self, t: R) -> R {
        match self.weight {
            WeightKind::Ghost => t.powf(-self.params.delta),
            WeightKind::Unit => R::one(),
        }
    }

    /// KG head energy under this ledger's weight.
    pub fn kg_head(&self, ops: &SpectralOps<R>, state: &SimState<R>) -> Result<R> {
        let grads = ops.gradient(&state.v)?;
        let g = state.grid();
        let dx = g.dx();
        let t = state.t;
        let tf = self.tfac(t);
        Ok(indexed_sum(g.nodes(), |i| {
            let r = g.radius(i);
            let w = self.region_weight(r, t, dx);
            if w == R::zero() {
                return R::zero();
            }
            let mut dens = state.vt.abs2_at(i) + self.m * self.m * state.v.abs2_at(i);
            for d in &grads {
                dens = dens + d.abs2_at(i);
            }
            w * tf * self.omega(r - t) * dens
        }) * g.cell_volume())
    }

    /// Dirac head energy under this ledger's weight.
    pub fn dirac_head(&self, state: &SimState<R>) -> R {
        let g = state.grid();
        let dx = g.dx();
        let t = state.t;
        indexed_sum(g.nodes(), |i| {
            let r = g.radius(i);
            let w = self.region_weight(r, t, dx);
            if w == R::zero() {
                return R::zero();
            }
            w * self.omega(r - t) * state.psi.abs2_at(i)
        }) * g.cell_volume()
    }

    /// Feed one time level. Must be called in increasing time order,
    /// starting with the initial state.
    pub fn update(
        &mut self,
        ops: &SpectralOps<R>,
        rep: &GammaRep<R>,
        state: &SimState<R>,
    ) -> Result<()> {
        let g = state.grid();
        let dx = g.dx();
        let t = state.t;
        let lambda = self.params.lambda;
        let delta = self.params.delta;

        if self.initial_head.is_none() {
            self.initial_head = Some((self.kg_head(ops, state)?, self.dirac_head(state)));
        }

        let grads = ops.gradient(&state.v)?;
        let psi_minus = rep.project_field(&state.psi, Sign::Minus, Direction::Radial);
        let fv = gamma0_pair_density(rep, &state.psi, &state.psi);
        let vpsi = crate::state::mul_real_scalar(&state.v, &state.psi);
        let src_bilinear = gamma0_pair_density(rep, &state.psi, &vpsi);

        let tf_delta = t.powf(-delta);
        let cell = g.cell_volume();
        let is_ghost = self.weight == WeightKind::Ghost;
        let sink_tf = t.powf(-delta - R::one());
        let two = R::lit(2.0);

        // All volume integrands in one pass (trapezoid in t):
        // [kg_ghost, dirac_ghost, delta_sink, kg_source, dirac_source]
        let sums = crate::real::indexed_sum_array::<R, 5, _>(g.nodes(), |i| {
            let r = g.radius(i);
            let w = self.region_weight(r, t, dx);
            if w == R::zero() {
                return [R::zero(); 5];
            }
            let z = r - t;
            let zl = (two + z).powf(lambda); // (2+z)^lambda
            let omega = if is_ghost { zl * (two + z) } else { R::one() };
            let masked = g.origin_masked(i);
            let kg_ghost = if masked {
                R::zero()
            } else {
                let mut gv2 = R::zero();
                let x = g.position(i);
                let vt = state.vt.at(0, i).re;
                for (a, d) in grads.iter().enumerate() {
                    let ga = d.at(0, i).re + x[a] / r * vt;
                    gv2 = gv2 + ga * ga;
                }
                w * zl * (gv2 + self.m * self.m * state.v.abs2_at(i))
            };
            let dirac_ghost = if masked {
                R::zero()
            } else {
                w * zl * psi_minus.abs2_at(i)
            };
            let delta_sink = if is_ghost && delta > R::zero() {
                let mut dens = state.vt.abs2_at(i) + self.m * self.m * state.v.abs2_at(i);
                for d in &grads {
                    dens = dens + d.abs2_at(i);
                }
                w * sink_tf * omega * dens
            } else {
                R::zero()
            };
            let kg_source =
                w * two * self.tfac(t) * omega * state.vt.at(0, i).re * fv.at(0, i).re;
            let dirac_source = w * two * omega * src_bilinear.at(0, i).im;
            [kg_ghost, dirac_ghost, delta_sink, kg_source, dirac_source]
        });

        let sample = VolumeSample {
            kg_ghost: tf_delta * sums[0] * cell,
            kg_ghost_flat: sums[0] * cell,
            dirac_ghost: sums[1] * cell,
            delta_sink: sums[2] * cell,
            kg_source: sums[3] * cell,
            dirac_source: sums[4] * cell,
        };
        if let Some((t0, s0)) = self.last {
            let h = (t - t0) * R::lit(0.5);
            self.kg_ghost += h * (s0.kg_ghost + sample.kg_ghost);
            self.kg_ghost_flat += h * (s0.kg_ghost_flat + sample.kg_ghost_flat);
            self.dirac_ghost += h * (s0.dirac_ghost + sample.dirac_ghost);
            self.delta_sink += h * (s0.delta_sink + sample.delta_sink);
            self.kg_source += h * (s0.kg_source + sample.kg_source);
            self.dirac_source += h * (s0.dirac_source + sample.dirac_source);
        }
        self.dirac_source_abs = self.dirac_source_abs.max(sample.dirac_source.abs());
        self.last = Some((t, sample));

        // Cone rings (exterior domain only).
        if self.domain == Domain::Exterior {
            let radius = t - R::one();
            let ring_kg = ring_integral(&g, radius, |x| {
                let mut r2 = R::zero();
                for a in 0..g.dim {
                    r2 = r2 + x[a] * x[a];
                }
                let r = r2.sqrt();
                let vt = crate::foliation::interp_spatial(&state.vt, 0, x).re;
                let v = crate::foliation::interp_spatial(&state.v, 0, x).re;
                let mut gv2 = R::zero();
                for (a, d) in grads.iter().enumerate() {
                    let da = crate::foliation::interp_spatial(d, 0, x).re;
                    let ga = da + x[a] / r * vt;
                    gv2 = gv2 + ga * ga;
                }
                self.tfac(t) * (gv2 + self.m * self.m * v * v)
            });
            self.cone_kg.update(t, ring_kg);
            let ring_d = ring_integral(&g, radius, |x| {
                let mut s = R::zero();
                for c in 0..psi_minus.comps {
                    s = s + crate::foliation::interp_spatial(&psi_minus, c, x).norm_sqr();
                }
                s
            });
            self.cone_dirac.update(t, ring_d);
        }
        Ok(())
    }

    /// Ghost-norm report at the current time.
    pub fn y_report(&self, ops: &SpectralOps<R>, state: &SimState<R>) -> Result<YNormReport<R>> {
        let e_kg = self.kg_head(ops, state)?;
        let e_dirac = self.dirac_head(state);
        Ok(YNormReport {
            t: state.t,
            e_kg,
            e_dirac,
            kg_ghost: self.kg_ghost,
            kg_ghost_flat: self.kg_ghost_flat,
            dirac_ghost: self.dirac_ghost,
            y_kg: e_kg.sqrt() + self.kg_ghost.sqrt(),
            y_dirac: e_dirac.sqrt() + self.dirac_ghost.sqrt(),
            r_kg_sq: self.cone_kg.paper_normalized(),
            r_dirac_sq: self.cone_dirac.paper_normalized(),
        })
    }

    /// Discrete Klein-Gordon energy identity over the accumulated
    /// window.
    pub fn kg_balance(&self, ops: &SpectralOps<R>, state: &SimState<R>) -> Result<BalanceReport<R>> {
        let (e0, _) = self
            .initial_head
            .ok_or_else(|| Error::rejected("ledger never updated"))?;
        let e1 = self.kg_head(ops, state)?;
        let ghost = match self.weight {
            WeightKind::Ghost => (R::one() + self.params.lambda) * self.kg_ghost,
            WeightKind::Unit => R::zero(),
        };
        let cone = match self.domain {
            Domain::Exterior => self.cone_kg.raw(),
            Domain::FullSpace => R::zero(),
        };
        let delta_term = self.params.delta * self.delta_sink;
        Ok(BalanceReport::new(
            e0,
            e1,
            ghost,
            cone,
            delta_term,
            self.kg_source,
        ))
    }

    /// Discrete Dirac energy identity over the accumulated window.
    pub fn dirac_balance(&self, state: &SimState<R>) -> Result<BalanceReport<R>> {
        let (_, e0) = self
            .initial_head
            .ok_or_else(|| Error::rejected("ledger never updated"))?;
        let e1 = self.dirac_head(state);
        let half = R::lit(0.5);
        let ghost = match self.weight {
            WeightKind::Ghost => (R::one() + self.params.lambda) * half * self.dirac_ghost,
            WeightKind::Unit => R::zero(),
        };
        let cone = match self.domain {
            Domain::Exterior => half * self.cone_dirac.raw(),
            Domain::FullSpace => R::zero(),
        };
        Ok(BalanceReport::new(
            e0,
            e1,
            ghost,
            cone,
            R::zero(),
            self.dirac_source,
        ))
    }
}

/// Terms of an integrated energy identity,
/// `E(t) + ghost + cone + delta_term = E(t_0) + source`.
#[derive(Clone, Copy, Debug)]
pub struct BalanceReport<R> {
    pub e_start: R,
    pub e_end: R,
    pub ghost_term: R,
    pub cone_term: R,
    pub delta_term: R,
    pub source_term: R,
    /// `|lhs - rhs| / max |term|`.
    pub residual: R,
}

impl<R: Real> BalanceReport<R> {
    fn new(e0: R, e1: R, ghost: R, cone: R, delta_term: R, source: R) -> Self {
        let lhs = e1 + ghost + cone + delta_term;
        let rhs = e0 + source;
        let scale = e0
            .abs()
            .max(e1.abs())
            .max(ghost.abs())
            .max(cone.abs())
            .max(delta_term.abs())
            .max(source.abs())
            .max(R::lit(1e-300));
        BalanceReport {
            e_start: e0,
            e_end: e1,
            ghost_term: ghost,
            cone_term: cone,
            delta_term,
            source_term: source,
            residual: (lhs - rhs).abs() / scale,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct YNormReport<R> {
    pub t: R,
    pub e_kg: R,
    pub e_dirac: R,
    pub kg_ghost: R,
    pub kg_ghost_flat: R,
    pub dirac_ghost: R,
    pub y_kg: R,
    pub y_dirac: R,
    /// Cone integrals with the intrinsic surface measure.
    pub r_kg_sq: R,
    pub r_dirac_sq: R,
}

// ---------------------------------------------------------------------
// Bootstrap density l(tau)
// ---------------------------------------------------------------------

/// The raw exterior space-time density (without the `(C eps)^{-2}`
/// normalization): hatted vector-field derivatives of `psi` and plain
/// derivatives of `v` up to `order`, ghost-weighted over `r >= t-1`.
pub fn bootstrap_density<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    state: &SimState<R>,
    params: &FunctionalParams<R>,
    order: usize,
) -> Result<R> {
    let g = state.grid();
    let dx = g.dx();
    let t = state.t;
    let lambda = params.lambda;
    let tf = t.powf(-params.delta);
    let (psi_jet, v_jet) = state_jets(ops, rep, state, order, order)?;
    let psi_derivs = gamma_derivatives(ops, rep, &psi_jet, order, true)?;
    let v_derivs = gamma_derivatives(ops, rep, &v_jet, order, false)?;

    let mut total = R::zero();
    for (_, jet) in &psi_derivs {
        let minus = rep.project_field(jet.value(), Sign::Minus, Direction::Radial);
        total = total
            + indexed_sum(g.nodes(), |i| {
                let r = g.radius(i);
                let w = exterior_weight(r, t, dx);
                if w == R::zero() || g.origin_masked(i) {
                    return R::zero();
                }
                w * (R::lit(2.0) + r - t).powf(lambda) * minus.abs2_at(i)
            }) * g.cell_volume();
    }
    for (idx, jet) in &v_derivs {
        let weight_low = if idx.len() < order { R::lit(2.0) } else { R::one() };
        // |I| <= order carries t^{-delta}; |I| <= order-1 additionally
        // enters unweighted (the two sums of the density).
        total = total
            + indexed_sum(g.nodes(), |i| {
                let r = g.radius(i);
                let w = exterior_weight(r, t, dx);
                if w == R::zero() {
                    return R::zero();
                }
                let base = (R::lit(2.0) + r - t).powf(lambda) * jet.value().abs2_at(i);
                let mut dens = tf * base;
                if weight_low > R::one() {
                    dens = dens + base;
                }
                w * dens
            }) * g.cell_volume();
    }
    Ok(total)
}

/// Trapezoid running integral with a plateau check over the last
/// quarter of the sampled window.
#[derive(Clone, Debug, Default)]
pub struct RunningIntegral<R> {
    samples: Vec<(R, R)>,
    partials: Vec<R>,
    total: R,
}

impl<R: Real> RunningIntegral<R> {
    pub fn new() -> Self {
        RunningIntegral {
            samples: Vec::new(),
            partials: Vec::new(),
            total: R::zero(),
        }
    }

    pub fn push(&mut self, t: R, value: R) {
        if let Some(&(t0, v0)) = self.samples.last() {
            self.total += (t - t0) * (v0 + value) * R::lit(0.5);
        }
        self.samples.push((t, value));
        self.partials.push(self.total);
    }

    pub fn total(&self) -> R {
        self.total
    }

    pub fn samples(&self) -> &[(R, R)] {
        &self.samples
    }

    /// Increase accumulated over the last quarter of the time window,
    /// as a fraction of the total.
    pub fn last_quarter_fraction(&self) -> R {
        if self.samples.is_empty() || self.total == R::zero() {
            return R::zero();
        }
        let t0 = self.samples[0].0;
        let t1 = self.samples[self.samples.len() - 1].0;
        let split = t0 + (t1 - t0) * R::lit(0.75);
        let mut at_split = self.partials[0];
        for (i, &(t, _)) in self.samples.iter().enumerate() {
            if t <= split {
                at_split = self.partials[i];
            }
        }
        (self.total - at_split) / self.total
    }
}

// ---------------------------------------------------------------------
// Decay fits and pointwise monitors
// ---------------------------------------------------------------------

/// Least-squares slope of `log(obs)` against `log(t)` with its standard
/// error. Needs at least 10 samples.
pub fn decay_fit<R: Real>(samples: &[(R, R)]) -> Result<(R, R)> {
    let usable: Vec<(R, R)> = samples
        .iter()
        .copied()
        .filter(|&(t, v)| t > R::zero() && v > R::zero())
        .collect();
    if usable.len() < 10 {
        return Err(Error::rejected(format!(
            "decay fit needs >= 10 positive samples, got {}",
            usable.len()
        )));
    }
    let n = R::from_usize(usable.len()).unwrap();
    let xs: Vec<R> = usable.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<R> = usable.iter().map(|&(_, v)| v.ln()).collect();
    let xbar = xs.iter().copied().sum::<R>() / n;
    let ybar = ys.iter().copied().sum::<R>() / n;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for i in 0..xs.len() {
        sxx = sxx + (xs[i] - xbar) * (xs[i] - xbar);
        sxy = sxy + (xs[i] - xbar) * (ys[i] - ybar);
    }
    if sxx == R::zero() {
        return Err(Error::rejected("degenerate time window"));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = R::zero();
    for i in 0..xs.len() {
        let r = ys[i] - (intercept + slope * xs[i]);
        ss_res = ss_res + r * r;
    }
    let dof = (usable.len().max(3) - 2) as f64;
    let stderr = (ss_res / R::lit(dof) / sxx).sqrt();
    Ok((slope, stderr))
}

/// Pointwise observables tracked during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    SupPsi,
    SupV,
    /// `sup_{r < t-1} <t+r>^{1/2} <t-r>^{1/2} |psi|` (2D profile).
    ProfilePsi2d,
    /// `sup (<t+r><t-r>^{1/2} + M^2 <t+r>^{3/2}) |psi|` (3D profile).
    ProfilePsi3d,
    /// `sup_{r < t-1} M t^{3/2} |psi|` (interior mass monitor).
    MassInterior,
    /// `sup_{r >= t-1} M^2 r^{3/2} |psi|` (exterior mass monitor).
    MassExterior,
}

fn bracket<R: Real>(w: R) -> R {
    (R::one() + w * w).sqrt()
}

pub fn observe<R: Real>(state: &SimState<R>, obs: Observable) -> R {
    let g = state.grid();
    let t = state.t;
    let mask = SupMask::STANDARD;
    match obs {
        Observable::SupPsi => state.psi.sup_norm(mask),
        Observable::SupV => state.v.sup_norm(mask),
        Observable::ProfilePsi2d => indexed_max(g.nodes(), |i| {
            if mask.skips(&g, i) {
                return R::zero();
            }
            let r = g.radius(i);
            if r >= t - R::one() {
                return R::zero();
            }
            (bracket(t + r) * bracket(t - r)).sqrt() * state.psi.abs2_at(i).sqrt()
        }),
        Observable::ProfilePsi3d => {
            let m2 = state.mass * state.mass;
            indexed_max(g.nodes(), |i| {
                if mask.skips(&g, i) {
                    return R::zero();
                }
                let r = g.radius(i);
                let w = bracket(t + r) * bracket(t - r).sqrt()
                    + m2 * bracket(t + r).powf(R::lit(1.5));
                w * state.psi.abs2_at(i).sqrt()
            })
        }
        Observable::MassInterior => {
            let w = state.mass * t.powf(R::lit(1.5));
            indexed_max(g.nodes(), |i| {
                if mask.skips(&g, i) || g.radius(i) >= t - R::one() {
                    return R::zero();
                }
                w * state.psi.abs2_at(i).sqrt()
            })
        }
        Observable::MassExterior => {
            let m2 = state.mass * state.mass;
            indexed_max(g.nodes(), |i| {
                if mask.skips(&g, i) {
                    return R::zero();
                }
                let r = g.radius(i);
                if r < t - R::one() {
                    return R::zero();
                }
                m2 * r.powf(R::lit(1.5)) * state.psi.abs2_at(i).sqrt()
            })
        }
    }
}

/// Growth of a positive series over the last quarter of its window:
/// `max(last quarter) / max(first three quarters) - 1`.
pub fn last_quarter_growth<R: Real>(samples: &[(R, R)]) -> R {
    if samples.len() < 4 {
        return R::zero();
    }
    let t0 = samples[0].0;
    let t1 = samples[samples.len() - 1].0;
    let split = t0 + (t1 - t0) * R::lit(0.75);
    let mut head = R::zero();
    let mut tail = R::zero();
    for &(t, v) in samples {
        if t <= split {
            head = head.max(v);
        } else {
            tail = tail.max(v);
        }
    }
    if head == R::zero() {
        R::zero()
    } else {
        tail / head - R::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use num_complex::Complex;
    use crate::grid::GridSpec;
    use crate::solver::{initial_state, Coupling, Evolution, InitialData};

    fn gaussian_state(grid: GridSpec<f64>, amp: f64, w: f64) -> SimState<f64> {
        let rep = build_gamma::<f64>(2).unwrap();
        initial_state(grid, &rep, 0.0, InitialData { amplitude: amp, width: w }, false)
    }

    #[test]
    fn params_validated() {
        assert!(FunctionalParams::new(0.0, 0.1).is_err());
        assert!(FunctionalParams::new(1.0, -0.1).is_err());
        let p = FunctionalParams::new(0.5, 0.05).unwrap();
        assert_eq!(p.lambda0(), 0.25);
        let p = FunctionalParams::new(3.0, 0.0).unwrap();
        assert_eq!(p.lambda0(), 0.5);
    }

    #[test]
    fn exterior_energy_zero_field() {
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let st = SimState::zeros(grid, 2, 2.0, 0.0);
        let ops = SpectralOps::new(grid);
        let grads = ops.gradient(&st.v).unwrap();
        let p = FunctionalParams::default();
        assert_eq!(exterior_flat_energy(&st.v, &st.vt, &grads, 2.0, 1.0, &p), 0.0);
        assert_eq!(dirac_exterior_energy(&st.psi, 2.0, 1.0), 0.0);
    }

    #[test]
    fn exterior_energy_vs_dense_oracle() {
        // Gaussian at t = 2, m = 1, lambda = 1, delta = 0, against an
        // independent quadrature of the analytic integrand at 4x
        // resolution: agreement to 0.5%.
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let ops = SpectralOps::new(grid);
        let st = gaussian_state(grid, 0.5, 2.0);
        let grads = ops.gradient(&st.v).unwrap();
        let p = FunctionalParams::new(1.0, 0.0).unwrap();
        let got = exterior_flat_energy(&st.v, &st.vt, &grads, 2.0, 1.0, &p);

        let fine = GridSpec::<f64>::new(2, 256, 12.0).unwrap();
        let t = 2.0f64;
        let mut want = 0.0;
        for i in 0..fine.nodes() {
            let x = fine.position(i);
            let r: f64 = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < t - 1.0 {
                continue;
            }
            let w2 = 4.0;
            let u = 0.5 * (-r * r / w2).exp();
            let du = -2.0 * r / w2 * u; // radial derivative
            let dens = du * du + u * u;
            want += (2.0 + r - t).powi(2) * dens * fine.cell_volume();
        }
        let rel = (got - want).abs() / want;
        assert!(rel <= 0.005, "quadrature mismatch {rel:.4}");
    }

    #[test]
    fn weight_monotone_in_lambda() {
        // supported where 2 + r - t > 1, larger lambda weighs more
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let st = gaussian_state(grid, 0.5, 2.0);
        let e1 = dirac_exterior_energy(&st.psi, 2.0, 0.5);
        let e2 = dirac_exterior_energy(&st.psi, 2.0, 1.5);
        assert!(e2 > e1);
    }

    #[test]
    fn scaling_covariance() {
        // multiplying fields by c multiplies quadratic functionals by c^2
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let ops = SpectralOps::new(grid);
        let st = gaussian_state(grid, 0.4, 2.0);
        let mut st3 = st.clone();
        st3.psi.scale(Complex::new(3.0, 0.0));
        st3.v.scale(Complex::new(3.0, 0.0));
        st3.vt.scale(Complex::new(3.0, 0.0));
        let p = FunctionalParams::default();
        let grads = ops.gradient(&st.v).unwrap();
        let grads3 = ops.gradient(&st3.v).unwrap();
        let e = exterior_flat_energy(&st.v, &st.vt, &grads, 2.0, 1.0, &p);
        let e3 = exterior_flat_energy(&st3.v, &st3.vt, &grads3, 2.0, 1.0, &p);
        assert!((e3 / e - 9.0).abs() <= 1e-12);
        let d = dirac_exterior_energy(&st.psi, 2.0, 1.0);
        let d3 = dirac_exterior_energy(&st3.psi, 2.0, 1.0);
        assert!((d3 / d - 9.0).abs() <= 1e-12);
    }

    #[test]
    fn hyperboloid_constant_field() {
        // u == c with m = 1: density c^2, integral = c^2 * slice area.
        let grid = GridSpec::new(2, 128, 12.0).unwrap();
        let ops = SpectralOps::new(grid);
        let mut hist = History::new();
        for j in 0..200 {
            let t = 2.0 + 0.05 * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            st.v = GridFn::scalar_from(grid, |_| 2.5);
            hist.push(st);
        }
        let e = hyperboloid_energy(&ops, &hist, 2.5, SlicePart::Interior, None, 1.0, 0.0)
            .unwrap();
        let rs = crate::foliation::r_of_s(2.5);
        let area: f64 = std::f64::consts::PI * rs * rs;
        assert!(
            (e.value - 2.5 * 2.5 * area).abs() / (2.5 * 2.5 * area) <= 0.02,
            "value {} vs {}",
            e.value,
            2.5 * 2.5 * area
        );
        assert!(e.forms_max_rel_dev <= 1e-10);
    }

    #[test]
    fn hyperboloid_three_forms_on_polynomial() {
        // Manufactured u(t,x) = t^2 - 0.3 t x1 + x1 x2 + 0.1 x2^2:
        // the three density forms agree pointwise to rounding.
        let grid = GridSpec::new(2, 32, 6.0).unwrap();
        let mut hist = History::new();
        for j in 0..2000 {
            let t = 2.0 + 0.005 * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            st.v = GridFn::scalar_from(grid, |x| {
                t * t - 0.3 * t * x[0] + x[0] * x[1] + 0.1 * x[1] * x[1]
            });
            st.vt = GridFn::scalar_from(grid, |x| 2.0 * t - 0.3 * x[0]);
            hist.push(st);
        }
        // polynomial is not periodic; restrict to an interior slice well
        // inside the box where spectral derivatives are still clean...
        // use FD4 instead to avoid Gibbs from the non-periodic sample.
        let grid_ops = SpectralOps::with_scheme(grid, crate::fft::DerivativeScheme::Fd4);
        let e = hyperboloid_energy(&grid_ops, &hist, 2.2, SlicePart::Interior, None, 1.0, 0.0)
            .unwrap();
        assert!(
            e.forms_max_rel_dev <= 1e-6,
            "three-form deviation {}",
            e.forms_max_rel_dev
        );
    }

    #[test]
    fn dirac_hyperboloid_energy_matches_pointwise_identity() {
        let grid = GridSpec::new(2, 48, 10.0).unwrap();
        let rep = build_gamma::<f64>(2).unwrap();
        // (slice interpolation exercises only psi planes here)
        let mut hist = History::new();
        for j in 0..400 {
            let t = 2.0 + 0.02 * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            for c in 0..2 {
                for (i, z) in st.psi.plane_mut(c).iter_mut().enumerate() {
                    let x = grid.position(i);
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    *z = Complex::new(
                        (0.3 + 0.1 * c as f64) * (-r2 / 9.0).exp(),
                        0.05 * (-r2 / 7.0).exp(),
                    );
                }
            }
            hist.push(st);
        }
        let e = dirac_hyperboloid_energy(&rep, &hist, 2.5, SlicePart::Interior, None).unwrap();
        assert!(e > 0.0);
        // zero field integrates to zero
        let mut zhist = History::new();
        for j in 0..400 {
            let t = 2.0 + 0.02 * j as f64;
            zhist.push(SimState::zeros(grid, 2, t, 0.0));
        }
        let z = dirac_hyperboloid_energy(&rep, &zhist, 2.5, SlicePart::Interior, None).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn free_kg_interior_plus_exterior_balances() {
        // Free KG run: interior hyperboloid energy at s plus plain
        // exterior flat energy at t(s) equals the initial full energy
        // within 2% (the glued surface is spacelike; no flux term).
        let grid = GridSpec::new(2, 128, 16.0).unwrap();
        let ops = SpectralOps::new(grid);
        let rep = build_gamma::<f64>(2).unwrap();
        let mut st = gaussian_state(grid, 0.2, 2.0);
        st.psi = GridFn::zeros(grid, 2);
        let grads0 = ops.gradient(&st.v).unwrap();
        // full-box initial energy (t=2 slice: interior part is r<1 union exterior)
        let e_full0 = {
            let g = grid;
            indexed_sum(g.nodes(), |i| {
                let mut dens = st.vt.abs2_at(i) + st.v.abs2_at(i);
                for d in &grads0 {
                    dens += d.abs2_at(i);
                }
                dens
            }) * g.cell_volume()
        };
        let dt = 0.08 * grid.dx();
        let mut evo = Evolution::new(SpectralOps::new(grid), rep, st, dt, Coupling::Free).unwrap();
        let mut hist = History::new();
        hist.push(evo.state.clone());
        let s = 3.0; // t(s) = 5
        let t_target = crate::foliation::t_of_s(s);
        evo.run_until(t_target + 5.0 * dt, |_, next, _| {
            hist.push(next.clone());
            Ok(())
        })
        .unwrap();
        let e_in = hyperboloid_energy(&ops, &hist, s, SlicePart::Interior, None, 1.0, 0.0)
            .unwrap()
            .value;
        // exterior flat energy at t(s): interpolate the state at t(s)
        let idx = hist.index_at(t_target).unwrap();
        let stf = &hist.states[idx];
        let grads = ops.gradient(&stf.v).unwrap();
        let e_ex = exterior_plain_energy(&stf.v, &stf.vt, &grads, stf.t, 1.0);
        let rel = ((e_in + e_ex) - e_full0).abs() / e_full0;
        assert!(rel <= 0.02, "glued-surface balance defect {rel:.4}");
    }

    #[test]
    fn ghost_ledger_unit_weight_is_conservation() {
        // Free wave with unit weight over the full box: the balance
        // reduces to exact energy conservation.
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let rep = build_gamma::<f64>(2).unwrap();
        let mut st = gaussian_state(grid, 0.2, 2.0);
        st.psi = GridFn::zeros(grid, 2);
        let p = FunctionalParams::new(1.0, 0.0).unwrap();
        let mut ledger = GhostLedger::new(p, WeightKind::Unit, Domain::FullSpace).unwrap();
        let dt = 0.08 * grid.dx();
        let ops = SpectralOps::new(grid);
        ledger.update(&ops, &rep, &st).unwrap();
        let mut evo =
            Evolution::new(SpectralOps::new(grid), rep.clone(), st, dt, Coupling::Free).unwrap();
        evo.run_until(4.0, |_, next, e| {
            ledger.update(&e.ops, &e.rep, next).unwrap();
            Ok(())
        })
        .unwrap();
        let bal = ledger.kg_balance(&ops, &evo.state).unwrap();
        assert!(bal.residual <= 1e-6, "unit-weight residual {:.3e}", bal.residual);
        assert_eq!(bal.ghost_term, 0.0);
        assert_eq!(bal.cone_term, 0.0);
    }

    #[test]
    fn ghost_integral_matches_closed_form_on_manufactured_field() {
        // v(t, x) = e^{-t} b(x) with b a Gaussian bump and vt = -v:
        // the accumulated space-time ghost integral is checked against
        // an independent fine quadrature in polar coordinates.
        let grid = GridSpec::new(2, 192, 12.0).unwrap();
        let ops = SpectralOps::new(grid);
        let rep = build_gamma::<f64>(2).unwrap();
        let p = FunctionalParams::new(1.0, 0.0).unwrap();
        let mut ledger = GhostLedger::new(p, WeightKind::Ghost, Domain::Exterior).unwrap();
        let nt = 200usize;
        let t1 = 3.0f64;
        let dt = (t1 - 2.0) / nt as f64;
        let w2 = 4.0f64;
        for j in 0..=nt {
            let t = 2.0 + dt * j as f64;
            let mut st = SimState::zeros(grid, 2, t, 0.0);
            st.v = GridFn::scalar_from(grid, |x| {
                (-t).exp() * (-(x[0] * x[0] + x[1] * x[1]) / w2).exp()
            });
            st.vt = GridFn::scalar_from(grid, |x| {
                -(-t).exp() * (-(x[0] * x[0] + x[1] * x[1]) / w2).exp()
            });
            ledger.update(&ops, &rep, &st).unwrap();
        }
        // oracle: int_2^3 int_{r >= t-1} (2+r-t)(|Gv|^2 + v^2) dx dt in
        // polar coordinates; G_a v = b'(r) x_a/r e^{-t} - (x_a/r) e^{-t} b
        // so |Gv|^2 = e^{-2t} (b' - b)^2.
        let mut want = 0.0;
        let nr = 2000usize;
        for j in 0..=nt {
            let t: f64 = 2.0 + dt * j as f64;
            let wj = if j == 0 || j == nt { 0.5 } else { 1.0 };
            let rmax = 11.0f64;
            let dr = (rmax - (t - 1.0)) / nr as f64;
            let mut ring = 0.0;
            for q in 0..=nr {
                let r = (t - 1.0) + dr * q as f64;
                let wq = if q == 0 || q == nr { 0.5 } else { 1.0 };
                let b = (-r * r / w2).exp();
                let bp = -2.0 * r / w2 * b;
                let gv2 = (bp - b) * (bp - b);
                let dens = gv2 + b * b;
                ring += wq * (2.0 + r - t) * dens * r;
            }
            ring *= 2.0 * std::f64::consts::PI * dr * (-2.0 * t).exp();
            want += wj * dt * ring;
        }
        let got = ledger.kg_ghost;
        let rel = (got - want).abs() / want;
        assert!(rel <= 0.01, "ghost integral {got} vs oracle {want} ({rel:.4})");
    }

    #[test]
    fn ghost_ledger_rejects_fullspace_ghost() {
        let p = FunctionalParams::default();
        assert!(GhostLedger::<f64>::new(p, WeightKind::Ghost, Domain::FullSpace).is_err());
    }

    #[test]
    fn decay_fit_exact_power_law() {
        let samples: Vec<(f64, f64)> = (0..20).map(|i| {
            let t = 10.0 + i as f64;
            (t, 1.0 / t)
        }).collect();
        let (slope, err) = decay_fit(&samples).unwrap();
        assert!((slope + 1.0).abs() <= 1e-12);
        assert!(err <= 1e-12);
        // constant series fits slope 0
        let flat: Vec<(f64, f64)> = (0..15).map(|i| (10.0 + i as f64, 2.5)).collect();
        let (s0, e0) = decay_fit(&flat).unwrap();
        assert!(s0.abs() <= 1e-12);
        assert!(e0.abs() <= 1e-12);
        // too few samples rejected
        assert!(decay_fit(&samples[..5]).is_err());
    }

    #[test]
    fn running_integral_plateaus() {
        let mut ri = RunningIntegral::new();
        for i in 0..100 {
            let t = 2.0 + 0.5 * i as f64;
            ri.push(t, (-0.2 * t as f64).exp());
        }
        assert!(ri.total() > 0.0);
        assert!(ri.last_quarter_fraction() <= 0.05);
        // non-decreasing
        let mut prev = 0.0;
        for &p in &ri.partials {
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn bootstrap_density_zero_field() {
        let grid = GridSpec::new(2, 32, 8.0).unwrap();
        let ops = SpectralOps::new(grid);
        let rep = build_gamma::<f64>(2).unwrap();
        let st = SimState::zeros(grid, 2, 2.0, 0.0);
        let p = FunctionalParams::default();
        let l = bootstrap_density(&ops, &rep, &st, &p, 2).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn bootstrap_density_order_zero_matches_ghost_integrand() {
        // At order 0 and delta = 0 the psi part of l equals the Dirac
        // ghost integrand rate of `GhostLedger` at matching lambda.
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let ops = SpectralOps::new(grid);
        let rep = build_gamma::<f64>(2).unwrap();
        let mut st = gaussian_state(grid, 0.3, 2.0);
        st.v = GridFn::zeros(grid, 1);
        st.vt = GridFn::zeros(grid, 1);
        let p = FunctionalParams::new(1.0, 0.0).unwrap();
        let l = bootstrap_density(&ops, &rep, &st, &p, 0).unwrap();
        // independent: ghost ledger volume sample via a tiny window
        let mut ledger = GhostLedger::new(p, WeightKind::Ghost, Domain::Exterior).unwrap();
        ledger.update(&ops, &rep, &st).unwrap();
        let mut st2 = st.clone();
        st2.t += 1e-6;
        ledger.update(&ops, &rep, &st2).unwrap();
        let rate = ledger.dirac_ghost / 1e-6;
        assert!(
            (l - rate).abs() / l.max(1e-300) <= 1e-6,
            "l = {l}, ledger rate = {rate}"
        );
    }

    #[test]
    fn observables_on_zero_and_masks() {
        let grid = GridSpec::new(2, 64, 12.0).unwrap();
        let st = SimState::zeros(grid, 2, 4.0, 0.0);
        for obs in [
            Observable::SupPsi,
            Observable::SupV,
            Observable::ProfilePsi2d,
            Observable::ProfilePsi3d,
            Observable::MassInterior,
            Observable::MassExterior,
        ] {
            assert_eq!(observe(&st, obs), 0.0);
        }
        // mass monitors vanish identically at M = 0
        let st2 = gaussian_state(grid, 0.3, 2.0);
        assert_eq!(observe(&st2, Observable::MassInterior), 0.0);
        assert_eq!(observe(&st2, Observable::MassExterior), 0.0);
    }

    #[test]
    fn last_quarter_growth_flags_growth() {
        let flat: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 1.0)).collect();
        assert!(last_quarter_growth(&flat).abs() <= 1e-12);
        let growing: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, 1.0 + 0.02 * i as f64)).collect();
        assert!(last_quarter_growth(&growing) > 0.1);
    }
}
