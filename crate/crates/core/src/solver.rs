//! Time evolution of the coupled system, history storage, and the
//! stencil-based residual that verifies the discrete solution against
//! the equations independently of the integrator.

use num_complex::Complex;

use crate::clifford::GammaRep;
use crate::error::{Error, Result};
use crate::fft::SpectralOps;
use crate::field::GridFn;
use crate::grid::GridSpec;
use crate::real::Real;
use crate::state::{
    gamma0_pair_density, rk4_step_mode, SimState, StepDiagnostics, WaveState,
};

/// Gaussian data posed at `t = 2`:
/// `psi_0 = eps e^{-r^2/w^2} u_0`, `v_0 = eps e^{-r^2/w^2}`, `v_1 = 0`,
/// with `u_0` a fixed unit spinor.
#[derive(Clone, Copy, Debug)]
pub struct InitialData<R> {
    pub amplitude: R,
    pub width: R,
}

impl<R: Real> InitialData<R> {
    /// Effective support radius; the tail beyond `6 w` is below rounding.
    pub fn support_radius(&self) -> R {
        self.width * R::lit(6.0)
    }
}

pub const START_TIME: f64 = 2.0;

pub fn initial_state<R: Real>(
    grid: GridSpec<R>,
    rep: &GammaRep<R>,
    mass: R,
    data: InitialData<R>,
    with_wave_potential: bool,
) -> SimState<R> {
    let mut st = SimState::zeros(grid, rep.n0, R::lit(START_TIME), mass);
    let eps = data.amplitude;
    let w2 = data.width * data.width;
    let profile = GridFn::scalar_from(grid, |x| {
        let mut r2 = R::zero();
        for a in 0..grid.dim {
            r2 = r2 + x[a] * x[a];
        }
        eps * (-r2 / w2).exp()
    });
    st.v = profile.clone();
    // u_0 = e_1
    st.psi
        .plane_mut(0)
        .copy_from_slice(profile.plane(0));
    if with_wave_potential {
        // (P, P_t)|_{t=2} = (0, -i g^0 psi_0)
        let mut pot_t = rep.apply_matrix_field(rep.gamma(0), &st.psi);
        pot_t.scale(Complex::new(R::zero(), -R::one()));
        st.wave = Some(WaveState {
            pot: GridFn::zeros(grid, rep.n0),
            pot_t,
        });
    }
    st
}

/// Whether the nonlinear coupling enters the right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    Coupled,
    Free,
}

pub struct Evolution<R: Real> {
    pub ops: SpectralOps<R>,
    pub rep: GammaRep<R>,
    pub state: SimState<R>,
    pub dt: R,
    pub coupling: Coupling,
    pub steps_taken: usize,
    pub diagnostics: StepDiagnostics,
    blowup: R,
}

impl<R: Real> Evolution<R> {
    pub fn new(
        ops: SpectralOps<R>,
        rep: GammaRep<R>,
        state: SimState<R>,
        dt: R,
        coupling: Coupling,
    ) -> Result<Self> {
        let dx = ops.grid.dx();
        if dt > R::lit(0.5) * dx {
            return Err(Error::config(format!(
                "CFL violated: dt = {} > 0.5 dx = {}",
                dt.as_f64(),
                (R::lit(0.5) * dx).as_f64()
            )));
        }
        let initial_scale = state.sup_psi().max(state.sup_v()).max(R::lit(1e-30));
        Ok(Evolution {
            ops,
            rep,
            state,
            dt,
            coupling,
            steps_taken: 0,
            diagnostics: StepDiagnostics::default(),
            blowup: (initial_scale * R::lit(100.0)).max(R::one()),
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let coupled = self.coupling == Coupling::Coupled;
        let (next, diag) = rk4_step_mode(&self.ops, &self.rep, &self.state, self.dt, coupled)?;
        if !next.is_finite() {
            return Err(Error::Instability {
                t: next.t.as_f64(),
                sup_psi: f64::NAN,
                sup_v: f64::NAN,
            });
        }
        let sp = next.sup_psi();
        let sv = next.sup_v();
        if sp > self.blowup || sv > self.blowup {
            return Err(Error::Instability {
                t: next.t.as_f64(),
                sup_psi: sp.as_f64(),
                sup_v: sv.as_f64(),
            });
        }
        self.diagnostics.source_imag = self.diagnostics.source_imag.max(diag.source_imag);
        self.state = next;
        self.steps_taken += 1;
        Ok(())
    }

    /// Step until `t_end`, invoking the observer after every step with
    /// the previous and current states.
    pub fn run_until(
        &mut self,
        t_end: R,
        mut observer: impl FnMut(&SimState<R>, &SimState<R>, &Evolution<R>) -> Result<()>,
    ) -> Result<()> {
        let eps = self.dt * R::lit(1e-9);
        while self.state.t + eps < t_end {
            let prev = self.state.clone();
            self.step()?;
            observer(&prev, &self.state, self)?;
        }
        Ok(())
    }
}

/// Charge `||psi||_{L^2}^2` and free Klein-Gordon energy
/// `int (|d_t v|^2 + |grad v|^2 + v^2) dx`.
pub fn charge<R: Real>(state: &SimState<R>) -> R {
    let n = state.psi.l2_norm();
    n * n
}

pub fn kg_energy<R: Real>(ops: &SpectralOps<R>, state: &SimState<R>) -> Result<R> {
    let mut e = {
        let n = state.vt.l2_norm();
        n * n
    } + {
        let n = state.v.l2_norm();
        n * n
    };
    for a in 0..ops.grid.dim {
        let d = ops.derivative(&state.v, a)?;
        let n = d.l2_norm();
        e = e + n * n;
    }
    Ok(e)
}

/// Uniformly spaced stored snapshots (stride in steps).
pub struct History<R: Real> {
    pub states: Vec<SimState<R>>,
}

impl<R: Real> History<R> {
    pub fn new() -> Self {
        History { states: Vec::new() }
    }

    pub fn push(&mut self, state: SimState<R>) {
        if let Some(last) = self.states.last() {
            assert!(state.t > last.t, "history times must increase");
        }
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn t_lo(&self) -> R {
        self.states.first().map(|s| s.t).unwrap_or_else(R::zero)
    }

    pub fn t_hi(&self) -> R {
        self.states.last().map(|s| s.t).unwrap_or_else(R::zero)
    }

    /// Stored spacing (the first gap; storage is uniform).
    pub fn dt_stored(&self) -> R {
        if self.states.len() < 2 {
            R::zero()
        } else {
            self.states[1].t - self.states[0].t
        }
    }

    fn coverage_error(&self, lo: R, hi: R) -> Error {
        Error::Coverage {
            needed_lo: lo.as_f64(),
            needed_hi: hi.as_f64(),
            have_lo: self.t_lo().as_f64(),
            have_hi: self.t_hi().as_f64(),
        }
    }

    /// Index of the nearest stored state to `t` (must match on grid).
    pub fn index_at(&self, t: R) -> Result<usize> {
        let dt = self.dt_stored();
        if self.is_empty() || t < self.t_lo() - dt || t > self.t_hi() + dt {
            return Err(self.coverage_error(t, t));
        }
        let mut best = 0;
        let mut dist = R::infinity();
        for (i, s) in self.states.iter().enumerate() {
            let d = (s.t - t).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        Ok(best)
    }

    /// A window of `2*half + 1` states centered at index `i`.
    pub fn window(&self, i: usize, half: usize) -> Result<&[SimState<R>]> {
        if i < half || i + half >= self.states.len() {
            let dt = self.dt_stored();
            let t = self.states.get(i).map(|s| s.t).unwrap_or_else(R::zero);
            return Err(self.coverage_error(
                t - dt * R::from_usize(half).unwrap(),
                t + dt * R::from_usize(half).unwrap(),
            ));
        }
        Ok(&self.states[i - half..=i + half])
    }

    /// Centered-cubic interpolation stencil for time `t`: start index of
    /// four consecutive states and the Lagrange weights.
    pub fn cubic_stencil(&self, t: R) -> Result<(usize, [R; 4])> {
        let n = self.states.len();
        if n < 4 {
            return Err(self.coverage_error(t, t));
        }
        let dt = self.dt_stored();
        let t0 = self.t_lo();
        let eps = dt * R::lit(1e-9);
        if t < t0 - eps || t > self.t_hi() + eps {
            return Err(self.coverage_error(t, t));
        }
        // bracket t between stored indices k, k+1
        let kf = ((t - t0) / dt).floor();
        let mut k = kf.to_usize().unwrap_or(0);
        if k + 1 >= n {
            k = n - 2;
        }
        // centered 4-point window [k-1 ..= k+2], clamped inward only when
        // t still lies within the middle interval after clamping
        let start = if k == 0 {
            0
        } else if k + 2 >= n {
            n - 4
        } else {
            k - 1
        };
        let s = (t - self.states[start + 1].t) / dt;
        // Lagrange weights on offsets (-1, 0, 1, 2) around start+1
        let one = R::one();
        let two = R::lit(2.0);
        let six = R::lit(6.0);
        let w0 = -s * (s - one) * (s - two) / six;
        let w1 = (s + one) * (s - one) * (s - two) / two;
        let w2 = -(s + one) * s * (s - two) / two;
        let w3 = (s + one) * s * (s - one) / six;
        Ok((start, [w0, w1, w2, w3]))
    }
}

impl<R: Real> Default for History<R> {
    fn default() -> Self {
        Self::new()
    }
}

/// Fourth-order centered stencils in time on five uniformly spaced
/// planes. Used by the residual checks; independent of the on-shell
/// route used inside the integrator.
pub fn stencil_dt<R: Real>(planes: [&GridFn<R>; 5], dt: R) -> GridFn<R> {
    let mut out = GridFn::zeros(planes[0].grid, planes[0].comps);
    let den = Complex::new(R::lit(12.0) * dt, R::zero());
    let c8 = Complex::new(R::lit(8.0), R::zero());
    let one = Complex::new(R::one(), R::zero());
    out.axpy(one, planes[0]);
    out.axpy(-c8, planes[1]);
    out.axpy(c8, planes[3]);
    out.axpy(-one, planes[4]);
    out.map_inplace(move |z| z / den);
    out
}

pub fn stencil_dtt<R: Real>(planes: [&GridFn<R>; 5], dt: R) -> GridFn<R> {
    let mut out = GridFn::zeros(planes[0].grid, planes[0].comps);
    let den = Complex::new(R::lit(12.0) * dt * dt, R::zero());
    let c16 = Complex::new(R::lit(16.0), R::zero());
    let c30 = Complex::new(R::lit(30.0), R::zero());
    let one = Complex::new(R::one(), R::zero());
    out.axpy(-one, planes[0]);
    out.axpy(c16, planes[1]);
    out.axpy(-c30, planes[2]);
    out.axpy(c16, planes[3]);
    out.axpy(-one, planes[4]);
    out.map_inplace(move |z| z / den);
    out
}

/// `L^2` norms of the equation defects at the center of a five-state
/// window:
/// `r_psi = || i g^u d_u psi + M psi - v psi ||`,
/// `r_v   = || d_t^2 v - Lap v + v - psi^* g^0 psi ||`,
/// with time derivatives from 4th-order stencils on the stored states.
pub fn pde_residual<R: Real>(
    ops: &SpectralOps<R>,
    rep: &GammaRep<R>,
    window: &[SimState<R>],
) -> Result<(R, R)> {
    if window.len() != 5 {
        return Err(Error::rejected("pde_residual needs a five-state window"));
    }
    let dt = window[1].t - window[0].t;
    let center = &window[2];
    let psi_planes = [
        &window[0].psi,
        &window[1].psi,
        &window[2].psi,
        &window[3].psi,
        &window[4].psi,
    ];
    let psi_t = stencil_dt(psi_planes, dt);
    // i g^0 psi_t + i g^a d_a psi + M psi - v psi
    let mut defect = rep.apply_matrix_field(rep.gamma(0), &psi_t);
    defect.scale(Complex::new(R::zero(), R::one()));
    for a in 1..=rep.dim {
        let da = ops.derivative(&center.psi, a - 1)?;
        let mut term = rep.apply_matrix_field(rep.gamma(a), &da);
        term.scale(Complex::new(R::zero(), R::one()));
        defect.axpy(Complex::new(R::one(), R::zero()), &term);
    }
    if center.mass != R::zero() {
        defect.axpy(Complex::new(center.mass, R::zero()), &center.psi);
    }
    let vpsi = crate::state::mul_real_scalar(&center.v, &center.psi);
    defect.axpy(Complex::new(-R::one(), R::zero()), &vpsi);
    let r_psi = defect.l2_norm();

    let v_planes = [
        &window[0].v,
        &window[1].v,
        &window[2].v,
        &window[3].v,
        &window[4].v,
    ];
    let vtt = stencil_dtt(v_planes, dt);
    let mut defv = vtt;
    let lap = ops.laplacian(&center.v)?;
    defv.axpy(Complex::new(-R::one(), R::zero()), &lap);
    defv.axpy(Complex::new(R::one(), R::zero()), &center.v);
    let src = gamma0_pair_density(rep, &center.psi, &center.psi);
    defv.axpy(Complex::new(-R::one(), R::zero()), &src);
    let r_v = defv.l2_norm();
    Ok((r_psi, r_v))
}

/// Checkpoint a full state (all constituent fields) to one stream.
pub fn write_state<R: Real, W: std::io::Write>(w: &mut W, st: &SimState<R>) -> Result<()> {
    use crate::field::{write_field, FieldKind};
    w.write_all(&st.mass.as_f64().to_le_bytes())?;
    w.write_all(&[st.wave.is_some() as u8])?;
    write_field(w, &st.psi, FieldKind::Spinor, st.t)?;
    write_field(w, &st.v, FieldKind::Scalar, st.t)?;
    write_field(w, &st.vt, FieldKind::ScalarDt, st.t)?;
    if let Some(wv) = st.wave.as_ref() {
        write_field(w, &wv.pot, FieldKind::WavePotential, st.t)?;
        write_field(w, &wv.pot_t, FieldKind::WavePotentialDt, st.t)?;
    }
    Ok(())
}

pub fn read_state<R: Real, Rd: std::io::Read>(rd: &mut Rd) -> Result<SimState<R>> {
    use crate::field::read_field;
    let mut b8 = [0u8; 8];
    rd.read_exact(&mut b8)?;
    let mass = R::lit(f64::from_le_bytes(b8));
    let mut b1 = [0u8; 1];
    rd.read_exact(&mut b1)?;
    let has_wave = b1[0] != 0;
    let (psi, _, t) = read_field::<R, _>(rd)?;
    let (v, _, _) = read_field::<R, _>(rd)?;
    let (vt, _, _) = read_field::<R, _>(rd)?;
    let wave = if has_wave {
        let (pot, _, _) = read_field::<R, _>(rd)?;
        let (pot_t, _, _) = read_field::<R, _>(rd)?;
        Some(WaveState { pot, pot_t })
    } else {
        None
    };
    Ok(SimState {
        t,
        mass,
        psi,
        v,
        vt,
        wave,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_gamma;
    use std::f64::consts::PI;

    fn setup(points: usize, l: f64) -> (SpectralOps<f64>, GammaRep<f64>) {
        let grid = GridSpec::new(2, points, l).unwrap();
        (SpectralOps::new(grid), build_gamma(2).unwrap())
    }

    #[test]
    fn cfl_enforced() {
        let (ops, rep) = setup(32, 8.0);
        let st = SimState::zeros(ops.grid, 2, 2.0, 0.0);
        let dx = ops.grid.dx();
        assert!(Evolution::new(ops, rep, st, 0.6 * dx, Coupling::Coupled).is_err());
    }

    #[test]
    fn free_dirac_l2_conserved() {
        let (ops, rep) = setup(64, 12.0);
        let grid = ops.grid;
        let mut st = initial_state(
            grid,
            &rep,
            0.0,
            InitialData {
                amplitude: 0.1,
                width: 2.0,
            },
            false,
        );
        st.v = GridFn::zeros(grid, 1); // pure Dirac
        let q0 = charge(&st);
        let dt = 0.08 * grid.dx();
        let mut evo = Evolution::new(ops, rep, st, dt, Coupling::Free).unwrap();
        evo.run_until(4.0, |_, _, _| Ok(())).unwrap();
        let q1 = charge(&evo.state);
        let drift = (q1 - q0).abs() / q0 / (evo.state.t - 2.0);
        assert!(drift <= 1e-8, "L2 drift per unit time {drift:.3e}");
    }

    #[test]
    fn free_kg_energy_conserved() {
        let (ops, rep) = setup(64, 12.0);
        let grid = ops.grid;
        let mut st = initial_state(
            grid,
            &rep,
            0.0,
            InitialData {
                amplitude: 0.1,
                width: 2.0,
            },
            false,
        );
        st.psi = GridFn::zeros(grid, 2); // pure KG
        let e0 = kg_energy(&ops, &st).unwrap();
        let dt = 0.08 * grid.dx();
        let mut evo = Evolution::new(ops, rep, st, dt, Coupling::Free).unwrap();
        evo.run_until(4.0, |_, _, _| Ok(())).unwrap();
        let e1 = kg_energy(&evo.ops, &evo.state).unwrap();
        let drift = (e1 - e0).abs() / e0 / (evo.state.t - 2.0);
        assert!(drift <= 1e-8, "energy drift per unit time {drift:.3e}");
    }

    #[test]
    fn coupled_charge_conserved() {
        // d/dt ||psi||^2 = 0 even with coupling: v real makes the
        // source term vanish identically.
        let (ops, rep) = setup(64, 12.0);
        let grid = ops.grid;
        let st = initial_state(
            grid,
            &rep,
            0.0,
            InitialData {
                amplitude: 0.05,
                width: 1.5,
            },
            false,
        );
        let q0 = charge(&st);
        let dt = 0.25 * grid.dx();
        let mut evo = Evolution::new(ops, rep, st, dt, Coupling::Coupled).unwrap();
        let mut worst_step = 0.0f64;
        let mut prev_q = q0;
        evo.run_until(4.0, |_, next, _| {
            let q = charge(next);
            worst_step = worst_step.max((q - prev_q).abs() / q0);
            prev_q = q;
            Ok(())
        })
        .unwrap();
        assert!(worst_step <= 1e-6, "per-step charge change {worst_step:.3e}");
        assert!(evo.diagnostics.source_imag <= 1e-13);
    }

    #[test]
    fn zero_data_stays_zero() {
        let (ops, rep) = setup(32, 8.0);
        let st = SimState::zeros(ops.grid, 2, 2.0, 0.0);
        let dt = 0.25 * ops.grid.dx();
        let mut evo = Evolution::new(ops, rep, st, dt, Coupling::Coupled).unwrap();
        evo.run_until(3.0, |_, next, _| {
            assert_eq!(next.sup_psi(), 0.0);
            assert_eq!(next.sup_v(), 0.0);
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn residual_on_free_plane_wave() {
        // Exact single-mode KG wave evaluated analytically into a
        // history: the stencil residual must be at discretization level.
        let (ops, rep) = setup(64, 8.0);
        let grid = ops.grid;
        let k = grid.wavenumber(2);
        let omega = (1.0 + k * k).sqrt();
        let dt = 0.01;
        let mut hist = History::new();
        for j in 0..5 {
            let t = 2.0 + dt * j as f64;
            let mut st = SimState::zeros(grid, rep.n0, t, 0.0);
            st.v = GridFn::scalar_from(grid, |x| (k * x[0] - omega * t).cos());
            st.vt = GridFn::scalar_from(grid, |x| omega * (k * x[0] - omega * t).sin());
            hist.push(st);
        }
        let (r_psi, r_v) = pde_residual(&ops, &rep, &hist.states[0..5]).unwrap();
        assert_eq!(r_psi, 0.0);
        // normalize by the field's L2 norm
        let scale = hist.states[2].v.l2_norm();
        assert!(r_v / scale <= 1e-6, "free wave residual {}", r_v / scale);
    }

    #[test]
    fn residual_matches_manufactured_forcing() {
        // Method of manufactured solutions: prescribe smooth psi, v
        // that do NOT solve the homogeneous system; the residual must
        // equal the analytically injected forcing.
        let (ops, rep) = setup(96, 10.0);
        let grid = ops.grid;
        let dt = 0.01;
        let w2 = 3.0;
        let psi_f = |t: f64, x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Complex::new((0.3 * t).cos(), (0.2 * t).sin()) * (-r2 / w2).exp()
        };
        let v_f = |t: f64, x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (0.5 * t).sin() * (-r2 / (2.0 * w2)).exp()
        };
        let vt_f = |t: f64, x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            0.5 * (0.5 * t).cos() * (-r2 / (2.0 * w2)).exp()
        };
        let mut hist = History::new();
        for j in 0..5 {
            let t = 2.0 + dt * j as f64;
            let mut st = SimState::zeros(grid, rep.n0, t, 0.0);
            for (i, z) in st.psi.plane_mut(0).iter_mut().enumerate() {
                *z = psi_f(t, &grid.position(i));
            }
            st.v = GridFn::scalar_from(grid, |x| v_f(t, x));
            st.vt = GridFn::scalar_from(grid, |x| vt_f(t, x));
            hist.push(st);
        }
        let (r_psi, r_v) = pde_residual(&ops, &rep, &hist.states[0..5]).unwrap();

        // Independent forcing norms by dense quadrature of the analytic
        // defect at the window center (t = 2 + 2 dt).
        let t = 2.0 + 2.0 * dt;
        let fine = GridSpec::new(2, 256, 10.0).unwrap();
        let mut f_psi2 = 0.0;
        let mut f_v2 = 0.0;
        for i in 0..fine.nodes() {
            let x = fine.position(i);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let e = (-r2 / w2).exp();
            // i g^0 d_t psi + i g^1 d_1 psi + i g^2 d_2 psi - v psi with
            // psi = (h(t) e, 0): build components directly.
            let ht = Complex::new((0.3 * t).cos(), (0.2 * t).sin());
            let dht = Complex::new(-0.3 * (0.3 * t).sin(), 0.2 * (0.2 * t).cos());
            let dpsi0_t = dht * e;
            let dpsi0_1 = ht * e * (-2.0 * x[0] / w2);
            let dpsi0_2 = ht * e * (-2.0 * x[1] / w2);
            // gamma matrices of the 2D representation
            let i = Complex::new(0.0, 1.0);
            // comp0: i*dpsi0_t - v*psi0 ; comp1: i*(i dpsi0_1) + i*(-1)... unfold:
            // g0 = diag(1,-1); g1 = [[0,i],[i,0]]; g2 = [[0,1],[-1,0]]
            // (i g^mu d_mu psi)_0 = i d_t psi_0 + i (g1)_{01} d_1 psi_1 + ...
            // psi_1 = 0 so only psi_0 terms via row entries (x,0):
            let f0 = i * dpsi0_t - v_f(t, &x) * ht * e;
            let f1 = i * (i * dpsi0_1) + i * (-1.0) * dpsi0_2;
            f_psi2 += (f0.norm_sqr() + f1.norm_sqr()) * fine.cell_volume();
            // KG defect: v_tt - Lap v + v - |psi_0|^2 (g0 has +1 in comp 0)
            let lap_v = (0.5 * t).sin()
                * (-r2 / (2.0 * w2)).exp()
                * ((4.0 * r2) / (4.0 * w2 * w2) - 2.0 / w2 + (4.0 * r2) / (4.0 * w2 * w2)
                    - 2.0 / w2)
                / 2.0;
            let v_tt = -0.25 * (0.5 * t).sin() * (-r2 / (2.0 * w2)).exp();
            let src = (ht * e).norm_sqr();
            let fv = v_tt - lap_v + v_f(t, &x) - src;
            f_v2 += fv * fv * fine.cell_volume();
        }
        let f_psi = f_psi2.sqrt();
        let f_v = f_v2.sqrt();
        assert!(
            (r_psi - f_psi).abs() / f_psi <= 1e-6,
            "psi forcing {} vs residual {}",
            f_psi,
            r_psi
        );
        assert!(
            (r_v - f_v).abs() / f_v <= 1e-4,
            "v forcing {} vs residual {}",
            f_v,
            r_v
        );
    }

    #[test]
    fn cubic_interpolation_accuracy() {
        let (ops, rep) = setup(16, 8.0);
        let grid = ops.grid;
        let dt = 0.01;
        let mut hist = History::new();
        for j in 0..8 {
            let t = 2.0 + dt * j as f64;
            let mut st = SimState::zeros(grid, rep.n0, t, 0.0);
            st.v = GridFn::scalar_from(grid, |_| t);
            hist.push(st);
        }
        let t = 2.0337;
        let (start, w) = hist.cubic_stencil(t).unwrap();
        let mut val = 0.0;
        for j in 0..4 {
            val += w[j] * hist.states[start + j].v.at(0, 0).re;
        }
        assert!((val - t).abs() <= 1e-12);
        assert!(hist.cubic_stencil(1.5).is_err());
        assert!(hist.cubic_stencil(2.1).is_err());
    }

    #[test]
    fn state_checkpoint_roundtrip() {
        let (ops, rep) = setup(16, 8.0);
        let st = initial_state(
            ops.grid,
            &rep,
            0.3,
            InitialData {
                amplitude: 0.2,
                width: 1.0,
            },
            true,
        );
        let mut buf = Vec::new();
        write_state(&mut buf, &st).unwrap();
        let st2: SimState<f64> = read_state(&mut buf.as_slice()).unwrap();
        assert_eq!(st2.t, st.t);
        assert_eq!(st2.mass, 0.3);
        assert_eq!(st2.psi, st.psi);
        assert!(st2.wave.is_some());
    }

    #[test]
    fn instability_reported() {
        // Gigantic data at coarse dt must abort with a diagnostic, not NaN-poison silently.
        let (ops, rep) = setup(32, 8.0);
        let st = initial_state(
            ops.grid,
            &rep,
            0.0,
            InitialData {
                amplitude: 2000.0,
                width: 1.5,
            },
            false,
        );
        let dt = 0.49 * ops.grid.dx();
        let mut evo = Evolution::new(ops, rep, st, dt, Coupling::Coupled).unwrap();
        let r = evo.run_until(20.0, |_, _, _| Ok(()));
        assert!(matches!(r, Err(Error::Instability { .. })), "{r:?}");
    }

    #[test]
    fn temporal_convergence_order() {
        // halving dt reduces the step error ~16x on a free KG wave
        let (ops, rep) = setup(32, 8.0);
        let grid = ops.grid;
        let k = grid.wavenumber(1);
        let omega = (1.0 + k * k).sqrt();
        let exact = |t: f64| {
            let mut st = SimState::zeros(grid, rep.n0, t, 0.0);
            st.v = GridFn::scalar_from(grid, |x| (k * x[0] - omega * t).cos());
            st.vt = GridFn::scalar_from(grid, |x| omega * (k * x[0] - omega * t).sin());
            st
        };
        let err_with = |nsteps: usize| {
            let t_end = 2.0 + 2.0 * PI / omega;
            let dt = (t_end - 2.0) / nsteps as f64;
            let mut evo =
                Evolution::new(SpectralOps::new(grid), rep.clone(), exact(2.0), dt, Coupling::Free)
                    .unwrap();
            evo.run_until(t_end, |_, _, _| Ok(())).unwrap();
            let want = exact(evo.state.t);
            let mut d = 0.0f64;
            for i in 0..grid.nodes() {
                d = d.max((evo.state.v.at(0, i) - want.v.at(0, i)).norm());
            }
            d
        };
        let e1 = err_with(100);
        let e2 = err_with(200);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() <= 0.3, "temporal order {order}");
    }
}
