//! Run orchestration: execute a configured evolution with all scheduled
//! monitors, assemble the report time series, and emit artifacts
//! (`report.csv`, `scattering.json`, checkpoints).

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::Serialize;

use crate::clifford::build_gamma;
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::fft::SpectralOps;
use crate::field::GridFn;
use crate::functionals::{
    bootstrap_density, decay_fit, last_quarter_growth, observe, BalanceReport, Domain,
    FunctionalParams, GhostLedger, Observable, RunningIntegral, WeightKind,
};
use crate::grid::GridSpec;
use crate::jet::state_jets;
use crate::scattering::{free_flow_mismatch, SplitAccumulator, TailAccumulator, TailNorm};
use crate::solver::{
    initial_state, pde_residual, write_state, Coupling, Evolution, InitialData,
};
use crate::state::{gamma0_pair_density, mul_real_scalar, SimState};
use crate::transforms::{build_psi_tilde, build_v_tilde, wave_identity_error, wave_tilde_residual};

type R = f64;

/// One monitor-time row of the report; optional entries are left empty
/// in the CSV when the corresponding monitor is off.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ReportRow {
    pub t: f64,
    pub sup_psi: f64,
    pub sup_v: f64,
    pub charge: f64,
    pub e_kg: f64,
    pub e_ex_dirac: Option<f64>,
    pub e_ex_kg: Option<f64>,
    pub y_dirac: Option<f64>,
    pub y_kg: Option<f64>,
    pub ghost_dirac: Option<f64>,
    pub ghost_kg: Option<f64>,
    pub cone_dirac: Option<f64>,
    pub cone_kg: Option<f64>,
    pub profile: Option<f64>,
    pub mass_interior: Option<f64>,
    pub mass_exterior: Option<f64>,
    pub l_density: Option<f64>,
    pub l_integral: Option<f64>,
    pub res_psi_tilde: Option<f64>,
    pub res_v_tilde: Option<f64>,
    pub res_wave_tilde: Option<f64>,
    pub err_wave_id: Option<f64>,
    pub res_pde_psi: Option<f64>,
    pub res_pde_v: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperboloidRow {
    pub s: f64,
    /// Interior scalar energy (density form 1, `m = 1`, no time weight).
    pub kg_energy: f64,
    /// Worst pointwise disagreement of the three density forms.
    pub kg_forms_dev: f64,
    /// Interior spinor energy `int |(psi)_-|^2 + (s/t)^2 |psi|^2`.
    pub dirac_energy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    pub t_lo: f64,
    pub t_hi: f64,
    pub tail_dirac: f64,
    pub tail_kg: f64,
    pub tail_combined: f64,
    pub i_ex: f64,
    pub i_in: f64,
    pub chain_constant: f64,
    /// `||state(t_end) - free flow of state(t_lo)||`.
    pub free_mismatch: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringReport {
    pub transformed_sources: bool,
    pub windows: Vec<WindowReport>,
    pub tails_strictly_decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub observable: String,
    pub window: [f64; 2],
    pub exponent: f64,
    pub stderr: f64,
    pub last_quarter_growth: f64,
    pub max_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalanceSummary {
    pub kg: SerializableBalance,
    pub dirac: SerializableBalance,
    pub dirac_source_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SerializableBalance {
    pub e_start: f64,
    pub e_end: f64,
    pub ghost_term: f64,
    pub cone_term: f64,
    pub delta_term: f64,
    pub source_term: f64,
    pub residual: f64,
}

impl From<BalanceReport<f64>> for SerializableBalance {
    fn from(b: BalanceReport<f64>) -> Self {
        SerializableBalance {
            e_start: b.e_start,
            e_end: b.e_end,
            ghost_term: b.ghost_term,
            cone_term: b.cone_term,
            delta_term: b.delta_term,
            source_term: b.source_term,
            residual: b.residual,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub rows: Vec<ReportRow>,
    pub scattering: Option<ScatteringReport>,
    pub hyperboloid: Vec<HyperboloidRow>,
    pub balances: Option<BalanceSummary>,
    pub decay: Vec<DecayReport>,
    pub bootstrap_total: Option<f64>,
    pub bootstrap_last_quarter: Option<f64>,
    pub final_state: SimState<R>,
    pub source_imag: f64,
    pub steps: usize,
}

/// Execute a validated configuration from its initial state. See
/// [`resume`] for continuing from a checkpoint.
pub fn execute(cfg: &ConfigFile, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = GridSpec::new(cfg.dim, cfg.grid.points, cfg.grid.half_width)?;
    let rep = build_gamma::<R>(cfg.dim)?;
    let state = initial_state(
        grid,
        &rep,
        cfg.mass,
        InitialData {
            amplitude: cfg.data.amplitude,
            width: cfg.data.width,
        },
        cfg.monitors.wave_potential,
    );
    run_from(cfg, state, out_dir)
}

/// Continue a run from a checkpointed state. Accumulating monitors
/// restart at the resume time.
pub fn resume(cfg: &ConfigFile, state: SimState<R>, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = GridSpec::new(cfg.dim, cfg.grid.points, cfg.grid.half_width)?;
    if state.grid() != grid {
        return Err(Error::config("checkpoint grid does not match configuration"));
    }
    run_from(cfg, state, out_dir)
}

fn run_from(cfg: &ConfigFile, state: SimState<R>, out_dir: Option<&Path>) -> Result<RunOutput> {
    let grid = state.grid();
    let scheme = cfg.scheme.into();
    let ops = SpectralOps::with_scheme(grid, scheme);
    let rep = build_gamma::<R>(cfg.dim)?;
    let dt = cfg.time.dt_factor * grid.dx();
    let params = FunctionalParams::new(cfg.params.lambda, cfg.params.delta)?;
    let coupling = if cfg.coupled {
        Coupling::Coupled
    } else {
        Coupling::Free
    };

    let mut ledger = if cfg.monitors.ghost_norms {
        Some(GhostLedger::new(params, WeightKind::Ghost, Domain::Exterior)?)
    } else {
        None
    };
    let windows: Vec<(f64, f64)> = cfg
        .monitors
        .ladder
        .windows(2)
        .map(|w| (w[0], w[1]))
        .collect();
    let mut tails = if windows.is_empty() {
        None
    } else {
        Some(TailAccumulator::new(grid, rep.n0, windows.clone(), cfg.mass))
    };
    let mut split = if windows.is_empty() {
        None
    } else {
        Some(SplitAccumulator::new(cfg.monitors.split_delta, windows.clone()))
    };
    let mut ladder_states: Vec<Option<SimState<R>>> = cfg.monitors.ladder.iter().map(|_| None).collect();

    // full-rate history kept only while the hyperboloid slices need it
    let hyper_t_max = cfg
        .monitors
        .hyperboloid_s
        .iter()
        .map(|&s| crate::foliation::t_of_s(s))
        .fold(f64::NEG_INFINITY, f64::max)
        + 6.0 * dt;
    let mut hyper_hist = if cfg.monitors.hyperboloid_s.is_empty() {
        None
    } else {
        Some(crate::solver::History::new())
    };

    let mut rows: Vec<ReportRow> = Vec::new();
    let mut bootstrap = RunningIntegral::<R>::new();
    let mut profile_series: Vec<(f64, f64)> = Vec::new();
    let mut supv_series: Vec<(f64, f64)> = Vec::new();
    let mut suppsi_series: Vec<(f64, f64)> = Vec::new();
    let mut mass_in_series: Vec<(f64, f64)> = Vec::new();
    let mut mass_ex_series: Vec<(f64, f64)> = Vec::new();

    // rolling window of full-rate states for the stencil residuals
    let window_len = 9usize;
    let mut rolling: VecDeque<SimState<R>> = VecDeque::with_capacity(window_len + 1);
    // pending row index awaiting transform residuals (center of window)
    let mut pending: VecDeque<(usize, usize)> = VecDeque::new(); // (step, row index)

    let mut evo = Evolution::new(ops, rep, state, dt, coupling)?;
    let ops = SpectralOps::with_scheme(grid, scheme);
    let rep = build_gamma::<R>(cfg.dim)?;

    let t_end = cfg.time.t_end;
    let profile_obs = if cfg.dim == 2 {
        Observable::ProfilePsi2d
    } else {
        Observable::ProfilePsi3d
    };

    // sources for the tail/split accumulators
    let compute_sources = |st: &SimState<R>| -> Result<(GridFn<R>, GridFn<R>)> {
        if cfg.monitors.transformed_tails {
            // F-tilde sources via on-shell jets (first derivatives only)
            let (psi_jet, v_jet) = state_jets(&ops, &rep, st, 1, 1)?;
            // Ftpsi = (psi* g0 psi) psi - i v gamma^u d_u(v psi) - 2 d_a v d^a psi
            let dens = gamma0_pair_density(&rep, &st.psi, &st.psi);
            let mut fpsi = mul_real_scalar(&dens, &st.psi);
            let vpsi_t = {
                // d_t(v psi) = vt psi + v psi_t (on shell)
                let mut a = mul_real_scalar(&st.vt, &st.psi);
                let b = mul_real_scalar(&st.v, &psi_jet.orders[1]);
                a.axpy(Complex::new(1.0, 0.0), &b);
                a
            };
            let center_vpsi = mul_real_scalar(&st.v, &st.psi);
            // i g^u d_u (v psi)
            let mut op = rep.apply_matrix_field(rep.gamma(0), &vpsi_t);
            for a in 1..=rep.dim {
                let da = ops.derivative(&center_vpsi, a - 1)?;
                let term = rep.apply_matrix_field(rep.gamma(a), &da);
                op.axpy(Complex::new(1.0, 0.0), &term);
            }
            op.scale(Complex::new(0.0, 1.0));
            let v_op = mul_real_scalar(&st.v, &op);
            fpsi.axpy(Complex::new(-1.0, 0.0), &v_op);
            let vt_psit = {
                let mut a = psi_jet.orders[1].clone();
                a = mul_real_scalar(&st.vt, &a);
                a
            };
            fpsi.axpy(Complex::new(2.0, 0.0), &vt_psit);
            for a in 0..rep.dim {
                let va = ops.derivative(&st.v, a)?;
                let pa = ops.derivative(&st.psi, a)?;
                let prod = mul_real_scalar(&va, &pa);
                fpsi.axpy(Complex::new(-2.0, 0.0), &prod);
            }
            // Ftv = 2 Im<d_u(v psi), g0 g^u psi> + 2[-psi_t* g0 psi_t + sum_a psi_a* g0 psi_a]
            let mut fv = GridFn::zeros(grid, 1);
            let mut d_vpsi = vec![vpsi_t];
            let mut d_psi = vec![psi_jet.orders[1].clone()];
            for a in 0..rep.dim {
                d_vpsi.push(ops.derivative(&center_vpsi, a)?);
                d_psi.push(ops.derivative(&st.psi, a)?);
            }
            for mu in 0..=rep.dim {
                let g0gmu = if mu == 0 {
                    crate::clifford::SpinMat::identity(rep.n0)
                } else {
                    *rep.g0g(mu)
                };
                let gp = rep.apply_matrix_field(&g0gmu, &st.psi);
                let mut bil = GridFn::zeros(grid, 1);
                for c in 0..rep.n0 {
                    let a = d_vpsi[mu].plane(c);
                    let b = gp.plane(c);
                    let o = bil.plane_mut(0);
                    for j in 0..o.len() {
                        o[j] += a[j].conj() * b[j];
                    }
                }
                let o = fv.plane_mut(0);
                let b = bil.plane(0);
                for j in 0..o.len() {
                    o[j] += Complex::new(2.0 * b[j].im, 0.0);
                }
            }
            for (alpha, sign) in (0..=rep.dim).map(|mu| (mu, if mu == 0 { -1.0 } else { 1.0 })) {
                let bil = gamma0_pair_density(&rep, &d_psi[alpha], &d_psi[alpha]);
                let o = fv.plane_mut(0);
                let b = bil.plane(0);
                for j in 0..o.len() {
                    o[j] += Complex::new(2.0 * sign * b[j].re, 0.0);
                }
            }
            let _ = v_jet;
            Ok((fpsi, fv))
        } else {
            let fpsi = mul_real_scalar(&st.v, &st.psi);
            let (fv, _) = crate::state::source_density(&rep, &st.psi);
            Ok((fpsi, fv))
        }
    };

    // initial feeds
    if let Some(l) = ledger.as_mut() {
        l.update(&ops, &rep, &evo.state)?;
    }
    if tails.is_some() || split.is_some() {
        let (fpsi, fv) = compute_sources(&evo.state)?;
        if let Some(t) = tails.as_mut() {
            t.update(&ops, &rep, evo.state.t, &fpsi, &fv);
        }
        if let Some(s) = split.as_mut() {
            let f2 = |i: usize| fpsi.abs2_at(i) + fv.abs2_at(i);
            s.update(&grid, evo.state.t, f2);
        }
    }
    rolling.push_back(evo.state.clone());
    if let Some(h) = hyper_hist.as_mut() {
        h.push(evo.state.clone());
    }

    let record_row = |st: &SimState<R>,
                          ledger: &Option<GhostLedger<R>>,
                          bootstrap: &mut RunningIntegral<R>,
                          rows: &mut Vec<ReportRow>|
     -> Result<usize> {
        let mut row = ReportRow {
            t: st.t,
            sup_psi: observe(st, Observable::SupPsi),
            sup_v: observe(st, Observable::SupV),
            charge: crate::solver::charge(st),
            e_kg: crate::solver::kg_energy(&ops, st)?,
            ..Default::default()
        };
        if let Some(l) = ledger.as_ref() {
            let y = l.y_report(&ops, st)?;
            row.e_ex_dirac = Some(y.e_dirac);
            row.e_ex_kg = Some(y.e_kg);
            row.y_dirac = Some(y.y_dirac);
            row.y_kg = Some(y.y_kg);
            row.ghost_dirac = Some(y.dirac_ghost);
            row.ghost_kg = Some(y.kg_ghost);
            row.cone_dirac = Some(y.r_dirac_sq);
            row.cone_kg = Some(y.r_kg_sq);
        }
        row.profile = Some(observe(st, profile_obs));
        if cfg.dim == 3 {
            row.mass_interior = Some(observe(st, Observable::MassInterior));
            row.mass_exterior = Some(observe(st, Observable::MassExterior));
        }
        if cfg.monitors.bootstrap {
            let l = bootstrap_density(&ops, &rep, st, &params, cfg.params.gamma_order)?;
            bootstrap.push(st.t, l);
            row.l_density = Some(l);
            row.l_integral = Some(bootstrap.total());
        }
        rows.push(row);
        Ok(rows.len() - 1)
    };

    // record the initial row
    {
        let idx = record_row(&evo.state, &ledger, &mut bootstrap, &mut rows)?;
        let row = &rows[idx];
        suppsi_series.push((row.t, row.sup_psi));
        supv_series.push((row.t, row.sup_v));
        profile_series.push((row.t, row.profile.unwrap_or(0.0)));
        if cfg.dim == 3 {
            mass_in_series.push((row.t, row.mass_interior.unwrap()));
            mass_ex_series.push((row.t, row.mass_exterior.unwrap()));
        }
    }

    let mut step: usize = 0;
    let eps = dt * 1e-9;
    while evo.state.t + eps < t_end {
        evo.step()?;
        step += 1;
        let st_t = evo.state.t;

        if let Some(l) = ledger.as_mut() {
            l.update(&ops, &rep, &evo.state)?;
        }
        if tails.is_some() || split.is_some() {
            let (fpsi, fv) = compute_sources(&evo.state)?;
            if let Some(t) = tails.as_mut() {
                t.update(&ops, &rep, st_t, &fpsi, &fv);
            }
            if let Some(s) = split.as_mut() {
                let f2 = |i: usize| fpsi.abs2_at(i) + fv.abs2_at(i);
                s.update(&grid, st_t, f2);
            }
        }
        for (li, lt) in cfg.monitors.ladder.iter().enumerate() {
            if ladder_states[li].is_none() && st_t + eps >= *lt {
                ladder_states[li] = Some(evo.state.clone());
            }
        }
        if let Some(h) = hyper_hist.as_mut() {
            if st_t <= hyper_t_max {
                h.push(evo.state.clone());
            }
        }
        if cfg.monitors.transforms {
            rolling.push_back(evo.state.clone());
            if rolling.len() > window_len {
                rolling.pop_front();
            }
        }

        if step % cfg.monitors.stride == 0 || evo.state.t + eps >= t_end {
            let idx = record_row(&evo.state, &ledger, &mut bootstrap, &mut rows)?;
            let row = &rows[idx];
            suppsi_series.push((row.t, row.sup_psi));
            supv_series.push((row.t, row.sup_v));
            profile_series.push((row.t, row.profile.unwrap_or(0.0)));
            if cfg.dim == 3 {
                mass_in_series.push((row.t, row.mass_interior.unwrap()));
                mass_ex_series.push((row.t, row.mass_exterior.unwrap()));
            }
            if cfg.monitors.transforms {
                pending.push_back((step, idx));
            }
        }

        // resolve pending transform rows whose window is now centered
        if cfg.monitors.transforms && rolling.len() == window_len {
            while let Some(&(pstep, ridx)) = pending.front() {
                // center of the current rolling window is step - 4
                if pstep + 4 > step {
                    break;
                }
                if pstep + 4 < step {
                    pending.pop_front();
                    continue;
                }
                let states: Vec<SimState<R>> = rolling.iter().cloned().collect();
                let center = 4usize;
                if cfg.dim == 2 && evo.state.mass == 0.0 {
                    let (_, res_psi) = build_psi_tilde(&ops, &rep, &states, center)?;
                    let (_, res_v, _) = build_v_tilde(&ops, &rep, &states, center)?;
                    rows[ridx].res_psi_tilde = Some(res_psi);
                    rows[ridx].res_v_tilde = Some(res_v);
                    if cfg.monitors.wave_potential {
                        rows[ridx].res_wave_tilde =
                            Some(wave_tilde_residual(&ops, &rep, &states, center)?);
                        rows[ridx].err_wave_id =
                            Some(wave_identity_error(&ops, &rep, &states[center])?);
                    }
                }
                let (rp, rv) = pde_residual(&ops, &rep, &states[2..7])?;
                rows[ridx].res_pde_psi = Some(rp);
                rows[ridx].res_pde_v = Some(rv);
                pending.pop_front();
            }
        }

        if cfg.monitors.checkpoint_every > 0
            && step % cfg.monitors.checkpoint_every == 0
        {
            if let Some(dir) = out_dir {
                write_checkpoint(dir, &evo.state)?;
            }
        }
    }

    // decay fits
    let window = cfg
        .monitors
        .decay_window
        .unwrap_or([10.0f64.min(t_end * 0.5), t_end]);
    let in_window = |s: &[(f64, f64)]| -> Vec<(f64, f64)> {
        s.iter()
            .copied()
            .filter(|&(t, _)| t >= window[0] && t <= window[1])
            .collect()
    };
    let mut decay = Vec::new();
    for (name, series) in [
        ("sup_psi", &suppsi_series),
        ("sup_v", &supv_series),
        ("profile", &profile_series),
    ] {
        let samples = in_window(series);
        if let Ok((slope, err)) = decay_fit(&samples) {
            decay.push(DecayReport {
                observable: name.to_string(),
                window,
                exponent: slope,
                stderr: err,
                last_quarter_growth: last_quarter_growth(&samples),
                max_value: samples.iter().map(|&(_, v)| v).fold(0.0, f64::max),
            });
        }
    }
    if cfg.dim == 3 {
        for (name, series) in [
            ("mass_interior", &mass_in_series),
            ("mass_exterior", &mass_ex_series),
        ] {
            let samples = in_window(series);
            if !samples.is_empty() {
                decay.push(DecayReport {
                    observable: name.to_string(),
                    window,
                    exponent: f64::NAN,
                    stderr: f64::NAN,
                    last_quarter_growth: last_quarter_growth(&samples),
                    max_value: samples.iter().map(|&(_, v)| v).fold(0.0, f64::max),
                });
            }
        }
    }

    // scattering report
    let scattering = match (tails, split) {
        (Some(t), Some(s)) => {
            let norms: Vec<TailNorm<f64>> = t.tail_norms(&ops);
            let mut wreports = Vec::new();
            let mut decreasing = true;
            for (w, norm) in norms.iter().enumerate() {
                if w > 0 && norm.combined() >= norms[w - 1].combined() {
                    decreasing = false;
                }
                let mismatch = match &ladder_states[w] {
                    Some(stw) => free_flow_mismatch(&ops, &rep, stw, &evo.state)?,
                    None => f64::NAN,
                };
                wreports.push(WindowReport {
                    t_lo: norm.t_lo,
                    t_hi: norm.t_hi,
                    tail_dirac: norm.dirac,
                    tail_kg: norm.kg,
                    tail_combined: norm.combined(),
                    i_ex: s.i_ex[w],
                    i_in: s.i_in[w],
                    chain_constant: s.chain_constant(w, norm.combined()),
                    free_mismatch: mismatch,
                });
            }
            Some(ScatteringReport {
                transformed_sources: cfg.monitors.transformed_tails,
                windows: wreports,
                tails_strictly_decreasing: decreasing,
            })
        }
        _ => None,
    };

    // hyperboloid energies and slice exports
    let mut hyperboloid = Vec::new();
    if let Some(h) = hyper_hist.as_ref() {
        use crate::foliation::SlicePart;
        for &sv in &cfg.monitors.hyperboloid_s {
            let kg = crate::functionals::hyperboloid_energy(
                &ops,
                h,
                sv,
                SlicePart::Interior,
                None,
                1.0,
                0.0,
            )?;
            let dirac = crate::functionals::dirac_hyperboloid_energy(
                &rep,
                h,
                sv,
                SlicePart::Interior,
                None,
            )?;
            hyperboloid.push(HyperboloidRow {
                s: sv,
                kg_energy: kg.value,
                kg_forms_dev: kg.forms_max_rel_dev,
                dirac_energy: dirac,
            });
            if let Some(dir) = out_dir {
                write_slice_csv(dir, &rep, h, sv)?;
            }
        }
    }

    let balances = match ledger.as_ref() {
        Some(l) => Some(BalanceSummary {
            kg: l.kg_balance(&ops, &evo.state)?.into(),
            dirac: l.dirac_balance(&evo.state)?.into(),
            dirac_source_abs: l.dirac_source_abs,
        }),
        None => None,
    };

    let output = RunOutput {
        rows,
        scattering,
        hyperboloid,
        balances,
        decay,
        bootstrap_total: cfg.monitors.bootstrap.then(|| bootstrap.total()),
        bootstrap_last_quarter: cfg
            .monitors
            .bootstrap
            .then(|| bootstrap.last_quarter_fraction()),
        final_state: evo.state.clone(),
        source_imag: evo.diagnostics.source_imag,
        steps: evo.steps_taken,
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_report_csv(&dir.join("report.csv"), &output.rows)?;
        if let Some(sc) = &output.scattering {
            let f = std::fs::File::create(dir.join("scattering.json"))?;
            serde_json::to_writer_pretty(f, sc)
                .map_err(|e| Error::config(format!("cannot write scattering.json: {e}")))?;
        }
        if !output.hyperboloid.is_empty() {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("hyperboloid.csv"))?);
            writeln!(f, "s,kg_energy,kg_forms_dev,dirac_energy")?;
            for r in &output.hyperboloid {
                writeln!(
                    f,
                    "{:.12e},{:.12e},{:.12e},{:.12e}",
                    r.s, r.kg_energy, r.kg_forms_dev, r.dirac_energy
                )?;
            }
        }
        let f = std::fs::File::create(dir.join("decay.json"))?;
        serde_json::to_writer_pretty(f, &output.decay)
            .map_err(|e| Error::config(format!("cannot write decay.json: {e}")))?;
        if let Some(b) = &output.balances {
            let f = std::fs::File::create(dir.join("balance.json"))?;
            serde_json::to_writer_pretty(f, b)
                .map_err(|e| Error::config(format!("cannot write balance.json: {e}")))?;
        }
        write_checkpoint(dir, &output.final_state)?;
    }
    Ok(output)
}

/// Interior-slice export: node positions, lifted times, interpolated
/// field values.
fn write_slice_csv(
    dir: &Path,
    rep: &crate::clifford::GammaRep<R>,
    history: &crate::solver::History<R>,
    s: f64,
) -> Result<()> {
    use crate::foliation::{interp_on_slice, slice_geometry, SlicePart};
    let grid = history.states[0].grid();
    let slice = slice_geometry(grid, s, SlicePart::Interior, None)?;
    let v = interp_on_slice(history, &slice, 1, |st| Ok(st.v.clone()))?;
    let psi = interp_on_slice(history, &slice, rep.n0, |st| Ok(st.psi.clone()))?;
    let path = dir.join(format!("slice_s{s:.3}.csv"));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    let mut header = String::new();
    for a in 0..grid.dim {
        header.push_str(&format!("x{},", a + 1));
    }
    header.push_str("t,v");
    for c in 0..rep.n0 {
        header.push_str(&format!(",psi{}_re,psi{}_im", c, c));
    }
    writeln!(f, "{header}")?;
    for (node, &(idx, t)) in slice.nodes.iter().enumerate() {
        let x = grid.position(idx);
        let mut line = String::new();
        for a in 0..grid.dim {
            line.push_str(&format!("{:.9e},", x[a]));
        }
        line.push_str(&format!("{:.9e},{:.9e}", t, v.at(0, node).re));
        for c in 0..rep.n0 {
            let z = psi.at(c, node);
            line.push_str(&format!(",{:.9e},{:.9e}", z.re, z.im));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn checkpoint_name(t: f64) -> String {
    format!("checkpoint_t{t:.4}.dkg")
}

pub fn write_checkpoint(dir: &Path, state: &SimState<R>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(checkpoint_name(state.t));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_state(&mut f, state)?;
    f.flush()?;
    Ok(path)
}

pub fn read_checkpoint(path: &Path) -> Result<SimState<R>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    crate::solver::read_state(&mut f)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Column schema is documented in `docs/report-columns.md`.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "t,sup_psi,sup_v,charge,E_KG,E_ex_D,E_ex_1_delta,Y_D,Y_1_delta,ghost_D,ghost_1,RD_sq,R1_sq,profile,M_in,M_ex,l_tau,int_l,res_psi_tilde,res_v_tilde,res_wave_tilde,err_wave_id,res_pde_psi,res_pde_v"
    )?;
    for r in rows {
        writeln!(
            f,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.sup_psi,
            r.sup_v,
            r.charge,
            r.e_kg,
            fmt_opt(r.e_ex_dirac),
            fmt_opt(r.e_ex_kg),
            fmt_opt(r.y_dirac),
            fmt_opt(r.y_kg),
            fmt_opt(r.ghost_dirac),
            fmt_opt(r.ghost_kg),
            fmt_opt(r.cone_dirac),
            fmt_opt(r.cone_kg),
            fmt_opt(r.profile),
            fmt_opt(r.mass_interior),
            fmt_opt(r.mass_exterior),
            fmt_opt(r.l_density),
            fmt_opt(r.l_integral),
            fmt_opt(r.res_psi_tilde),
            fmt_opt(r.res_v_tilde),
            fmt_opt(r.res_wave_tilde),
            fmt_opt(r.err_wave_id),
            fmt_opt(r.res_pde_psi),
            fmt_opt(r.res_pde_v),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Convergence studies
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConvergeMode {
    /// Error of the evolved free solution against the exact propagator.
    Free,
    /// Stencil equation residuals and transform residuals on a coupled
    /// run under joint `(dx, dt)` refinement.
    Coupled,
    /// Manufactured analytic history: the stencil residual against the
    /// exact forcing norm.
    Mms,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub points: usize,
    pub dt: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub mode: String,
    pub quantity_names: Vec<String>,
    pub rows: Vec<ConvergenceRow>,
    /// Fitted order between the last two levels, per quantity. `None`
    /// marks a degenerate (zero-error) study.
    pub orders: Vec<Option<f64>>,
}

pub fn convergence_study(
    cfg: &ConfigFile,
    levels: usize,
    mode: ConvergeMode,
) -> Result<ConvergenceTable> {
    cfg.validate()?;
    if levels < 2 {
        return Err(Error::config("convergence study needs >= 2 levels"));
    }
    let rep = build_gamma::<R>(cfg.dim)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let names: Vec<String> = match mode {
        ConvergeMode::Free => vec!["kg_error".into(), "dirac_error".into()],
        ConvergeMode::Coupled => vec![
            "res_pde_psi".into(),
            "res_pde_v".into(),
            "res_psi_tilde".into(),
            "res_v_tilde".into(),
        ],
        ConvergeMode::Mms => vec!["residual_defect_psi".into(), "residual_defect_v".into()],
    };
    for level in 0..levels {
        let factor = 1usize << level;
        let points = cfg.grid.points * factor;
        let grid = GridSpec::new(cfg.dim, points, cfg.grid.half_width)?;
        let ops = SpectralOps::new(grid);
        let dt = cfg.time.dt_factor * grid.dx();
        let errors = match mode {
            ConvergeMode::Free => {
                let st = initial_state(
                    grid,
                    &rep,
                    cfg.mass,
                    InitialData {
                        amplitude: cfg.data.amplitude,
                        width: cfg.data.width,
                    },
                    false,
                );
                let psi0 = st.psi.clone();
                let v0 = st.v.clone();
                let vt0 = st.vt.clone();
                let t0 = st.t;
                let mut evo =
                    Evolution::new(SpectralOps::new(grid), rep.clone(), st, dt, Coupling::Free)?;
                evo.run_until(cfg.time.t_end, |_, _, _| Ok(()))?;
                let elapsed = evo.state.t - t0;
                let psi_exact =
                    crate::scattering::free_dirac_evolve(&ops, &rep, &psi0, elapsed, cfg.mass)?;
                let (v_exact, _) = crate::scattering::free_kg_evolve(&ops, &v0, &vt0, elapsed)?;
                let mut dpsi = psi_exact;
                dpsi.axpy(Complex::new(-1.0, 0.0), &evo.state.psi);
                let mut dv = v_exact;
                dv.axpy(Complex::new(-1.0, 0.0), &evo.state.v);
                vec![dv.l2_norm(), dpsi.l2_norm()]
            }
            ConvergeMode::Coupled => {
                let st = initial_state(
                    grid,
                    &rep,
                    cfg.mass,
                    InitialData {
                        amplitude: cfg.data.amplitude,
                        width: cfg.data.width,
                    },
                    false,
                );
                let mut evo =
                    Evolution::new(SpectralOps::new(grid), rep.clone(), st, dt, Coupling::Coupled)?;
                let mut hist = crate::solver::History::new();
                hist.push(evo.state.clone());
                evo.run_until(cfg.time.t_end, |_, next, _| {
                    hist.push(next.clone());
                    Ok(())
                })?;
                let i = hist.index_at(2.0 + 0.5 * (cfg.time.t_end - 2.0))?;
                let (rp, rv) = pde_residual(&ops, &rep, hist.window(i, 2)?)?;
                if cfg.dim == 2 && cfg.mass == 0.0 {
                    let (_, tp) = build_psi_tilde(&ops, &rep, &hist.states, i)?;
                    let (_, tv, _) = build_v_tilde(&ops, &rep, &hist.states, i)?;
                    vec![rp, rv, tp, tv]
                } else {
                    vec![rp, rv, f64::NAN, f64::NAN]
                }
            }
            ConvergeMode::Mms => {
                // analytic non-solution history at this (dx, dt)
                let mk = |t: f64| -> SimState<R> {
                    let mut st = SimState::zeros(grid, rep.n0, t, cfg.mass);
                    for (i, z) in st.psi.plane_mut(0).iter_mut().enumerate() {
                        let x = grid.position(i);
                        let r2: f64 = x[..grid.dim].iter().map(|v| v * v).sum();
                        *z = Complex::new((0.9 * t).cos(), (0.6 * t).sin()) * (-r2 / 6.0).exp();
                    }
                    st.v = GridFn::scalar_from(grid, |x| {
                        let r2: f64 = x.iter().map(|v| v * v).sum();
                        (0.8 * t).sin() * (-r2 / 8.0).exp()
                    });
                    st.vt = GridFn::scalar_from(grid, |x| {
                        let r2: f64 = x.iter().map(|v| v * v).sum();
                        0.8 * (0.8 * t).cos() * (-r2 / 8.0).exp()
                    });
                    st
                };
                let dt_level = cfg.time.dt_factor * grid.dx();
                let states: Vec<SimState<R>> =
                    (0..5).map(|j| mk(3.0 + dt_level * (j as f64 - 2.0))).collect();
                let (rp, rv) = pde_residual(&ops, &rep, &states)?;
                // exact forcing norms: evaluate the analytic defect on a
                // fixed fine reference grid (independent of the level)
                let (fp, fv) = mms_exact_forcing(cfg, 3.0)?;
                vec![(rp - fp).abs(), (rv - fv).abs()]
            }
        };
        rows.push(ConvergenceRow {
            level,
            points,
            dt,
            errors,
        });
    }
    let n_quant = names.len();
    let mut orders = Vec::new();
    for q in 0..n_quant {
        let e0 = rows[rows.len() - 2].errors[q];
        let e1 = rows[rows.len() - 1].errors[q];
        if e0.is_finite() && e1 > 0.0 && e0 > 0.0 {
            orders.push(Some((e0 / e1).log2()));
        } else {
            orders.push(None);
        }
    }
    Ok(ConvergenceTable {
        mode: format!("{mode:?}"),
        quantity_names: names,
        rows,
        orders,
    })
}

/// Analytic forcing norms of the manufactured solution used by the MMS
/// study, quadrature on a fixed fine grid.
fn mms_exact_forcing(cfg: &ConfigFile, t: f64) -> Result<(f64, f64)> {
    let rep = build_gamma::<R>(cfg.dim)?;
    let fine = GridSpec::new(cfg.dim, 256.min(cfg.grid.points * 4), cfg.grid.half_width)?;
    let ops = SpectralOps::new(fine);
    // build the analytic state and differentiate exactly in time
    let mut st = SimState::zeros(fine, rep.n0, t, cfg.mass);
    let mut psi_t = GridFn::zeros(fine, rep.n0);
    for i in 0..fine.nodes() {
        let x = fine.position(i);
        let r2: f64 = x[..fine.dim].iter().map(|v| v * v).sum();
        let e = (-r2 / 6.0f64).exp();
        st.psi
            .set(0, i, Complex::new((0.9 * t).cos(), (0.6 * t).sin()) * e);
        psi_t.set(
            0,
            i,
            Complex::new(-0.9 * (0.9 * t).sin(), 0.6 * (0.6 * t).cos()) * e,
        );
    }
    st.v = GridFn::scalar_from(fine, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (0.8 * t).sin() * (-r2 / 8.0).exp()
    });
    st.vt = GridFn::scalar_from(fine, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        0.8 * (0.8 * t).cos() * (-r2 / 8.0).exp()
    });
    let vtt = GridFn::scalar_from(fine, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        -0.64 * (0.8 * t).sin() * (-r2 / 8.0).exp()
    });
    // psi defect: i g^0 psi_t + i g^a d_a psi + M psi - v psi
    let mut defect = rep.apply_matrix_field(rep.gamma(0), &psi_t);
    defect.scale(Complex::new(0.0, 1.0));
    for a in 1..=rep.dim {
        let da = ops.derivative(&st.psi, a - 1)?;
        let mut term = rep.apply_matrix_field(rep.gamma(a), &da);
        term.scale(Complex::new(0.0, 1.0));
        defect.axpy(Complex::new(1.0, 0.0), &term);
    }
    if cfg.mass != 0.0 {
        defect.axpy(Complex::new(cfg.mass, 0.0), &st.psi);
    }
    let vpsi = mul_real_scalar(&st.v, &st.psi);
    defect.axpy(Complex::new(-1.0, 0.0), &vpsi);
    let fp = defect.l2_norm();
    // v defect: v_tt - Lap v + v - psi* g0 psi
    let mut dv = vtt;
    let lap = ops.laplacian(&st.v)?;
    dv.axpy(Complex::new(-1.0, 0.0), &lap);
    dv.axpy(Complex::new(1.0, 0.0), &st.v);
    let dens = gamma0_pair_density(&rep, &st.psi, &st.psi);
    dv.axpy(Complex::new(-1.0, 0.0), &dens);
    let fv = dv.l2_norm();
    Ok((fp, fv))
}
