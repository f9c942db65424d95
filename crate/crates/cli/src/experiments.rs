//! Experiment runners. Each writes its artifacts into a [`RunDir`] and
//! returns a JSON summary that is also echoed into the manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fockbath_core::chaos::{
    diagonal_ensemble_occupation, eigensolve_bath, eigenstate_profile, mixing_scales, offdiag_occupation_stats,
    occupation_histogram, window_around, BathEigen, GaussianFit,
};
use fockbath_core::dynamics::{Column, ProtocolRecord};
use fockbath_core::hamiltonian::{build_bath_factor, build_full};
use fockbath_core::observables::{fit_exponential, Envelope, ExpFit};
use fockbath_core::orbitals::{hubbard_params, OrbitalSet, ProbeTrap};
use fockbath_core::stochastic::{simulate_dephasing, DephasingRecord, MeanFieldParams};
use fockbath_core::{run_protocol, BasisIndex, ModelSpec, TimeSeries};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::RunDir;
use crate::plot;

/// What a subcommand runs, independent of the preset that configured it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Runner {
    Orbitals,
    Evolve,
    Chaos,
    Stochastic,
    Sweep,
}

impl Runner {
    pub fn for_experiment(e: Experiment) -> Self {
        match e {
            Experiment::Fig2 | Experiment::Fig3 => Runner::Evolve,
            Experiment::Fig4 | Experiment::Fig5 => Runner::Chaos,
            Experiment::Stochastic => Runner::Stochastic,
            Experiment::Orbitals => Runner::Orbitals,
            Experiment::Sweep => Runner::Sweep,
        }
    }
}

/// Completed artifact bundle.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub summary: Value,
}

/// Run into `out`; partial output is removed on failure.
pub fn run(runner: Runner, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut dir = RunDir::create(out, cfg)?;
    let start = Instant::now();
    let mut summary = match runner {
        Runner::Orbitals => orbitals(cfg, &mut dir)?,
        Runner::Evolve => evolve(cfg, &mut dir)?,
        Runner::Chaos => chaos(cfg, &mut dir)?,
        Runner::Stochastic => stochastic(cfg, &mut dir)?,
        Runner::Sweep => sweep(cfg, &mut dir)?,
    };
    summary["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    dir.json("summary.json", &summary)?;
    let dir = dir.finish(cfg, summary.clone())?;
    Ok(Outcome { dir, summary })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

// ---------------------------------------------------------------- orbitals

fn orbitals(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let (pot, grid) = cfg.orbital_inputs()?;
    let mut traps = serde_json::Map::new();
    let mut chosen = None;
    for trap in [ProbeTrap::MassScaled, ProbeTrap::Shared] {
        let start = Instant::now();
        let orb = OrbitalSet::compute(&pot, &grid, cfg.mass_ratio, trap)?;
        let elapsed = start.elapsed().as_secs_f64();
        let p = hubbard_params(&orb, 1.0, 0.0);
        let name = serde_json::to_value(trap)?.as_str().unwrap_or("trap").to_string();
        traps.insert(
            name,
            json!({
                "j_s": p.j_s,
                "probe_energies": orb.probe_energies,
                "orthonormality_error": orb.orthonormality_error(),
                "solve_time_s": elapsed,
            }),
        );
        if trap == cfg.probe_trap {
            chosen = Some((orb, p, elapsed));
        }
    }
    let (orb, p, elapsed) = chosen.expect("configured trap is one of the two variants");
    let probe_pot = orb.probe_potential;
    let rows = (0..grid.n_points).map(|i| {
        let x = grid.x(i);
        vec![
            x,
            pot.value(x),
            probe_pot.value(x),
            orb.bath[0][0][i],
            orb.bath[0][1][i],
            orb.bath[1][0][i],
            orb.bath[1][1][i],
            orb.probe[0][i],
            orb.probe[1][i],
        ]
    });
    dir.csv("orbitals.csv", &["x", "V", "V_probe", "phiL0", "phiL1", "phiR0", "phiR1", "chiL", "chiR"], rows)?;
    dir.json("coupling_tensor.json", &p.c)?;
    if cfg.plots {
        let x = grid.points();
        let cols: Vec<Vec<f64>> = [&orb.bath[0][0], &orb.bath[0][1], &orb.bath[1][0], &orb.bath[1][1]]
            .iter()
            .map(|v| v.to_vec())
            .collect();
        let labels = ["phiL0", "phiL1", "phiR0", "phiR1"];
        let series: Vec<(&str, &[f64])> = labels.iter().copied().zip(cols.iter().map(|v| v.as_slice())).collect();
        dir.svg("orbitals.svg", &plot::line_plot("localized bath orbitals", "x / l_ho", &x, &series))?;
    }
    let params = json!({
        "j": p.j,
        "e": p.e,
        "j_s": p.j_s,
        "bath_energies": orb.bath_energies,
        "probe_trap": cfg.probe_trap,
        "right_fraction_l0": orb.right_fraction(&orb.bath[0][0]),
        "right_fraction_l1": orb.right_fraction(&orb.bath[0][1]),
        "orthonormality_error": orb.orthonormality_error(),
        "coupling_hermiticity_error": p.c.hermiticity_error(),
        "solve_time_s": elapsed,
        "traps": traps,
    });
    dir.json("hubbard_params.json", &params)?;
    Ok(params)
}

// ------------------------------------------------------------------ evolve

#[derive(Debug, Clone, Serialize)]
struct FitSummary {
    rate: f64,
    /// Standard error of the rate from the regression residuals.
    rate_se: f64,
    amplitude: f64,
    r_squared: f64,
    points: usize,
    window: [f64; 2],
}

impl FitSummary {
    fn new(f: ExpFit) -> Self {
        let n = f.points as f64;
        let se = if f.points > 2 && f.r_squared > 0.0 {
            f.rate.abs() * ((1.0 / f.r_squared - 1.0).max(0.0) / (n - 2.0)).sqrt()
        } else {
            f64::NAN
        };
        Self { rate: f.rate, rate_se: se, amplitude: f.amplitude, r_squared: f.r_squared, points: f.points, window: f.window }
    }
}

fn fit_json(series: &TimeSeries, window: [f64; 2], envelope: Envelope) -> Value {
    match fit_exponential(series, window, envelope) {
        Ok(f) => serde_json::to_value(FitSummary::new(f)).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn histogram_json(fit: &Result<GaussianFit, fockbath_core::Error>) -> Value {
    match fit {
        Ok(f) => json!({
            "mean": f.mean,
            "variance": f.variance,
            "std": f.std(),
            "samples": f.samples,
            "effective_samples": f.effective_samples,
            "chi_square": f.chi_square,
            "dof": f.dof,
            "p_value": f.p_value,
            "bimodality": f.bimodality,
            "unimodal": f.is_unimodal(),
            "gaussian_at_0_01": f.is_gaussian(0.01),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Purity minimum after the switch and the largest value after it.
fn first_minimum_and_revival(series: &TimeSeries, t_switch: f64) -> Option<(f64, f64, f64)> {
    let v = &series.values;
    let start = series.t.iter().position(|&t| t > t_switch)?;
    let i = (start.max(1)..v.len().saturating_sub(1)).find(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])?;
    let revival = v[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((series.t[i], v[i], revival))
}

fn drifts(record: &ProtocolRecord) -> (f64, f64) {
    let norm = record.samples.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max);
    let after: Vec<f64> = record.samples.iter().filter(|s| s.t > record.t_switch).map(|s| s.energy).collect();
    let energy = match after.first() {
        Some(&e0) => after.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1e-300),
        None => 0.0,
    };
    (norm, energy)
}

const LEVELS: [(usize, usize, &str); 4] = [(0, 0, "nL0"), (0, 1, "nL1"), (1, 0, "nR0"), (1, 1, "nR1")];

/// Protocol run with series, fits and histograms.
fn evolve(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let spec = cfg.model()?;
    spec.validate()?;
    let protocol = cfg.protocol();
    let start = Instant::now();
    let record = run_protocol(&spec, &protocol)?;
    let elapsed = start.elapsed().as_secs_f64();

    let rows = record.samples.iter().map(|s| {
        vec![s.t, s.levels[0], s.levels[1], s.levels[2], s.levels[3], s.p_left, s.p_right, s.purity, s.energy]
    });
    dir.csv("series.csv", &["t", "nL0", "nL1", "nR0", "nR1", "pL", "pR", "purity", "energy"], rows)?;

    let purity = record.series(Column::Purity);
    let excess = record.series(Column::PurityExcess);
    let imbalance = record.series(Column::Imbalance);
    let window = cfg.histogram_window();
    let mut histograms = serde_json::Map::new();
    for &(r, l, label) in LEVELS.iter().filter(|(_, l, _)| *l < spec.bands) {
        let series = record.series(Column::Level(r, l));
        let fit = occupation_histogram(&series, window);
        if let Ok(f) = &fit {
            let rows = f.bins.iter().map(|b| vec![b.center, b.width, b.count as f64, b.density, b.gaussian]);
            dir.csv(&format!("histogram_{label}.csv"), &["center", "width", "count", "density", "gaussian"], rows)?;
            if cfg.plots {
                dir.svg(&format!("histogram_{label}.svg"), &plot::histogram_plot(&format!("{label} / N"), "occupation per atom", &f.bins))?;
            }
        }
        histograms.insert(label.into(), histogram_json(&fit));
    }

    let (norm_drift, energy_drift) = drifts(&record);
    let revival = first_minimum_and_revival(&purity, protocol.t_switch);
    let final_purity = purity.mean_over(cfg.final_window[0], cfg.final_window[1]);
    let gamma = fit_json(&excess, cfg.fit_window, Envelope::Peaks);
    let summary = json!({
        "n_atoms": spec.n_atoms,
        "bands": spec.bands,
        "dim": record.dim,
        "propagator": if record.dense { "dense" } else { "krylov" },
        "initial_bath": protocol.initial_bath,
        "gamma": gamma.get("rate").cloned().unwrap_or(Value::Null),
        "gamma_fit": gamma,
        "purity_raw_fit": fit_json(&excess, cfg.fit_window, Envelope::Raw),
        "imbalance_fit": fit_json(&imbalance, cfg.fit_window, Envelope::Peaks),
        "final_purity": final_purity.map(finite_or_null).unwrap_or(Value::Null),
        "min_purity": purity.values.iter().copied().fold(f64::INFINITY, f64::min),
        "first_minimum": revival.map(|(t, v, _)| json!({ "t": t, "purity": v })),
        "max_purity_after_first_minimum": revival.map(|(_, _, r)| finite_or_null(r)),
        "histogram_window": window,
        "histograms": histograms,
        "norm_drift": norm_drift,
        "energy_drift": energy_drift,
        "propagation_time_s": elapsed,
    });

    if cfg.plots {
        let t = record.times();
        dir.svg(
            "purity.svg",
            &plot::line_plot("probe purity", "t omega0", &t, &[("purity", &purity.values), ("pL", &record.series(Column::PLeft).values)]),
        )?;
        let levels: Vec<(&str, Vec<f64>)> = LEVELS
            .iter()
            .filter(|(_, l, _)| *l < spec.bands)
            .map(|&(r, l, label)| (label, record.series(Column::Level(r, l)).values))
            .collect();
        let series: Vec<(&str, &[f64])> = levels.iter().map(|(l, v)| (*l, v.as_slice())).collect();
        dir.svg("levels.svg", &plot::line_plot("bath level occupations per atom", "t omega0", &t, &series))?;
    }
    if cfg.dump_operator {
        dump_operator(&spec, dir)?;
    }
    Ok(summary)
}

const DUMP_LIMIT: usize = 20_000;

fn dump_operator(spec: &ModelSpec, dir: &mut RunDir) -> Result<(), CliError> {
    let basis = spec.basis()?;
    if basis.dim() > DUMP_LIMIT {
        return Err(CliError::Config(format!("dump_operator: dimension {} exceeds {DUMP_LIMIT}", basis.dim())));
    }
    let h = build_full(spec, &basis)?;
    dir.raw("hamiltonian.csv", |out| h.write_csv(out))
}

// ------------------------------------------------------------------- chaos

struct ChaosModel {
    basis: BasisIndex,
    eig: BathEigen,
    alpha: usize,
    initial_energy: f64,
}

fn chaos_model(spec: &ModelSpec, ket: &[u16], cap: usize) -> Result<ChaosModel, CliError> {
    let basis = spec.basis()?;
    let h = build_bath_factor(spec, &basis)?;
    let eig = eigensolve_bath(&h, cap)?;
    let n0 = basis.rank_bath(ket)?;
    let initial_energy = h.get(n0, n0);
    let alpha = eig.closest_to(initial_energy);
    Ok(ChaosModel { basis, eig, alpha, initial_energy })
}

fn participation_ratios(eig: &BathEigen) -> Vec<f64> {
    (0..eig.dim())
        .into_par_iter()
        .map(|a| {
            let ipr: f64 = (0..eig.dim()).map(|n| eig.component(n, a).powi(4)).sum();
            1.0 / ipr
        })
        .collect()
}

fn mid_third_mean(values: &[f64]) -> f64 {
    let (lo, hi) = (values.len() / 3, 2 * values.len() / 3);
    let mid = &values[lo..hi.max(lo + 1).min(values.len())];
    mid.iter().sum::<f64>() / mid.len() as f64
}

/// Eigenstate structure, off-diagonal statistics and (optionally) the
/// `U⁰¹ = 0` contrast and the thermalization run.
fn chaos(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let spec = cfg.model()?;
    spec.validate()?;
    let ket = cfg.initial_ket();
    let start = Instant::now();
    let model = chaos_model(&spec, &ket, cfg.eigen_cap)?;
    let eig = &model.eig;
    let pr = participation_ratios(eig);
    let profile = eigenstate_profile(eig, model.alpha)?;
    dir.csv("eigenprofile.csv", &["eps_n", "c_n"], profile.components.iter().map(|&(e, c)| vec![e, c]))?;
    dir.csv(
        "spectrum.csv",
        &["alpha", "energy", "participation_ratio"],
        eig.energies.iter().zip(&pr).enumerate().map(|(a, (e, p))| vec![a as f64, *e, *p]),
    )?;

    let window = window_around(eig, model.alpha, cfg.window_states.min(eig.dim()));
    let mut offdiag = serde_json::Map::new();
    let mut relaxed = serde_json::Map::new();
    for &(r, l, label) in LEVELS.iter().filter(|(_, l, _)| *l < spec.bands) {
        let mode = model.basis.mode(r, l).expect("level exists");
        let stats = offdiag_occupation_stats(eig, &model.basis, mode, window);
        offdiag.insert(
            label.into(),
            match stats {
                Ok(s) => json!({
                    "states": s.states,
                    "pairs": s.pairs,
                    "mean": s.mean,
                    "std": s.std,
                    "std_error": s.std_error,
                    "jackknife_error": s.jackknife_error,
                    "mean_abs": s.mean_abs,
                    "diagonal_mean": s.diagonal_mean,
                    "consistent_with_zero_3sigma": s.mean_consistent_with_zero(3.0),
                }),
                Err(e) => json!({ "error": e.to_string() }),
            },
        );
        let n = diagonal_ensemble_occupation(eig, &model.basis, &ket, mode)?;
        relaxed.insert(label.into(), json!(n / spec.n_atoms as f64));
    }
    let scales = if spec.bands == 2 { serde_json::to_value(mixing_scales(&spec, cfg.eigen_cap)?)? } else { Value::Null };

    let mut summary = json!({
        "n_atoms": spec.n_atoms,
        "bath_dim": eig.dim(),
        "blocks": eig.blocks,
        "initial_bath": ket,
        "initial_energy": model.initial_energy,
        "state": {
            "index": model.alpha,
            "energy": profile.energy,
            "participation_ratio": profile.participation_ratio,
            "energy_centroid": profile.energy_centroid,
            "energy_width": profile.energy_width,
        },
        "mid_third_mean_pr": mid_third_mean(&pr),
        "offdiag_window": window,
        "offdiag": offdiag,
        "diagonal_ensemble": relaxed,
        "mixing_scales": scales,
    });

    if cfg.chaos_contrast && spec.bands == 2 {
        let mut free = spec.clone();
        free.params.u01 = 0.0;
        let m0 = chaos_model(&free, &ket, cfg.eigen_cap)?;
        let pr0 = participation_ratios(&m0.eig);
        let p0 = eigenstate_profile(&m0.eig, m0.alpha)?;
        dir.csv("eigenprofile_u01_0.csv", &["eps_n", "c_n"], p0.components.iter().map(|&(e, c)| vec![e, c]))?;
        summary["contrast"] = json!({
            "state": {
                "index": m0.alpha,
                "energy": p0.energy,
                "participation_ratio": p0.participation_ratio,
                "energy_width": p0.energy_width,
            },
            "mid_third_mean_pr": mid_third_mean(&pr0),
            "pr_ratio": profile.participation_ratio / p0.participation_ratio,
            "mid_third_ratio": mid_third_mean(&pr) / mid_third_mean(&pr0),
        });
    }
    if cfg.plots {
        let (e, c): (Vec<f64>, Vec<f64>) = profile.components.iter().copied().unzip();
        let mut order: Vec<usize> = (0..e.len()).collect();
        order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
        let es: Vec<f64> = order.iter().map(|&i| e[i]).collect();
        let cs: Vec<f64> = order.iter().map(|&i| c[i]).collect();
        dir.svg("eigenprofile.svg", &plot::line_plot("eigenstate components", "eps_n / hbar omega0", &es, &[("C_n", &cs)]))?;
    }
    summary["eigen_time_s"] = json!(start.elapsed().as_secs_f64());
    if cfg.chaos_dynamics {
        summary["dynamics"] = evolve(cfg, dir)?;
    }
    Ok(summary)
}

// -------------------------------------------------------------- stochastic

fn stochastic_record(cfg: &ExperimentConfig) -> Result<DephasingRecord, CliError> {
    let noise = cfg.noise();
    let (t_end, dt, every) = cfg.stochastic_grid();
    let j_s = match cfg.j_s_eff {
        Some(j) => j,
        None => cfg.hubbard()?.j_s,
    };
    let mf = MeanFieldParams { eps: [cfg.eps0, cfg.eps0], ..MeanFieldParams::free(j_s) };
    Ok(simulate_dephasing(&mf, &noise, cfg.noise_coupling, t_end, dt, every)?)
}

/// Largest `|offdiag − e^{−Θ/4}| / se` over the recorded samples after `t = 0`.
pub fn max_checkpoint_z(record: &DephasingRecord) -> f64 {
    record
        .samples
        .iter()
        .filter(|s| s.t > 0.0 && s.offdiag_se > 0.0)
        .map(|s| (s.offdiag_abs - (-s.theta_exact / 4.0).exp()).abs() / s.offdiag_se)
        .fold(0.0, f64::max)
}

fn stochastic(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let record = stochastic_record(cfg)?;
    let noise = record.noise;
    let theta = record.theta_estimate();
    let rows = record.samples.iter().zip(&theta).map(|(s, (_, th))| {
        vec![s.t, s.p_left, s.offdiag_abs, s.offdiag_se, s.purity, s.theta_exact, s.theta_linear, *th]
    });
    dir.csv(
        "stochastic.csv",
        &["t", "pL_mean", "offdiag_abs", "offdiag_se", "purity", "theta_exact", "theta_linear", "theta_mc"],
        rows,
    )?;
    let t_end = record.samples.last().map_or(0.0, |s| s.t);
    let fit_window = [2.0 * noise.tau_c, t_end];
    let slope = if t_end > fit_window[0] { record.theta_slope(fit_window[0], fit_window[1]).ok() } else { None };
    if cfg.plots {
        let t: Vec<f64> = record.samples.iter().map(|s| s.t).collect();
        let off: Vec<f64> = record.samples.iter().map(|s| s.offdiag_abs).collect();
        let exact: Vec<f64> = record.samples.iter().map(|s| (-s.theta_exact / 4.0).exp()).collect();
        let pur: Vec<f64> = record.samples.iter().map(|s| s.purity).collect();
        dir.svg(
            "stochastic.svg",
            &plot::line_plot("ensemble coherence", "t omega0", &t, &[("|rho_LR| MC", &off), ("exp(-Theta/4)", &exact), ("purity", &pur)]),
        )?;
    }
    Ok(json!({
        "noise": noise,
        "coupling": record.coupling,
        "theta_slope_exact": noise.theta_slope(),
        "theta_slope_fit": slope,
        "theta_fit_window": fit_window,
        "damping_rate": slope,
        "max_checkpoint_z": max_checkpoint_z(&record),
        "final": record.samples.last(),
    }))
}

// ------------------------------------------------------------------- sweep

/// One row of a sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub gamma: Option<f64>,
    pub gamma_se: Option<f64>,
    pub histogram_width: Option<f64>,
    pub participation_ratio: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

fn sweep_point(cfg: &ExperimentConfig, axis: &str, value: f64, out: &Path) -> SweepRow {
    let start = Instant::now();
    let result = (|| -> Result<(Value, Option<f64>), CliError> {
        let mut point = cfg.with(axis, value)?;
        point.experiment = Experiment::Fig2;
        point.validate()?;
        let outcome = run(Runner::Evolve, &point, out)?;
        let spec = point.model()?;
        let pr = if spec.basis()?.dim_bath() <= cfg.sweep_pr_cap {
            let m = chaos_model(&spec, &point.initial_ket(), cfg.sweep_pr_cap)?;
            Some(eigenstate_profile(&m.eig, m.alpha)?.participation_ratio)
        } else {
            None
        };
        Ok((outcome.summary, pr))
    })();
    let wall = start.elapsed().as_secs_f64();
    match result {
        Ok((s, pr)) => SweepRow {
            value,
            gamma: s["gamma_fit"]["rate"].as_f64(),
            gamma_se: s["gamma_fit"]["rate_se"].as_f64(),
            histogram_width: s["histograms"]["nL0"]["std"].as_f64(),
            participation_ratio: pr,
            wall_time_s: wall,
            error: None,
        },
        Err(e) => SweepRow {
            value,
            gamma: None,
            gamma_se: None,
            histogram_width: None,
            participation_ratio: None,
            wall_time_s: wall,
            error: Some(e.to_string()),
        },
    }
}

/// Sweep points run concurrently in `point_KK/` subdirectories; the table
/// is assembled in input order.
fn sweep(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Value, CliError> {
    let axis = cfg.sweep_axis.clone().ok_or_else(|| CliError::Config("sweep_axis is not set".into()))?;
    let base = dir.path().to_path_buf();
    let rows: Vec<SweepRow> = cfg
        .sweep_values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| sweep_point(cfg, &axis, v, &base.join(format!("point_{k:02}"))))
        .collect();
    // Wall times live in the JSON table only, so the CSV is reproducible.
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    dir.csv(
        "sweep.csv",
        &["value", "gamma", "gamma_se", "histogram_width", "participation_ratio"],
        rows.iter().map(|r| vec![r.value, opt(r.gamma), opt(r.gamma_se), opt(r.histogram_width), opt(r.participation_ratio)]),
    )?;
    let widths: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.value, r.histogram_width?))).collect();
    let exponent = (axis == "n_atoms" && widths.len() >= 2).then(|| power_law_exponent(&widths));
    Ok(json!({
        "axis": axis,
        "rows": rows,
        "width_exponent": exponent,
        "failures": rows.iter().filter(|r| r.error.is_some()).count(),
    }))
}

/// Exponent `b` of `y ≈ a x^b` by log-log least squares.
pub fn power_law_exponent(points: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    fockbath_core::observables::linear_regression(&x, &y).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use fockbath_core::series::TimeSeries;

    #[test]
    fn revival_detection() {
        let t: Vec<f64> = (0..200).map(|k| k as f64).collect();
        let v: Vec<f64> = t.iter().map(|&x| if x <= 10.0 { 1.0 } else { 0.75 + 0.2 * (0.1 * (x - 10.0)).cos() }).collect();
        let s = TimeSeries::new("p", t, v);
        let (tm, vm, rev) = first_minimum_and_revival(&s, 10.0).unwrap();
        assert!((tm - 41.0).abs() < 1.5, "{tm}");
        assert!((vm - 0.55).abs() < 1e-3);
        assert!(rev > 0.94);
    }

    #[test]
    fn power_law_recovers_exponent() {
        let pts: Vec<(f64, f64)> = [12.0, 20.0, 30.0, 48.0].iter().map(|&n: &f64| (n, 0.3 * n.powf(-0.5))).collect();
        assert!((power_law_exponent(&pts) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_standard_error_vanishes_for_exact_data() {
        let f = ExpFit { rate: 0.01, amplitude: 1.0, r_squared: 1.0, points: 10, window: [0.0, 1.0] };
        assert_eq!(FitSummary::new(f).rate_se, 0.0);
    }
}
