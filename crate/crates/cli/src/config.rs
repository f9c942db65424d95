//! Experiment configuration: preset defaults, JSON files and `key=value`
//! overrides, merged in that order. Unknown keys are rejected.

use std::path::Path;

use fockbath_core::chaos::{scaled_reference_ket, DEFAULT_EIGEN_CAP};
use fockbath_core::dynamics::{KrylovConfig, Protocol};
use fockbath_core::orbitals::{hubbard_params, Grid1D, OrbitalSet, ProbeTrap, TrapPotential};
use fockbath_core::stochastic::{NoiseCoupling, NoiseSpec, SigmaConvention};
use fockbath_core::{HubbardParams, ModelSpec, Probe};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Stochastic,
    Orbitals,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Stochastic => "stochastic",
            Experiment::Orbitals => "orbitals",
            Experiment::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Where the single-particle parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsSource {
    /// Tabulated values for the reference double well.
    Reference,
    /// Solved from the trap potential at run time.
    Solver,
}

/// Fully resolved configuration. Every field has a preset default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub plots: bool,

    // Model.
    pub n_atoms: usize,
    pub bands: usize,
    pub params_source: ParamsSource,
    /// `U⁰ N / ħω₀`.
    pub u0_times_n: f64,
    pub u1_over_u0: f64,
    pub u01_over_u0: f64,
    /// `g_I N / ħω₀`.
    pub g_i_times_n: f64,
    /// Overrides the probe tunneling.
    pub j_s: Option<f64>,

    // Trap (solver source and the orbitals experiment).
    pub barrier_height: f64,
    pub barrier_width: f64,
    pub mass_ratio: f64,
    pub probe_trap: ProbeTrap,
    pub grid_half_width: f64,
    pub grid_points: usize,

    // Protocol.
    /// Bath ket; `|16,10,0,4⟩` scaled to `n_atoms` when absent.
    pub initial_bath: Option<Vec<u16>>,
    pub initial_probe: Probe,
    pub t_switch: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub krylov_max_dim: usize,
    pub krylov_tolerance: f64,
    pub fit_window: [f64; 2],
    /// `[t_switch, t_end]` when absent.
    pub histogram_window: Option<[f64; 2]>,
    pub final_window: [f64; 2],
    /// Write the Hamiltonian as CSV (small bases only).
    pub dump_operator: bool,

    // Eigenbasis diagnostics.
    pub eigen_cap: usize,
    pub window_states: usize,
    /// Also run the protocol for occupation histograms.
    pub chaos_dynamics: bool,
    /// Also compare against `U⁰¹ = 0`.
    pub chaos_contrast: bool,

    // Stochastic model.
    pub sigma: f64,
    pub sigma_convention: SigmaConvention,
    /// `ħ/σ` when absent.
    pub tau_c: Option<f64>,
    pub ensemble: usize,
    pub noise_coupling: NoiseCoupling,
    pub eps0: f64,
    /// `J_s′`; the model's `J_s` when absent.
    pub j_s_eff: Option<f64>,
    /// `4 τ_c` when absent.
    pub stochastic_t_end: Option<f64>,
    /// `τ_c / 20` when absent.
    pub stochastic_dt: Option<f64>,
    pub stochastic_samples: usize,

    // Sweeps.
    pub sweep_axis: Option<String>,
    pub sweep_values: Vec<f64>,
    /// Largest bath dimension for which sweep points also compute a
    /// participation ratio.
    pub sweep_pr_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Fig2,
            seed: 1,
            plots: true,
            n_atoms: 30,
            bands: 2,
            params_source: ParamsSource::Reference,
            u0_times_n: 2.0,
            u1_over_u0: 0.75,
            u01_over_u0: 0.5,
            g_i_times_n: 2.0,
            j_s: None,
            barrier_height: 10.0,
            barrier_width: 0.1,
            mass_ratio: 2.0,
            probe_trap: ProbeTrap::MassScaled,
            grid_half_width: 8.0,
            grid_points: 2048,
            initial_bath: None,
            initial_probe: Probe::Left,
            t_switch: 100.0,
            t_end: 600.0,
            sample_dt: 0.1,
            krylov_max_dim: 30,
            krylov_tolerance: 1e-10,
            fit_window: [110.0, 500.0],
            histogram_window: None,
            final_window: [500.0, 600.0],
            dump_operator: false,
            eigen_cap: DEFAULT_EIGEN_CAP,
            window_states: 200,
            chaos_dynamics: false,
            chaos_contrast: false,
            sigma: 1.2e-3,
            sigma_convention: SigmaConvention::StdDev,
            tau_c: None,
            ensemble: 10_000,
            noise_coupling: NoiseCoupling::Relative,
            eps0: 0.12,
            j_s_eff: None,
            stochastic_t_end: None,
            stochastic_dt: None,
            stochastic_samples: 200,
            sweep_axis: None,
            sweep_values: Vec::new(),
            sweep_pr_cap: 2000,
        }
    }
}

/// Preset defaults for one experiment.
pub fn preset(experiment: Experiment) -> ExperimentConfig {
    let base = ExperimentConfig { experiment, ..ExperimentConfig::default() };
    match experiment {
        Experiment::Fig2 => base,
        Experiment::Fig3 => ExperimentConfig { bands: 1, u0_times_n: 0.1, initial_bath: Some(vec![30, 0]), ..base },
        Experiment::Fig4 => ExperimentConfig {
            n_atoms: 12,
            u01_over_u0: 0.5,
            chaos_contrast: true,
            ..base
        },
        Experiment::Fig5 => ExperimentConfig { chaos_dynamics: true, ..base },
        Experiment::Stochastic | Experiment::Orbitals => base,
        Experiment::Sweep => ExperimentConfig {
            n_atoms: 16,
            sweep_axis: Some("n_atoms".into()),
            sweep_values: vec![8.0, 10.0, 12.0, 16.0, 20.0],
            ..base
        },
    }
}

/// Parse `key=value`; values are JSON when they parse as such, strings
/// otherwise.
pub fn parse_param(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--param `{s}` is not of the form key=value")))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("--param `{s}` has an empty key")));
    }
    let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| Value::String(v.trim().to_string()));
    Ok((key_alias(key).to_string(), value))
}

fn key_alias(key: &str) -> &str {
    match key {
        "N" => "n_atoms",
        other => other,
    }
}

/// Configuration files are either a config object or a run manifest
/// (whose `config` entry is re-ingested).
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    let mut obj = match value {
        Value::Object(m) => m,
        _ => return Err(CliError::Config(format!("{}: top level must be an object", path.display()))),
    };
    if obj.contains_key("manifest_version") {
        match obj.remove("config") {
            Some(Value::Object(m)) => obj = m,
            _ => return Err(CliError::Config(format!("{}: manifest without a config object", path.display()))),
        }
    }
    // Re-validate line positions for unknown keys by deserializing the file alone.
    if let Err(e) = serde_json::from_str::<ExperimentConfig>(&text_of(&obj)) {
        return Err(CliError::Config(format!("{}: {}", path.display(), locate(&text, &e.to_string()))));
    }
    Ok(obj)
}

fn text_of(obj: &Map<String, Value>) -> String {
    serde_json::to_string(&Value::Object(obj.clone())).unwrap_or_default()
}

/// Attach the line of the offending key when the message names one.
fn locate(text: &str, message: &str) -> String {
    if let Some(start) = message.find('`') {
        if let Some(len) = message[start + 1..].find('`') {
            let key = &message[start + 1..start + 1 + len];
            let needle = format!("\"{key}\"");
            if let Some((line, _)) = text.lines().enumerate().find(|(_, l)| l.contains(&needle)) {
                return format!("line {}: {message}", line + 1);
            }
        }
    }
    message.to_string()
}

/// Layered configuration: preset, then file, then overrides.
pub fn resolve(
    experiment: Option<Experiment>,
    file: Option<&Path>,
    params: &[(String, Value)],
    seed: Option<u64>,
) -> Result<ExperimentConfig, CliError> {
    let file_obj = match file {
        Some(p) => Some(read_config_file(p)?),
        None => None,
    };
    let from_file = file_obj
        .as_ref()
        .and_then(|m| m.get("experiment"))
        .and_then(|v| v.as_str())
        .map(Experiment::parse)
        .transpose()?;
    let exp = experiment.or(from_file).unwrap_or(Experiment::Fig2);
    let mut merged = match serde_json::to_value(preset(exp)) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    if let Some(m) = file_obj {
        for (k, v) in m {
            merged.insert(k, v);
        }
    }
    merged.insert("experiment".into(), Value::String(exp.name().into()));
    for (k, v) in params {
        if !merged.contains_key(k) {
            return Err(CliError::Config(format!("unknown parameter `{k}`")));
        }
        merged.insert(k.clone(), v.clone());
    }
    if let Some(s) = seed {
        merged.insert("seed".into(), Value::from(s));
    }
    let cfg: ExperimentConfig = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_atoms == 0 {
            return bad("n_atoms must be positive".into());
        }
        if self.bands != 1 && self.bands != 2 {
            return bad(format!("bands = {} (expected 1 or 2)", self.bands));
        }
        if let Some(k) = &self.initial_bath {
            if k.len() != 2 * self.bands {
                return bad(format!("initial_bath has {} entries, expected {}", k.len(), 2 * self.bands));
            }
            let total: usize = k.iter().map(|&v| v as usize).sum();
            if total != self.n_atoms {
                return bad(format!("initial_bath holds {total} atoms, n_atoms = {}", self.n_atoms));
            }
        }
        if !(self.sample_dt > 0.0) {
            return bad("sample_dt must be positive".into());
        }
        if !(0.0 <= self.t_switch && self.t_switch <= self.t_end) {
            return bad(format!("need 0 <= t_switch <= t_end (got {}, {})", self.t_switch, self.t_end));
        }
        if !(self.fit_window[0] < self.fit_window[1]) {
            return bad("fit_window must be increasing".into());
        }
        if self.krylov_max_dim < 2 || !(self.krylov_tolerance > 0.0) {
            return bad("krylov_max_dim >= 2 and krylov_tolerance > 0 required".into());
        }
        if !(self.sigma >= 0.0) || self.ensemble == 0 {
            return bad("sigma >= 0 and ensemble >= 1 required".into());
        }
        if self.stochastic_samples < 2 {
            return bad("stochastic_samples must be at least 2".into());
        }
        if self.experiment == Experiment::Sweep {
            let axis = self.sweep_axis.as_deref().unwrap_or("");
            let probe = serde_json::to_value(self).unwrap();
            match probe.get(axis) {
                Some(Value::Number(_)) => {}
                Some(Value::Null) if axis == "j_s" || axis == "tau_c" => {}
                _ => return bad(format!("sweep_axis `{axis}` is not a numeric configuration key")),
            }
            if self.sweep_values.is_empty() {
                return bad("sweep_values is empty".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn orbital_inputs(&self) -> Result<(TrapPotential, Grid1D), CliError> {
        let pot = TrapPotential::new(self.barrier_height, self.barrier_width).map_err(CliError::from_core_config)?;
        let grid = Grid1D::symmetric(self.grid_half_width, self.grid_points).map_err(CliError::from_core_config)?;
        Ok((pot, grid))
    }

    pub fn hubbard(&self) -> Result<HubbardParams, CliError> {
        let n = self.n_atoms as f64;
        let mut p = match self.params_source {
            ParamsSource::Reference => HubbardParams::reference(self.n_atoms),
            ParamsSource::Solver => {
                let (pot, grid) = self.orbital_inputs()?;
                let orb = OrbitalSet::compute(&pot, &grid, self.mass_ratio, self.probe_trap)?;
                hubbard_params(&orb, 1.0, 0.0)
            }
        };
        let u0 = self.u0_times_n / n;
        p.u = [u0, self.u1_over_u0 * u0];
        p.u01 = self.u01_over_u0 * u0;
        p.g_i = self.g_i_times_n / n;
        if let Some(j) = self.j_s {
            p.j_s = j;
        }
        Ok(p)
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let p = self.hubbard()?;
        Ok(if self.bands == 1 {
            ModelSpec::single_band(p, self.n_atoms)
        } else {
            ModelSpec::two_band(p, self.n_atoms)
        })
    }

    pub fn initial_ket(&self) -> Vec<u16> {
        self.initial_bath.clone().unwrap_or_else(|| scaled_reference_ket(self.n_atoms, self.bands))
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            initial_bath: self.initial_ket(),
            initial_probe: self.initial_probe,
            t_switch: self.t_switch,
            t_end: self.t_end,
            sample_dt: self.sample_dt,
            krylov: KrylovConfig { max_dim: self.krylov_max_dim, tolerance: self.krylov_tolerance, ..KrylovConfig::default() },
        }
    }

    pub fn histogram_window(&self) -> [f64; 2] {
        self.histogram_window.unwrap_or([self.t_switch, self.t_end])
    }

    pub fn noise(&self) -> NoiseSpec {
        let mut n = NoiseSpec::from_quoted(self.sigma, self.sigma_convention, self.seed, self.ensemble);
        if let Some(tc) = self.tau_c {
            n.tau_c = tc;
        } else if n.sigma == 0.0 {
            n.tau_c = 1.0;
        }
        n
    }

    /// `(t_end, Δt, sample_every)` of the stochastic run.
    pub fn stochastic_grid(&self) -> (f64, f64, usize) {
        let tc = self.noise().tau_c;
        let t_end = self.stochastic_t_end.unwrap_or(4.0 * tc);
        let dt = self.stochastic_dt.unwrap_or(tc / 20.0);
        let steps = (t_end / dt).round().max(1.0) as usize;
        let every = (steps / self.stochastic_samples).max(1);
        (t_end, dt, every)
    }

    /// The configuration with one key replaced (sweep points).
    pub fn with(&self, key: &str, value: f64) -> Result<Self, CliError> {
        let mut v = serde_json::to_value(self).unwrap();
        let obj = v.as_object_mut().unwrap();
        if !obj.contains_key(key) {
            return Err(CliError::Config(format!("unknown parameter `{key}`")));
        }
        let json = if matches!(key, "n_atoms" | "ensemble" | "grid_points" | "window_states" | "seed") {
            Value::from(value.round() as u64)
        } else {
            Value::from(value)
        };
        obj.insert(key.into(), json);
        let mut cfg: Self =
            serde_json::from_value(v).map_err(|e| CliError::Config(format!("sweep value {value} for `{key}`: {e}")))?;
        if key == "n_atoms" {
            cfg.initial_bath = None;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for e in [
            Experiment::Fig2,
            Experiment::Fig3,
            Experiment::Fig4,
            Experiment::Fig5,
            Experiment::Stochastic,
            Experiment::Orbitals,
            Experiment::Sweep,
        ] {
            preset(e).validate().unwrap();
            assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        }
    }

    #[test]
    fn fig3_model_is_weak_single_band() {
        let m = preset(Experiment::Fig3).model().unwrap();
        assert_eq!(m.bands, 1);
        assert!((m.params.u[0] - 0.1 / 30.0).abs() < 1e-15);
        assert!((m.params.g_i - 2.0 / 30.0).abs() < 1e-15);
        assert_eq!(m.params.u01, 0.0);
    }

    #[test]
    fn params_parse_json_or_string() {
        assert_eq!(parse_param("N=16").unwrap(), ("n_atoms".into(), Value::from(16)));
        assert_eq!(parse_param("probe_trap=shared").unwrap().1, Value::String("shared".into()));
        assert_eq!(parse_param("fit_window=[1,2]").unwrap().1, serde_json::json!([1, 2]));
        assert!(parse_param("novalue").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve(Some(Experiment::Fig2), None, &[("bogus".into(), Value::from(1))], None).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{\n  \"n_atoms\": 12,\n  \"typo_key\": 3\n}\n").unwrap();
        match resolve(None, Some(&path), &[], None).unwrap_err() {
            CliError::Config(m) => assert!(m.contains("line 3"), "{m}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn layering_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"experiment": "fig3", "t_end": 200}"#).unwrap();
        let cfg = resolve(None, Some(&path), &[("t_end".into(), Value::from(300.0))], Some(9)).unwrap();
        assert_eq!(cfg.experiment, Experiment::Fig3);
        assert_eq!(cfg.bands, 1);
        assert_eq!(cfg.t_end, 300.0);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn hash_changes_with_content() {
        let a = preset(Experiment::Fig2);
        let b = a.with("n_atoms", 16.0).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), preset(Experiment::Fig2).hash());
        assert_eq!(b.initial_ket(), vec![9, 5, 0, 2]);
    }

    #[test]
    fn invalid_values() {
        for (k, v) in [("bands", Value::from(3)), ("sample_dt", Value::from(0.0)), ("t_switch", Value::from(900.0))] {
            assert!(resolve(Some(Experiment::Fig2), None, &[(k.into(), v)], None).is_err());
        }
        let ket = serde_json::json!([1, 2, 3, 4]);
        assert!(resolve(Some(Experiment::Fig2), None, &[("initial_bath".into(), ket)], None).is_err());
        assert!(resolve(Some(Experiment::Sweep), None, &[("sweep_axis".into(), Value::from("plots"))], None).is_err());
    }
}
