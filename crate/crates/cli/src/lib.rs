//! Command-line experiment runner: layered configuration, presets for each
//! figure, staged artifact bundles and parameter sweeps.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{preset, Experiment, ExperimentConfig};
pub use error::CliError;
pub use experiments::{run, Outcome, Runner};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "FOCKBATH_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "fockbath", version, about = "Probe atom in a two-band bosonic bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the trap and derive the lattice parameters.
    Orbitals(Common),
    /// Run the switch-on protocol and fit the purity decay.
    Evolve(Common),
    /// Eigenbasis diagnostics of the bath.
    Chaos(Common),
    /// Monte-Carlo dephasing of the mean-field probe.
    Stochastic(Common),
    /// Run a named preset: fig2, fig3, fig4, fig5, stochastic or orbitals.
    Run {
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run one evolve point per value of `sweep_axis`.
    Sweep(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration or a previous run's manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, `key=value` (value parsed as JSON when possible).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `runs/<experiment>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolve the configuration and run; returns the finished bundle.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let (runner, experiment, common) = match command {
        Command::Orbitals(c) => (Some(Runner::Orbitals), Some(Experiment::Orbitals), c),
        Command::Evolve(c) => (Some(Runner::Evolve), None, c),
        Command::Chaos(c) => (Some(Runner::Chaos), c.config.is_none().then_some(Experiment::Fig4), c),
        Command::Stochastic(c) => (Some(Runner::Stochastic), Some(Experiment::Stochastic), c),
        Command::Sweep(c) => (Some(Runner::Sweep), Some(Experiment::Sweep), c),
        Command::Run { preset, common } => {
            let e = Experiment::parse(preset)?;
            if e == Experiment::Sweep {
                return Err(CliError::Config("use the `sweep` subcommand for sweeps".into()));
            }
            (None, Some(e), common)
        }
    };
    let params = common.params.iter().map(|p| config::parse_param(p)).collect::<Result<Vec<_>, _>>()?;
    let cfg = config::resolve(experiment, common.config.as_deref(), &params, common.seed)?;
    let runner = runner.unwrap_or_else(|| Runner::for_experiment(cfg.experiment));
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.name()));
    run(runner, &cfg, &out)
}

/// Size the global thread pool from [`WORKERS_ENV`].
pub fn init_workers() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{WORKERS_ENV}=`{v}` is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("{WORKERS_ENV}: {e}")))?;
    }
    Ok(())
}
