//! Experiment runner behind the `emumuscle` binary.

pub mod build;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{ActuatorType, LoadedConfig, Mode, TaskType};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<emumuscle::Error> for CliError {
    fn from(e: emumuscle::Error) -> Self {
        CliError::runtime(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "emumuscle", version, about = "Emulated muscle actuators: simulate, sweep, train, evaluate")]
pub struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the training seed list and the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overrides `[output] directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub actuator: Option<ActuatorArg>,
    #[arg(long, global = true, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ActuatorArg {
    Pd,
    Torque,
    Muscle,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TaskArg {
    Hold,
    Walk,
    Hop,
    Free,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    IdealSim,
    HardwareFaithful,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trace.
    Simulate {
        /// Policy JSON from `train`; a scripted policy is used otherwise.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Train policies for every configured actuator and seed.
    Train,
    /// Map co-contraction hold stability over beta and controller rate.
    SweepBeta {
        /// Comma-separated betas, overrides `[sweep] betas`.
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        /// Comma-separated controller rates in Hz, overrides `[sweep] freqs`.
        #[arg(long, value_delimiter = ',')]
        freqs: Option<Vec<f64>>,
    },
    /// Success rate of trained policies under unseen perturbations.
    EvalRobustness {
        /// Directory holding `policies/<actuator>_seed<k>.json`; policies are trained when absent.
        #[arg(long)]
        policies: Option<PathBuf>,
    },
    /// Sample the force-length, force-velocity and passive curves.
    ExportCurves,
}

/// Loads the config and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let mut loaded = match &cli.config {
        Some(p) => LoadedConfig::from_path(p)?,
        None => LoadedConfig::defaults(),
    };
    let c = &mut loaded.config;
    if let Some(s) = cli.seed {
        c.train.seeds = vec![s];
    }
    if let Some(out) = &cli.out {
        c.output.directory = out.display().to_string();
    }
    if let Some(a) = cli.actuator {
        let a = match a {
            ActuatorArg::Pd => ActuatorType::Pd,
            ActuatorArg::Torque => ActuatorType::Torque,
            ActuatorArg::Muscle => ActuatorType::Muscle,
        };
        c.actuator.kind = a;
        c.train.actuators = None;
    }
    if let Some(t) = cli.task {
        c.task.kind = match t {
            TaskArg::Hold => TaskType::Hold,
            TaskArg::Walk => TaskType::Walk,
            TaskArg::Hop => TaskType::Hop,
            TaskArg::Free => TaskType::Free,
        };
    }
    if let Some(m) = cli.mode {
        c.actuator.mode = match m {
            ModeArg::IdealSim => Mode::IdealSim,
            ModeArg::HardwareFaithful => Mode::HardwareFaithful,
        };
    }
    Ok(loaded)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = load_config(cli)?;
    match &cli.command {
        Command::Simulate { policy } => commands::simulate(&loaded, policy.as_deref()),
        Command::Train => commands::train(&loaded).map(|_| ()),
        Command::SweepBeta { betas, freqs } => commands::sweep_beta(&loaded, betas.as_deref(), freqs.as_deref()),
        Command::EvalRobustness { policies } => commands::eval_robustness(&loaded, policies.as_deref()),
        Command::ExportCurves => commands::export_curves(&loaded),
    }
}
