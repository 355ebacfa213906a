//! `affistack`: pose filtering, feature assembly, meta-model training and
//! evaluation from a TOML run config.

mod commands;
mod config;
mod data;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Errors mapped onto exit codes: 1 usage/config, 2 data, 3 numerical.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Core(affistack::Error),
}

impl From<affistack::Error> for CliError {
    fn from(e: affistack::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(affistack::Error::Numerical(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "affistack", version, about = "Stacked meta-models for binding affinity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct MatrixArgs {
    /// Restrict to these feature groups.
    #[arg(long = "group", value_delimiter = ',')]
    pub groups: Vec<String>,
    /// Restrict to these algorithms.
    #[arg(long = "algo", value_delimiter = ',')]
    pub algorithms: Vec<String>,
    /// Restrict to these RMSD filter modes.
    #[arg(long = "mode", value_delimiter = ',')]
    pub modes: Vec<String>,
    /// Restrict to these RMSD cutoffs.
    #[arg(long = "cutoff", value_delimiter = ',')]
    pub cutoffs: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select poses with the experimental and consensus RMSD filters.
    FilterPoses {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        matrix: MatrixArgs,
    },
    /// Write the feature matrix of one group as TSV.
    Assemble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Partition to assemble.
        #[arg(long, default_value = "TRAIN")]
        partition: String,
        /// Principal components for PCA groups.
        #[arg(long)]
        pcs: Option<usize>,
    },
    /// Train every cell of the run matrix.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        matrix: MatrixArgs,
    },
    /// Predict one partition with a trained model.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "CORESET")]
        partition: String,
    },
    /// Score predictions against labels.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Predictions TSV (`complex_id`, `prediction`).
        #[arg(long)]
        pred: PathBuf,
        /// Label TSV (`complex_id`, `ln_affinity`, ...).
        #[arg(long)]
        truth: PathBuf,
        /// Optional grouping TSV (`complex_id`, `group`).
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Virtual-screening enrichment per target.
    Screen {
        #[command(flatten)]
        common: Common,
        /// Scores TSV (`ligand_id`, `score`).
        #[arg(long)]
        pred: PathBuf,
        /// Activity TSV (`target`, `ligand_id`, `active`).
        #[arg(long)]
        labels: PathBuf,
        /// `ascending` (lower score = stronger) or `descending`.
        #[arg(long)]
        orientation: Option<String>,
    },
    /// Evaluate every trained model on a partition.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "CORESET")]
        partition: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FilterPoses { common, matrix } => commands::filter_poses(&common, &matrix),
        Command::Assemble {
            common,
            matrix,
            partition,
            pcs,
        } => commands::assemble(&common, &matrix, &partition, pcs),
        Command::Train { common, matrix } => commands::train(&common, &matrix),
        Command::Predict {
            common,
            model,
            partition,
        } => commands::predict(&common, &model, &partition),
        Command::Evaluate {
            common,
            pred,
            truth,
            groups,
        } => commands::evaluate(&common, &pred, &truth, groups.as_deref()),
        Command::Screen {
            common,
            pred,
            labels,
            orientation,
        } => commands::screen(&common, &pred, &labels, orientation.as_deref()),
        Command::Report { common, partition } => commands::report(&common, &partition),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AFFISTACK_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("affistack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
