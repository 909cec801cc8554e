use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use geocov::Method;

#[derive(Debug, Parser)]
#[command(
    name = "geocov",
    version,
    about = "Geodesic covariance families: projections and aquifer experiments"
)]
pub struct Cli {
    /// worker threads for Monte-Carlo sampling and trials (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project a covariance matrix onto a family
    Project {
        /// family definition (JSON)
        family: PathBuf,
        /// covariance matrix (JSON or CSV)
        covariance: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Natural)]
        method: MethodArg,
        /// descent settings for multi-parameter families (JSON)
        #[arg(long)]
        config: Option<PathBuf>,
        /// output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate anchor covariances from Monte-Carlo aquifer solves
    BuildAnchors {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one of the experiments
    Experiment {
        #[arg(value_enum)]
        name: ExperimentKind,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Repeat a run from its manifest
    Rerun {
        manifest: PathBuf,
        /// output directory (default: the manifest's directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Command-line overrides of config-file values.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub trials: Option<usize>,
    /// target sample count
    #[arg(long)]
    pub q: Option<usize>,
    /// anchor and truth sample count
    #[arg(long)]
    pub anchor_q: Option<usize>,
    /// noise magnitudes, comma separated
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// descent objective (multiparam)
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Natural,
    Mle,
    Iproj,
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Natural => vec![Method::Natural],
            MethodArg::Mle => vec![Method::ReverseI],
            MethodArg::Iproj => vec![Method::IProj],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Regularization,
    Noise,
    Multiparam,
    LocalAnalysis,
    FlatVsGeodesic,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Regularization => "regularization",
            ExperimentKind::Noise => "noise",
            ExperimentKind::Multiparam => "multiparam",
            ExperimentKind::LocalAnalysis => "local-analysis",
            ExperimentKind::FlatVsGeodesic => "flat-vs-geodesic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::value_variants()
            .iter()
            .copied()
            .find(|k| k.name() == name)
    }
}
