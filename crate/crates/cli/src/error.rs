use geocov::GeoError;
use geocov_aquifer::AquiferError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Geo(#[from] GeoError),

    #[error(transparent)]
    Aquifer(#[from] AquiferError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

fn geo_kind(e: &GeoError) -> (&'static str, i32) {
    match e {
        GeoError::RankDeficient { .. } => ("rank_deficient", EXIT_NUMERIC),
        GeoError::NotPositiveDefinite { .. } => ("not_positive_definite", EXIT_NUMERIC),
        GeoError::NonFinite => ("non_finite", EXIT_NUMERIC),
        GeoError::DegenerateFamily(_) => ("degenerate_family", EXIT_NUMERIC),
        GeoError::Precondition(_) => ("precondition", EXIT_NUMERIC),
        GeoError::NonConvergence { .. } => ("non_convergence", EXIT_NONCONVERGENCE),
        GeoError::DimensionMismatch { .. } => ("dimension_mismatch", EXIT_CONFIG),
        GeoError::NotSquare { .. } => ("not_square", EXIT_CONFIG),
        GeoError::NotSymmetric { .. } => ("not_symmetric", EXIT_CONFIG),
        GeoError::ParamLength { .. } => ("param_length", EXIT_CONFIG),
        GeoError::InvalidShape(_) => ("invalid_shape", EXIT_CONFIG),
        GeoError::InvalidArgument(_) => ("invalid_argument", EXIT_CONFIG),
        GeoError::Io(_) => ("io", EXIT_CONFIG),
        GeoError::Parse(_) => ("parse", EXIT_CONFIG),
    }
}

impl CliError {
    /// Machine-readable kind and process exit code.
    pub fn kind(&self) -> (&'static str, i32) {
        match self {
            CliError::Config(_) => ("config", EXIT_CONFIG),
            CliError::Io { .. } => ("io", EXIT_CONFIG),
            CliError::Geo(e) | CliError::Aquifer(AquiferError::Geo(e)) => geo_kind(e),
            CliError::Aquifer(AquiferError::Config(_)) => ("config", EXIT_CONFIG),
            CliError::Aquifer(AquiferError::Io(_)) => ("io", EXIT_CONFIG),
            CliError::Aquifer(AquiferError::Csv(_)) => ("csv", EXIT_CONFIG),
            CliError::Aquifer(AquiferError::Json(_)) => ("parse", EXIT_CONFIG),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().1
    }

    /// `{"error": kind, "message": ..., "exitCode": n}`
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        let (error, exit_code) = self.kind();
        serde_json::to_string(&Report {
            error,
            message: self.to_string(),
            exit_code,
        })
        .expect("error report serializes")
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
