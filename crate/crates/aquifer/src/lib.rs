//! One-dimensional groundwater flow with a log-Gaussian permeability, used
//! as a test bed for covariance regularization with geodesic families.
//!
//! The head `h` solves `(κ h′)′ + Q = 0` on `[0, L]` with `h(0) = H1`,
//! `h(L) = H2` and `log κ` a Gaussian process. Everything here is `f64`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod report;
pub mod sampling;
pub mod solver;

pub use config::{AquiferConfig, Kernel, NoiseSpec};
pub use error::{AquiferError, Result};
pub use experiments::{
    build_anchor, build_study, contour_grid, experiment_multiparam, experiment_noise,
    experiment_regularization, flat_vs_geodesic, flat_vs_geodesic_grid, multiparam_trial,
    regularization_ratio, regularization_trial, ContourSpec, FlatConfig, MultiparamConfig,
    NoiseConfig, Quartiles, RatioSummary, RegularizationConfig, Study,
};
pub use gp::{sample_log_permeability, GpSampler};
pub use sampling::{monte_carlo_covariance, stream_rng, HeadModel, StreamKey};
pub use solver::{observe, solve_head};
