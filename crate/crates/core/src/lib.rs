//! Geodesic covariance families on the manifold of symmetric positive
//! definite matrices, and estimation of covariance matrices inside them.
//!
//! The core types are generic over the scalar ([`Real`] is implemented for
//! `f32` and `f64`); the `*64` aliases below cover the common case.

pub mod descent;
pub mod error;
pub mod family;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod projection;
pub mod scalar;

pub use descent::{
    coordinate_descent, family_objective, sweep_order, DescentConfig, DescentResult,
};
pub use error::{GeoError, Result};
pub use family::{
    build_tree, eval_scaled, eval_segment, eval_tree, CoordinateRole, FamilyTree, GeodesicSegment,
    ScaledBase, ScaledFamily, TreeShape,
};
pub use manifold::{
    exp_map, generalized_eigenvalues, geodesic_point, log_map, metric_inner, natural_distance,
    pencil_decompose, spd_pow, sym_exp, sym_log, sym_sqrt, PencilDecomposition, SpdMatrix,
    SymMatrix, SymSqrt,
};
pub use projection::{
    closed_form_t, distance_to_geodesic_point, gaussian_mle_from_data, iprojection, kl_gaussian,
    local_analysis, natural_projection, objective_derivatives, orthogonal_offset,
    orthogonality_residual, project, project_with, reverse_iprojection, CovarianceConvention,
    LocalAnalysisResult, Method, ObjectiveDerivatives, ProjectionResult, SampleCovariance,
    SolverOptions, WhiteningContext,
};
pub use scalar::Real;

pub type SpdMatrix64 = SpdMatrix<f64>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type GeodesicSegment64 = GeodesicSegment<f64>;
pub type FamilyTree64 = FamilyTree<f64>;
pub type ProjectionResult64 = ProjectionResult<f64>;
pub type SpdMatrix32 = SpdMatrix<f32>;
pub type GeodesicSegment32 = GeodesicSegment<f32>;
