//! Analyses run on distance matrices and embeddings.

mod convergence;
mod pca;
mod regression;
mod ward;

pub use convergence::{convergence_curve, ConvergenceCurve, ConvergenceOptions, ConvergenceRecord, ConvergenceSummary};
pub use pca::{pca_project, PcaProjection};
pub use regression::{
    fit_regressor, r_squared, GridScore, HyperGrid, RegressionModel, RegressionReport, RegressorKind, Split,
};
pub use ward::{ward_cluster, Dendrogram, Merge};
