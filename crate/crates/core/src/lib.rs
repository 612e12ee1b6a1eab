//! Generalized shape metrics between neural network representations.
//!
//! Start with [`RepresentationMatrix`] and a [`MetricSpec`], compute
//! [`shape_distance`] for a pair or [`pairwise_distances`] for a collection,
//! then embed, cluster or audit the resulting [`DistanceMatrix`].

pub mod alignment;
pub mod analysis;
pub mod embedding;
mod error;
pub mod io;
pub mod lap;
pub mod linalg;
pub mod metrics;
pub mod pairwise;
pub mod representations;

pub use alignment::{AlignmentResult, Group};
pub use embedding::{smacof_embed, Distortion, DistortionStats, Embedding, SmacofOptions};
pub use error::{Error, Result};
pub use metrics::{
    cca_distance, cka_distance, conv_distance, linear_heuristic, pd_riemannian_distance, rsa_dissimilarity,
    shape_distance, ConvMode, DistanceForm, Measure, MetricSpec, RdmKind,
};
pub use pairwise::{
    pairwise_conv_distances, pairwise_distances, scan_triangle_violations, DistanceMatrix, PairwiseOptions, ScanMode,
    ViolationReport,
};
pub use representations::{
    ConvRepresentation, DimPolicy, FeatureMap, FeatureMapSpec, KernelSpec, RepresentationMatrix,
};

/// Version string recorded in output sidecars and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
