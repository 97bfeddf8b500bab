//! Kernel projection learning on the manifold of symmetric positive definite
//! matrices.
//!
//! The pipeline runs SPD points through the Stein kernel, builds sparse
//! self-expressive similarity graphs in the induced RKHS, and learns a
//! distance preserving projection to a Euclidean space. Discriminant analysis,
//! dictionary learning and plain Euclidean classifiers then operate on the
//! projected vectors.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar for the common cases.

pub mod cache;
pub mod classify;
pub mod dictionary;
pub mod discriminant;
pub mod error;
pub mod kernel;
pub mod projection;
pub mod scalar;
pub mod sparse;
pub mod spd;
pub mod stats;

pub use classify::{
    knn_classify, linear_svm_predict, linear_svm_train, LabeledSet, SvmModel, SvmOptions,
};
pub use dictionary::{classify_by_residual, ksvd_train, sparse_code, DpsDictionary, KsvdOptions};
pub use discriminant::{build_class_graphs, solve_gda, ClassGraphs, DiscriminantModel, GdaParams};
pub use error::{DpsError, Result};
pub use kernel::{admissible_sigmas, gram, kernel_vector, validate_sigma, KernelGram};
pub use projection::{
    build_graph, dps_projection, rose_map, DpsEmbedding, DpsOptions, ProjectionModel, SparseGraph,
    Variant,
};
pub use scalar::Real;
pub use sparse::{
    global_sparse_codes, lasso_admm, local_sparse_codes, omp, AdmmOptions, CodeMode, SparseCodes,
};
pub use spd::{
    airm_exp, airm_log, geodesic_distance, regularize, spd_expm, spd_logm, spd_sqrt,
    stein_divergence, stein_kernel, SpdMatrix, TangentVector,
};

pub type SpdMatrixF64 = SpdMatrix<f64>;
pub type SpdMatrixF32 = SpdMatrix<f32>;
pub type KernelGramF64 = KernelGram<f64>;
pub type KernelGramF32 = KernelGram<f32>;
pub type ProjectionModelF64 = ProjectionModel<f64>;
pub type ProjectionModelF32 = ProjectionModel<f32>;
pub type DpsEmbeddingF64 = DpsEmbedding<f64>;
pub type DpsEmbeddingF32 = DpsEmbedding<f32>;
pub type DpsDictionaryF64 = DpsDictionary<f64>;
pub type DpsDictionaryF32 = DpsDictionary<f32>;
pub type DiscriminantModelF64 = DiscriminantModel<f64>;
pub type DiscriminantModelF32 = DiscriminantModel<f32>;
pub type LabeledSetF64 = LabeledSet<f64>;
pub type LabeledSetF32 = LabeledSet<f32>;
pub type SvmModelF64 = SvmModel<f64>;
pub type SvmModelF32 = SvmModel<f32>;
