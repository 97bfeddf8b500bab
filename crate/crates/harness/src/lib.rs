//! Experiment runner for SPD projection pipelines.
//!
//! An [`ExperimentConfig`] names a dataset (image folders, a descriptor
//! cache or seeded synthetic clusters), a split protocol and the projection
//! variants to compare. [`run_experiment`] runs every variant on every
//! repetition and returns a deterministic [`ResultsReport`]; wall-clock
//! timings are kept apart so repeated runs give byte-identical JSON.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod pipeline;
pub mod report;
pub mod split;

pub use config::{
    ClassifierConfig, DataSource, DictionaryConfig, DiscriminantConfig, ExperimentConfig,
    ProjectionConfig, SigmaPolicy, SplitPolicy, SyntheticSpec,
};
pub use dataset::{
    extract_descriptors, load_image_dataset, synthetic_spd_dataset, ImageDataset, LabeledImage,
};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_on_dataset, ExperimentOutput, THREADS_ENV};
pub use report::{emit_results, ResultsReport, RunRecord, RunTimings, VariantSummary};
pub use split::Split;
