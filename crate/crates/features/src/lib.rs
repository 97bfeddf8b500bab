//! Per-pixel feature fields and region covariance descriptors.
//!
//! An image becomes one or more SPD points: per-pixel features (intensity,
//! derivative magnitudes, Gabor magnitudes, coordinates, colour) are stacked
//! into a [`FeatureField`], and the sample covariance over each tile is lifted
//! onto the SPD cone.

pub mod covariance;
pub mod error;
pub mod field;
pub mod gabor;
pub mod gradients;
pub mod io;
pub mod plane;

pub use covariance::{
    covariance_descriptor, image_to_points, region_covariance, ExtractOptions, Region, Tiling,
    DEFAULT_EPSILON,
};
pub use error::{FeatureError, Result};
pub use field::{build_feature_field, DescriptorKind, FeatureField, FeatureOptions};
pub use gabor::{gabor_bank, GaborBank};
pub use gradients::{gradients, Gradients};
pub use io::{load_image, save_gray};
pub use plane::{Image, Plane};
