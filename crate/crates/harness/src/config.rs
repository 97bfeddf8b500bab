use std::collections::HashSet;
use std::path::{Path, PathBuf};

use dps_core::Variant;
use dps_features::DescriptorKind;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Serde through `Display`/`FromStr`.
mod text {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

mod text_list {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::ser::SerializeSeq;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for item in v {
            seq.serialize_element(&item.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(de::Error::custom))
            .collect()
    }
}

/// Seeded synthetic SPD clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    pub noise: f64,
    pub seed: u64,
}

fn default_tiles() -> [usize; 2] {
    [1, 1]
}

fn yes() -> bool {
    true
}

/// Where the SPD points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// One subdirectory per class; each image yields `rows × cols` tiles.
    Images {
        root: PathBuf,
        #[serde(with = "text")]
        kind: DescriptorKind,
        #[serde(default = "default_tiles")]
        tiles: [usize; 2],
        #[serde(default = "yes")]
        resample: bool,
    },
    /// A descriptor cache written by `dps extract` or `dps synth`.
    Descriptors { path: PathBuf },
}

/// Train/test assignment per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Seeded draw of `train_per_class` samples from each class.
    Stratified { train_per_class: usize },
    /// Seeded draw of `⌈fraction · size⌉` samples from each class, leaving at
    /// least one for testing.
    Fraction { train_fraction: f64 },
    /// Even positions within each class train, odd positions test.
    Alternate,
    /// Stratified folds fixed by the base seed; repetition `r` tests fold
    /// `r mod folds`.
    KFold { folds: usize },
    /// Samples whose name contains any tag train, the rest test.
    Tagged { train_tags: Vec<String> },
}

/// Kernel width selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SigmaPolicy {
    Fixed {
        value: f64,
    },
    /// Picks the admissible width with the best hold-out accuracy inside the
    /// training set.
    Scan {
        cap: usize,
        validation_fraction: f64,
    },
}

/// Projection hyperparameters shared by all variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// `λ = lambda_factor · max_i ‖k̄_i‖`.
    pub lambda_factor: f64,
    /// `τ = tau_factor · max|codes|`.
    pub tau_factor: f64,
    /// Local block weight; defaults to `(n − t)/t` with `t = ⌈n/3⌉`.
    pub alpha: Option<f64>,
    /// Global block weight; defaults to α.
    pub beta: Option<f64>,
    /// ROSE subset size; defaults to `min(30, ⌈n/3⌉)`.
    pub rose_t: Option<usize>,
    pub rose_k: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            lambda_factor: 1e-2,
            tau_factor: 1e-6,
            alpha: None,
            beta: None,
            rose_t: None,
            rose_k: 128,
        }
    }
}

/// Graph-embedding discriminant analysis after projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminantConfig {
    /// Defaults to `min(smallest class − 1, 5)`.
    pub nu_within: Option<usize>,
    pub nu_between: usize,
    pub beta: f64,
    /// Defaults to `classes − 1` capped by rank.
    pub r: Option<usize>,
}

impl Default for DiscriminantConfig {
    fn default() -> Self {
        Self {
            nu_within: None,
            nu_between: 5,
            beta: 0.5,
            r: None,
        }
    }
}

/// Per-class KSVD dictionaries; test points go to the class with the
/// smallest reconstruction residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DictionaryConfig {
    /// Atoms per class; defaults to `4 · classes`.
    pub atoms: Option<usize>,
    pub sparsity: usize,
    pub iterations: usize,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            atoms: None,
            sparsity: 3,
            iterations: 30,
        }
    }
}

/// Euclidean classifier on the projected vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Svm { c: f64, epochs: usize },
    Knn { k: usize },
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Svm { c: 1.0, epochs: 50 }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub split: SplitPolicy,
    pub sigma: SigmaPolicy,
    #[serde(with = "text_list")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub discriminant: Option<DiscriminantConfig>,
    #[serde(default)]
    pub dictionary: Option<DictionaryConfig>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub repetitions: usize,
    /// Base seed; repetition `r` runs with `seed + r`.
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} must be positive, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(HarnessError::config(format!("{name} must be at least {min}, got {v}")))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        at_least("classes", self.classes, 1)?;
        at_least("per_class", self.per_class, 1)?;
        at_least("dim", self.dim, 1)?;
        positive("spread", self.spread)?;
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(HarnessError::config(format!(
                "noise must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Synthetic experiment with library defaults: 5 repetitions, fixed
    /// σ = 0.5, linear SVM, half of each class for training.
    pub fn synthetic(spec: SyntheticSpec, variants: Vec<Variant>) -> Self {
        let train_per_class = (spec.per_class / 2).max(1);
        let seed = spec.seed;
        Self {
            name: "synthetic".into(),
            data: DataSource::Synthetic(spec),
            split: SplitPolicy::Stratified { train_per_class },
            sigma: SigmaPolicy::Fixed { value: 0.5 },
            variants,
            projection: ProjectionConfig::default(),
            discriminant: None,
            dictionary: None,
            classifier: ClassifierConfig::default(),
            repetitions: 5,
            seed,
            output: None,
        }
    }

    /// Rejects parameters outside their documented ranges.
    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::Synthetic(s) => s.validate()?,
            DataSource::Images { tiles, .. } => {
                at_least("tile rows", tiles[0], 1)?;
                at_least("tile cols", tiles[1], 1)?;
            }
            DataSource::Descriptors { .. } => {}
        }
        match &self.split {
            SplitPolicy::Stratified { train_per_class } => {
                at_least("train_per_class", *train_per_class, 1)?
            }
            SplitPolicy::Fraction { train_fraction } => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return Err(HarnessError::config(format!(
                        "train_fraction must lie in (0, 1), got {train_fraction}"
                    )));
                }
            }
            SplitPolicy::Alternate => {}
            SplitPolicy::KFold { folds } => at_least("folds", *folds, 2)?,
            SplitPolicy::Tagged { train_tags } => {
                if train_tags.is_empty() || train_tags.iter().any(|t| t.is_empty()) {
                    return Err(HarnessError::config("train_tags must be non-empty strings"));
                }
            }
        }
        match &self.sigma {
            SigmaPolicy::Fixed { value } => positive("sigma", *value)?,
            SigmaPolicy::Scan {
                cap,
                validation_fraction,
            } => {
                at_least("sigma cap", *cap, 1)?;
                if !(*validation_fraction > 0.0 && *validation_fraction < 1.0) {
                    return Err(HarnessError::config(format!(
                        "validation_fraction must lie in (0, 1), got {validation_fraction}"
                    )));
                }
            }
        }
        if self.variants.is_empty() {
            return Err(HarnessError::config("at least one variant is required"));
        }
        let mut seen = HashSet::new();
        for v in &self.variants {
            if !seen.insert(*v) {
                return Err(HarnessError::config(format!("variant {v} listed twice")));
            }
        }
        let p = &self.projection;
        positive("lambda_factor", p.lambda_factor)?;
        if !(p.tau_factor.is_finite() && p.tau_factor >= 0.0) {
            return Err(HarnessError::config("tau_factor must be non-negative"));
        }
        if let Some(a) = p.alpha {
            positive("alpha", a)?;
        }
        if let Some(b) = p.beta {
            positive("beta", b)?;
        }
        if let Some(t) = p.rose_t {
            at_least("rose_t", t, 1)?;
        }
        at_least("rose_k", p.rose_k, 1)?;
        if let Some(da) = &self.discriminant {
            if let Some(nu) = da.nu_within {
                at_least("nu_within", nu, 1)?;
            }
            at_least("nu_between", da.nu_between, 1)?;
            positive("discriminant beta", da.beta)?;
            if let Some(r) = da.r {
                at_least("r", r, 1)?;
            }
        }
        if let Some(dl) = &self.dictionary {
            if let Some(m) = dl.atoms {
                at_least("atoms", m, 1)?;
            }
            at_least("sparsity", dl.sparsity, 1)?;
            at_least("iterations", dl.iterations, 1)?;
        }
        match &self.classifier {
            ClassifierConfig::Svm { c, epochs } => {
                positive("svm c", *c)?;
                at_least("svm epochs", *epochs, 1)?;
            }
            ClassifierConfig::Knn { k } => at_least("knn k", *k, 1)?,
        }
        at_least("repetitions", self.repetitions, 1)?;
        Ok(())
    }

    /// Replaces every seed in the config, including the synthetic data seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let DataSource::Synthetic(s) = &mut self.data {
            s.seed = seed;
        }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let config = Self::from_json(&text).map_err(|source| HarnessError::Json {
            path: path.into(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }
}
