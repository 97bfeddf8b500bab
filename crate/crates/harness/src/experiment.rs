use std::time::Instant;

use dps_core::cache::{self, DescriptorSet};
use dps_core::{admissible_sigmas, SpdMatrix, Variant};
use dps_features::{DescriptorKind, ExtractOptions, Tiling};
use rayon::prelude::*;

use crate::config::{DataSource, ExperimentConfig, SigmaPolicy};
use crate::dataset::{extract_descriptors, load_image_dataset, synthetic_spd_dataset};
use crate::error::{HarnessError, Result};
use crate::pipeline::{accuracy, confusion, fit_predict, record, PipelineSettings, StageTimings};
use crate::report::{summarize, ResultsReport, RunRecord, RunTimings};
use crate::split::{holdout, make_split};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SPD_DPS_THREADS";

/// Seed offset separating the σ-scan hold-out draw from the split draw.
const SCAN_SEED_OFFSET: u64 = 0x5eed;

/// Deterministic report plus the wall-clock timings of every run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ResultsReport,
    pub timings: Vec<RunTimings>,
}

/// Loads or generates the descriptor set named by `source`.
pub fn load_source(source: &DataSource) -> Result<DescriptorSet<f64>> {
    match source {
        DataSource::Synthetic(spec) => synthetic_spd_dataset(spec),
        DataSource::Images {
            root,
            kind,
            tiles,
            resample,
        } => {
            let images = load_image_dataset(root)?;
            let opts = ExtractOptions {
                resample: *resample,
                ..ExtractOptions::default()
            };
            extract_descriptors(&images, *kind, Tiling::grid(tiles[0], tiles[1]), &opts)
        }
        DataSource::Descriptors { path } => {
            let bytes = cache::load(path).map_err(|e| HarnessError::dataset(path, e.to_string()))?;
            Ok(cache::decode_descriptors(&bytes).map_err(|e| HarnessError::dataset(path, e.to_string()))?)
        }
    }
}

/// Worker pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| HarnessError::config(format!("{THREADS_ENV}={v} is not a count")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Width with the best hold-out accuracy inside the training set; ties keep
/// the smaller width.
fn scan_sigma(
    points: &[SpdMatrix<f64>],
    labels: &[usize],
    cap: usize,
    fraction: f64,
    base: &PipelineSettings,
    timings: &mut StageTimings,
) -> Result<f64> {
    let start = Instant::now();
    let dim = points[0].dim();
    let inner = holdout(labels, base.classes, fraction, base.seed.wrapping_add(SCAN_SEED_OFFSET))
        .ok_or_else(|| HarnessError::Split("no class can spare a validation point".into()))?;
    let (fit_p, fit_l) = (pick(points, &inner.train), pick(labels, &inner.train));
    let (val_p, val_l) = (pick(points, &inner.test), pick(labels, &inner.test));
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for sigma in admissible_sigmas(dim, cap) {
        let settings = PipelineSettings { sigma, ..*base };
        let mut scratch = StageTimings::new();
        match fit_predict(&fit_p, &fit_l, &val_p, &settings, &mut scratch) {
            Ok(pred) => {
                let acc = accuracy(&pred, &val_l);
                log::debug!("sigma {sigma}: validation accuracy {acc:.2}%");
                if best.is_none_or(|(_, b)| acc > b) {
                    best = Some((sigma, acc));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    record(timings, "sigma_scan", start);
    match (best, last_err) {
        (Some((sigma, _)), _) => Ok(sigma),
        (None, Some(e)) => Err(e),
        (None, None) => Err(HarnessError::config("no admissible sigma")),
    }
}

struct RunInput<'a> {
    config: &'a ExperimentConfig,
    points: &'a [SpdMatrix<f64>],
    labels: &'a [usize],
    names: &'a [String],
    classes: usize,
}

fn run_one(
    input: &RunInput,
    variant: Variant,
    repetition: usize,
) -> (RunRecord, RunTimings) {
    let cfg = input.config;
    let seed = cfg.seed.wrapping_add(repetition as u64);
    let start = Instant::now();
    let mut stages = StageTimings::new();
    let mut rec = RunRecord {
        variant: variant.name().to_owned(),
        repetition,
        seed,
        sigma: None,
        train_size: 0,
        test_size: 0,
        accuracy: None,
        confusion: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let split = make_split(
            &cfg.split,
            input.labels,
            input.names,
            input.classes,
            repetition,
            cfg.seed,
            seed,
        )?;
        rec.train_size = split.train.len();
        rec.test_size = split.test.len();
        let train_p = pick(input.points, &split.train);
        let train_l = pick(input.labels, &split.train);
        let test_p = pick(input.points, &split.test);
        let test_l = pick(input.labels, &split.test);
        let mut settings = PipelineSettings {
            variant,
            sigma: 0.0,
            projection: &cfg.projection,
            discriminant: cfg.discriminant.as_ref(),
            dictionary: cfg.dictionary.as_ref(),
            classifier: &cfg.classifier,
            classes: input.classes,
            seed,
        };
        settings.sigma = match cfg.sigma {
            SigmaPolicy::Fixed { value } => value,
            SigmaPolicy::Scan {
                cap,
                validation_fraction,
            } => scan_sigma(&train_p, &train_l, cap, validation_fraction, &settings, &mut stages)?,
        };
        rec.sigma = Some(settings.sigma);
        let pred = fit_predict(&train_p, &train_l, &test_p, &settings, &mut stages)?;
        rec.accuracy = Some(accuracy(&pred, &test_l));
        rec.confusion = Some(confusion(&pred, &test_l, input.classes));
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("{} repetition {repetition} failed: {e}", variant.name());
        rec.error = Some(e.to_string());
    }
    let timings = RunTimings {
        variant: rec.variant.clone(),
        repetition,
        stages,
        total: start.elapsed().as_secs_f64(),
    };
    (rec, timings)
}

/// Runs every variant on every repetition of an already loaded dataset.
pub fn run_on_dataset(config: &ExperimentConfig, data: &DescriptorSet<f64>) -> Result<ExperimentOutput> {
    config.validate()?;
    if data.records.is_empty() {
        return Err(HarnessError::config("dataset is empty"));
    }
    let classes = data.class_names.len().max(
        data.records.iter().map(|r| r.label + 1).max().unwrap_or(0),
    );
    let points: Vec<SpdMatrix<f64>> = data.records.iter().map(|r| r.descriptor.clone()).collect();
    let labels: Vec<usize> = data.records.iter().map(|r| r.label).collect();
    let names: Vec<String> = data.records.iter().map(|r| r.name.clone()).collect();
    let input = RunInput {
        config,
        points: &points,
        labels: &labels,
        names: &names,
        classes,
    };
    let pool = thread_pool()?;
    let per_rep: Vec<Vec<(RunRecord, RunTimings)>> = pool.install(|| {
        (0..config.repetitions)
            .into_par_iter()
            .map(|rep| {
                config
                    .variants
                    .iter()
                    .map(|&v| run_one(&input, v, rep))
                    .collect()
            })
            .collect()
    });
    // Variant-major order: all repetitions of the first variant, then the next.
    let mut runs = Vec::new();
    let mut timings = Vec::new();
    for vi in 0..config.variants.len() {
        for rep in &per_rep {
            runs.push(rep[vi].0.clone());
            timings.push(rep[vi].1.clone());
        }
    }
    let summary = summarize(&config.variants, &runs);
    let partial = runs.iter().any(|r| r.error.is_some());
    let mut class_names = data.class_names.clone();
    class_names.resize_with(classes, String::new);
    Ok(ExperimentOutput {
        report: ResultsReport {
            config: config.clone(),
            class_names,
            runs,
            summary,
            partial,
        },
        timings,
    })
}

/// Loads the configured data and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let data = load_source(&config.data)?;
    run_on_dataset(config, &data)
}

/// Protocol size and tiling conventionally used with each descriptor kind.
pub fn default_tiling(kind: DescriptorKind) -> Tiling {
    match kind {
        DescriptorKind::Texture5 => Tiling::grid(8, 8),
        _ => Tiling::WHOLE,
    }
}
