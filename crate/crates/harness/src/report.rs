use std::fs;
use std::path::{Path, PathBuf};

use dps_core::stats::mean_std;
use dps_core::Variant;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::StageTimings;

/// Outcome of one variant on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub repetition: usize,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub train_size: usize,
    pub test_size: usize,
    /// Percentage in `[0, 100]`; absent when the run failed.
    pub accuracy: Option<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub error: Option<String>,
}

/// Mean ± sample standard deviation over the completed runs of a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub completed: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Deterministic part of an experiment's results. Wall-clock timings live in
/// [`RunTimings`] so that identical inputs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsReport {
    pub config: ExperimentConfig,
    pub class_names: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<VariantSummary>,
    /// Set when any run failed.
    pub partial: bool,
}

/// Per-stage wall-clock seconds of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub variant: String,
    pub repetition: usize,
    pub stages: StageTimings,
    pub total: f64,
}

/// Stage columns of `report.csv`, in order.
pub const STAGES: [&str; 8] = [
    "sigma_scan",
    "gram",
    "codes",
    "projection",
    "embed",
    "discriminant",
    "classify",
    "total",
];

/// Summaries in `variants` order, recomputed from `runs`.
pub fn summarize(variants: &[Variant], runs: &[RunRecord]) -> Vec<VariantSummary> {
    variants
        .iter()
        .map(|v| {
            let name = v.name();
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.variant == name).collect();
            let acc: Vec<f64> = mine.iter().filter_map(|r| r.accuracy).collect();
            let (mean, std) = if acc.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&acc);
                (Some(m), Some(s))
            };
            VariantSummary {
                variant: name.to_owned(),
                completed: acc.len(),
                failed: mine.len() - acc.len(),
                mean,
                std,
            }
        })
        .collect()
}

impl ResultsReport {
    pub fn summary_for(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.variant == variant.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Files written by [`emit_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub timings: PathBuf,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.into(),
        source,
    }
}

/// Writes `report.json`, `report.csv` (one row per run) and `timings.json`
/// into `dir`, creating it if needed.
pub fn emit_results(report: &ResultsReport, timings: &[RunTimings], dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let files = EmittedFiles {
        json: dir.join("report.json"),
        csv: dir.join("report.csv"),
        timings: dir.join("timings.json"),
    };
    write(&files.json, report.to_json().as_bytes())?;
    let timing_json = serde_json::to_string_pretty(timings).expect("timings serialization cannot fail");
    write(&files.timings, timing_json.as_bytes())?;

    let mut w = csv::Writer::from_path(&files.csv).map_err(csv_error(&files.csv))?;
    let mut header = vec!["variant", "repetition", "seed", "sigma", "accuracy", "error"];
    header.extend(STAGES);
    w.write_record(&header).map_err(csv_error(&files.csv))?;
    for run in &report.runs {
        let t = timings
            .iter()
            .find(|t| t.variant == run.variant && t.repetition == run.repetition);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            run.variant.clone(),
            run.repetition.to_string(),
            run.seed.to_string(),
            opt(run.sigma),
            opt(run.accuracy),
            run.error.clone().unwrap_or_default(),
        ];
        for stage in STAGES {
            row.push(opt(t.and_then(|t| {
                if stage == "total" {
                    Some(t.total)
                } else {
                    t.stages.get(stage).copied()
                }
            })));
        }
        w.write_record(&row).map_err(csv_error(&files.csv))?;
    }
    w.flush().map_err(|e| HarnessError::io(&files.csv, e))?;
    Ok(files)
}
