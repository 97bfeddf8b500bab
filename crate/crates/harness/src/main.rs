use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use dps_core::cache::{self, DescriptorSet};
use dps_core::{gram, DiscriminantModel, DpsDictionary, KernelGram, ProjectionModel, Variant};
use dps_features::{DescriptorKind, ExtractOptions, Tiling};
use dps_harness::dataset::{extract_descriptors, load_image_dataset, synthetic_spd_dataset};
use dps_harness::experiment::{default_tiling, run_experiment};
use dps_harness::pipeline::{
    accuracy, classify_by_dictionaries, classify_vectors, confusion, fit_dictionaries,
    fit_discriminant, fit_projection, StageTimings,
};
use dps_harness::{
    emit_results, ClassifierConfig, DictionaryConfig, DiscriminantConfig, ExperimentConfig,
    HarnessError, ProjectionConfig, Result, SyntheticSpec,
};
use nalgebra::{DMatrix, DVector};

#[derive(Parser)]
#[command(name = "dps", version, about = "SPD projection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Images in class subdirectories → descriptor cache.
    Extract {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        kind: DescriptorKind,
        /// Tile grid as ROWSxCOLS; defaults to 8x8 for texture5, else 1x1.
        #[arg(long, value_parser = parse_tiles)]
        tiles: Option<Tiling>,
        /// Keep the native image size instead of the protocol size.
        #[arg(long)]
        no_resample: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded synthetic SPD clusters → descriptor cache.
    Synth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        spread: f64,
        #[arg(long)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Descriptor cache → Stein Gram cache.
    Gram {
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gram cache → projection model cache.
    Project {
        #[arg(long)]
        gram: PathBuf,
        #[arg(long, default_value = "h-dps")]
        variant: Variant,
        #[arg(long, default_value_t = 1e-2)]
        lambda_factor: f64,
        #[arg(long, default_value_t = 1e-6)]
        tau_factor: f64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        rose_t: Option<usize>,
        #[arg(long, default_value_t = 128)]
        rose_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Projection + labelled descriptors → discriminant model cache.
    TrainDa {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        nu_within: Option<usize>,
        #[arg(long, default_value_t = 5)]
        nu_between: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Projection (+ discriminant) + labelled descriptors → class dictionaries.
    TrainDl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        descriptors: PathBuf,
        #[arg(long)]
        da: Option<PathBuf>,
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long, default_value_t = 3)]
        sparsity: usize,
        #[arg(long, default_value_t = 30)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classifies a test cache with cached models and prints the accuracy.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        da: Option<PathBuf>,
        /// Classify by dictionary residual instead of a Euclidean classifier.
        #[arg(long)]
        dictionaries: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClassifierKind::Svm)]
        classifier: ClassifierKind,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the accuracy and confusion matrix as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Runs a JSON experiment config and writes report.json, report.csv and
    /// timings.json.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Comma-separated variants, e.g. `rose,h-dps`.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Svm,
    Knn,
}

fn parse_tiles(s: &str) -> std::result::Result<Tiling, String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok(Tiling::grid(parse(r)?, parse(c)?))
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    cache::load(path).map_err(|e| HarnessError::dataset(path, e.to_string()))
}

fn decode<T>(path: &Path, f: fn(&[u8]) -> dps_core::Result<T>) -> Result<T> {
    f(&load_bytes(path)?).map_err(|e| HarnessError::dataset(path, e.to_string()))
}

fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    cache::save(path, bytes).map_err(|e| HarnessError::dataset(path, e.to_string()))
}

fn descriptors(path: &Path) -> Result<DescriptorSet<f64>> {
    decode(path, cache::decode_descriptors::<f64>)
}

fn embed_set(
    model: &ProjectionModel<f64>,
    set: &DescriptorSet<f64>,
    da: Option<&DiscriminantModel<f64>>,
) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    let points: Vec<_> = set.records.iter().map(|r| r.descriptor.clone()).collect();
    let labels = set.records.iter().map(|r| r.label).collect();
    let mut vecs: Vec<DVector<f64>> = model
        .embed_batch(&points)?
        .into_iter()
        .map(|e| e.vector)
        .collect();
    if let Some(da) = da {
        vecs = vecs
            .iter()
            .map(|v| da.transform_vector(v))
            .collect::<dps_core::Result<_>>()?;
    }
    Ok((vecs, labels))
}

fn class_count(sets: &[&DescriptorSet<f64>]) -> usize {
    sets.iter()
        .map(|s| {
            s.class_names
                .len()
                .max(s.records.iter().map(|r| r.label + 1).max().unwrap_or(0))
        })
        .max()
        .unwrap_or(0)
}

#[derive(serde::Serialize)]
struct Evaluation {
    accuracy: f64,
    confusion: Vec<Vec<usize>>,
    class_names: Vec<String>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            root,
            kind,
            tiles,
            no_resample,
            out,
        } => {
            let data = load_image_dataset(&root)?;
            let opts = ExtractOptions {
                resample: !no_resample,
                ..ExtractOptions::default()
            };
            let tiling = tiles.unwrap_or_else(|| default_tiling(kind));
            let set = extract_descriptors(&data, kind, tiling, &opts)?;
            save(&out, &cache::encode_descriptors(&set))?;
            println!(
                "{} images, {} classes → {} descriptors ({}x{}) in {}",
                data.images.len(),
                set.class_names.len(),
                set.records.len(),
                kind.dim(),
                kind.dim(),
                out.display()
            );
        }
        Command::Synth {
            classes,
            per_class,
            dim,
            spread,
            noise,
            seed,
            out,
        } => {
            let set = synthetic_spd_dataset(&SyntheticSpec {
                classes,
                per_class,
                dim,
                spread,
                noise,
                seed,
            })?;
            save(&out, &cache::encode_descriptors(&set))?;
            println!("{} descriptors in {}", set.records.len(), out.display());
        }
        Command::Gram {
            descriptors: path,
            sigma,
            out,
        } => {
            let set = descriptors(&path)?;
            let points = set.records.into_iter().map(|r| r.descriptor).collect();
            let g = gram(points, sigma)?;
            save(&out, &cache::encode_gram(&g))?;
            println!(
                "gram {}x{} (sigma {sigma}, min eigenvalue {:e}, {} clamped) in {}",
                g.n(),
                g.n(),
                g.min_eigenvalue(),
                g.clamped_count(),
                out.display()
            );
        }
        Command::Project {
            gram: path,
            variant,
            lambda_factor,
            tau_factor,
            alpha,
            beta,
            rose_t,
            rose_k,
            seed,
            out,
        } => {
            let g: KernelGram<f64> = decode(&path, cache::decode_gram::<f64>)?;
            let cfg = ProjectionConfig {
                lambda_factor,
                tau_factor,
                alpha,
                beta,
                rose_t,
                rose_k,
            };
            let mut timings = StageTimings::new();
            let model = fit_projection(Arc::new(g), variant, &cfg, seed, &mut timings)?;
            save(&out, &cache::encode_projection(&model))?;
            println!("{variant} projection, dimension {} in {}", model.dim(), out.display());
        }
        Command::TrainDa {
            model,
            descriptors: path,
            nu_within,
            nu_between,
            beta,
            r,
            out,
        } => {
            let model = decode(&model, cache::decode_projection::<f64>)?;
            let set = descriptors(&path)?;
            let (vecs, labels) = embed_set(&model, &set, None)?;
            let cols = DMatrix::from_columns(&vecs);
            let cfg = DiscriminantConfig {
                nu_within,
                nu_between,
                beta,
                r,
            };
            let da = fit_discriminant(&cols, &labels, class_count(&[&set]), &cfg)?;
            save(&out, &cache::encode_discriminant(&da))?;
            println!("discriminant {} → {} in {}", da.input_dim(), da.r(), out.display());
        }
        Command::TrainDl {
            model,
            descriptors: path,
            da,
            atoms,
            sparsity,
            iterations,
            seed,
            out,
        } => {
            let model = decode(&model, cache::decode_projection::<f64>)?;
            let da = da
                .map(|p| decode(&p, cache::decode_discriminant::<f64>))
                .transpose()?;
            let set = descriptors(&path)?;
            let (vecs, labels) = embed_set(&model, &set, da.as_ref())?;
            let cfg = DictionaryConfig {
                atoms,
                sparsity,
                iterations,
            };
            let dicts: Vec<DpsDictionary<f64>> =
                fit_dictionaries(&vecs, &labels, class_count(&[&set]), &cfg, seed)?;
            save(&out, &cache::encode_dictionaries(&dicts))?;
            println!("{} class dictionaries in {}", dicts.len(), out.display());
        }
        Command::Evaluate {
            model,
            train,
            test,
            da,
            dictionaries,
            classifier,
            c,
            epochs,
            k,
            seed,
            json,
        } => {
            let model = decode(&model, cache::decode_projection::<f64>)?;
            let da = da
                .map(|p| decode(&p, cache::decode_discriminant::<f64>))
                .transpose()?;
            let (train, test) = (descriptors(&train)?, descriptors(&test)?);
            let classes = class_count(&[&train, &test]);
            let (test_v, test_l) = embed_set(&model, &test, da.as_ref())?;
            let pred = match dictionaries {
                Some(p) => {
                    let dicts = decode(&p, cache::decode_dictionaries::<f64>)?;
                    classify_by_dictionaries(&dicts, &test_v)?
                }
                None => {
                    let (train_v, train_l) = embed_set(&model, &train, da.as_ref())?;
                    let cfg = match classifier {
                        ClassifierKind::Svm => ClassifierConfig::Svm { c, epochs },
                        ClassifierKind::Knn => ClassifierConfig::Knn { k },
                    };
                    classify_vectors(&train_v, &train_l, &test_v, classes, &cfg, seed)?
                }
            };
            let eval = Evaluation {
                accuracy: accuracy(&pred, &test_l),
                confusion: confusion(&pred, &test_l, classes),
                class_names: test.class_names.clone(),
            };
            println!("accuracy {:.2}% on {} test points", eval.accuracy, test_l.len());
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&eval).expect("serializable");
                std::fs::write(&path, text).map_err(|e| HarnessError::Io { path, source: e })?;
            }
        }
        Command::Report {
            config,
            out,
            seed,
            repetitions,
            variants,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.override_seed(s);
            }
            if let Some(r) = repetitions {
                cfg.repetitions = r;
            }
            if let Some(v) = variants {
                cfg.variants = v;
            }
            if let Some(o) = out {
                cfg.output = Some(o);
            }
            let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("results"));
            let output = run_experiment(&cfg)?;
            let files = emit_results(&output.report, &output.timings, &dir)?;
            for s in &output.report.summary {
                match (s.mean, s.std) {
                    (Some(m), Some(sd)) => println!(
                        "{:<6} {m:6.2} ± {sd:5.2}  ({} runs, {} failed)",
                        s.variant, s.completed, s.failed
                    ),
                    _ => println!("{:<6} no completed runs ({} failed)", s.variant, s.failed),
                }
            }
            if output.report.partial {
                eprintln!("warning: some runs failed; see {}", files.json.display());
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
