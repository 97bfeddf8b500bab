use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use dps_core::discriminant::{class_graphs_from_columns, default_output_dim};
use dps_core::dictionary::train_class_dictionaries;
use dps_core::projection::default_rose_params;
use dps_core::{
    build_graph, classify_by_residual, dps_projection, gram, global_sparse_codes, knn_classify,
    linear_svm_predict, linear_svm_train, local_sparse_codes, rose_map, AdmmOptions,
    DiscriminantModel, DpsEmbedding, DpsOptions, DpsDictionary, KernelGram, KsvdOptions,
    LabeledSet, ProjectionModel, SpdMatrix, SparseGraph, SvmOptions, Variant,
};
use nalgebra::{DMatrix, DVector};

use crate::config::{ClassifierConfig, DictionaryConfig, DiscriminantConfig, ProjectionConfig};
use crate::error::Result;

/// Wall-clock seconds per named stage.
pub type StageTimings = BTreeMap<String, f64>;

pub(crate) fn record(timings: &mut StageTimings, stage: &str, start: Instant) {
    *timings.entry(stage.to_owned()).or_insert(0.0) += start.elapsed().as_secs_f64();
}

/// Everything needed to fit one variant on one training set.
#[derive(Debug, Clone, Copy)]
pub struct PipelineSettings<'a> {
    pub variant: Variant,
    pub sigma: f64,
    pub projection: &'a ProjectionConfig,
    pub discriminant: Option<&'a DiscriminantConfig>,
    pub dictionary: Option<&'a DictionaryConfig>,
    pub classifier: &'a ClassifierConfig,
    pub classes: usize,
    pub seed: u64,
}

/// Fits the projection for `variant` on a precomputed Gram matrix.
pub fn fit_projection(
    g: Arc<KernelGram<f64>>,
    variant: Variant,
    cfg: &ProjectionConfig,
    seed: u64,
    timings: &mut StageTimings,
) -> Result<ProjectionModel<f64>> {
    let n = g.n();
    if variant == Variant::Rose {
        let start = Instant::now();
        let (default_t, _) = default_rose_params(n);
        let t = cfg.rose_t.unwrap_or(default_t).min(n.saturating_sub(1)).max(1);
        let model = rose_map(g, t, cfg.rose_k, seed)?;
        record(timings, "projection", start);
        return Ok(model);
    }
    let start = Instant::now();
    let max_norm = g
        .k_half()
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let lambda = cfg.lambda_factor * max_norm;
    let admm = AdmmOptions::default();
    let graph = |codes: dps_core::SparseCodes<f64>| -> SparseGraph<f64> {
        let tau = cfg.tau_factor * codes.codes.amax();
        build_graph(&codes, tau)
    };
    let local = match variant {
        Variant::Local | Variant::Hybrid => Some(graph(local_sparse_codes(&g, lambda, &admm)?)),
        _ => None,
    };
    let global = match variant {
        Variant::Global | Variant::Hybrid => {
            Some(graph(global_sparse_codes(&g, lambda, &admm)?))
        }
        _ => None,
    };
    record(timings, "codes", start);
    let start = Instant::now();
    let mut opts = DpsOptions::<f64>::defaults_for(n);
    if let Some(a) = cfg.alpha {
        opts.alpha = a;
        opts.beta = a;
    }
    if let Some(b) = cfg.beta {
        opts.beta = b;
    }
    let model = dps_projection(g, local.as_ref(), global.as_ref(), &opts)?;
    record(timings, "projection", start);
    Ok(model)
}

/// Discriminant model fitted on the columns of a `k × n` embedding matrix.
pub fn fit_discriminant(
    columns: &DMatrix<f64>,
    labels: &[usize],
    classes: usize,
    cfg: &DiscriminantConfig,
) -> Result<DiscriminantModel<f64>> {
    let smallest = crate::split::class_members(labels, classes)
        .iter()
        .map(Vec::len)
        .filter(|&s| s > 0)
        .min()
        .unwrap_or(1);
    let nu_within = cfg
        .nu_within
        .unwrap_or_else(|| smallest.saturating_sub(1).min(5))
        .max(1);
    let graphs = class_graphs_from_columns(columns, labels, nu_within, cfg.nu_between)?;
    let r = cfg
        .r
        .unwrap_or_else(|| default_output_dim(columns, &graphs, classes));
    Ok(dps_core::solve_gda(columns, &graphs, cfg.beta, r)?)
}

/// Per-class dictionaries over labelled vectors.
pub fn fit_dictionaries(
    vectors: &[DVector<f64>],
    labels: &[usize],
    classes: usize,
    cfg: &DictionaryConfig,
    seed: u64,
) -> Result<Vec<DpsDictionary<f64>>> {
    let embeddings: Vec<DpsEmbedding<f64>> = vectors
        .iter()
        .zip(labels)
        .map(|(v, &l)| DpsEmbedding::with_label(v.clone(), l))
        .collect();
    let opts = KsvdOptions {
        atoms: cfg.atoms.unwrap_or(4 * classes.max(1)),
        sparsity: cfg.sparsity,
        iterations: cfg.iterations,
        seed,
    };
    Ok(train_class_dictionaries(&embeddings, classes, &opts)?)
}

/// Trains the configured classifier and labels every query.
pub fn classify_vectors(
    train: &[DVector<f64>],
    labels: &[usize],
    queries: &[DVector<f64>],
    classes: usize,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    let set = LabeledSet::new(train.to_vec(), labels.to_vec(), Some(classes))?;
    match *cfg {
        ClassifierConfig::Svm { c, epochs } => {
            let model = linear_svm_train(&set, &SvmOptions { c, epochs, seed })?;
            queries
                .iter()
                .map(|q| Ok(linear_svm_predict(q, &model)?))
                .collect()
        }
        ClassifierConfig::Knn { k } => {
            let k = k.min(set.len());
            queries
                .iter()
                .map(|q| Ok(knn_classify(q, &set, k)?))
                .collect()
        }
    }
}

/// Labels every query by the smallest dictionary residual.
pub fn classify_by_dictionaries(
    dicts: &[DpsDictionary<f64>],
    queries: &[DVector<f64>],
) -> Result<Vec<usize>> {
    queries
        .iter()
        .map(|q| Ok(classify_by_residual(&DpsEmbedding::new(q.clone()), dicts)?))
        .collect()
}

/// Projection → optional discriminant analysis → dictionaries or classifier.
pub fn fit_predict(
    train: &[SpdMatrix<f64>],
    train_labels: &[usize],
    test: &[SpdMatrix<f64>],
    s: &PipelineSettings,
    timings: &mut StageTimings,
) -> Result<Vec<usize>> {
    let start = Instant::now();
    let g = Arc::new(gram(train.to_vec(), s.sigma)?);
    record(timings, "gram", start);

    let model = fit_projection(g, s.variant, s.projection, s.seed, timings)?;

    let start = Instant::now();
    let train_cols = model.training_embeddings();
    let mut test_vecs: Vec<DVector<f64>> = model
        .embed_batch(test)?
        .into_iter()
        .map(|e| e.vector)
        .collect();
    let mut train_vecs: Vec<DVector<f64>> =
        train_cols.column_iter().map(|c| c.into_owned()).collect();
    record(timings, "embed", start);

    if let Some(da) = s.discriminant {
        let start = Instant::now();
        let dm = fit_discriminant(&train_cols, train_labels, s.classes, da)?;
        train_vecs = train_vecs
            .iter()
            .map(|v| dm.transform_vector(v))
            .collect::<dps_core::Result<_>>()?;
        test_vecs = test_vecs
            .iter()
            .map(|v| dm.transform_vector(v))
            .collect::<dps_core::Result<_>>()?;
        record(timings, "discriminant", start);
    }

    let start = Instant::now();
    let predictions = match s.dictionary {
        Some(dl) => {
            let dicts = fit_dictionaries(&train_vecs, train_labels, s.classes, dl, s.seed)?;
            classify_by_dictionaries(&dicts, &test_vecs)?
        }
        None => classify_vectors(
            &train_vecs,
            train_labels,
            &test_vecs,
            s.classes,
            s.classifier,
            s.seed,
        )?,
    };
    record(timings, "classify", start);
    Ok(predictions)
}

/// Percentage of matching labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    100.0 * hits as f64 / truth.len() as f64
}

/// `confusion[true][predicted]` counts.
pub fn confusion(predicted: &[usize], truth: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; classes]; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        m[t][p] += 1;
    }
    m
}
