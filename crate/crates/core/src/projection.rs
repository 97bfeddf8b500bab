//! Kernel projection spaces: random projection (ROSE) and the learned
//! distance preserving projections built from sparse similarity graphs.
//!
//! Every model stores a right factor `R` and the mapping `W = K^{1/2} R`. A
//! query `X` is embedded as `k(X, 𝕏)ᵀ W`, where `k(X, 𝕏)` is its kernel row
//! against the training set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::kernel::KernelGram;
use crate::scalar::Real;
use crate::sparse::{CodeMode, SparseCodes};
use crate::spd::SpdMatrix;

/// Symmetric binary similarity graph over the training points.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph<T: Real> {
    kind: CodeMode,
    adjacency: DMatrix<T>,
}

impl<T: Real> SparseGraph<T> {
    /// Validates a 0/1 adjacency: exactly symmetric with a zero diagonal.
    pub fn from_adjacency(kind: CodeMode, adjacency: DMatrix<T>) -> Result<Self> {
        let (r, c) = adjacency.shape();
        if r != c {
            return Err(DpsError::NotSquare { rows: r, cols: c });
        }
        for i in 0..r {
            if adjacency[(i, i)] != T::zero() {
                return Err(DpsError::invalid(
                    "adjacency",
                    format!("nonzero diagonal at {i}"),
                ));
            }
            for j in 0..c {
                let v = adjacency[(i, j)];
                if v != T::zero() && v != T::one() {
                    return Err(DpsError::invalid("adjacency", "entries must be 0 or 1"));
                }
                if v != adjacency[(j, i)] {
                    return Err(DpsError::NotSymmetric {
                        row: i,
                        col: j,
                        deviation: 1.0,
                        tolerance: 0.0,
                    });
                }
            }
        }
        Ok(Self { kind, adjacency })
    }

    pub fn kind(&self) -> CodeMode {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<T> {
        &self.adjacency
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacency[(i, j)] == T::one())
            .count()
    }
}

/// Connects `i` and `j` when either code uses the other above `tau`.
pub fn build_graph<T: Real>(codes: &SparseCodes<T>, tau: T) -> SparseGraph<T> {
    let c = &codes.codes;
    let n = c.ncols();
    let adjacency = DMatrix::from_fn(n, n, |i, j| {
        if i != j && (c[(i, j)].abs() > tau || c[(j, i)].abs() > tau) {
            T::one()
        } else {
            T::zero()
        }
    });
    SparseGraph {
        kind: codes.mode,
        adjacency,
    }
}

/// Projection family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rose,
    Local,
    Global,
    Hybrid,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Rose => "rose",
            Variant::Local => "l-dps",
            Variant::Global => "g-dps",
            Variant::Hybrid => "h-dps",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Variant::Rose => 0,
            Variant::Local => 1,
            Variant::Global => 2,
            Variant::Hybrid => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Variant::Rose,
            1 => Variant::Local,
            2 => Variant::Global,
            3 => Variant::Hybrid,
            _ => return None,
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = DpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rose" => Ok(Variant::Rose),
            "l-dps" | "local" => Ok(Variant::Local),
            "g-dps" | "global" => Ok(Variant::Global),
            "h-dps" | "hybrid" => Ok(Variant::Hybrid),
            other => Err(DpsError::invalid(
                "variant",
                format!("unknown variant `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Subset size used by the α convention: `t = ⌈n/3⌉`.
pub fn default_subset_size(n: usize) -> usize {
    n.div_ceil(3).max(1)
}

/// Block weight `(p − t)/t` with `p = n` and `t = ⌈n/3⌉`.
pub fn default_alpha(n: usize) -> f64 {
    let t = default_subset_size(n) as f64;
    (n as f64 - t) / t
}

/// ROSE defaults `(t, k)`: `t = min(30, ⌈n/3⌉)`, `k = 128`.
pub fn default_rose_params(n: usize) -> (usize, usize) {
    (default_subset_size(n).min(30), 128)
}

/// A point embedded in a projection space.
#[derive(Debug, Clone, PartialEq)]
pub struct DpsEmbedding<T: Real> {
    pub vector: DVector<T>,
    pub label: Option<usize>,
}

impl<T: Real> DpsEmbedding<T> {
    pub fn new(vector: DVector<T>) -> Self {
        Self {
            vector,
            label: None,
        }
    }

    pub fn with_label(vector: DVector<T>, label: usize) -> Self {
        Self {
            vector,
            label: Some(label),
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Everything needed to embed new SPD matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel<T: Real> {
    gram: Arc<KernelGram<T>>,
    variant: Variant,
    alpha: T,
    beta: T,
    right_factor: DMatrix<T>,
    projection: DMatrix<T>,
    selector: Option<DMatrix<T>>,
    kept_columns: Vec<usize>,
}

impl<T: Real> ProjectionModel<T> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        gram: Arc<KernelGram<T>>,
        variant: Variant,
        alpha: T,
        beta: T,
        right_factor: DMatrix<T>,
        selector: Option<DMatrix<T>>,
        kept_columns: Vec<usize>,
    ) -> Result<Self> {
        if right_factor.nrows() != gram.n() {
            return Err(DpsError::DimensionMismatch {
                expected: gram.n(),
                found: right_factor.nrows(),
            });
        }
        let projection = gram.k_half() * &right_factor;
        Ok(Self {
            gram,
            variant,
            alpha,
            beta,
            right_factor,
            projection,
            selector,
            kept_columns,
        })
    }

    pub fn gram(&self) -> &Arc<KernelGram<T>> {
        &self.gram
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// Embedding dimension `k`.
    pub fn dim(&self) -> usize {
        self.projection.ncols()
    }

    /// `W = K^{1/2} R`, `n × k`.
    pub fn projection(&self) -> &DMatrix<T> {
        &self.projection
    }

    /// The variant-specific right factor `R`.
    pub fn right_factor(&self) -> &DMatrix<T> {
        &self.right_factor
    }

    /// ROSE subset indicator, one column per hyperplane.
    pub fn selector(&self) -> Option<&DMatrix<T>> {
        self.selector.as_ref()
    }

    /// Columns of the unpruned block factor that survived pruning.
    pub fn kept_columns(&self) -> &[usize] {
        &self.kept_columns
    }

    /// Embeds a raw kernel row; linear in its argument.
    pub fn embed_kernel_vector(&self, kv: &DVector<T>) -> Result<DVector<T>> {
        if kv.len() != self.gram.n() {
            return Err(DpsError::DimensionMismatch {
                expected: self.gram.n(),
                found: kv.len(),
            });
        }
        Ok(self.projection.tr_mul(kv))
    }

    pub fn embed(&self, query: &SpdMatrix<T>) -> Result<DpsEmbedding<T>> {
        let kv = self.gram.kernel_vector(query)?;
        Ok(DpsEmbedding::new(self.embed_kernel_vector(&kv)?))
    }

    /// Order-preserving batch embed; the first failure reports its index.
    pub fn embed_batch(&self, queries: &[SpdMatrix<T>]) -> Result<Vec<DpsEmbedding<T>>> {
        queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| self.embed(q).map_err(|e| DpsError::at(i, e)))
            .collect()
    }

    /// Embeddings of the training points as the columns of a `k × n` matrix,
    /// i.e. `(K W)ᵀ`.
    pub fn training_embeddings(&self) -> DMatrix<T> {
        (self.gram.k() * &self.projection).transpose()
    }
}

/// ROSE: column `i` of `W` is `K^{1/2}((1/t) e_s − (1/n) 1)` for a seeded
/// random subset `s` of size `t`.
pub fn rose_map<T: Real>(
    gram: Arc<KernelGram<T>>,
    t: usize,
    k: usize,
    seed: u64,
) -> Result<ProjectionModel<T>> {
    let n = gram.n();
    if t == 0 || t >= n {
        return Err(DpsError::invalid(
            "t",
            format!("subset size {t} must lie in 1..{n}"),
        ));
    }
    if k == 0 {
        return Err(DpsError::invalid(
            "k",
            "at least one hyperplane is required",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selector = DMatrix::<T>::zeros(n, k);
    for col in 0..k {
        for idx in rand::seq::index::sample(&mut rng, n, t) {
            selector[(idx, col)] = T::one();
        }
    }
    let inv_t = T::one() / T::from_count(t);
    let inv_p = T::one() / T::from_count(n);
    let right = selector.map(|s| s * inv_t - inv_p);
    let alpha = T::from_count(n - t) / T::from_count(t);
    ProjectionModel::from_parts(
        gram,
        Variant::Rose,
        alpha,
        alpha,
        right,
        Some(selector),
        (0..k).collect(),
    )
}

/// Options for the learned projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpsOptions<T> {
    pub alpha: T,
    pub beta: T,
    /// Drop all-zero columns of the block factor.
    pub prune_zero_columns: bool,
}

impl<T: Real> DpsOptions<T> {
    /// α from the subset convention, β = α, pruning on.
    pub fn defaults_for(n: usize) -> Self {
        let a = T::lit(default_alpha(n));
        Self {
            alpha: a,
            beta: a,
            prune_zero_columns: true,
        }
    }
}

/// Learned projection: `W = K^{1/2} [α W^l  β W^g]`, or a single weighted
/// block when only one graph is supplied.
pub fn dps_projection<T: Real>(
    gram: Arc<KernelGram<T>>,
    graph_l: Option<&SparseGraph<T>>,
    graph_g: Option<&SparseGraph<T>>,
    opts: &DpsOptions<T>,
) -> Result<ProjectionModel<T>> {
    let n = gram.n();
    for g in [graph_l, graph_g].into_iter().flatten() {
        if g.n() != n {
            return Err(DpsError::DimensionMismatch {
                expected: n,
                found: g.n(),
            });
        }
    }
    let (variant, blocks) = match (graph_l, graph_g) {
        (Some(l), Some(g)) => (
            Variant::Hybrid,
            vec![l.adjacency() * opts.alpha, g.adjacency() * opts.beta],
        ),
        (Some(l), None) => (Variant::Local, vec![l.adjacency() * opts.alpha]),
        (None, Some(g)) => (Variant::Global, vec![g.adjacency() * opts.beta]),
        (None, None) => {
            return Err(DpsError::invalid(
                "graphs",
                "at least one sparse graph is required",
            ))
        }
    };
    assemble_blocks(gram, variant, blocks, opts)
}

pub(crate) fn assemble_blocks<T: Real>(
    gram: Arc<KernelGram<T>>,
    variant: Variant,
    blocks: Vec<DMatrix<T>>,
    opts: &DpsOptions<T>,
) -> Result<ProjectionModel<T>> {
    let n = gram.n();
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut full = DMatrix::zeros(n, total);
    let mut offset = 0;
    for b in &blocks {
        full.columns_mut(offset, b.ncols()).copy_from(b);
        offset += b.ncols();
    }
    let kept: Vec<usize> = if opts.prune_zero_columns {
        (0..total)
            .filter(|&j| full.column(j).iter().any(|v| *v != T::zero()))
            .collect()
    } else {
        (0..total).collect()
    };
    if kept.is_empty() {
        return Err(DpsError::invalid(
            "graphs",
            "every projection column is zero",
        ));
    }
    let right = full.select_columns(kept.iter());
    ProjectionModel::from_parts(gram, variant, opts.alpha, opts.beta, right, None, kept)
}
