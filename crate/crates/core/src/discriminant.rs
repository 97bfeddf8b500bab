//! Graph-embedding discriminant analysis on projected embeddings.
//!
//! Within- and between-class nearest neighbour graphs define the objective
//! `max tr(Wᵀ K̂ (L_b + β E_w) K̂ᵀ W)` subject to `tr(Wᵀ K̂ D_w K̂ᵀ W) = 1`,
//! whose solution is the top of the generalized eigenproblem
//! `K̂ (L_b + β E_w) K̂ᵀ w = λ K̂ D_w K̂ᵀ w`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::projection::DpsEmbedding;
use crate::scalar::Real;
use crate::spd::{sym_eig_unchecked, symmetrize};

/// Neighbour graphs and their degree/Laplacian matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGraphs<T: Real> {
    pub within: DMatrix<T>,
    pub between: DMatrix<T>,
    pub within_degree: DVector<T>,
    pub between_degree: DVector<T>,
    /// `L_b = D_b − E_b`.
    pub between_laplacian: DMatrix<T>,
}

impl<T: Real> ClassGraphs<T> {
    pub fn n(&self) -> usize {
        self.within.nrows()
    }
}

/// Graph-embedding parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdaParams {
    pub nu_within: usize,
    pub nu_between: usize,
    pub beta: f64,
    /// Output dimension; `None` selects `classes − 1` capped by rank.
    pub r: Option<usize>,
}

impl Default for GdaParams {
    fn default() -> Self {
        Self {
            nu_within: 5,
            nu_between: 5,
            beta: 0.5,
            r: None,
        }
    }
}

/// Candidate β values for a validation sweep.
pub const BETA_SWEEP: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

fn degree<T: Real>(adj: &DMatrix<T>) -> DVector<T> {
    DVector::from_iterator(adj.nrows(), adj.row_iter().map(|r| r.sum()))
}

/// Builds the graphs from labelled embeddings.
pub fn build_class_graphs<T: Real>(
    embeddings: &[DpsEmbedding<T>],
    nu_within: usize,
    nu_between: usize,
) -> Result<ClassGraphs<T>> {
    if embeddings.is_empty() {
        return Err(DpsError::Empty("embeddings"));
    }
    let dim = embeddings[0].dim();
    let mut labels = Vec::with_capacity(embeddings.len());
    for (i, e) in embeddings.iter().enumerate() {
        if e.dim() != dim {
            return Err(DpsError::at(
                i,
                DpsError::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                },
            ));
        }
        labels.push(e.label.ok_or_else(|| {
            DpsError::at(i, DpsError::invalid("label", "embedding is unlabelled"))
        })?);
    }
    let columns = DMatrix::from_columns(
        &embeddings
            .iter()
            .map(|e| e.vector.clone())
            .collect::<Vec<_>>(),
    );
    class_graphs_from_columns(&columns, &labels, nu_within, nu_between)
}

/// Builds the graphs from the columns of a `k × n` matrix.
///
/// Neighbours are ranked by Euclidean distance, ties broken by lower index.
pub fn class_graphs_from_columns<T: Real>(
    points: &DMatrix<T>,
    labels: &[usize],
    nu_within: usize,
    nu_between: usize,
) -> Result<ClassGraphs<T>> {
    let n = points.ncols();
    if labels.len() != n {
        return Err(DpsError::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if nu_within == 0 || nu_between == 0 {
        return Err(DpsError::invalid(
            "nu",
            "neighbour counts must be at least 1",
        ));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(DpsError::invalid(
            "labels",
            "at least two classes are required",
        ));
    }

    let neighbours: Vec<(Vec<usize>, Vec<usize>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.column(i);
            let mut same = Vec::new();
            let mut diff = Vec::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (points.column(j) - pi).norm_squared();
                if labels[j] == labels[i] {
                    same.push((d, j));
                } else {
                    diff.push((d, j));
                }
            }
            let order = |a: &(T, usize), b: &(T, usize)| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.1.cmp(&b.1))
            };
            same.sort_by(order);
            diff.sort_by(order);
            (
                same.into_iter().take(nu_within).map(|p| p.1).collect(),
                diff.into_iter().take(nu_between).map(|p| p.1).collect(),
            )
        })
        .collect();

    let mut within = DMatrix::zeros(n, n);
    let mut between = DMatrix::zeros(n, n);
    for (i, (w, b)) in neighbours.iter().enumerate() {
        for &j in w {
            within[(i, j)] = T::one();
            within[(j, i)] = T::one();
        }
        for &j in b {
            between[(i, j)] = T::one();
            between[(j, i)] = T::one();
        }
    }
    let within_degree = degree(&within);
    let between_degree = degree(&between);
    let between_laplacian = DMatrix::from_diagonal(&between_degree) - &between;
    Ok(ClassGraphs {
        within,
        between,
        within_degree,
        between_degree,
        between_laplacian,
    })
}

/// Learned discriminant projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantModel<T: Real> {
    /// `k × r`; column `c` maps an embedding onto output coordinate `c`.
    pub coefficients: DMatrix<T>,
    /// Generalized eigenvalues, descending.
    pub eigenvalues: DVector<T>,
    pub beta: T,
    /// Diagonal load added to the right-hand matrix.
    pub ridge: T,
    /// True when the base ridge was not enough and had to be increased.
    pub ridge_escalated: bool,
}

impl<T: Real> DiscriminantModel<T> {
    pub fn r(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.coefficients.nrows()
    }

    /// `Wᵀ k̂`.
    pub fn transform(&self, embedding: &DpsEmbedding<T>) -> Result<DVector<T>> {
        self.transform_vector(&embedding.vector)
    }

    pub fn transform_vector(&self, v: &DVector<T>) -> Result<DVector<T>> {
        if v.len() != self.input_dim() {
            return Err(DpsError::DimensionMismatch {
                expected: self.input_dim(),
                found: v.len(),
            });
        }
        Ok(self.coefficients.tr_mul(v))
    }
}

/// Left- and right-hand matrices of the generalized eigenproblem (unridged).
pub fn gda_matrices<T: Real>(
    k_hat: &DMatrix<T>,
    graphs: &ClassGraphs<T>,
    beta: T,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if k_hat.ncols() != graphs.n() {
        return Err(DpsError::DimensionMismatch {
            expected: graphs.n(),
            found: k_hat.ncols(),
        });
    }
    let middle = &graphs.between_laplacian + &graphs.within * beta;
    let lhs = symmetrize(&(k_hat * middle * k_hat.transpose()));
    let mut scaled = k_hat.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= graphs.within_degree[j];
    }
    let rhs = symmetrize(&(scaled * k_hat.transpose()));
    Ok((lhs, rhs))
}

/// Solves for the `r` leading discriminant directions.
pub fn solve_gda<T: Real>(
    k_hat: &DMatrix<T>,
    graphs: &ClassGraphs<T>,
    beta: T,
    r: usize,
) -> Result<DiscriminantModel<T>> {
    let k = k_hat.nrows();
    if r == 0 || r > k || r > graphs.n() {
        return Err(DpsError::invalid(
            "r",
            format!("output dimension {r} must lie in 1..={}", k.min(graphs.n())),
        ));
    }
    if graphs.within_degree.iter().all(|d| *d == T::zero()) {
        return Err(DpsError::invalid(
            "graphs",
            "within-class graph has no edges",
        ));
    }
    let (lhs, rhs) = gda_matrices(k_hat, graphs, beta)?;

    let trace = rhs.trace();
    let base = if trace > T::zero() {
        T::lit(1e-8) * trace / T::from_count(k)
    } else {
        T::lit(1e-8)
    };
    let mut ridge = base;
    let mut escalated = false;
    let chol = loop {
        let mut loaded = rhs.clone();
        for i in 0..k {
            loaded[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(loaded) {
            break c;
        }
        escalated = true;
        ridge *= T::lit(10.0);
        if !ridge.is_finite() || ridge > trace.max(T::one()) * T::lit(1e6) {
            return Err(DpsError::invalid(
                "graphs",
                "right-hand matrix cannot be stabilized",
            ));
        }
    };
    if escalated {
        log::warn!("discriminant ridge escalated to {}", ridge.as_f64());
    }

    let l = chol.l();
    let left = l
        .solve_lower_triangular(&lhs)
        .expect("Cholesky factor is nonsingular");
    let reduced = symmetrize(
        &l.solve_lower_triangular(&left.transpose())
            .expect("Cholesky factor is nonsingular"),
    );
    let eig = sym_eig_unchecked(&reduced);
    let top = eig.vectors.columns(0, r).into_owned();
    let mut coefficients = l
        .transpose()
        .solve_upper_triangular(&top)
        .expect("Cholesky factor is nonsingular");

    // Scale so the constraint trace over all r columns is exactly 1.
    let share = T::one() / T::from_count(r);
    for mut col in coefficients.column_iter_mut() {
        let owned = col.clone_owned();
        let mut energy = (rhs.clone() * &owned).dot(&owned);
        if !(energy > T::zero()) {
            energy = owned.norm_squared() * ridge + energy.max(T::zero());
        }
        if energy > T::zero() {
            col *= (share / energy).sqrt();
        }
        let pivot = col.iter().fold(
            T::zero(),
            |acc, &v| if v.abs() > acc.abs() { v } else { acc },
        );
        if pivot < T::zero() {
            col.neg_mut();
        }
    }

    Ok(DiscriminantModel {
        coefficients,
        eigenvalues: DVector::from_iterator(r, eig.values.iter().take(r).copied()),
        beta,
        ridge,
        ridge_escalated: escalated,
    })
}

/// `tr(Wᵀ K̂ (D − E) K̂ᵀ W)` for an arbitrary adjacency `E`.
pub fn laplacian_trace<T: Real>(w: &DMatrix<T>, k_hat: &DMatrix<T>, adjacency: &DMatrix<T>) -> T {
    let lap = DMatrix::from_diagonal(&degree(adjacency)) - adjacency;
    let y = w.transpose() * k_hat;
    (&y * lap * y.transpose()).trace()
}

/// `tr(Wᵀ K̂ D_w K̂ᵀ W)`, the constrained quantity.
pub fn constraint_trace<T: Real>(w: &DMatrix<T>, k_hat: &DMatrix<T>, graphs: &ClassGraphs<T>) -> T {
    let y = w.transpose() * k_hat;
    let mut acc = T::zero();
    for (j, col) in y.column_iter().enumerate() {
        acc += col.norm_squared() * graphs.within_degree[j];
    }
    acc
}

/// Default output dimension: `classes − 1`, capped by the rank of the
/// right-hand matrix and by the embedding dimension.
pub fn default_output_dim<T: Real>(
    k_hat: &DMatrix<T>,
    graphs: &ClassGraphs<T>,
    classes: usize,
) -> usize {
    let (_, rhs) = match gda_matrices(k_hat, graphs, T::zero()) {
        Ok(m) => m,
        Err(_) => return 1,
    };
    let eig = sym_eig_unchecked(&rhs);
    let floor = eig.largest().max(T::zero()) * T::lit(T::EIGEN_FLOOR);
    let rank = eig.values.iter().filter(|&&v| v > floor).count();
    classes
        .saturating_sub(1)
        .min(rank)
        .min(k_hat.nrows())
        .max(1)
}
