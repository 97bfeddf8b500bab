//! Stein-kernel Gram matrices over a training set.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::scalar::Real;
use crate::spd::{stein_kernel, sym_eig_unchecked, symmetrize, SpdMatrix};

/// Default kernel bandwidth.
pub const DEFAULT_SIGMA: f64 = 0.5;

/// True iff `sigma` is one of `1/2, 2/2, ..., (n-1)/2` (within 1e-12), the
/// values for which the Stein Gram is guaranteed positive definite.
pub fn validate_sigma(sigma: f64, n: usize) -> bool {
    if n < 2 || !sigma.is_finite() {
        return false;
    }
    let twice = (2.0 * sigma).round();
    twice >= 1.0 && twice <= (n - 1) as f64 && (sigma - twice / 2.0).abs() <= 1e-12
}

/// The admissible σ grid for `n` points, thinned to at most `cap` values by
/// geometric subsampling (first and last members always kept).
pub fn admissible_sigmas(n: usize, cap: usize) -> Vec<f64> {
    if n < 2 || cap == 0 {
        return Vec::new();
    }
    let count = n - 1;
    if count <= cap {
        return (1..=count).map(|m| m as f64 / 2.0).collect();
    }
    if cap == 1 {
        return vec![0.5];
    }
    let ratio = (count as f64).ln() / (cap - 1) as f64;
    let mut out: Vec<usize> = (0..cap)
        .map(|i| ((ratio * i as f64).exp().round() as usize).clamp(1, count))
        .collect();
    out.dedup();
    // Rounding collapses the low end; top up with unused small multiples.
    let mut next = 1;
    while out.len() < cap {
        if !out.contains(&next) {
            out.push(next);
        }
        next += 1;
    }
    out.sort_unstable();
    out.into_iter().map(|m| m as f64 / 2.0).collect()
}

/// Gram matrix of the Stein kernel over a training set, with its square root.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGram<T: Real> {
    sigma: T,
    k: DMatrix<T>,
    k_half: DMatrix<T>,
    training: Vec<SpdMatrix<T>>,
    min_eigenvalue: T,
    clamped: usize,
}

impl<T: Real> KernelGram<T> {
    /// Assembles `K[i][j] = exp(-σ J(X_i, X_j))` and `K^{1/2}`.
    ///
    /// A σ outside the admissible grid only logs a warning; negative
    /// eigenvalues are clamped to zero when forming the square root.
    pub fn new(points: Vec<SpdMatrix<T>>, sigma: T) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(DpsError::invalid(
                "points",
                "at least two training points are required",
            ));
        }
        if !(sigma > T::zero()) {
            return Err(DpsError::invalid("sigma", "must be positive"));
        }
        let dim = points[0].dim();
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(DpsError::at(
                    i,
                    DpsError::DimensionMismatch {
                        expected: dim,
                        found: p.dim(),
                    },
                ));
            }
        }
        if !validate_sigma(sigma.as_f64(), n) {
            log::warn!(
                "sigma = {} is outside the admissible set for n = {n}; the Gram may be indefinite",
                sigma.as_f64()
            );
        }

        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let values: Vec<T> = pairs
            .par_iter()
            .map(|&(i, j)| stein_kernel(&points[i], &points[j], sigma))
            .collect::<Result<_>>()?;
        let mut k = DMatrix::identity(n, n);
        for (&(i, j), &v) in pairs.iter().zip(values.iter()) {
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        Ok(Self::from_parts(k, sigma, points))
    }

    /// Rebuilds a Gram from an already assembled kernel matrix.
    pub(crate) fn from_parts(k: DMatrix<T>, sigma: T, training: Vec<SpdMatrix<T>>) -> Self {
        let (k_half, min_eigenvalue, clamped) = psd_sqrt(&k);
        Self {
            sigma,
            k,
            k_half,
            training,
            min_eigenvalue,
            clamped,
        }
    }

    pub(crate) fn from_cached(
        sigma: T,
        k: DMatrix<T>,
        k_half: DMatrix<T>,
        training: Vec<SpdMatrix<T>>,
    ) -> Self {
        let (_, min_eigenvalue, clamped) = psd_sqrt(&k);
        Self {
            sigma,
            k,
            k_half,
            training,
            min_eigenvalue,
            clamped,
        }
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    /// Dimension of the SPD training points.
    pub fn point_dim(&self) -> usize {
        self.training[0].dim()
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn k(&self) -> &DMatrix<T> {
        &self.k
    }

    pub fn k_half(&self) -> &DMatrix<T> {
        &self.k_half
    }

    pub fn training(&self) -> &[SpdMatrix<T>] {
        &self.training
    }

    /// Smallest eigenvalue of `K` before clamping.
    pub fn min_eigenvalue(&self) -> T {
        self.min_eigenvalue
    }

    /// Number of eigenvalues zeroed while forming `K^{1/2}`.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Kernel row `k(query, X)` against every training point.
    pub fn kernel_vector(&self, query: &SpdMatrix<T>) -> Result<DVector<T>> {
        if query.dim() != self.point_dim() {
            return Err(DpsError::DimensionMismatch {
                expected: self.point_dim(),
                found: query.dim(),
            });
        }
        let values: Vec<T> = self
            .training
            .par_iter()
            .map(|x| stein_kernel(query, x, self.sigma))
            .collect::<Result<_>>()?;
        Ok(DVector::from_vec(values))
    }
}

/// Free-function form of [`KernelGram::new`].
pub fn gram<T: Real>(points: Vec<SpdMatrix<T>>, sigma: T) -> Result<KernelGram<T>> {
    KernelGram::new(points, sigma)
}

/// Free-function form of [`KernelGram::kernel_vector`].
pub fn kernel_vector<T: Real>(query: &SpdMatrix<T>, gram: &KernelGram<T>) -> Result<DVector<T>> {
    gram.kernel_vector(query)
}

/// Square root of the PSD projection of a symmetric matrix.
///
/// Returns the root, the smallest raw eigenvalue and the count of clamped ones.
pub fn psd_sqrt<T: Real>(k: &DMatrix<T>) -> (DMatrix<T>, T, usize) {
    let eig = sym_eig_unchecked(&symmetrize(k));
    let floor = T::lit(T::CLAMP_FLOOR) * eig.largest().max(T::zero());
    let clamped = eig.values.iter().filter(|&&v| v < floor).count();
    let root = eig.map(|v| if v < floor { T::zero() } else { v.sqrt() });
    (root, eig.smallest(), clamped)
}
