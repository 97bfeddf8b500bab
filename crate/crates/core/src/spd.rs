//! Symmetric positive definite matrices and their geometry.
//!
//! Spectral matrix functions are evaluated as `V diag(f(λ)) Vᵀ` on the symmetric
//! eigendecomposition and symmetrized afterwards. Geometry follows the affine
//! invariant metric; the Stein divergence uses Cholesky log-determinants so it
//! never forms an explicit determinant.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{DpsError, Result};
use crate::scalar::Real;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig<T: Real> {
    pub values: DVector<T>,
    /// Orthonormal eigenvectors stored column-wise, aligned with `values`.
    pub vectors: DMatrix<T>,
}

impl<T: Real> SymEig<T> {
    /// Builds `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn map<F: Fn(T) -> T>(&self, f: F) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.map(|v| v)
    }

    pub fn largest(&self) -> T {
        self.values[0]
    }

    pub fn smallest(&self) -> T {
        self.values[self.values.len() - 1]
    }
}

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (m + m.transpose()) * half
}

/// Checks squareness, finiteness and symmetry relative to the largest entry.
pub fn check_symmetric<T: Real>(m: &DMatrix<T>) -> Result<()> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(DpsError::NotSquare { rows, cols });
    }
    let mut scale = T::zero();
    for j in 0..cols {
        for i in 0..rows {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(DpsError::NonFinite { row: i, col: j });
            }
            scale = scale.max(v.abs());
        }
    }
    let tol = T::lit(T::SYMMETRY_TOL) * scale;
    for i in 0..rows {
        for j in (i + 1)..cols {
            let dev = (m[(i, j)] - m[(j, i)]).abs();
            if dev > tol {
                return Err(DpsError::NotSymmetric {
                    row: i,
                    col: j,
                    deviation: dev.as_f64(),
                    tolerance: tol.as_f64(),
                });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig<T: Real>(s: &DMatrix<T>) -> Result<SymEig<T>> {
    check_symmetric(s)?;
    Ok(sym_eig_unchecked(&symmetrize(s)))
}

pub(crate) fn sym_eig_unchecked<T: Real>(s: &DMatrix<T>) -> SymEig<T> {
    let n = s.nrows();
    if n == 0 {
        return SymEig {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEig { values, vectors }
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
pub fn log_det<T: Real>(m: &DMatrix<T>) -> Result<T> {
    let chol = Cholesky::new(m.clone()).ok_or_else(|| {
        let eig = sym_eig_unchecked(&symmetrize(m));
        DpsError::NotPositiveDefinite {
            eigenvalue: eig.smallest().as_f64(),
            floor: 0.0,
        }
    })?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..m.nrows() {
        acc += l[(i, i)].ln();
    }
    Ok(acc * T::lit(2.0))
}

/// A symmetric positive definite matrix with its cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix<T: Real> {
    matrix: DMatrix<T>,
    eig: SymEig<T>,
    log_det: T,
}

impl<T: Real> SpdMatrix<T> {
    /// Validates symmetry and positive definiteness.
    ///
    /// An eigenvalue counts as positive when it exceeds `T::EIGEN_FLOOR` times
    /// the largest eigenvalue.
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        check_symmetric(&matrix)?;
        if matrix.nrows() == 0 {
            return Err(DpsError::Empty("SPD matrix of dimension 0"));
        }
        Self::from_symmetric(symmetrize(&matrix))
    }

    fn from_symmetric(matrix: DMatrix<T>) -> Result<Self> {
        let eig = sym_eig_unchecked(&matrix);
        let largest = eig.largest();
        let smallest = eig.smallest();
        let floor = T::lit(T::EIGEN_FLOOR) * largest;
        if largest <= T::zero() || smallest <= floor {
            return Err(DpsError::NotPositiveDefinite {
                eigenvalue: smallest.as_f64(),
                floor: floor.max(T::zero()).as_f64(),
            });
        }
        let log_det = match log_det(&matrix) {
            Ok(v) => v,
            // Cholesky can fail right at the floor; the spectrum is authoritative.
            Err(_) => eig.values.iter().fold(T::zero(), |acc, &v| acc + v.ln()),
        };
        Ok(Self {
            matrix,
            eig,
            log_det,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_row_slice(dim: usize, data: &[T]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(DpsError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn eigen(&self) -> &SymEig<T> {
        &self.eig
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// Principal square root as a plain matrix.
    pub fn sqrt_matrix(&self) -> DMatrix<T> {
        self.eig.map(|v| v.sqrt())
    }

    /// Inverse principal square root.
    pub fn inv_sqrt_matrix(&self) -> DMatrix<T> {
        self.eig.map(|v| T::one() / v.sqrt())
    }

    pub fn logm(&self) -> DMatrix<T> {
        self.eig.map(|v| v.ln())
    }

    /// Congruence `Aᵀ X A`; the result is SPD whenever `A` is invertible.
    pub fn congruence(&self, a: &DMatrix<T>) -> Result<Self> {
        if a.nrows() != self.dim() {
            return Err(DpsError::DimensionMismatch {
                expected: self.dim(),
                found: a.nrows(),
            });
        }
        Self::new(symmetrize(&(a.transpose() * &self.matrix * a)))
    }

    pub fn cast<U: Real>(&self) -> Result<SpdMatrix<U>> {
        SpdMatrix::new(self.matrix.map(|v| U::lit(v.as_f64())))
    }
}

/// A point in the tangent space at some SPD pole: a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real>(DMatrix<T>);

impl<T: Real> TangentVector<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        check_symmetric(&matrix)?;
        Ok(Self(symmetrize(&matrix)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.0
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(DpsError::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Matrix logarithm of an SPD matrix.
pub fn spd_logm<T: Real>(x: &SpdMatrix<T>) -> DMatrix<T> {
    x.logm()
}

/// Matrix exponential of a symmetric matrix.
pub fn spd_expm<T: Real>(s: &DMatrix<T>) -> Result<SpdMatrix<T>> {
    let eig = sym_eig(s)?;
    SpdMatrix::new(eig.map(|v| v.exp()))
}

/// Principal square root of an SPD matrix.
pub fn spd_sqrt<T: Real>(x: &SpdMatrix<T>) -> SpdMatrix<T> {
    let eig = SymEig {
        values: x.eig.values.map(|v| v.sqrt()),
        vectors: x.eig.vectors.clone(),
    };
    let matrix = eig.reconstruct();
    let log_det = x.log_det * T::lit(0.5);
    SpdMatrix {
        matrix,
        eig,
        log_det,
    }
}

/// `X^{-1/2} Y X^{-1/2}`, symmetrized, together with `X^{1/2}`.
fn whiten<T: Real>(x: &SpdMatrix<T>, y: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let inv_half = x.inv_sqrt_matrix();
    let inner = symmetrize(&(&inv_half * y * &inv_half));
    (inner, x.sqrt_matrix())
}

/// Riemannian logarithm at pole `xi`: maps `xj` to the tangent space at `xi`.
pub fn airm_log<T: Real>(xi: &SpdMatrix<T>, xj: &SpdMatrix<T>) -> Result<TangentVector<T>> {
    same_dim(xi.dim(), xj.dim())?;
    let (inner, half) = whiten(xi, xj.matrix());
    let eig = sym_eig_unchecked(&inner);
    if eig.smallest() <= T::zero() {
        return Err(DpsError::NotPositiveDefinite {
            eigenvalue: eig.smallest().as_f64(),
            floor: 0.0,
        });
    }
    let log_inner = eig.map(|v| v.ln());
    Ok(TangentVector(symmetrize(&(&half * log_inner * &half))))
}

/// Riemannian exponential at pole `xi`.
pub fn airm_exp<T: Real>(xi: &SpdMatrix<T>, y: &TangentVector<T>) -> Result<SpdMatrix<T>> {
    same_dim(xi.dim(), y.dim())?;
    let (inner, half) = whiten(xi, y.matrix());
    let exp_inner = sym_eig_unchecked(&inner).map(|v| v.exp());
    SpdMatrix::new(symmetrize(&(&half * exp_inner * &half)))
}

/// Affine invariant geodesic distance `‖logm(X^{-1/2} Y X^{-1/2})‖_F`.
pub fn geodesic_distance<T: Real>(xi: &SpdMatrix<T>, xj: &SpdMatrix<T>) -> Result<T> {
    same_dim(xi.dim(), xj.dim())?;
    if xi.matrix() == xj.matrix() {
        return Ok(T::zero());
    }
    let (inner, _) = whiten(xi, xj.matrix());
    let eig = sym_eig_unchecked(&inner);
    let mut acc = T::zero();
    for &v in eig.values.iter() {
        if v <= T::zero() {
            return Err(DpsError::NotPositiveDefinite {
                eigenvalue: v.as_f64(),
                floor: 0.0,
            });
        }
        let l = v.ln();
        acc += l * l;
    }
    Ok(acc.sqrt())
}

/// Stein (Jensen-Bregman log-det) divergence `log det((X+Y)/2) - ½ log det(XY)`.
pub fn stein_divergence<T: Real>(x: &SpdMatrix<T>, y: &SpdMatrix<T>) -> Result<T> {
    same_dim(x.dim(), y.dim())?;
    let mid = (x.matrix() + y.matrix()) * T::lit(0.5);
    let j = log_det(&mid)? - (x.log_det() + y.log_det()) * T::lit(0.5);
    Ok(j.max(T::zero()))
}

/// Stein kernel `exp(-σ J(X, Y))`.
pub fn stein_kernel<T: Real>(x: &SpdMatrix<T>, y: &SpdMatrix<T>, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(DpsError::invalid("sigma", "must be positive"));
    }
    Ok((-sigma * stein_divergence(x, y)?).exp())
}

/// Lifts a symmetric (possibly rank-deficient) matrix onto the SPD cone.
///
/// With `δ = ε·trace(C)/d`, the diagonal is loaded by `δ` whenever the smallest
/// eigenvalue is at or below `δ`. A non-positive trace falls back to `δ = ε`.
/// Negative eigenvalues are lifted so the new minimum is at least `δ`.
pub fn regularize<T: Real>(c: &DMatrix<T>, epsilon: T) -> Result<SpdMatrix<T>> {
    check_symmetric(c)?;
    let d = c.nrows();
    if d == 0 {
        return Err(DpsError::Empty("SPD matrix of dimension 0"));
    }
    let eps = if epsilon > T::zero() {
        epsilon
    } else {
        T::lit(1e-6)
    };
    let sym = symmetrize(c);
    let eig = sym_eig_unchecked(&sym);
    let trace = sym.trace();
    let mut delta = if trace > T::zero() {
        eps * trace / T::from_count(d)
    } else {
        eps
    };
    // Keep the loaded spectrum clear of the PD floor regardless of ε.
    let largest = eig.largest().max(T::zero());
    delta = delta.max(T::lit(4.0 * T::EIGEN_FLOOR) * (largest + delta));
    let smallest = eig.smallest();
    if smallest > delta {
        return SpdMatrix::from_symmetric(sym);
    }
    let shift = delta - smallest.min(T::zero());
    let mut loaded = sym;
    for i in 0..d {
        loaded[(i, i)] += shift;
    }
    SpdMatrix::from_symmetric(loaded)
}
