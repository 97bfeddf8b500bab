//! L1 solvers for self-expressive codes and the greedy coder used by KSVD.
//!
//! The self-expressive programs are solved in their penalized form
//! `½‖Ax − b‖² + λ‖x‖₁` with ADMM. The x-update system `(AᵀA + ρI)` is
//! diagonalized once per design matrix so that every column, and every value
//! of ρ chosen by residual balancing, reuses the same factorization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::kernel::KernelGram;
use crate::scalar::Real;
use crate::spd::{sym_eig_unchecked, symmetrize, SymEig};

/// ADMM parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions<T> {
    pub rho: T,
    pub max_iter: usize,
    pub abs_tol: T,
    pub rel_tol: T,
    /// Residual ratio that triggers a ρ update.
    pub balance_ratio: T,
    /// Multiplicative ρ step used by residual balancing.
    pub balance_factor: T,
}

impl<T: Real> Default for AdmmOptions<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            max_iter: 2000,
            abs_tol: T::lit(1e-8),
            rel_tol: T::lit(1e-6),
            balance_ratio: T::lit(10.0),
            balance_factor: T::lit(2.0),
        }
    }
}

/// Output of a single lasso solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution<T: Real> {
    pub x: DVector<T>,
    pub converged: bool,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
}

/// `½‖Ax − b‖² + λ‖x‖₁`.
pub fn lasso_objective<T: Real>(a: &DMatrix<T>, b: &DVector<T>, lambda: T, x: &DVector<T>) -> T {
    let r = a * x - b;
    r.norm_squared() * T::lit(0.5) + lambda * x.lp_norm(1)
}

#[inline]
fn soft_threshold<T: Real>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

/// A design matrix prepared for repeated lasso solves.
#[derive(Debug, Clone)]
pub struct LassoProblem<T: Real> {
    a: DMatrix<T>,
    /// Spectrum of `AᵀA`.
    normal: SymEig<T>,
}

impl<T: Real> LassoProblem<T> {
    pub fn new(a: DMatrix<T>) -> Self {
        let normal = sym_eig_unchecked(&symmetrize(&(a.transpose() * &a)));
        Self { a, normal }
    }

    pub fn design(&self) -> &DMatrix<T> {
        &self.a
    }

    /// `(AᵀA + ρI)⁻¹ rhs` for a vector or a block of columns.
    fn solve_shifted(&self, rho: T, rhs: &DMatrix<T>) -> DMatrix<T> {
        let v = &self.normal.vectors;
        let mut proj = v.transpose() * rhs;
        for (i, mut row) in proj.row_iter_mut().enumerate() {
            row /= self.normal.values[i].max(T::zero()) + rho;
        }
        v * proj
    }

    /// Solves a single penalized problem; `exclude` pins one coordinate to zero.
    pub fn solve(
        &self,
        b: &DVector<T>,
        lambda: T,
        exclude: Option<usize>,
        opts: &AdmmOptions<T>,
    ) -> Result<LassoSolution<T>> {
        let (m, q) = self.a.shape();
        if b.len() != m {
            return Err(DpsError::DimensionMismatch {
                expected: m,
                found: b.len(),
            });
        }
        if !(lambda > T::zero()) {
            return Err(DpsError::invalid("lambda", "must be positive"));
        }
        if let Some(e) = exclude {
            if e >= q {
                return Err(DpsError::invalid(
                    "exclude",
                    format!("index {e} out of range {q}"),
                ));
            }
        }
        let atb = self.a.tr_mul(b);
        let rhs = DMatrix::from_column_slice(q, 1, atb.as_slice());
        let sol = admm_block(self, &rhs, lambda, |_| exclude, opts);
        Ok(LassoSolution {
            x: sol.x.column(0).into_owned(),
            converged: sol.converged,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
        })
    }
}

struct BlockSolution<T: Real> {
    x: DMatrix<T>,
    converged: bool,
    iterations: usize,
    primal_residual: T,
    dual_residual: T,
}

/// Scaled-form ADMM on a block of right-hand sides sharing one ρ.
///
/// `pinned(col)` reports the coordinate forced to zero in column `col`.
fn admm_block<T: Real, P>(
    problem: &LassoProblem<T>,
    atb: &DMatrix<T>,
    lambda: T,
    pinned: P,
    opts: &AdmmOptions<T>,
) -> BlockSolution<T>
where
    P: Fn(usize) -> Option<usize>,
{
    let (q, cols) = atb.shape();
    let pins: Vec<Option<usize>> = (0..cols).map(&pinned).collect();
    let mut rho = opts.rho;
    let mut z = DMatrix::<T>::zeros(q, cols);
    let mut u = DMatrix::<T>::zeros(q, cols);
    let scale = T::from_count(q * cols).sqrt();
    let mut primal = T::zero();
    let mut dual = T::zero();

    if atb.iter().all(|v| *v == T::zero()) {
        return BlockSolution {
            x: z,
            converged: true,
            iterations: 0,
            primal_residual: primal,
            dual_residual: dual,
        };
    }

    for iter in 1..=opts.max_iter {
        let rhs = atb + (&z - &u) * rho;
        let x = problem.solve_shifted(rho, &rhs);

        let z_old = z.clone();
        let thresh = lambda / rho;
        z = &x + &u;
        z.apply(|v| *v = soft_threshold(*v, thresh));
        for (j, pin) in pins.iter().enumerate() {
            if let Some(i) = pin {
                z[(*i, j)] = T::zero();
            }
        }
        u += &x - &z;

        primal = (&x - &z).norm();
        dual = (&z - &z_old).norm() * rho;
        let eps_pri = scale * opts.abs_tol + opts.rel_tol * x.norm().max(z.norm());
        let eps_dual = scale * opts.abs_tol + opts.rel_tol * u.norm() * rho;
        if primal <= eps_pri && dual <= eps_dual {
            return BlockSolution {
                x: z,
                converged: true,
                iterations: iter,
                primal_residual: primal,
                dual_residual: dual,
            };
        }

        if primal > opts.balance_ratio * dual {
            rho *= opts.balance_factor;
            u /= opts.balance_factor;
        } else if dual > opts.balance_ratio * primal {
            rho /= opts.balance_factor;
            u *= opts.balance_factor;
        }
    }

    BlockSolution {
        x: z,
        converged: false,
        iterations: opts.max_iter,
        primal_residual: primal,
        dual_residual: dual,
    }
}

/// One-shot lasso: `argmin ½‖Ax − b‖² + λ‖x‖₁` with optional pinned coordinate.
pub fn lasso_admm<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
    lambda: T,
    exclude: Option<usize>,
    opts: &AdmmOptions<T>,
) -> Result<LassoSolution<T>> {
    LassoProblem::new(a.clone()).solve(b, lambda, exclude, opts)
}

/// Which self-expressive program produced a code matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeMode {
    Local,
    Global,
}

/// Self-expressive codes; column `i` is the code of training point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodes<T: Real> {
    pub mode: CodeMode,
    pub codes: DMatrix<T>,
    /// Default edge threshold, `1e-6 · max|codes|`.
    pub tau: T,
    /// Per-column convergence flags.
    pub converged: Vec<bool>,
}

impl<T: Real> SparseCodes<T> {
    fn new(mode: CodeMode, codes: DMatrix<T>, converged: Vec<bool>) -> Self {
        let tau = default_tau(&codes);
        Self {
            mode,
            codes,
            tau,
            converged,
        }
    }

    pub fn n(&self) -> usize {
        self.codes.ncols()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// `1e-6 · max|codes|`.
pub fn default_tau<T: Real>(codes: &DMatrix<T>) -> T {
    codes.amax() * T::lit(1e-6)
}

/// `1e-2 · max_i ‖k̄_i‖` over the columns of `K^{1/2}`.
pub fn default_lambda<T: Real>(gram: &KernelGram<T>) -> T {
    let max_norm = gram
        .k_half()
        .column_iter()
        .map(|c| c.norm())
        .fold(T::zero(), |a, b| a.max(b));
    max_norm * T::lit(1e-2)
}

fn check_codes_input<T: Real>(gram: &KernelGram<T>, lambda: T) -> Result<()> {
    if gram.n() < 3 {
        return Err(DpsError::invalid(
            "gram",
            "self-expressive codes need at least 3 points",
        ));
    }
    if !(lambda > T::zero()) {
        return Err(DpsError::invalid("lambda", "must be positive"));
    }
    Ok(())
}

/// Local self-expressive codes: column `i` codes `k̄_i` over the other columns
/// of `K^{1/2}`, solved as `n` independent problems.
pub fn local_sparse_codes<T: Real>(
    gram: &KernelGram<T>,
    lambda: T,
    opts: &AdmmOptions<T>,
) -> Result<SparseCodes<T>> {
    check_codes_input(gram, lambda)?;
    let n = gram.n();
    let problem = LassoProblem::new(gram.k_half().clone());
    let solutions: Vec<LassoSolution<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let target = gram.k_half().column(i).into_owned();
            problem.solve(&target, lambda, Some(i), opts)
        })
        .collect::<Result<_>>()?;
    let mut codes = DMatrix::zeros(n, n);
    let mut converged = Vec::with_capacity(n);
    for (i, s) in solutions.into_iter().enumerate() {
        if !s.converged {
            log::warn!(
                "local code {i} did not converge after {} iterations",
                s.iterations
            );
        }
        codes.set_column(i, &s.x);
        converged.push(s.converged);
    }
    Ok(SparseCodes::new(CodeMode::Local, codes, converged))
}

/// Global self-expressive codes: `min ½‖K^{1/2} − K^{1/2}G‖²_F + λ‖G‖₁`
/// subject to `diag(G) = 0`, solved as one matrix-valued ADMM with a shared ρ.
pub fn global_sparse_codes<T: Real>(
    gram: &KernelGram<T>,
    lambda: T,
    opts: &AdmmOptions<T>,
) -> Result<SparseCodes<T>> {
    check_codes_input(gram, lambda)?;
    let n = gram.n();
    let problem = LassoProblem::new(gram.k_half().clone());
    let atb = gram.k_half().tr_mul(gram.k_half());
    let sol = admm_block(&problem, &atb, lambda, Some, opts);
    if !sol.converged {
        log::warn!(
            "global codes did not converge after {} iterations",
            sol.iterations
        );
    }
    Ok(SparseCodes::new(
        CodeMode::Global,
        sol.x,
        vec![sol.converged; n],
    ))
}

/// Orthogonal matching pursuit with at most `t0` atoms.
///
/// Columns of `dict` must be unit norm. Ties in correlation go to the lowest
/// column index.
pub fn omp<T: Real>(dict: &DMatrix<T>, y: &DVector<T>, t0: usize) -> Result<DVector<T>> {
    let (m, q) = dict.shape();
    if y.len() != m {
        return Err(DpsError::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    if t0 == 0 || t0 > m.min(q) {
        return Err(DpsError::invalid(
            "t0",
            format!("sparsity {t0} outside 1..={}", m.min(q)),
        ));
    }
    let tol = T::lit(T::UNIT_NORM_TOL);
    for (j, c) in dict.column_iter().enumerate() {
        if (c.norm() - T::one()).abs() > tol {
            return Err(DpsError::invalid(
                "dict",
                format!("column {j} is not unit norm"),
            ));
        }
    }
    Ok(omp_unchecked(dict, y, t0))
}

pub(crate) fn omp_unchecked<T: Real>(dict: &DMatrix<T>, y: &DVector<T>, t0: usize) -> DVector<T> {
    let q = dict.ncols();
    let mut code = DVector::zeros(q);
    let y_norm = y.norm();
    if y_norm == T::zero() {
        return code;
    }
    let stop = y_norm * T::lit(T::EIGEN_FLOOR);
    let mut selected: Vec<usize> = Vec::with_capacity(t0);
    // Orthonormal basis of the selected atoms and the triangular factor R.
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(t0);
    let mut r_factor = DMatrix::<T>::zeros(t0, t0);
    let mut residual = y.clone();

    for _ in 0..t0 {
        if residual.norm() <= stop {
            break;
        }
        let corr = dict.tr_mul(&residual);
        let mut best: Option<(usize, T)> = None;
        for j in 0..q {
            if selected.contains(&j) {
                continue;
            }
            let c = corr[j].abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        if c <= stop {
            break;
        }
        let atom = dict.column(j).into_owned();
        let mut v = atom.clone();
        let k = basis.len();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for (i, qi) in basis.iter().enumerate() {
                let proj = qi.dot(&v);
                r_factor[(i, k)] += proj;
                v -= qi * proj;
            }
        }
        let norm = v.norm();
        if norm <= T::lit(T::EIGEN_FLOOR) {
            break;
        }
        r_factor[(k, k)] = norm;
        basis.push(v / norm);
        selected.push(j);

        let qk = &basis[k];
        residual -= qk * qk.dot(&residual);
    }

    // Back substitution R x = Qᵀ y.
    let s = selected.len();
    let qty: Vec<T> = basis.iter().map(|qi| qi.dot(y)).collect();
    let mut coef = vec![T::zero(); s];
    for i in (0..s).rev() {
        let mut acc = qty[i];
        for k in (i + 1)..s {
            acc -= r_factor[(i, k)] * coef[k];
        }
        coef[i] = acc / r_factor[(i, i)];
    }
    for (idx, &j) in selected.iter().enumerate() {
        code[j] = coef[idx];
    }
    code
}
