//! KSVD dictionary learning over projected embeddings and residual-based
//! classification with per-class dictionaries.
//!
//! The energy minimized is `Σ_j ‖k̂_j − D v_j‖²` with an `ℓ0` budget `T0` on
//! every code. A lasso coder over the same atoms is available for callers that
//! prefer the `ℓ1` form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::projection::DpsEmbedding;
use crate::scalar::Real;
use crate::sparse::{omp_unchecked, AdmmOptions, LassoProblem};

/// Learned dictionary with unit-norm atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DpsDictionary<T: Real> {
    /// `k × m`, one atom per column.
    pub atoms: DMatrix<T>,
    pub sparsity: usize,
    /// Penalty used only by [`sparse_code_lasso`].
    pub lambda: T,
    /// Energy after each training iteration.
    pub training_history: Vec<T>,
}

impl<T: Real> DpsDictionary<T> {
    /// Wraps fixed atoms; every column must be unit norm.
    pub fn from_atoms(atoms: DMatrix<T>, sparsity: usize, lambda: T) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(DpsError::Empty("atoms"));
        }
        if sparsity == 0 || sparsity > atoms.ncols() {
            return Err(DpsError::invalid(
                "t0",
                format!("sparsity must lie in 1..={}", atoms.ncols()),
            ));
        }
        let tol = T::lit(T::UNIT_NORM_TOL);
        for (j, c) in atoms.column_iter().enumerate() {
            if (c.norm() - T::one()).abs() > tol {
                return Err(DpsError::invalid(
                    "atoms",
                    format!("column {j} is not unit norm"),
                ));
            }
        }
        Ok(Self {
            atoms,
            sparsity,
            lambda,
            training_history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn size(&self) -> usize {
        self.atoms.ncols()
    }
}

/// KSVD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdOptions {
    pub atoms: usize,
    pub sparsity: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl KsvdOptions {
    /// `m = 4 · classes`, `T0 = 3`, 30 iterations.
    pub fn defaults_for(classes: usize, seed: u64) -> Self {
        Self {
            atoms: 4 * classes.max(1),
            sparsity: 3,
            iterations: 30,
            seed,
        }
    }
}

fn column_residuals<T: Real>(
    signals: &DMatrix<T>,
    atoms: &DMatrix<T>,
    codes: &DMatrix<T>,
) -> Vec<T> {
    let r = signals - atoms * codes;
    r.column_iter().map(|c| c.norm_squared()).collect()
}

fn embeddings_to_columns<T: Real>(embeddings: &[DpsEmbedding<T>]) -> Result<DMatrix<T>> {
    let first = embeddings.first().ok_or(DpsError::Empty("embeddings"))?;
    let dim = first.dim();
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
    }
    let cols: Vec<DVector<T>> = embeddings.iter().map(|e| e.vector.clone()).collect();
    Ok(DMatrix::from_columns(&cols))
}

/// Trains a dictionary of `m` atoms on the given embeddings.
pub fn ksvd_train<T: Real>(
    embeddings: &[DpsEmbedding<T>],
    m: usize,
    t0: usize,
    iterations: usize,
    seed: u64,
) -> Result<DpsDictionary<T>> {
    let signals = embeddings_to_columns(embeddings)?;
    ksvd_train_columns(&signals, m, t0, iterations, seed)
}

/// [`ksvd_train`] over the columns of a `k × n` signal matrix.
pub fn ksvd_train_columns<T: Real>(
    signals: &DMatrix<T>,
    m: usize,
    t0: usize,
    iterations: usize,
    seed: u64,
) -> Result<DpsDictionary<T>> {
    let (k, n) = signals.shape();
    if n == 0 || k == 0 {
        return Err(DpsError::Empty("signals"));
    }
    if m == 0 || m > n {
        return Err(DpsError::invalid(
            "m",
            format!("dictionary size {m} must lie in 1..={n}"),
        ));
    }
    if t0 == 0 || t0 > m {
        return Err(DpsError::invalid(
            "t0",
            format!("sparsity {t0} must lie in 1..={m}"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = DMatrix::zeros(k, m);
    for (slot, idx) in sample(&mut rng, n, m).into_iter().enumerate() {
        let col = signals.column(idx);
        let norm = col.norm();
        let atom = if norm > T::zero() {
            col / norm
        } else {
            random_unit(&mut rng, k)
        };
        atoms.set_column(slot, &atom);
    }

    let residuals: Vec<T> = signals.column_iter().map(|c| c.norm_squared()).collect();
    let mut state = KsvdState {
        energy: residuals.iter().fold(T::zero(), |a, &b| a + b),
        atoms,
        codes: DMatrix::zeros(m, n),
        residuals,
    };
    let mut history = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        // Standard KSVD recodes every signal from scratch. Greedy coding can
        // make that step worse, so fall back to an iteration that keeps each
        // signal's better code whenever the plain one costs energy.
        let mut accepted = None;
        for coding in [Coding::Cleared, Coding::Fresh, Coding::KeepBetter] {
            let trial = ksvd_iteration(signals, &state, t0, coding, &mut rng);
            if coding == Coding::KeepBetter || trial.energy <= state.energy {
                accepted = Some(trial);
                break;
            }
        }
        state = accepted.expect("keep-better iteration is always accepted");
        history.push(state.energy);
    }

    Ok(DpsDictionary {
        atoms: state.atoms,
        sparsity: t0,
        lambda: T::zero(),
        training_history: history,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Coding {
    /// Re-seed weak atoms, then recode from scratch.
    Cleared,
    Fresh,
    KeepBetter,
}

/// Atoms used by fewer signals than this, or more coherent than
/// `DUPLICATE_COHERENCE` with an earlier atom, are re-seeded by `Coding::Cleared`.
const MIN_USAGE: usize = 4;
const DUPLICATE_COHERENCE: f64 = 0.99;

struct KsvdState<T: Real> {
    atoms: DMatrix<T>,
    codes: DMatrix<T>,
    residuals: Vec<T>,
    energy: T,
}

fn reseed_atom<T: Real>(
    signals: &DMatrix<T>,
    atoms: &mut DMatrix<T>,
    j: usize,
    residuals: &[T],
    taken: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
) {
    if let Some(idx) = worst_signal(residuals, taken, rng) {
        let col = signals.column(idx);
        let norm = col.norm();
        if norm > T::zero() {
            atoms.set_column(j, &(col / norm));
            taken.push(idx);
        }
    }
}

/// One coding pass followed by sequential rank-1 atom updates.
fn ksvd_iteration<T: Real>(
    signals: &DMatrix<T>,
    prev: &KsvdState<T>,
    t0: usize,
    coding: Coding,
    rng: &mut ChaCha8Rng,
) -> KsvdState<T> {
    let (k, n) = signals.shape();
    let m = prev.atoms.ncols();
    let mut atoms = prev.atoms.clone();
    let mut codes = prev.codes.clone();
    let mut taken: Vec<usize> = Vec::new();

    if coding == Coding::Cleared {
        let limit = T::lit(DUPLICATE_COHERENCE);
        let mut residual = signals - &atoms * &codes;
        for j in 0..m {
            let used = codes.row(j).iter().filter(|v| **v != T::zero()).count();
            let dup = (0..j).any(|i| atoms.column(i).dot(&atoms.column(j)).abs() > limit);
            if used >= MIN_USAGE && !dup {
                continue;
            }
            let norms: Vec<T> = residual.column_iter().map(|c| c.norm_squared()).collect();
            if let Some(idx) = worst_signal(&norms, &taken, rng) {
                let r = residual.column(idx).into_owned();
                let norm = r.norm();
                if norm > T::zero() {
                    atoms.set_column(j, &(r / norm));
                    taken.push(idx);
                    // The chosen signal is now well covered; keep it from being picked again.
                    residual.column_mut(idx).fill(T::zero());
                }
            }
        }
    }

    // Under `KeepBetter` the energy cannot rise through the coding step.
    let fresh: Vec<(DVector<T>, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = signals.column(i).into_owned();
            let v = omp_unchecked(&atoms, &y, t0);
            let r = (&y - &atoms * &v).norm_squared();
            (v, r)
        })
        .collect();
    for (i, (v, r)) in fresh.into_iter().enumerate() {
        if coding != Coding::KeepBetter || r <= prev.residuals[i] {
            codes.set_column(i, &v);
        }
    }

    for j in 0..m {
        let support: Vec<usize> = (0..n).filter(|&i| codes[(j, i)] != T::zero()).collect();
        if support.is_empty() {
            let current = column_residuals(signals, &atoms, &codes);
            reseed_atom(signals, &mut atoms, j, &current, &mut taken, rng);
            continue;
        }
        let current = atoms.column(j).into_owned();
        let mut err = DMatrix::zeros(k, support.len());
        for (c, &i) in support.iter().enumerate() {
            let approx = &atoms * codes.column(i);
            let e = signals.column(i) - approx + &current * codes[(j, i)];
            err.set_column(c, &e);
        }
        let old: DVector<T> = DVector::from_iterator(support.len(), support.iter().map(|&i| codes[(j, i)]));
        let old_err = (&err - &current * old.transpose()).norm_squared();
        let Some((u, x)) = best_rank_one(&err) else {
            continue;
        };
        // Keep the old pair if rounding makes the optimal update worse.
        if (&err - &u * x.transpose()).norm_squared() > old_err {
            continue;
        }
        atoms.set_column(j, &u);
        for (c, &i) in support.iter().enumerate() {
            codes[(j, i)] = x[c];
        }
    }

    let residuals = column_residuals(signals, &atoms, &codes);
    KsvdState {
        energy: residuals.iter().fold(T::zero(), |a, &b| a + b),
        atoms,
        codes,
        residuals,
    }
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, k: usize) -> DVector<T> {
    loop {
        let v = DVector::from_fn(k, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let norm = v.norm();
        if norm > T::zero() {
            return v / norm;
        }
    }
}

/// Worst-represented signal not yet used as a replacement; seeded pick among
/// exact ties.
fn worst_signal<T: Real>(
    residuals: &[T],
    exclude: &[usize],
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let mut best = T::zero();
    let mut ties: Vec<usize> = Vec::new();
    for (i, &r) in residuals.iter().enumerate() {
        if exclude.contains(&i) {
            continue;
        }
        if r > best {
            best = r;
            ties.clear();
            ties.push(i);
        } else if r == best && r > T::zero() {
            ties.push(i);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        t => Some(ties[rng.random_range(0..t)]),
    }
}

/// Best rank-1 factor `u xᵀ` of `e` with `u` unit norm and `x = eᵀu`, from
/// the smaller of the two Gram matrices. Deriving `x` from `u` keeps the pair
/// consistent where a wide SVD may not.
fn best_rank_one<T: Real>(e: &DMatrix<T>) -> Option<(DVector<T>, DVector<T>)> {
    let (k, n) = e.shape();
    let gram = if k <= n { e * e.transpose() } else { e.transpose() * e };
    let eig = SymmetricEigen::new(gram);
    let (idx, top) = eig.eigenvalues.iter().enumerate().fold(
        (0, T::zero()),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    if top <= T::zero() {
        return None;
    }
    let top_vec = eig.eigenvectors.column(idx).into_owned();
    let mut u = if k <= n { top_vec } else { e * top_vec };
    let norm = u.norm();
    if norm <= T::zero() {
        return None;
    }
    u /= norm;
    // Canonical sign: largest-magnitude atom entry positive.
    let pivot = u
        .iter()
        .fold(T::zero(), |a, &b| if b.abs() > a.abs() { b } else { a });
    if pivot < T::zero() {
        u = -u;
    }
    let x = e.transpose() * &u;
    Some((u, x))
}

/// `T0`-sparse code of an embedding over the dictionary's atoms.
pub fn sparse_code<T: Real>(
    embedding: &DpsEmbedding<T>,
    dict: &DpsDictionary<T>,
) -> Result<DVector<T>> {
    if embedding.dim() != dict.dim() {
        return Err(DpsError::DimensionMismatch {
            expected: dict.dim(),
            found: embedding.dim(),
        });
    }
    Ok(omp_unchecked(&dict.atoms, &embedding.vector, dict.sparsity))
}

/// `ℓ1` code `argmin ½‖k̂ − Dv‖² + λ‖v‖₁` using the dictionary's `lambda`.
pub fn sparse_code_lasso<T: Real>(
    embedding: &DpsEmbedding<T>,
    dict: &DpsDictionary<T>,
    opts: &AdmmOptions<T>,
) -> Result<DVector<T>> {
    if embedding.dim() != dict.dim() {
        return Err(DpsError::DimensionMismatch {
            expected: dict.dim(),
            found: embedding.dim(),
        });
    }
    Ok(LassoProblem::new(dict.atoms.clone())
        .solve(&embedding.vector, dict.lambda, None, opts)?
        .x)
}

/// Reconstruction residual `‖k̂ − D·code‖`.
pub fn residual_norm<T: Real>(embedding: &DpsEmbedding<T>, dict: &DpsDictionary<T>) -> Result<T> {
    let code = sparse_code(embedding, dict)?;
    Ok((&embedding.vector - &dict.atoms * code).norm())
}

/// Index of the dictionary with the smallest reconstruction residual; ties go
/// to the lowest index.
pub fn classify_by_residual<T: Real>(
    embedding: &DpsEmbedding<T>,
    class_dicts: &[DpsDictionary<T>],
) -> Result<usize> {
    if class_dicts.is_empty() {
        return Err(DpsError::Empty("class dictionaries"));
    }
    let mut best = (0, T::zero());
    for (c, d) in class_dicts.iter().enumerate() {
        let r = residual_norm(embedding, d).map_err(|e| DpsError::at(c, e))?;
        if c == 0 || r < best.1 {
            best = (c, r);
        }
    }
    Ok(best.0)
}

/// Trains one dictionary per class label in `0..classes`.
///
/// Each class uses `min(atoms, class size)` atoms and `min(T0, atoms)`
/// sparsity; class `c` is seeded with `seed + c`.
pub fn train_class_dictionaries<T: Real>(
    embeddings: &[DpsEmbedding<T>],
    classes: usize,
    opts: &KsvdOptions,
) -> Result<Vec<DpsDictionary<T>>> {
    (0..classes)
        .into_par_iter()
        .map(|c| {
            let members: Vec<DpsEmbedding<T>> = embeddings
                .iter()
                .filter(|e| e.label == Some(c))
                .cloned()
                .collect();
            if members.is_empty() {
                return Err(DpsError::at(
                    c,
                    DpsError::Empty("class has no training embeddings"),
                ));
            }
            let m = opts.atoms.min(members.len()).max(1);
            let t0 = opts.sparsity.min(m).max(1);
            ksvd_train(
                &members,
                m,
                t0,
                opts.iterations,
                opts.seed.wrapping_add(c as u64),
            )
            .map_err(|e| DpsError::at(c, e))
        })
        .collect()
}
