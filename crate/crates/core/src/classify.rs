//! Euclidean classifiers for projected vectors: k-nearest-neighbour voting and
//! a one-vs-rest linear SVM trained by stochastic subgradient descent.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DpsError, Result};
use crate::scalar::Real;

/// Labelled training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T: Real> {
    vectors: Vec<DVector<T>>,
    labels: Vec<usize>,
    class_count: usize,
}

impl<T: Real> LabeledSet<T> {
    /// `class_count` defaults to `max(label) + 1`.
    pub fn new(
        vectors: Vec<DVector<T>>,
        labels: Vec<usize>,
        class_count: Option<usize>,
    ) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(DpsError::DimensionMismatch {
                expected: vectors.len(),
                found: labels.len(),
            });
        }
        if let Some(first) = vectors.first() {
            for (i, v) in vectors.iter().enumerate() {
                if v.len() != first.len() {
                    return Err(DpsError::at(
                        i,
                        DpsError::DimensionMismatch {
                            expected: first.len(),
                            found: v.len(),
                        },
                    ));
                }
            }
        }
        let needed = labels.iter().max().map_or(0, |&m| m + 1);
        let class_count = class_count.unwrap_or(needed);
        if needed > class_count {
            return Err(DpsError::invalid(
                "labels",
                format!("label {} outside 0..{class_count}", needed - 1),
            ));
        }
        Ok(Self {
            vectors,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    pub fn vectors(&self) -> &[DVector<T>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }
}

fn check_query<T: Real>(query: &DVector<T>, dim: usize) -> Result<()> {
    if query.len() != dim {
        return Err(DpsError::DimensionMismatch {
            expected: dim,
            found: query.len(),
        });
    }
    Ok(())
}

/// Majority vote over the `k_neighbors` nearest training vectors.
///
/// Equidistant neighbours are taken in index order; tied votes go to the
/// smallest label.
pub fn knn_classify<T: Real>(
    query: &DVector<T>,
    train: &LabeledSet<T>,
    k_neighbors: usize,
) -> Result<usize> {
    if train.is_empty() {
        return Err(DpsError::Empty("training set"));
    }
    if k_neighbors == 0 || k_neighbors > train.len() {
        return Err(DpsError::invalid(
            "k_neighbors",
            format!("must lie in 1..={}", train.len()),
        ));
    }
    check_query(query, train.dim())?;
    let mut dist: Vec<(T, usize)> = train
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| ((v - query).norm_squared(), i))
        .collect();
    dist.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let mut votes = vec![0usize; train.class_count];
    for &(_, i) in dist.iter().take(k_neighbors) {
        votes[train.labels[i]] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    Ok(best)
}

/// SVM training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear model; `score_c(x) = weights.row(c)·x + biases[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T: Real> {
    pub weights: DMatrix<T>,
    pub biases: DVector<T>,
    /// Per class, the best training objective seen after each epoch.
    pub history: Vec<Vec<T>>,
}

impl<T: Real> SvmModel<T> {
    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn scores(&self, query: &DVector<T>) -> Result<DVector<T>> {
        check_query(query, self.dim())?;
        Ok(&self.weights * query + &self.biases)
    }
}

/// Per-feature mean and scale used to condition the subgradient steps.
fn standardization<T: Real>(x: &[DVector<T>]) -> (DVector<T>, DVector<T>) {
    let dim = x[0].len();
    let n = T::from_count(x.len());
    let mut mean = DVector::zeros(dim);
    for v in x {
        mean += v;
    }
    mean /= n;
    let mut var = DVector::zeros(dim);
    for v in x {
        let d = v - &mean;
        var += d.component_mul(&d);
    }
    let scale = (var / n).map(|s| {
        let s = s.sqrt();
        if s > T::zero() {
            s
        } else {
            T::one()
        }
    });
    (mean, scale)
}

fn hinge_objective<T: Real>(w: &DVector<T>, x: &[DVector<T>], y: &[T], lambda: T) -> T {
    let mut loss = T::zero();
    for (xi, &yi) in x.iter().zip(y) {
        let m = T::one() - yi * w.dot(xi);
        if m > T::zero() {
            loss += m;
        }
    }
    w.norm_squared() * lambda * T::lit(0.5) + loss / T::from_count(x.len())
}

/// Pegasos on `λ/2‖w‖² + mean hinge`, `λ = 1/(C·N)`, step `1/(λt)`.
///
/// Returns the best iterate seen at epoch boundaries and the best-so-far
/// objective history, which is therefore non-increasing.
fn pegasos<T: Real>(
    x: &[DVector<T>],
    y: &[T],
    lambda: T,
    epochs: usize,
    seed: u64,
) -> (DVector<T>, Vec<T>) {
    let n = x.len();
    let dim = x[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = DVector::zeros(dim);
    let mut best = w.clone();
    let mut best_obj = hinge_objective(&w, x, y, lambda);
    let radius = T::one() / lambda.sqrt();
    let mut history = Vec::with_capacity(epochs);
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lambda * T::from_count(t));
            let margin = y[i] * w.dot(&x[i]);
            w *= T::one() - eta * lambda;
            if margin < T::one() {
                w.axpy(eta * y[i], &x[i], T::one());
            }
            let norm = w.norm();
            if norm > radius {
                w *= radius / norm;
            }
        }
        let obj = hinge_objective(&w, x, y, lambda);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from(&w);
        }
        history.push(best_obj);
    }
    (best, history)
}

/// Trains one binary classifier per class.
///
/// Every class uses the same shuffling seed, so relabelling the classes only
/// permutes the rows of the result.
pub fn linear_svm_train<T: Real>(train: &LabeledSet<T>, opts: &SvmOptions) -> Result<SvmModel<T>> {
    if train.is_empty() {
        return Err(DpsError::Empty("training set"));
    }
    if train.class_count < 2 {
        return Err(DpsError::invalid(
            "labels",
            "at least two classes are required",
        ));
    }
    if !(opts.c > 0.0) || !opts.c.is_finite() {
        return Err(DpsError::invalid("c", "must be positive and finite"));
    }
    if opts.epochs == 0 {
        return Err(DpsError::invalid("epochs", "must be at least 1"));
    }
    let dim = train.dim();
    let (mean, scale) = standardization(&train.vectors);
    let augmented: Vec<DVector<T>> = train
        .vectors
        .iter()
        .map(|v| {
            let z = (v - &mean).component_div(&scale);
            DVector::from_iterator(dim + 1, z.iter().copied().chain(std::iter::once(T::one())))
        })
        .collect();
    let lambda = T::one() / (T::lit(opts.c) * T::from_count(train.len()));

    let per_class: Vec<(DVector<T>, Vec<T>)> = (0..train.class_count)
        .into_par_iter()
        .map(|c| {
            let y: Vec<T> = train
                .labels
                .iter()
                .map(|&l| if l == c { T::one() } else { -T::one() })
                .collect();
            pegasos(&augmented, &y, lambda, opts.epochs, opts.seed)
        })
        .collect();

    // Fold the standardization back into raw-feature weights and biases.
    let mut weights = DMatrix::zeros(train.class_count, dim);
    let mut biases = DVector::zeros(train.class_count);
    let mut history = Vec::with_capacity(train.class_count);
    for (c, (w, h)) in per_class.into_iter().enumerate() {
        let raw = w.rows(0, dim).component_div(&scale);
        biases[c] = w[dim] - raw.dot(&mean);
        weights.set_row(c, &raw.transpose());
        history.push(h);
    }
    Ok(SvmModel {
        weights,
        biases,
        history,
    })
}

/// Highest-scoring class; ties go to the smallest class id.
pub fn linear_svm_predict<T: Real>(query: &DVector<T>, model: &SvmModel<T>) -> Result<usize> {
    let scores = model.scores(query)?;
    let mut best = 0;
    for c in 1..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn knn_trivial() {
        let set = LabeledSet::new(vec![v(&[1.0, 2.0])], vec![3], None).unwrap();
        assert_eq!(knn_classify(&v(&[9.0, 9.0]), &set, 1).unwrap(), 3);
        let set =
            LabeledSet::new(vec![v(&[0.0]), v(&[1.0]), v(&[2.0])], vec![0, 1, 2], None).unwrap();
        assert_eq!(knn_classify(&v(&[1.0]), &set, 1).unwrap(), 1);
        // Equidistant neighbours 0 and 2: lower index wins.
        assert_eq!(knn_classify(&v(&[1.0]), &set, 3).unwrap(), 0);
        assert!(knn_classify(&v(&[1.0]), &set, 4).is_err());
        assert!(knn_classify(&v(&[1.0, 0.0]), &set, 1).is_err());
    }

    #[test]
    fn labels_validated() {
        assert!(LabeledSet::new(vec![v(&[0.0])], vec![2], Some(2)).is_err());
        assert!(LabeledSet::new(vec![v(&[0.0])], vec![], None).is_err());
    }

    #[test]
    fn zero_weights_predict_class_zero() {
        let m = SvmModel {
            weights: DMatrix::<f64>::zeros(3, 2),
            biases: DVector::zeros(3),
            history: vec![],
        };
        assert_eq!(linear_svm_predict(&v(&[1.0, -1.0]), &m).unwrap(), 0);
        assert!(linear_svm_predict(&v(&[1.0]), &m).is_err());
    }

    #[test]
    fn one_dimensional_margins() {
        // score_0 = -x, score_1 = x - 1: class 1 iff x > 1/2.
        let m = SvmModel {
            weights: DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]),
            biases: v(&[0.0, -1.0]),
            history: vec![],
        };
        assert_eq!(linear_svm_predict(&v(&[0.4]), &m).unwrap(), 0);
        assert_eq!(linear_svm_predict(&v(&[0.6]), &m).unwrap(), 1);
        assert_eq!(linear_svm_predict(&v(&[0.5]), &m).unwrap(), 0);
    }

    #[test]
    fn separable_training_set() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            xs.push(v(&[t, 1.0 + t]));
            ys.push(0);
            xs.push(v(&[t + 3.0, -t]));
            ys.push(1);
        }
        let set = LabeledSet::new(xs.clone(), ys.clone(), None).unwrap();
        let m = linear_svm_train(&set, &SvmOptions::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(linear_svm_predict(x, &m).unwrap(), *y);
        }
        for h in &m.history {
            assert!(h.windows(2).all(|w| w[1] <= w[0]));
        }
        let single = LabeledSet::new(vec![v(&[0.0])], vec![0], None).unwrap();
        assert!(linear_svm_train(&single, &SvmOptions::default()).is_err());
    }
}
