mod common;

use common::rng;
use dps_core::dictionary::{ksvd_train_columns, train_class_dictionaries};
use dps_core::{classify_by_residual, ksvd_train, sparse_code, DpsEmbedding, KsvdOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

fn monotone(history: &[f64]) -> bool {
    history
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn training_invariants(seed in any::<u64>(), k in 3usize..10, n in 10usize..60, m in 2usize..12, t0 in 1usize..4) {
        let mut r = rng(seed);
        let signals = gaussian(&mut r, k, n);
        let m = m.min(n);
        let t0 = t0.min(k).min(m);
        let dict = ksvd_train_columns(&signals, m, t0, 8, seed).unwrap();
        prop_assert_eq!(dict.training_history.len(), 8);
        prop_assert!(monotone(&dict.training_history));
        for a in dict.atoms.column_iter() {
            prop_assert!((a.norm() - 1.0).abs() <= 1e-10);
        }
        for s in signals.column_iter() {
            let code = sparse_code(&DpsEmbedding::new(s.into_owned()), &dict).unwrap();
            prop_assert!(code.iter().filter(|v| **v != 0.0).count() <= t0);
        }
        let again = ksvd_train_columns(&signals, m, t0, 8, seed).unwrap();
        prop_assert_eq!(dict, again);
    }
}

#[test]
fn planted_dictionary_is_recovered() {
    let mut r = rng(0);
    let mut d0 = gaussian(&mut r, 20, 50);
    for mut c in d0.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    let mut y = DMatrix::<f64>::zeros(20, 1500);
    for j in 0..1500 {
        for i in rand::seq::index::sample(&mut r, 50, 3) {
            let coef: f64 = r.sample(StandardNormal);
            y.column_mut(j).axpy(coef, &d0.column(i), 1.0);
        }
    }
    let dict = ksvd_train_columns(&y, 50, 3, 30, 0).unwrap();
    assert!(monotone(&dict.training_history));
    let mut pairs = Vec::new();
    for i in 0..50 {
        for j in 0..50 {
            pairs.push((d0.column(i).dot(&dict.atoms.column(j)).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut used_i, mut used_j, mut hits) = ([false; 50], [false; 50], 0);
    for (v, i, j) in pairs {
        if !used_i[i] && !used_j[j] {
            used_i[i] = true;
            used_j[j] = true;
            hits += usize::from(v >= 0.99);
        }
    }
    assert!(hits >= 40, "recovered {hits}/50 atoms");
}

#[test]
fn perfect_dictionary_reaches_zero_energy() {
    let q = nalgebra::linalg::QR::new(gaussian(&mut rng(4), 6, 6)).q();
    let embeddings: Vec<_> = q
        .column_iter()
        .map(|c| DpsEmbedding::new(c.into_owned()))
        .collect();
    let dict = ksvd_train(&embeddings, 6, 1, 1, 9).unwrap();
    assert!(dict.training_history[0] < 1e-20);
}

#[test]
fn orthonormal_synthesis_is_recovered_exactly() {
    let q = nalgebra::linalg::QR::new(gaussian(&mut rng(5), 8, 8)).q();
    let dict = dps_core::DpsDictionary::from_atoms(q.clone(), 2, 0.01).unwrap();
    let signal = q.column(1) * 2.0 + q.column(5) * -3.0;
    let code = sparse_code(&DpsEmbedding::new(signal), &dict).unwrap();
    let mut expect = DVector::zeros(8);
    expect[1] = 2.0;
    expect[5] = -3.0;
    assert!((code - expect).amax() < 1e-12);
}

#[test]
fn per_class_dictionaries_classify_blobs() {
    let mut r = rng(21);
    let centres = [gaussian(&mut r, 10, 1) * 3.0, gaussian(&mut r, 10, 1) * 3.0];
    let sample = |r: &mut ChaCha8Rng, c: usize| {
        DpsEmbedding::with_label(centres[c].column(0) + gaussian(r, 10, 1).column(0) * 0.5, c)
    };
    let train: Vec<_> = (0..80).map(|i| sample(&mut r, i % 2)).collect();
    let test: Vec<_> = (0..200).map(|i| sample(&mut r, i % 2)).collect();
    let opts = KsvdOptions {
        atoms: 8,
        sparsity: 2,
        iterations: 30,
        seed: 3,
    };
    let dicts = train_class_dictionaries(&train, 2, &opts).unwrap();
    let correct = test
        .iter()
        .filter(|e| classify_by_residual(e, &dicts).unwrap() == e.label.unwrap())
        .count();
    assert!(
        correct * 100 >= 95 * test.len(),
        "accuracy {correct}/{}",
        test.len()
    );
}
