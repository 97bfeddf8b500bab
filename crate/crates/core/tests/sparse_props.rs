mod common;

use common::{rng, spd_clusters};
use dps_core::sparse::{default_lambda, lasso_objective};
use dps_core::{global_sparse_codes, gram, lasso_admm, local_sparse_codes, omp, AdmmOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit_columns(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::from_fn(rows, cols, |_, _| r.sample(StandardNormal));
    for mut c in a.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    a
}

fn tight() -> AdmmOptions<f64> {
    AdmmOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_iter: 20_000,
        ..AdmmOptions::default()
    }
}

/// Planted 3-sparse code over a 50×20 design whose columns are close to orthonormal.
fn planted(seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut r = rng(seed);
    let a = unit_columns(&mut r, 50, 20);
    let mut x0 = DVector::<f64>::zeros(20);
    for i in rand::seq::index::sample(&mut r, 20, 3) {
        let mag: f64 = r.random_range(0.5..2.0);
        x0[i] = if r.random::<bool>() { mag } else { -mag };
    }
    let b = &a * &x0;
    (a, x0, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn excluded_coordinate_is_bitwise_zero(seed in any::<u64>(), q in 3usize..15, pin in 0usize..15) {
        let mut r = rng(seed);
        let a = unit_columns(&mut r, 12, q);
        let b = DVector::<f64>::from_fn(12, |_, _| r.sample(StandardNormal));
        let pin = pin % q;
        let sol = lasso_admm(&a, &b, 0.05, Some(pin), &AdmmOptions::default()).unwrap();
        prop_assert_eq!(sol.x[pin].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn objective_beats_zero_and_planted_truth(seed in any::<u64>()) {
        let (a, x0, b) = planted(seed);
        let lambda = 1e-3;
        let x = lasso_admm(&a, &b, lambda, None, &AdmmOptions::default()).unwrap().x;
        let f = lasso_objective(&a, &b, lambda, &x);
        prop_assert!(f <= lasso_objective(&a, &b, lambda, &DVector::zeros(20)));
        prop_assert!(f <= lasso_objective(&a, &b, lambda, &x0) + 1e-6);
    }

    #[test]
    fn omp_residual_non_increasing_in_budget(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = unit_columns(&mut r, 10, 25);
        let y = DVector::<f64>::from_fn(10, |_, _| r.sample(StandardNormal));
        let mut prev = f64::INFINITY;
        for t0 in 1..=10 {
            let code = omp(&d, &y, t0).unwrap();
            prop_assert!(code.iter().filter(|v| **v != 0.0).count() <= t0);
            let res = (&y - &d * &code).norm();
            prop_assert!(res <= prev + 1e-12);
            prev = res;
        }
    }

    #[test]
    fn local_and_global_codes_agree(seed in 0u64..1000, n in 4usize..10) {
        let (points, _) = spd_clusters(seed, 3, 2, n / 2 + 1, 1.0, 0.3);
        let g = gram(points, 1.0).unwrap();
        let lambda = default_lambda(&g);
        let local = local_sparse_codes(&g, lambda, &tight()).unwrap();
        let global = global_sparse_codes(&g, lambda, &tight()).unwrap();
        prop_assert!((&local.codes - &global.codes).amax() < 1e-6);
        for i in 0..g.n() {
            prop_assert_eq!(local.codes[(i, i)].to_bits(), 0.0f64.to_bits());
            prop_assert_eq!(global.codes[(i, i)].to_bits(), 0.0f64.to_bits());
        }
    }
}

#[test]
fn planted_support_recovered_in_most_trials() {
    let trials = 100;
    let hits = (0..trials)
        .filter(|&s| {
            let (a, x0, b) = planted(1000 + s);
            let x = lasso_admm(&a, &b, 1e-3, None, &AdmmOptions::default())
                .unwrap()
                .x;
            let tau = 1e-6 * x.amax();
            (0..20).all(|i| (x[i].abs() > tau) == (x0[i] != 0.0))
        })
        .count();
    assert!(
        hits * 100 >= 95 * trials as usize,
        "support recovered in {hits}/{trials}"
    );
}

#[test]
fn duplicate_point_codes_on_its_twin() {
    let mut r = rng(5);
    let mut points: Vec<_> = (0..6).map(|_| common::random_spd(&mut r, 3)).collect();
    points.push(points[2].clone());
    let g = gram(points, 1.0).unwrap();
    let codes = local_sparse_codes(&g, default_lambda(&g), &AdmmOptions::default()).unwrap();
    assert_eq!(codes.codes.column(2).iamax(), 6);
    assert_eq!(codes.codes.column(6).iamax(), 2);
}

#[test]
fn large_lambda_gives_empty_codes() {
    let (points, _) = spd_clusters(2, 3, 2, 5, 1.0, 0.2);
    let g = gram(points, 1.0).unwrap();
    let big = 1e3 * g.k_half().amax() * g.n() as f64;
    for codes in [
        local_sparse_codes(&g, big, &AdmmOptions::default()).unwrap(),
        global_sparse_codes(&g, big, &AdmmOptions::default()).unwrap(),
    ] {
        assert!(codes.codes.iter().all(|v| *v == 0.0));
    }
}
