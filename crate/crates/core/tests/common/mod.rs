#![allow(dead_code)]

use dps_core::{spd_expm, SpdMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    (&a + a.transpose()) * 0.5
}

pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SpdMatrix<f64> {
    spd_expm(&random_symmetric(rng, d, 0.5)).unwrap()
}

/// Points scattered around `classes` random centres in the log domain.
pub fn spd_clusters(
    seed: u64,
    d: usize,
    classes: usize,
    per_class: usize,
    spread: f64,
    noise: f64,
) -> (Vec<SpdMatrix<f64>>, Vec<usize>) {
    let mut rng = rng(seed);
    let centres: Vec<DMatrix<f64>> = (0..classes)
        .map(|_| random_symmetric(&mut rng, d, spread))
        .collect();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per_class {
            let s = centre + random_symmetric(&mut rng, d, noise);
            points.push(spd_expm(&s).unwrap());
            labels.push(c);
        }
    }
    (points, labels)
}

pub fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
