use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SplitPolicy;
use crate::error::{HarnessError, Result};

/// Sorted, disjoint train and test indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn new(mut train: Vec<usize>, mut test: Vec<usize>) -> Self {
        train.sort_unstable();
        test.sort_unstable();
        Self { train, test }
    }

    pub fn is_disjoint(&self) -> bool {
        // Both sides are sorted, so a merge walk suffices.
        let (mut i, mut j) = (0, 0);
        while i < self.train.len() && j < self.test.len() {
            match self.train[i].cmp(&self.test[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

/// Indices of each class in dataset order.
pub fn class_members(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
}

fn shuffled(members: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut m = members.to_vec();
    m.shuffle(rng);
    m
}

/// Train/test assignment for one repetition.
///
/// `base_seed` fixes cross-validation folds; `run_seed` drives the random
/// draws of the other policies.
pub fn make_split(
    policy: &SplitPolicy,
    labels: &[usize],
    names: &[String],
    classes: usize,
    repetition: usize,
    base_seed: u64,
    run_seed: u64,
) -> Result<Split> {
    let members = class_members(labels, classes);
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    match policy {
        SplitPolicy::Stratified { train_per_class } => {
            for (c, m) in members.iter().enumerate() {
                if m.len() <= *train_per_class {
                    return Err(HarnessError::Split(format!(
                        "class {c} has {} samples; {train_per_class} for training leaves none to test",
                        m.len()
                    )));
                }
                let m = shuffled(m, &mut rng);
                train.extend_from_slice(&m[..*train_per_class]);
                test.extend_from_slice(&m[*train_per_class..]);
            }
        }
        SplitPolicy::Fraction { train_fraction } => {
            for (c, m) in members.iter().enumerate() {
                if m.len() < 2 {
                    return Err(HarnessError::Split(format!(
                        "class {c} needs at least 2 samples"
                    )));
                }
                let t = ((m.len() as f64 * train_fraction).ceil() as usize).clamp(1, m.len() - 1);
                let m = shuffled(m, &mut rng);
                train.extend_from_slice(&m[..t]);
                test.extend_from_slice(&m[t..]);
            }
        }
        SplitPolicy::Alternate => {
            for m in &members {
                for (pos, &i) in m.iter().enumerate() {
                    if pos % 2 == 0 {
                        train.push(i);
                    } else {
                        test.push(i);
                    }
                }
            }
        }
        SplitPolicy::KFold { folds } => {
            let mut fold_rng = ChaCha8Rng::seed_from_u64(base_seed);
            let held_out = repetition % folds;
            for m in &members {
                for (pos, &i) in shuffled(m, &mut fold_rng).iter().enumerate() {
                    if pos % folds == held_out {
                        test.push(i);
                    } else {
                        train.push(i);
                    }
                }
            }
        }
        SplitPolicy::Tagged { train_tags } => {
            for (i, name) in names.iter().enumerate() {
                if train_tags.iter().any(|t| name.contains(t.as_str())) {
                    train.push(i);
                } else {
                    test.push(i);
                }
            }
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(HarnessError::Split(format!(
            "empty side: {} train, {} test",
            train.len(),
            test.len()
        )));
    }
    let split = Split::new(train, test);
    assert!(split.is_disjoint(), "train and test indices overlap");
    Ok(split)
}

/// Seeded stratified hold-out inside a training set: every class with at
/// least two members contributes `⌈fraction · size⌉` (at most `size − 1`)
/// validation points.
pub fn holdout(
    labels: &[usize],
    classes: usize,
    fraction: f64,
    seed: u64,
) -> Option<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for m in class_members(labels, classes) {
        if m.len() < 2 {
            fit.extend(m);
            continue;
        }
        let v = ((m.len() as f64 * fraction).ceil() as usize).clamp(1, m.len() - 1);
        let m = shuffled(&m, &mut rng);
        val.extend_from_slice(&m[..v]);
        fit.extend_from_slice(&m[v..]);
    }
    if val.is_empty() {
        return None;
    }
    let split = Split::new(fit, val);
    assert!(split.is_disjoint(), "fit and validation indices overlap");
    Some(split)
}
