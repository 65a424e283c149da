//! Stratified, seeded 80/20 splits shared by all model variants in a trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExperimentError;

/// Sorted train/test index sets over one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified 80/20 split, deterministic in the seed.
///
/// Per class, `floor(n_c / 5)` samples go to the test set and the
/// remainder to train. Within every trial the same seed (and therefore the
/// same split) is used for every model variant.
pub fn split_trial(labels: &[u32], classes: usize, seed: u64) -> Result<SplitIndices, ExperimentError> {
    if labels.len() < classes * 2 {
        return Err(ExperimentError::Stratification(format!(
            "{} samples cannot cover {classes} classes twice",
            labels.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= classes {
            return Err(ExperimentError::Stratification(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        by_class[l as usize].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < 2 {
            return Err(ExperimentError::Stratification(format!(
                "class {c} has {} member(s), need at least 2",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in &mut by_class {
        shuffle(members, &mut rng);
        let test_count = members.len() / 5;
        test.extend_from_slice(&members[..test_count]);
        train.extend_from_slice(&members[test_count..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

fn shuffle(values: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}
