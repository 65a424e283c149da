//! The similar-versus-different binary experiment: train the same
//! single-spectrogram model on one acoustically similar genre pair and one
//! acoustically different pair, and compare accuracies.

use crate::features::FeatureTensor;
use crate::nn::ModelVariant;
use crate::seeds;

use super::split::split_trial;
use super::trial::{select_epoch, train_and_evaluate, TrialFailure, TrialProtocol};
use super::ExperimentError;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarDifferentReport {
    pub similar_pair: (String, String),
    pub different_pair: (String, String),
    pub trials: usize,
    pub similar_accuracies: Vec<f64>,
    pub different_accuracies: Vec<f64>,
    pub similar_mean_accuracy: f64,
    pub different_mean_accuracy: f64,
}

impl SimilarDifferentReport {
    /// Mean accuracy advantage of the different-pair task.
    pub fn gap(&self) -> f64 {
        self.different_mean_accuracy - self.similar_mean_accuracy
    }
}

/// Restrict a tensor to two classes, relabelling them 0 and 1.
fn binary_subset(tensor: &FeatureTensor, a: usize, b: usize) -> Result<FeatureTensor, ExperimentError> {
    let indices: Vec<usize> = tensor
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l as usize == a || l as usize == b)
        .map(|(i, _)| i)
        .collect();
    if indices.is_empty() {
        return Err(ExperimentError::Config("selected classes have no samples".into()));
    }
    let stride = tensor.height * tensor.width * tensor.channels;
    let mut data = Vec::with_capacity(indices.len() * stride);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in &indices {
        data.extend_from_slice(tensor.sample(i));
        labels.push(if tensor.labels[i] as usize == a { 0 } else { 1 });
    }
    FeatureTensor::new(
        data,
        indices.len(),
        tensor.height,
        tensor.width,
        tensor.channels,
        labels,
        vec![tensor.class_names[a].clone(), tensor.class_names[b].clone()],
        tensor.channel_names.clone(),
    )
    .map_err(ExperimentError::from)
}

fn run_binary_task(
    tensor: &FeatureTensor,
    trials: usize,
    base_seed: u64,
    protocol: TrialProtocol,
) -> Result<Vec<f64>, ExperimentError> {
    let mut accuracies = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = base_seed.wrapping_add(trial as u64);
        let split = split_trial(&tensor.labels, 2, seeds::substream_seed(trial_seed, "split"))?;
        let model_seed = seeds::substream_seed(trial_seed, "model:conv2d_full");
        let batch_seed = seeds::substream_seed(trial_seed, "order:conv2d_full");
        match train_and_evaluate(
            tensor,
            &split,
            ModelVariant::Conv2dFull,
            2,
            protocol,
            model_seed,
            batch_seed,
        ) {
            Ok(per_epoch) => {
                accuracies.push(per_epoch[select_epoch(&per_epoch)].test_accuracy);
            }
            Err(TrialFailure::Diverged { .. }) => {
                // a diverged binary trial counts as chance-level performance
                accuracies.push(0.5);
            }
            Err(TrialFailure::Hard(e)) => return Err(e.into()),
        }
    }
    Ok(accuracies)
}

/// Train the standard single-spectrogram model on both binary tasks under
/// the usual protocol and report both accuracy records.
///
/// `features_full` must be a 1-channel tensor; pairs are class indices into
/// its class list. A pair whose two classes coincide is rejected.
pub fn similar_vs_different(
    features_full: &FeatureTensor,
    similar: (usize, usize),
    different: (usize, usize),
    trials: usize,
    base_seed: u64,
    protocol: TrialProtocol,
) -> Result<SimilarDifferentReport, ExperimentError> {
    if features_full.channels != 1 {
        return Err(ExperimentError::Config(format!(
            "similar/different uses the 1-channel mix tensor, got {} channels",
            features_full.channels
        )));
    }
    if trials == 0 {
        return Err(ExperimentError::Config("need at least one trial".into()));
    }
    let classes = features_full.class_names.len();
    for (name, (a, b)) in [("similar", similar), ("different", different)] {
        if a == b {
            return Err(ExperimentError::Config(format!(
                "{name} pair uses class {a} against itself"
            )));
        }
        if a >= classes || b >= classes {
            return Err(ExperimentError::Config(format!(
                "{name} pair ({a}, {b}) out of range for {classes} classes"
            )));
        }
    }

    let similar_tensor = binary_subset(features_full, similar.0, similar.1)?;
    let different_tensor = binary_subset(features_full, different.0, different.1)?;
    let similar_accuracies = run_binary_task(&similar_tensor, trials, base_seed, protocol)?;
    let different_accuracies = run_binary_task(&different_tensor, trials, base_seed, protocol)?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(SimilarDifferentReport {
        similar_pair: (
            features_full.class_names[similar.0].clone(),
            features_full.class_names[similar.1].clone(),
        ),
        different_pair: (
            features_full.class_names[different.0].clone(),
            features_full.class_names[different.1].clone(),
        ),
        trials,
        similar_mean_accuracy: mean(&similar_accuracies),
        different_mean_accuracy: mean(&different_accuracies),
        similar_accuracies,
        different_accuracies,
    })
}
