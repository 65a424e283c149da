//! The repeated-trial protocol: one seeded stratified split shared by all
//! four model variants, six epochs each, metrics recorded at the epoch
//! with minimum test loss.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureTensor;
use crate::nn::{
    build_model, train_step, weighted_xent, Adam, ClassWeights, ModelConfig, ModelVariant,
};
use crate::seeds;

use super::metrics::{accuracy, macro_f1, weighted_f1};
use super::split::{split_trial, SplitIndices};
use super::stats::{welch_one_sided_greater, WelchTest};
use super::ExperimentError;

/// Histogram resolution for F1 sampling distributions.
pub const F1_HISTOGRAM_BINS: usize = 20;

/// Training protocol shared by every variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialProtocol {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        Self { epochs: 6, batch_size: 8, learning_rate: 1e-3 }
    }
}

/// The three tensors the four variants draw from. All must agree on sample
/// count, labels, and class names.
#[derive(Clone, Copy)]
pub struct VariantFeatures<'a> {
    pub stems3: &'a FeatureTensor,
    pub full: &'a FeatureTensor,
    pub novox: &'a FeatureTensor,
}

impl<'a> VariantFeatures<'a> {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, t) in [("stems3", self.stems3), ("mix_full", self.full), ("mix_novox", self.novox)]
        {
            if t.labels != self.stems3.labels {
                return Err(ExperimentError::Config(format!(
                    "tensor {name} disagrees on labels with stems3"
                )));
            }
            if t.class_names != self.stems3.class_names {
                return Err(ExperimentError::Config(format!(
                    "tensor {name} disagrees on class names with stems3"
                )));
            }
        }
        if self.stems3.channels != 3 || self.full.channels != 1 || self.novox.channels != 1 {
            return Err(ExperimentError::Config("tensor channel counts do not match variants".into()));
        }
        Ok(())
    }

    pub fn for_variant(&self, variant: ModelVariant) -> &'a FeatureTensor {
        match variant {
            ModelVariant::Conv2dFull => self.full,
            ModelVariant::Conv2dNovox => self.novox,
            ModelVariant::Conv2dStems3 | ModelVariant::DwconvStems3 => self.stems3,
        }
    }

    pub fn labels(&self) -> &'a [u32] {
        &self.stems3.labels
    }

    pub fn classes(&self) -> usize {
        self.stems3.class_names.len()
    }
}

/// Metrics recorded after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    pub test_weighted_f1: f64,
}

/// One variant's completed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub trial_seed: u64,
    pub variant: ModelVariant,
    pub per_epoch: Vec<EpochRecord>,
    /// Argmin of test loss over epochs (earliest on ties).
    pub selected_epoch: usize,
    pub selected_accuracy: f64,
    pub selected_f1: f64,
    pub selected_weighted_f1: f64,
}

/// What happened to one variant within a trial.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(TrialResult),
    /// Training produced a non-finite loss; the variant is excluded from
    /// means and counted as a failure.
    Diverged { trial: usize, variant: ModelVariant, epoch: usize },
}

/// One trial: the shared split plus all four variant outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub trial: usize,
    pub trial_seed: u64,
    pub split: SplitIndices,
    pub outcomes: Vec<TrialOutcome>,
}

/// Train one model on a fixed split and record per-epoch test metrics.
///
/// Exposed for the binary similar/different experiment, which reuses the
/// protocol with a single variant.
pub fn train_and_evaluate(
    tensor: &FeatureTensor,
    split: &SplitIndices,
    variant: ModelVariant,
    classes: usize,
    protocol: TrialProtocol,
    model_seed: u64,
    batch_seed: u64,
) -> Result<Vec<EpochRecord>, TrialFailure> {
    let config = ModelConfig::for_variant(variant, classes);
    let mut model = build_model(config, tensor.height, tensor.width, model_seed)
        .map_err(TrialFailure::Hard)?;
    let mut optimizer = Adam::new(protocol.learning_rate);
    let mut batch_rng: ChaCha8Rng = seeds::substream_rng(batch_seed, "batches");

    let train_labels: Vec<u32> = split.train.iter().map(|&i| tensor.labels[i]).collect();
    let class_weights =
        ClassWeights::balanced(&train_labels, classes).map_err(TrialFailure::Hard)?;
    let uniform = ClassWeights::uniform(classes);
    let (test_x, test_labels) = tensor.batch(&split.test);

    let mut records = Vec::with_capacity(protocol.epochs);
    for epoch in 0..protocol.epochs {
        let mut order = split.train.clone();
        shuffle(&mut order, &mut batch_rng);

        let mut loss_sum = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(protocol.batch_size) {
            let (x, labels) = tensor.batch(chunk);
            match train_step(&mut model, &mut optimizer, &x, &labels, &class_weights) {
                Ok(loss) => {
                    loss_sum += loss;
                    batches += 1;
                }
                Err(crate::nn::NnError::Divergence) => {
                    return Err(TrialFailure::Diverged { epoch });
                }
                Err(e) => return Err(TrialFailure::Hard(e)),
            }
        }
        let train_loss = loss_sum / batches.max(1) as f64;

        let logits = model.forward(&test_x, false).map_err(TrialFailure::Hard)?;
        let (test_loss, _) = weighted_xent(logits.data(), classes, &test_labels, &uniform)
            .map_err(TrialFailure::Hard)?;
        if !test_loss.is_finite() {
            return Err(TrialFailure::Diverged { epoch });
        }
        let predictions: Vec<u32> = logits
            .data()
            .chunks_exact(classes)
            .map(|row| argmax(row) as u32)
            .collect();
        records.push(EpochRecord {
            train_loss,
            test_loss,
            test_accuracy: accuracy(&predictions, &test_labels),
            test_macro_f1: macro_f1(&predictions, &test_labels, classes),
            test_weighted_f1: weighted_f1(&predictions, &test_labels, classes),
        });
    }
    Ok(records)
}

/// Why a variant's training run did not produce a usable result.
#[derive(Debug)]
pub enum TrialFailure {
    Diverged { epoch: usize },
    Hard(crate::nn::NnError),
}

fn argmax(row: &[f64]) -> usize {
    row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).map(|(i, _)| i).unwrap()
}

fn shuffle(values: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}

/// Select the min-test-loss epoch (earliest on ties) and freeze metrics.
pub fn select_epoch(per_epoch: &[EpochRecord]) -> usize {
    let mut best = 0usize;
    for (i, rec) in per_epoch.iter().enumerate() {
        if rec.test_loss < per_epoch[best].test_loss {
            best = i;
        }
    }
    best
}

/// Run all four variants on one seeded split.
pub fn run_trial(
    features: &VariantFeatures<'_>,
    trial: usize,
    base_seed: u64,
    protocol: TrialProtocol,
) -> Result<TrialRun, ExperimentError> {
    features.validate()?;
    let classes = features.classes();
    let trial_seed = base_seed.wrapping_add(trial as u64);
    let split = split_trial(features.labels(), classes, seeds::substream_seed(trial_seed, "split"))?;

    let mut outcomes = Vec::with_capacity(ModelVariant::ALL.len());
    for variant in ModelVariant::ALL {
        let tensor = features.for_variant(variant);
        let model_seed = seeds::substream_seed(trial_seed, &format!("model:{}", variant.id()));
        let batch_seed = seeds::substream_seed(trial_seed, &format!("order:{}", variant.id()));
        match train_and_evaluate(tensor, &split, variant, classes, protocol, model_seed, batch_seed)
        {
            Ok(per_epoch) => {
                let selected_epoch = select_epoch(&per_epoch);
                let rec = per_epoch[selected_epoch];
                outcomes.push(TrialOutcome::Completed(TrialResult {
                    trial,
                    trial_seed,
                    variant,
                    per_epoch,
                    selected_epoch,
                    selected_accuracy: rec.test_accuracy,
                    selected_f1: rec.test_macro_f1,
                    selected_weighted_f1: rec.test_weighted_f1,
                }));
            }
            Err(TrialFailure::Diverged { epoch }) => {
                outcomes.push(TrialOutcome::Diverged { trial, variant, epoch });
            }
            Err(TrialFailure::Hard(e)) => return Err(e.into()),
        }
    }
    Ok(TrialRun { trial, trial_seed, split, outcomes })
}

/// Run the full experiment. `jobs = 1` is strictly sequential and
/// bit-reproducible; `jobs > 1` parallelizes over trials, which are
/// independently seeded, and collects results in trial order.
pub fn run_experiment(
    features: &VariantFeatures<'_>,
    trials: usize,
    base_seed: u64,
    protocol: TrialProtocol,
    jobs: usize,
) -> Result<Vec<TrialRun>, ExperimentError> {
    features.validate()?;
    if trials == 0 {
        return Err(ExperimentError::Config("need at least one trial".into()));
    }
    if jobs <= 1 {
        (0..trials).map(|t| run_trial(features, t, base_seed, protocol)).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|t| run_trial(features, t, base_seed, protocol))
                .collect()
        })
    }
}

/// Per-model aggregate over completed trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub variant: ModelVariant,
    pub completed: usize,
    pub failed: usize,
    pub mean_accuracy: f64,
    pub mean_f1: f64,
    pub mean_weighted_f1: f64,
    /// Selected macro-F1 per completed trial, in trial order.
    pub f1_samples: Vec<f64>,
    /// 20 equal bins over [0, 1].
    pub histogram: [u32; F1_HISTOGRAM_BINS],
}

/// Significance of one 3-spectrogram model against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PValue {
    pub variant: ModelVariant,
    pub baseline: ModelVariant,
    pub test: WelchTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub models: Vec<ModelSummary>,
    pub p_values: Vec<PValue>,
    pub test_name: String,
    /// Set when fewer than 10 trials back the p-values.
    pub low_power: bool,
}

/// Bin an F1 value into the 20-bin histogram over [0, 1].
pub fn f1_bin(f1: f64) -> usize {
    ((f1 * F1_HISTOGRAM_BINS as f64) as usize).min(F1_HISTOGRAM_BINS - 1)
}

/// Aggregate trial outcomes: per-model means, F1 sampling distributions,
/// and one-sided Welch tests of each 3-spectrogram model against the
/// vocals-free single-spectrogram baseline.
pub fn summarize(runs: &[TrialRun]) -> Result<ExperimentSummary, ExperimentError> {
    let mut models = Vec::with_capacity(ModelVariant::ALL.len());
    for variant in ModelVariant::ALL {
        let mut f1_samples = Vec::new();
        let mut acc_sum = 0.0f64;
        let mut f1_sum = 0.0f64;
        let mut wf1_sum = 0.0f64;
        let mut failed = 0usize;
        for run in runs {
            for outcome in &run.outcomes {
                match outcome {
                    TrialOutcome::Completed(r) if r.variant == variant => {
                        f1_samples.push(r.selected_f1);
                        acc_sum += r.selected_accuracy;
                        f1_sum += r.selected_f1;
                        wf1_sum += r.selected_weighted_f1;
                    }
                    TrialOutcome::Diverged { variant: v, .. } if *v == variant => failed += 1,
                    _ => {}
                }
            }
        }
        let completed = f1_samples.len();
        if completed < 2 {
            return Err(ExperimentError::Summary(format!(
                "model {} completed only {completed} trial(s); need at least 2",
                variant.id()
            )));
        }
        let mut histogram = [0u32; F1_HISTOGRAM_BINS];
        for &f1 in &f1_samples {
            histogram[f1_bin(f1)] += 1;
        }
        models.push(ModelSummary {
            variant,
            completed,
            failed,
            mean_accuracy: acc_sum / completed as f64,
            mean_f1: f1_sum / completed as f64,
            mean_weighted_f1: wf1_sum / completed as f64,
            f1_samples,
            histogram,
        });
    }

    let baseline = ModelVariant::Conv2dNovox;
    let baseline_samples =
        models.iter().find(|m| m.variant == baseline).map(|m| m.f1_samples.clone()).unwrap();
    let mut p_values = Vec::new();
    for variant in [ModelVariant::Conv2dStems3, ModelVariant::DwconvStems3] {
        let samples = models.iter().find(|m| m.variant == variant).unwrap().f1_samples.clone();
        let test = welch_one_sided_greater(&samples, &baseline_samples)?;
        p_values.push(PValue { variant, baseline, test });
    }

    let low_power = runs.len() < 10;
    Ok(ExperimentSummary {
        models,
        p_values,
        test_name: "one-sided Welch two-sample t-test (greater)".into(),
        low_power,
    })
}
