//! The four classifier variants, their losses, and the Adam optimizer.
//!
//! Every variant is the same stack — two convolution blocks, each followed
//! by batch norm, ReLU, and 4x4 max pooling, then dropout, flatten, and a
//! dense softmax head — differing only in input channel count and whether
//! the convolutions are standard or depthwise separable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::{ConvKernel, DepthwiseKernel, PointwiseKernel};
use super::layers::{
    BatchNormLayer, ConvLayer, DenseLayer, DropoutLayer, FlattenLayer, Layer, MaxPoolLayer,
    ParamBlock, ReluLayer, SepConvLayer,
};
use super::tensor::FeatureMap;
use super::NnError;
use crate::seeds;

/// The four architectures compared in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Single mix spectrogram, standard convolution.
    Conv2dFull,
    /// Single vocals-removed spectrogram, standard convolution.
    Conv2dNovox,
    /// Three stem spectrograms, standard convolution.
    Conv2dStems3,
    /// Three stem spectrograms, depthwise separable convolution.
    DwconvStems3,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Conv2dFull,
        ModelVariant::Conv2dNovox,
        ModelVariant::Conv2dStems3,
        ModelVariant::DwconvStems3,
    ];

    /// Stable machine-readable identifier.
    pub fn id(self) -> &'static str {
        match self {
            ModelVariant::Conv2dFull => "conv2d_full",
            ModelVariant::Conv2dNovox => "conv2d_novox",
            ModelVariant::Conv2dStems3 => "conv2d_stems3",
            ModelVariant::DwconvStems3 => "dwconv_stems3",
        }
    }

    /// Row label used in the results table.
    pub fn table_label(self) -> &'static str {
        match self {
            ModelVariant::Conv2dFull => "1 spec, 2DConv-Full",
            ModelVariant::Conv2dNovox => "1 spec, 2DConv-No-Vox",
            ModelVariant::Conv2dStems3 => "3 spec, 2DConv",
            ModelVariant::DwconvStems3 => "3 spec, DW-2DConv",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.id() == id)
    }

    /// Input spectrogram channels this variant consumes.
    pub fn in_channels(self) -> usize {
        match self {
            ModelVariant::Conv2dFull | ModelVariant::Conv2dNovox => 1,
            ModelVariant::Conv2dStems3 | ModelVariant::DwconvStems3 => 3,
        }
    }

    pub fn separable(self) -> bool {
        matches!(self, ModelVariant::DwconvStems3)
    }
}

/// Hyperparameters of one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub conv_filters: [usize; 2],
    /// Square kernel side (odd).
    pub kernel_size: usize,
    /// Square pooling window.
    pub pool_size: usize,
    pub dropout_p: f64,
    pub l1: f64,
    pub l2: f64,
    pub classes: usize,
    pub in_channels: usize,
    /// Apply one literally identical depthwise filter to every channel
    /// instead of the standard per-channel filters.
    pub shared_depthwise: bool,
}

impl ModelConfig {
    pub fn for_variant(variant: ModelVariant, classes: usize) -> Self {
        Self {
            variant,
            conv_filters: [8, 16],
            kernel_size: 3,
            pool_size: 4,
            dropout_p: 0.5,
            l1: 1e-4,
            l2: 1e-4,
            classes,
            in_channels: variant.in_channels(),
            shared_depthwise: false,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(NnError::Shape(format!("dropout_p {} outside [0, 1)", self.dropout_p)));
        }
        if self.in_channels != self.variant.in_channels() {
            return Err(NnError::Shape(format!(
                "variant {} expects {} channels, config says {}",
                self.variant.id(),
                self.variant.in_channels(),
                self.in_channels
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(NnError::Shape("kernel size must be odd".into()));
        }
        if self.classes < 2 {
            return Err(NnError::Shape("need at least 2 classes".into()));
        }
        Ok(())
    }
}

/// Per-class loss multipliers; all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, NnError> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(NnError::Shape("class weights must all be positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0; classes])
    }

    /// Inverse-frequency weights `w_c = n / (k * n_c)` from a label vector.
    pub fn balanced(labels: &[u32], classes: usize) -> Result<Self, NnError> {
        let mut counts = vec![0usize; classes];
        for &l in labels {
            if l as usize >= classes {
                return Err(NnError::LabelOutOfRange { label: l, classes });
            }
            counts[l as usize] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(NnError::Shape("every class needs at least one sample".into()));
        }
        let n = labels.len() as f64;
        let k = classes as f64;
        Ok(Self(counts.iter().map(|&c| n / (k * c as f64)).collect()))
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row-stochastic softmax over `batch` rows of `k` logits.
pub fn softmax(logits: &[f64], k: usize) -> Vec<f64> {
    assert!(k > 0 && logits.len() % k == 0);
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks_exact(k) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exp.iter().sum();
        out.extend(exp.iter().map(|&e| e / sum));
    }
    out
}

/// Weighted sparse categorical cross-entropy and its logit gradient.
///
/// `loss = Σ_b w_{y_b} (-log softmax(logits_b)[y_b]) / Σ_b w_{y_b}`;
/// the gradient is consistent with that normalization, so scaling all
/// class weights leaves both unchanged.
pub fn weighted_xent(
    logits: &[f64],
    k: usize,
    labels: &[u32],
    weights: &ClassWeights,
) -> Result<(f64, Vec<f64>), NnError> {
    if k == 0 || logits.len() != labels.len() * k {
        return Err(NnError::Shape(format!(
            "logits {} vs {} labels x {k} classes",
            logits.len(),
            labels.len()
        )));
    }
    if weights.len() != k {
        return Err(NnError::Shape(format!("{} class weights for {k} classes", weights.len())));
    }
    for &l in labels {
        if l as usize >= k {
            return Err(NnError::LabelOutOfRange { label: l, classes: k });
        }
    }

    let probs = softmax(logits, k);
    let weight_sum: f64 = labels.iter().map(|&l| weights.get(l as usize)).sum();
    let mut loss = 0.0f64;
    let mut grad = vec![0.0f64; logits.len()];
    for (b, &label) in labels.iter().enumerate() {
        let w = weights.get(label as usize);
        let p = &probs[b * k..(b + 1) * k];
        loss += w * -(p[label as usize].max(1e-300)).ln();
        for (j, g) in grad[b * k..(b + 1) * k].iter_mut().enumerate() {
            let indicator = if j == label as usize { 1.0 } else { 0.0 };
            *g = w * (p[j] - indicator) / weight_sum;
        }
    }
    Ok((loss / weight_sum, grad))
}

/// A built classifier: layer stack plus the dims it was built for.
///
/// Cloning copies parameters, caches, and RNG state, so a clone's next
/// forward pass draws the same dropout mask as the original's would.
#[derive(Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub input_h: usize,
    pub input_w: usize,
    pub(crate) layers: Vec<Layer>,
}

/// Construct the configured stack with He-uniform seeded initialization.
pub fn build_model(
    config: ModelConfig,
    input_h: usize,
    input_w: usize,
    seed: u64,
) -> Result<Model, NnError> {
    config.validate()?;
    let mut init_rng = seeds::substream_rng(seed, "init");
    let dropout_rng = seeds::substream_rng(seed, "dropout");
    let [f0, f1] = config.conv_filters;
    let pool = config.pool_size;

    let (h1, w1) = (input_h / pool, input_w / pool);
    let (h2, w2) = (h1 / pool, w1 / pool);
    if h2 == 0 || w2 == 0 {
        return Err(NnError::Shape(format!(
            "input {input_h}x{input_w} too small for two {pool}x{pool} poolings"
        )));
    }
    let flat = f1 * h2 * w2;

    let mut layers = Vec::with_capacity(11);
    layers.push(make_conv(&config, config.in_channels, f0, &mut init_rng));
    layers.push(Layer::BatchNorm(BatchNormLayer::new(f0)));
    layers.push(Layer::Relu(ReluLayer::new()));
    layers.push(Layer::MaxPool(MaxPoolLayer::new(pool)));
    layers.push(make_conv(&config, f0, f1, &mut init_rng));
    layers.push(Layer::BatchNorm(BatchNormLayer::new(f1)));
    layers.push(Layer::Relu(ReluLayer::new()));
    layers.push(Layer::MaxPool(MaxPoolLayer::new(pool)));
    layers.push(Layer::Dropout(DropoutLayer::new(config.dropout_p, dropout_rng)));
    layers.push(Layer::Flatten(FlattenLayer::new()));

    let mut dense = DenseLayer::new(flat, config.classes);
    he_uniform(&mut dense.weights, flat, &mut init_rng);
    layers.push(Layer::Dense(dense));

    Ok(Model { config, input_h, input_w, layers })
}

fn make_conv(config: &ModelConfig, c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Layer {
    let k = config.kernel_size;
    if config.variant.separable() {
        let mut dw = DepthwiseKernel::zeros(k, k, c_in, config.shared_depthwise);
        he_uniform(&mut dw.weights, k * k, rng);
        let mut pw = PointwiseKernel::zeros(c_in, c_out);
        he_uniform(&mut pw.weights, c_in, rng);
        Layer::SepConv(SepConvLayer::new(dw, pw))
    } else {
        let mut kernel = ConvKernel::zeros(k, k, c_in, c_out);
        he_uniform(&mut kernel.weights, k * k * c_in, rng);
        Layer::Conv(ConvLayer::new(kernel))
    }
}

fn he_uniform(weights: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / fan_in as f64).sqrt();
    for w in weights {
        *w = rng.gen_range(-limit..limit);
    }
}

impl Model {
    /// Forward pass to logits (`n x 1 x 1 x classes`).
    pub fn forward(&mut self, x: &FeatureMap, training: bool) -> Result<FeatureMap, NnError> {
        if x.c != self.config.in_channels || x.h != self.input_h || x.w != self.input_w {
            return Err(NnError::Shape(format!(
                "input {}x{}x{}, model built for {}x{}x{}",
                x.h, x.w, x.c, self.input_h, self.input_w, self.config.in_channels
            )));
        }
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(cur, training)?;
        }
        Ok(cur)
    }

    /// Argmax class predictions in eval mode.
    pub fn predict(&mut self, x: &FeatureMap) -> Result<Vec<u32>, NnError> {
        let logits = self.forward(x, false)?;
        let k = self.config.classes;
        Ok(logits
            .data()
            .chunks_exact(k)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i as u32)
                    .unwrap()
            })
            .collect())
    }

    /// Data loss plus regularization penalty, no gradients.
    pub fn loss_on_batch(
        &mut self,
        x: &FeatureMap,
        labels: &[u32],
        weights: &ClassWeights,
        training: bool,
    ) -> Result<f64, NnError> {
        let logits = self.forward(x, training)?;
        let (data_loss, _) = weighted_xent(logits.data(), self.config.classes, labels, weights)?;
        Ok(data_loss + self.penalty())
    }

    /// Full backpropagation; leaves parameter gradients (including the
    /// L1/L2 penalty terms) in the layers and returns the total loss.
    pub fn loss_and_backward(
        &mut self,
        x: &FeatureMap,
        labels: &[u32],
        weights: &ClassWeights,
    ) -> Result<f64, NnError> {
        let logits = self.forward(x, true)?;
        let (data_loss, grad) = weighted_xent(logits.data(), self.config.classes, labels, weights)?;
        let mut cur = FeatureMap::from_vec(grad, x.n, 1, 1, self.config.classes);
        for layer in self.layers.iter_mut().rev() {
            cur = layer.backward(cur)?;
        }

        // L1/L2 penalties on conv and dense weights only
        let (l1, l2) = (self.config.l1, self.config.l2);
        let mut penalty = 0.0f64;
        self.visit_params(&mut |block: ParamBlock<'_>| {
            if block.regularized {
                for (w, g) in block.values.iter().zip(block.grads.iter_mut()) {
                    penalty += l1 * w.abs() + l2 * w * w;
                    *g += l1 * w.signum() + 2.0 * l2 * w;
                }
            }
        });
        Ok(data_loss + penalty)
    }

    fn penalty(&mut self) -> f64 {
        let (l1, l2) = (self.config.l1, self.config.l2);
        let mut penalty = 0.0f64;
        self.visit_params(&mut |block: ParamBlock<'_>| {
            if block.regularized {
                for w in block.values.iter() {
                    penalty += l1 * w.abs() + l2 * w * w;
                }
            }
        });
        penalty
    }

    /// Visit every trainable parameter block in a fixed order.
    pub fn visit_params(&mut self, f: &mut impl FnMut(ParamBlock<'_>)) {
        for layer in &mut self.layers {
            layer.visit_params(f);
        }
    }

    pub(crate) fn visit_state(&mut self, f: &mut impl FnMut(&'static str, &mut [f64])) {
        for layer in &mut self.layers {
            layer.visit_state(f);
        }
    }

    /// Flattened copy of all trainable parameters, in visit order.
    pub fn parameter_vector(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit_params(&mut |block: ParamBlock<'_>| out.extend_from_slice(block.values));
        out
    }
}

/// Adam with bias correction; state is laid out to match the model's
/// parameter visit order.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn step(&mut self, model: &mut Model) {
        self.t += 1;
        if self.m.is_empty() {
            model.visit_params(&mut |block: ParamBlock<'_>| {
                self.m.push(vec![0.0; block.values.len()]);
                self.v.push(vec![0.0; block.values.len()]);
            });
        }
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.epsilon);
        let mut idx = 0usize;
        let (m, v) = (&mut self.m, &mut self.v);
        model.visit_params(&mut |block: ParamBlock<'_>| {
            let (mb, vb) = (&mut m[idx], &mut v[idx]);
            for ((w, &g), (mi, vi)) in block
                .values
                .iter_mut()
                .zip(block.grads.iter())
                .zip(mb.iter_mut().zip(vb.iter_mut()))
            {
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
    }
}

/// One optimization step: backprop then Adam. A non-finite loss aborts
/// without touching the parameters.
pub fn train_step(
    model: &mut Model,
    optimizer: &mut Adam,
    x: &FeatureMap,
    labels: &[u32],
    weights: &ClassWeights,
) -> Result<f64, NnError> {
    let loss = model.loss_and_backward(x, labels, weights)?;
    if !loss.is_finite() {
        return Err(NnError::Divergence);
    }
    optimizer.step(model);
    Ok(loss)
}

/// One layer's parameter tally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub name: String,
    /// Multiplicative weights (filters, dense matrix, batch norm scales).
    pub weights: usize,
    /// Weights plus additive parameters (biases, batch norm shifts).
    pub with_bias: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCounts {
    pub layers: Vec<LayerParams>,
    pub total_weights: usize,
    pub total_with_bias: usize,
}

/// Exact per-layer and total parameter counts for a model configuration
/// on the given input dims, computed from shapes alone.
pub fn count_params(config: &ModelConfig, input_h: usize, input_w: usize) -> ParamCounts {
    let k2 = config.kernel_size * config.kernel_size;
    let [f0, f1] = config.conv_filters;
    let pool = config.pool_size;
    let flat = f1 * (input_h / pool / pool) * (input_w / pool / pool);

    let conv_counts = |c_in: usize, c_out: usize, tag: &str| -> LayerParams {
        if config.variant.separable() {
            let dw = if config.shared_depthwise { k2 } else { k2 * c_in };
            let w = dw + c_in * c_out;
            LayerParams { name: format!("sepconv{tag}"), weights: w, with_bias: w + c_out }
        } else {
            let w = k2 * c_in * c_out;
            LayerParams { name: format!("conv{tag}"), weights: w, with_bias: w + c_out }
        }
    };

    let layers = vec![
        conv_counts(config.in_channels, f0, "1"),
        LayerParams { name: "batchnorm1".into(), weights: f0, with_bias: 2 * f0 },
        conv_counts(f0, f1, "2"),
        LayerParams { name: "batchnorm2".into(), weights: f1, with_bias: 2 * f1 },
        LayerParams {
            name: "dense".into(),
            weights: flat * config.classes,
            with_bias: flat * config.classes + config.classes,
        },
    ];
    let total_weights = layers.iter().map(|l| l.weights).sum();
    let total_with_bias = layers.iter().map(|l| l.with_bias).sum();
    ParamCounts { layers, total_weights, total_with_bias }
}
