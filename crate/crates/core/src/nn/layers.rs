//! Layer implementations with forward passes, cached state, and backward
//! passes. A layer owns its parameters and the gradients of the last
//! backward call.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::{
    conv2d, conv2d_backward, depthwise_conv2d, depthwise_conv2d_backward, pointwise_conv2d,
    pointwise_conv2d_backward, ConvKernel, DepthwiseKernel, PointwiseKernel,
};
use super::tensor::FeatureMap;
use super::NnError;

pub(crate) const BN_EPSILON: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.9;

// ---------------------------------------------------------------------------
// batch-norm inner loops, monomorphized over the channel counts the models
// use so they unroll and vectorize
// ---------------------------------------------------------------------------

macro_rules! bn_dispatch {
    ($c:expr, $fn:ident, $($arg:expr),*) => {
        match $c {
            3 => $fn::<3>($($arg),*),
            8 => $fn::<8>($($arg),*),
            16 => $fn::<16>($($arg),*),
            _ => $fn::<0>($($arg),*),
        }
    };
}

fn channel_sums(data: &[f64], c: usize) -> Vec<f64> {
    fn go<const C: usize>(data: &[f64], c: usize) -> Vec<f64> {
        let width = if C > 0 { C } else { c };
        let mut acc = vec![0.0f64; width];
        if C > 0 {
            let mut local = [0.0f64; 32];
            for px in data.chunks_exact(C) {
                for ch in 0..C {
                    local[ch] += px[ch];
                }
            }
            acc.copy_from_slice(&local[..C]);
        } else {
            for px in data.chunks_exact(width) {
                for (s, &v) in acc.iter_mut().zip(px) {
                    *s += v;
                }
            }
        }
        acc
    }
    bn_dispatch!(c, go, data, c)
}

fn channel_sq_dev_sums(data: &[f64], c: usize, mean: &[f64]) -> Vec<f64> {
    fn go<const C: usize>(data: &[f64], c: usize, mean: &[f64]) -> Vec<f64> {
        let width = if C > 0 { C } else { c };
        let mut acc = vec![0.0f64; width];
        if C > 0 {
            let mut local = [0.0f64; 32];
            let mut mu = [0.0f64; 32];
            mu[..C].copy_from_slice(&mean[..C]);
            for px in data.chunks_exact(C) {
                for ch in 0..C {
                    let d = px[ch] - mu[ch];
                    local[ch] += d * d;
                }
            }
            acc.copy_from_slice(&local[..C]);
        } else {
            for px in data.chunks_exact(width) {
                for ((s, &v), &mu) in acc.iter_mut().zip(px).zip(mean) {
                    let d = v - mu;
                    *s += d * d;
                }
            }
        }
        acc
    }
    bn_dispatch!(c, go, data, c, mean)
}

fn channel_grad_sums(
    grad: &[f64],
    input: &[f64],
    c: usize,
    na: &[f64],
    nb: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    fn go<const C: usize>(
        grad: &[f64],
        input: &[f64],
        c: usize,
        na: &[f64],
        nb: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let width = if C > 0 { C } else { c };
        let mut sum_g = vec![0.0f64; width];
        let mut sum_gx = vec![0.0f64; width];
        if C > 0 {
            let (mut lg, mut lgx, mut la, mut lb) =
                ([0.0f64; 32], [0.0f64; 32], [0.0f64; 32], [0.0f64; 32]);
            la[..C].copy_from_slice(&na[..C]);
            lb[..C].copy_from_slice(&nb[..C]);
            for (g, v) in grad.chunks_exact(C).zip(input.chunks_exact(C)) {
                for ch in 0..C {
                    let xhat = v[ch] * la[ch] + lb[ch];
                    lg[ch] += g[ch];
                    lgx[ch] += g[ch] * xhat;
                }
            }
            sum_g.copy_from_slice(&lg[..C]);
            sum_gx.copy_from_slice(&lgx[..C]);
        } else {
            for (g, v) in grad.chunks_exact(width).zip(input.chunks_exact(width)) {
                for ch in 0..width {
                    let xhat = v[ch] * na[ch] + nb[ch];
                    sum_g[ch] += g[ch];
                    sum_gx[ch] += g[ch] * xhat;
                }
            }
        }
        (sum_g, sum_gx)
    }
    bn_dispatch!(c, go, grad, input, c, na, nb)
}

fn bn_apply(x: &[f64], out: &mut [f64], c: usize, scale: &[f64], shift: &[f64]) {
    fn go<const C: usize>(x: &[f64], out: &mut [f64], c: usize, scale: &[f64], shift: &[f64]) {
        let width = if C > 0 { C } else { c };
        if C > 0 {
            let (mut lsc, mut lsh) = ([0.0f64; 32], [0.0f64; 32]);
            lsc[..C].copy_from_slice(&scale[..C]);
            lsh[..C].copy_from_slice(&shift[..C]);
            for (out_px, in_px) in out.chunks_exact_mut(C).zip(x.chunks_exact(C)) {
                for ch in 0..C {
                    out_px[ch] = in_px[ch] * lsc[ch] + lsh[ch];
                }
            }
        } else {
            for (out_px, in_px) in out.chunks_exact_mut(width).zip(x.chunks_exact(width)) {
                for ch in 0..width {
                    out_px[ch] = in_px[ch] * scale[ch] + shift[ch];
                }
            }
        }
    }
    bn_dispatch!(c, go, x, out, c, scale, shift)
}

fn bn_backward_apply(
    grad: &[f64],
    input: &[f64],
    grad_in: &mut [f64],
    c: usize,
    aa: &[f64],
    dd: &[f64],
    ee: &[f64],
) {
    fn go<const C: usize>(
        grad: &[f64],
        input: &[f64],
        grad_in: &mut [f64],
        c: usize,
        aa: &[f64],
        dd: &[f64],
        ee: &[f64],
    ) {
        let width = if C > 0 { C } else { c };
        if C > 0 {
            let (mut la, mut ld, mut le) = ([0.0f64; 32], [0.0f64; 32], [0.0f64; 32]);
            la[..C].copy_from_slice(&aa[..C]);
            ld[..C].copy_from_slice(&dd[..C]);
            le[..C].copy_from_slice(&ee[..C]);
            for ((gi, g), v) in grad_in
                .chunks_exact_mut(C)
                .zip(grad.chunks_exact(C))
                .zip(input.chunks_exact(C))
            {
                for ch in 0..C {
                    gi[ch] = g[ch] * la[ch] + v[ch] * ld[ch] + le[ch];
                }
            }
        } else {
            for ((gi, g), v) in grad_in
                .chunks_exact_mut(width)
                .zip(grad.chunks_exact(width))
                .zip(input.chunks_exact(width))
            {
                for ch in 0..width {
                    gi[ch] = g[ch] * aa[ch] + v[ch] * dd[ch] + ee[ch];
                }
            }
        }
    }
    bn_dispatch!(c, go, grad, input, grad_in, c, aa, dd, ee)
}

/// A mutable view of one parameter block and its gradient.
pub struct ParamBlock<'a> {
    pub name: &'static str,
    pub values: &'a mut [f64],
    pub grads: &'a mut [f64],
    /// Included in the L1/L2 penalty (conv and dense weights only).
    pub regularized: bool,
}

#[derive(Clone)]
pub(crate) enum Layer {
    Conv(ConvLayer),
    SepConv(SepConvLayer),
    BatchNorm(BatchNormLayer),
    Relu(ReluLayer),
    MaxPool(MaxPoolLayer),
    Dropout(DropoutLayer),
    Flatten(FlattenLayer),
    Dense(DenseLayer),
}

impl Layer {
    pub fn forward(&mut self, x: FeatureMap, training: bool) -> Result<FeatureMap, NnError> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::SepConv(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, training),
            Layer::Relu(l) => l.forward(x),
            Layer::MaxPool(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, training),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        match self {
            Layer::Conv(l) => l.backward(grad),
            Layer::SepConv(l) => l.backward(grad),
            Layer::BatchNorm(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::MaxPool(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
            Layer::Dense(l) => l.backward(grad),
        }
    }

    pub fn visit_params(&mut self, f: &mut impl FnMut(ParamBlock<'_>)) {
        match self {
            Layer::Conv(l) => {
                f(ParamBlock {
                    name: "conv.weights",
                    values: &mut l.kernel.weights,
                    grads: &mut l.grad_weights,
                    regularized: true,
                });
                f(ParamBlock {
                    name: "conv.bias",
                    values: &mut l.kernel.bias,
                    grads: &mut l.grad_bias,
                    regularized: false,
                });
            }
            Layer::SepConv(l) => {
                f(ParamBlock {
                    name: "sepconv.depthwise",
                    values: &mut l.dw.weights,
                    grads: &mut l.grad_dw,
                    regularized: true,
                });
                f(ParamBlock {
                    name: "sepconv.pointwise",
                    values: &mut l.pw.weights,
                    grads: &mut l.grad_pw,
                    regularized: true,
                });
                f(ParamBlock {
                    name: "sepconv.bias",
                    values: &mut l.pw.bias,
                    grads: &mut l.grad_pw_bias,
                    regularized: false,
                });
            }
            Layer::BatchNorm(l) => {
                f(ParamBlock {
                    name: "batchnorm.gamma",
                    values: &mut l.gamma,
                    grads: &mut l.grad_gamma,
                    regularized: false,
                });
                f(ParamBlock {
                    name: "batchnorm.beta",
                    values: &mut l.beta,
                    grads: &mut l.grad_beta,
                    regularized: false,
                });
            }
            Layer::Dense(l) => {
                f(ParamBlock {
                    name: "dense.weights",
                    values: &mut l.weights,
                    grads: &mut l.grad_weights,
                    regularized: true,
                });
                f(ParamBlock {
                    name: "dense.bias",
                    values: &mut l.bias,
                    grads: &mut l.grad_bias,
                    regularized: false,
                });
            }
            _ => {}
        }
    }

    /// Non-parameter state persisted in checkpoints (batch norm running stats).
    pub fn visit_state(&mut self, f: &mut impl FnMut(&'static str, &mut [f64])) {
        if let Layer::BatchNorm(l) = self {
            f("batchnorm.running_mean", &mut l.running_mean);
            f("batchnorm.running_var", &mut l.running_var);
        }
    }
}

#[derive(Clone)]
pub(crate) struct ConvLayer {
    pub kernel: ConvKernel,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<FeatureMap>,
}

impl ConvLayer {
    pub fn new(kernel: ConvKernel) -> Self {
        let grad_weights = vec![0.0; kernel.weights.len()];
        let grad_bias = vec![0.0; kernel.bias.len()];
        Self { kernel, grad_weights, grad_bias, input: None }
    }

    fn forward(&mut self, x: FeatureMap) -> Result<FeatureMap, NnError> {
        let out = conv2d(&x, &self.kernel)?;
        self.input = Some(x);
        Ok(out)
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        let input = self.input.take().ok_or_else(|| NnError::Shape("backward before forward".into()))?;
        let (gi, gw, gb) = conv2d_backward(&input, &self.kernel, &grad)?;
        self.grad_weights = gw;
        self.grad_bias = gb;
        Ok(gi)
    }
}

#[derive(Clone)]
pub(crate) struct SepConvLayer {
    pub dw: DepthwiseKernel,
    pub pw: PointwiseKernel,
    pub grad_dw: Vec<f64>,
    pub grad_pw: Vec<f64>,
    pub grad_pw_bias: Vec<f64>,
    input: Option<FeatureMap>,
    mid: Option<FeatureMap>,
}

impl SepConvLayer {
    pub fn new(dw: DepthwiseKernel, pw: PointwiseKernel) -> Self {
        let grad_dw = vec![0.0; dw.weights.len()];
        let grad_pw = vec![0.0; pw.weights.len()];
        let grad_pw_bias = vec![0.0; pw.bias.len()];
        Self { dw, pw, grad_dw, grad_pw, grad_pw_bias, input: None, mid: None }
    }

    fn forward(&mut self, x: FeatureMap) -> Result<FeatureMap, NnError> {
        let mid = depthwise_conv2d(&x, &self.dw)?;
        let out = pointwise_conv2d(&mid, &self.pw)?;
        self.input = Some(x);
        self.mid = Some(mid);
        Ok(out)
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        let input = self.input.take().ok_or_else(|| NnError::Shape("backward before forward".into()))?;
        let mid = self.mid.take().ok_or_else(|| NnError::Shape("backward before forward".into()))?;
        let (grad_mid, gpw, gpb) = pointwise_conv2d_backward(&mid, &self.pw, &grad)?;
        let (gi, gdw) = depthwise_conv2d_backward(&input, &self.dw, &grad_mid)?;
        self.grad_pw = gpw;
        self.grad_pw_bias = gpb;
        self.grad_dw = gdw;
        Ok(gi)
    }
}

/// Per-channel batch normalization over the batch and spatial axes.
///
/// The backward pass recomputes the normalized values from the cached
/// input rather than storing them; one fewer activation-sized buffer per
/// layer per step.
#[derive(Clone)]
pub(crate) struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    input: Option<FeatureMap>,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    trained_forward: bool,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            grad_gamma: vec![0.0; channels],
            grad_beta: vec![0.0; channels],
            input: None,
            mean: vec![0.0; channels],
            inv_std: vec![0.0; channels],
            trained_forward: false,
        }
    }

    fn forward(&mut self, x: FeatureMap, training: bool) -> Result<FeatureMap, NnError> {
        let c = x.c;
        if c != self.gamma.len() {
            return Err(NnError::Shape(format!(
                "batchnorm: {} channels, expected {}",
                c,
                self.gamma.len()
            )));
        }
        let m = (x.n * x.h * x.w) as f64;
        let mut out = FeatureMap::zeros(x.n, x.h, x.w, c);

        let (mean, var) = if training {
            let mut mean = channel_sums(x.data(), c);
            for s in mean.iter_mut() {
                *s /= m;
            }
            let mut var = channel_sq_dev_sums(x.data(), c, &mean);
            for s in var.iter_mut() {
                *s /= m;
            }
            for ch in 0..c {
                self.running_mean[ch] = BN_MOMENTUM * self.running_mean[ch] + (1.0 - BN_MOMENTUM) * mean[ch];
                self.running_var[ch] = BN_MOMENTUM * self.running_var[ch] + (1.0 - BN_MOMENTUM) * var[ch];
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        for ch in 0..c {
            self.inv_std[ch] = 1.0 / (var[ch] + BN_EPSILON).sqrt();
        }
        // hoisted per-channel affine: out = v*scale + shift with
        // scale = gamma*inv_std and shift = beta - gamma*inv_std*mean
        let scale: Vec<f64> =
            self.gamma.iter().zip(&self.inv_std).map(|(&g, &s)| g * s).collect();
        let shift: Vec<f64> = self
            .beta
            .iter()
            .zip(&scale)
            .zip(&mean)
            .map(|((&be, &sc), &mu)| be - sc * mu)
            .collect();
        bn_apply(x.data(), out.data_mut(), c, &scale, &shift);
        self.mean = mean;
        self.input = Some(x);
        self.trained_forward = training;
        Ok(out)
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        let input =
            self.input.take().ok_or_else(|| NnError::Shape("backward before forward".into()))?;
        let c = grad.c;
        let m = (grad.n * grad.h * grad.w) as f64;

        // xhat = v*na + nb, recomputed exactly as the forward pass did
        let na: Vec<f64> = self.inv_std.clone();
        let nb: Vec<f64> = self.mean.iter().zip(&na).map(|(&mu, &s)| -mu * s).collect();
        let (sum_g, sum_gx) = channel_grad_sums(grad.data(), input.data(), c, &na, &nb);
        for ch in 0..c {
            self.grad_beta[ch] = sum_g[ch];
            self.grad_gamma[ch] = sum_gx[ch];
        }

        let mut grad_in = FeatureMap::zeros(grad.n, grad.h, grad.w, c);
        // gi = g*aa + xhat*cc + bb, expanded onto the raw input:
        // gi = g*aa + v*(na*cc) + (nb*cc + bb)
        let aa: Vec<f64> = self.gamma.iter().zip(&self.inv_std).map(|(&g, &s)| g * s).collect();
        if self.trained_forward {
            let bb: Vec<f64> = aa.iter().zip(&sum_g).map(|(&a, &sg)| -a * sg / m).collect();
            let cc: Vec<f64> = aa.iter().zip(&sum_gx).map(|(&a, &sgx)| -a * sgx / m).collect();
            let dd: Vec<f64> = na.iter().zip(&cc).map(|(&a, &c)| a * c).collect();
            let ee: Vec<f64> =
                nb.iter().zip(&cc).zip(&bb).map(|((&b, &c), &b2)| b * c + b2).collect();
            bn_backward_apply(grad.data(), input.data(), grad_in.data_mut(), c, &aa, &dd, &ee);
        } else {
            // running statistics are constants in eval mode
            for (gi_px, g_px) in grad_in.data_mut().chunks_exact_mut(c).zip(grad.data().chunks_exact(c)) {
                for ch in 0..c {
                    gi_px[ch] = g_px[ch] * aa[ch];
                }
            }
        }
        Ok(grad_in)
    }
}

#[derive(Clone)]
pub(crate) struct ReluLayer {
    mask: Vec<bool>,
}

impl ReluLayer {
    pub fn new() -> Self {
        Self { mask: Vec::new() }
    }

    fn forward(&mut self, mut x: FeatureMap) -> Result<FeatureMap, NnError> {
        self.mask = x.data().iter().map(|&v| v > 0.0).collect();
        for v in x.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(x)
    }

    fn backward(&mut self, mut grad: FeatureMap) -> Result<FeatureMap, NnError> {
        if grad.data().len() != self.mask.len() {
            return Err(NnError::Shape("relu: grad shape mismatch".into()));
        }
        for (g, &keep) in grad.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *g = 0.0;
            }
        }
        Ok(grad)
    }
}

/// Non-overlapping max pooling; output dims floor-divide the input.
#[derive(Clone)]
pub(crate) struct MaxPoolLayer {
    pub size: usize,
    input_shape: (usize, usize, usize, usize),
    argmax: Vec<usize>,
}

impl MaxPoolLayer {
    pub fn new(size: usize) -> Self {
        Self { size, input_shape: (0, 0, 0, 0), argmax: Vec::new() }
    }

    fn forward(&mut self, x: FeatureMap) -> Result<FeatureMap, NnError> {
        let s = self.size;
        let c = x.c;
        let (oh, ow) = (x.h / s, x.w / s);
        if oh == 0 || ow == 0 {
            return Err(NnError::Shape(format!("maxpool: input {}x{} smaller than window {s}", x.h, x.w)));
        }
        self.input_shape = x.shape();
        let mut out = FeatureMap::from_vec(vec![f64::NEG_INFINITY; x.n * oh * ow * c], x.n, oh, ow, c);
        self.argmax = vec![0usize; out.data().len()];

        // sweep input rows; strict comparison keeps the first maximum on ties
        for b in 0..x.n {
            for oy in 0..oh {
                let out_start = out.idx(b, oy, 0, 0);
                let out_row = &mut out.data[out_start..out_start + ow * c];
                let arg_row = &mut self.argmax[out_start..out_start + ow * c];
                for ky in 0..s {
                    let in_start = x.idx(b, oy * s + ky, 0, 0);
                    let in_row = &x.data[in_start..in_start + x.w * c];
                    for ox in 0..ow {
                        let acc = &mut out_row[ox * c..(ox + 1) * c];
                        let args = &mut arg_row[ox * c..(ox + 1) * c];
                        for kx in 0..s {
                            let off = (ox * s + kx) * c;
                            let px = &in_row[off..off + c];
                            for ch in 0..c {
                                if px[ch] > acc[ch] {
                                    acc[ch] = px[ch];
                                    args[ch] = in_start + off + ch;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        if grad.data().len() != self.argmax.len() {
            return Err(NnError::Shape("maxpool: grad shape mismatch".into()));
        }
        let (n, h, w, c) = self.input_shape;
        let mut grad_in = FeatureMap::zeros(n, h, w, c);
        for (&src, &g) in self.argmax.iter().zip(grad.data()) {
            grad_in.data_mut()[src] += g;
        }
        Ok(grad_in)
    }
}

/// Inverted dropout: scales kept activations by `1/(1-p)` during training,
/// identity in eval mode. Owns a seeded RNG stream.
#[derive(Clone)]
pub(crate) struct DropoutLayer {
    pub p: f64,
    pub rng: ChaCha8Rng,
    mask: Vec<f64>,
}

impl DropoutLayer {
    pub fn new(p: f64, rng: ChaCha8Rng) -> Self {
        Self { p, rng, mask: Vec::new() }
    }

    fn forward(&mut self, mut x: FeatureMap, training: bool) -> Result<FeatureMap, NnError> {
        if !training || self.p == 0.0 {
            self.mask = vec![1.0; x.data().len()];
            return Ok(x);
        }
        let keep = 1.0 - self.p;
        let scale = 1.0 / keep;
        self.mask = (0..x.data().len())
            .map(|_| if self.rng.gen::<f64>() < keep { scale } else { 0.0 })
            .collect();
        for (v, &m) in x.data_mut().iter_mut().zip(&self.mask) {
            *v *= m;
        }
        Ok(x)
    }

    fn backward(&mut self, mut grad: FeatureMap) -> Result<FeatureMap, NnError> {
        if grad.data().len() != self.mask.len() {
            return Err(NnError::Shape("dropout: grad shape mismatch".into()));
        }
        for (g, &m) in grad.data_mut().iter_mut().zip(&self.mask) {
            *g *= m;
        }
        Ok(grad)
    }
}

#[derive(Clone)]
pub(crate) struct FlattenLayer {
    input_shape: (usize, usize, usize, usize),
}

impl FlattenLayer {
    pub fn new() -> Self {
        Self { input_shape: (0, 0, 0, 0) }
    }

    fn forward(&mut self, x: FeatureMap) -> Result<FeatureMap, NnError> {
        self.input_shape = x.shape();
        let (n, h, w, c) = x.shape();
        Ok(FeatureMap::from_vec(x.into_data(), n, 1, 1, h * w * c))
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        let (n, h, w, c) = self.input_shape;
        if grad.data().len() != n * h * w * c {
            return Err(NnError::Shape("flatten: grad shape mismatch".into()));
        }
        Ok(FeatureMap::from_vec(grad.into_data(), n, h, w, c))
    }
}

/// Fully connected affine layer on flattened features.
#[derive(Clone)]
pub(crate) struct DenseLayer {
    pub weights: Vec<f64>, // in_features x out_features
    pub bias: Vec<f64>,
    pub in_features: usize,
    pub out_features: usize,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<FeatureMap>,
}

impl DenseLayer {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            weights: vec![0.0; in_features * out_features],
            bias: vec![0.0; out_features],
            in_features,
            out_features,
            grad_weights: vec![0.0; in_features * out_features],
            grad_bias: vec![0.0; out_features],
            input: None,
        }
    }

    fn forward(&mut self, x: FeatureMap) -> Result<FeatureMap, NnError> {
        if x.c != self.in_features || x.h != 1 || x.w != 1 {
            return Err(NnError::Shape(format!(
                "dense: input {}x{}x{}, expected 1x1x{}",
                x.h, x.w, x.c, self.in_features
            )));
        }
        let mut out = FeatureMap::zeros(x.n, 1, 1, self.out_features);
        for b in 0..x.n {
            let row = x.pixel(b, 0, 0);
            let acc = out.pixel_mut(b, 0, 0);
            acc.copy_from_slice(&self.bias);
            for (i, &v) in row.iter().enumerate() {
                let wrow = &self.weights[i * self.out_features..(i + 1) * self.out_features];
                for (a, &wv) in acc.iter_mut().zip(wrow) {
                    *a += v * wv;
                }
            }
        }
        self.input = Some(x);
        Ok(out)
    }

    fn backward(&mut self, grad: FeatureMap) -> Result<FeatureMap, NnError> {
        let input = self.input.take().ok_or_else(|| NnError::Shape("backward before forward".into()))?;
        let mut grad_in = FeatureMap::zeros(input.n, 1, 1, self.in_features);
        self.grad_weights.iter_mut().for_each(|g| *g = 0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);

        for b in 0..input.n {
            let g = grad.pixel(b, 0, 0);
            for (gb, &gv) in self.grad_bias.iter_mut().zip(g) {
                *gb += gv;
            }
            let row = input.pixel(b, 0, 0);
            let gi = grad_in.pixel_mut(b, 0, 0);
            for (i, &v) in row.iter().enumerate() {
                let wrow = &self.weights[i * self.out_features..(i + 1) * self.out_features];
                let gwrow = &mut self.grad_weights[i * self.out_features..(i + 1) * self.out_features];
                let mut dot = 0.0f64;
                for ((&wv, gw), &gv) in wrow.iter().zip(gwrow.iter_mut()).zip(g) {
                    dot += wv * gv;
                    *gw += v * gv;
                }
                gi[i] += dot;
            }
        }
        Ok(grad_in)
    }
}
