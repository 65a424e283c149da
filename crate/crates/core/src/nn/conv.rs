//! Convolution kernels: standard multichannel 2D, depthwise, and pointwise.
//!
//! All convolutions are same-padded, stride-1 cross-correlations. The
//! depthwise separable form is literally the composition of the depthwise
//! and pointwise stages, so the structural identity
//! `sepconv2d(x) == pointwise(depthwise(x))` holds by construction.
//!
//! The inner loops accumulate along the output-channel axis, which is
//! contiguous in both the NHWC activations and the `kh x kw x c_in x c_out`
//! weight layout.

use super::tensor::FeatureMap;
use super::NnError;

/// Standard multichannel filter bank: `kh x kw x c_in x c_out` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub kh: usize,
    pub kw: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl ConvKernel {
    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Self {
        assert!(kh % 2 == 1 && kw % 2 == 1, "kernel dims must be odd");
        Self { weights: vec![0.0; kh * kw * c_in * c_out], bias: vec![0.0; c_out], kh, kw, c_in, c_out }
    }

    #[inline]
    pub fn widx(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.kw + kx) * self.c_in + ci) * self.c_out + co
    }
}

/// One 2D filter per channel: `kh x kw x c`. With `shared` set, a single
/// filter (`kh x kw x 1`) is applied to every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel {
    pub weights: Vec<f64>,
    pub kh: usize,
    pub kw: usize,
    pub c: usize,
    pub shared: bool,
}

impl DepthwiseKernel {
    pub fn zeros(kh: usize, kw: usize, c: usize, shared: bool) -> Self {
        assert!(kh % 2 == 1 && kw % 2 == 1, "kernel dims must be odd");
        let stored = if shared { 1 } else { c };
        Self { weights: vec![0.0; kh * kw * stored], kh, kw, c, shared }
    }

    /// Channels stored per tap: 1 when shared, `c` otherwise.
    #[inline]
    pub fn stored_channels(&self) -> usize {
        if self.shared {
            1
        } else {
            self.c
        }
    }

    #[inline]
    pub fn widx(&self, ky: usize, kx: usize, ch: usize) -> usize {
        let stored = self.stored_channels();
        (ky * self.kw + kx) * stored + if self.shared { 0 } else { ch }
    }
}

/// 1x1 channel-mixing filter: `c_in x c_out` plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseKernel {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub c_in: usize,
    pub c_out: usize,
}

impl PointwiseKernel {
    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Self { weights: vec![0.0; c_in * c_out], bias: vec![0.0; c_out], c_in, c_out }
    }

    #[inline]
    pub fn widx(&self, ci: usize, co: usize) -> usize {
        ci * self.c_out + co
    }

    /// View as the equivalent 1x1 [`ConvKernel`] (same weight layout).
    fn as_conv(&self) -> ConvKernel {
        ConvKernel {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            kh: 1,
            kw: 1,
            c_in: self.c_in,
            c_out: self.c_out,
        }
    }
}

/// Same-padded stride-1 multichannel cross-correlation with bias.
///
/// Works row by row: for each kernel tap the input row is streamed once
/// while the tap's `c_in x c_out` weight block stays hot, accumulating into
/// an output-row buffer. Per output element the additions still happen in
/// `(ky, kx, ci)` order on top of the bias, so results match a naive
/// per-element loop bit for bit. The inner update is monomorphized over
/// the output channel count for the widths the models use.
pub fn conv2d(input: &FeatureMap, kernel: &ConvKernel) -> Result<FeatureMap, NnError> {
    if input.c != kernel.c_in {
        return Err(NnError::Shape(format!(
            "conv2d: input has {} channels, kernel expects {}",
            input.c, kernel.c_in
        )));
    }
    // register-accumulated 3x3 path pays off only while the accumulator
    // (c_out lanes) and one tap row fit comfortably in registers
    if kernel.kh == 3 && kernel.kw == 3 {
        match (kernel.c_out, kernel.c_in) {
            (8, 1) => return Ok(conv2d_mono33::<8, 1>(input, kernel)),
            (8, 3) => return Ok(conv2d_mono33::<8, 3>(input, kernel)),
            _ => {}
        }
    }
    Ok(match kernel.c_out {
        2 => conv2d_mono::<2>(input, kernel),
        3 => conv2d_mono::<3>(input, kernel),
        4 => conv2d_mono::<4>(input, kernel),
        8 => conv2d_mono::<8>(input, kernel),
        16 => conv2d_mono::<16>(input, kernel),
        _ => conv2d_mono_dyn(input, kernel),
    })
}

/// 3x3 kernels with known channel widths: interior pixels accumulate all
/// nine taps in registers; edge pixels fall back to the guarded loop.
/// Summation order per output element is (ky, kx, ci) on top of the bias,
/// identical to every other path.
fn conv2d_mono33<const CO: usize, const CI: usize>(
    input: &FeatureMap,
    kernel: &ConvKernel,
) -> FeatureMap {
    debug_assert_eq!((kernel.c_out, kernel.c_in), (CO, CI));
    let (n, h, w) = (input.n, input.h, input.w);
    let bias: &[f64; CO] = kernel.bias.as_slice().try_into().unwrap();
    // weights regrouped per (tap, ci)
    let mut wtap: Vec<[f64; CO]> = Vec::with_capacity(9 * CI);
    for tap in 0..9 {
        for ci in 0..CI {
            let base = (tap * CI + ci) * CO;
            wtap.push(kernel.weights[base..base + CO].try_into().unwrap());
        }
    }

    let mut out_data: Vec<f64> = super::tensor::pooled_vec(n * h * w * CO);
    let cell = |b: usize, y: usize, x: usize, out: &mut Vec<f64>| {
        let mut acc = *bias;
        for ky in 0..3usize {
            let iy = (y + ky).wrapping_sub(1);
            if iy >= h {
                continue;
            }
            for kx in 0..3usize {
                let ix = (x + kx).wrapping_sub(1);
                if ix >= w {
                    continue;
                }
                let px = input.pixel(b, iy, ix);
                for ci in 0..CI {
                    let v = px[ci];
                    let wr = &wtap[(ky * 3 + kx) * CI + ci];
                    for o in 0..CO {
                        acc[o] += v * wr[o];
                    }
                }
            }
        }
        out.extend_from_slice(&acc);
    };

    for b in 0..n {
        for y in 0..h {
            if y == 0 || y + 1 >= h || w < 3 {
                for x in 0..w {
                    cell(b, y, x, &mut out_data);
                }
                continue;
            }
            let r0 = {
                let s = input.idx(b, y - 1, 0, 0);
                &input.data[s..s + w * CI]
            };
            let r1 = {
                let s = input.idx(b, y, 0, 0);
                &input.data[s..s + w * CI]
            };
            let r2 = {
                let s = input.idx(b, y + 1, 0, 0);
                &input.data[s..s + w * CI]
            };
            cell(b, y, 0, &mut out_data);
            for x in 1..w - 1 {
                let base = (x - 1) * CI;
                let mut acc = *bias;
                for (t, row) in [r0, r1, r2].into_iter().enumerate() {
                    let px3 = &row[base..base + 3 * CI];
                    for k in 0..3 {
                        for ci in 0..CI {
                            let v = px3[k * CI + ci];
                            let wr = &wtap[(t * 3 + k) * CI + ci];
                            for o in 0..CO {
                                acc[o] += v * wr[o];
                            }
                        }
                    }
                }
                out_data.extend_from_slice(&acc);
            }
            cell(b, y, w - 1, &mut out_data);
        }
    }
    FeatureMap::from_vec(out_data, n, h, w, CO)
}

fn conv2d_mono<const CO: usize>(input: &FeatureMap, kernel: &ConvKernel) -> FeatureMap {
    debug_assert_eq!(kernel.c_out, CO);
    let (n, h, w) = (input.n, input.h, input.w);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    let c_in = kernel.c_in;
    let bias: &[f64; CO] = kernel.bias.as_slice().try_into().unwrap();
    let mut out_data: Vec<f64> = Vec::with_capacity(n * h * w * CO);

    let mut row_acc: Vec<[f64; CO]> = vec![[0.0; CO]; w];
    let mut wtap: Vec<[f64; CO]> = Vec::with_capacity(c_in);
    for b in 0..n {
        for y in 0..h {
            row_acc.iter_mut().for_each(|acc| *acc = *bias);
            for ky in 0..kernel.kh {
                let iy = y + ky;
                if iy < pad_y || iy - pad_y >= h {
                    continue;
                }
                let iy = iy - pad_y;
                let in_start = input.idx(b, iy, 0, 0);
                let in_row = &input.data[in_start..in_start + w * c_in];
                for kx in 0..kernel.kw {
                    let x_lo = pad_x.saturating_sub(kx);
                    let x_hi = (w + pad_x - kx).min(w);
                    let wbase = (ky * kernel.kw + kx) * c_in * CO;
                    wtap.clear();
                    for ci in 0..c_in {
                        wtap.push(
                            kernel.weights[wbase + ci * CO..wbase + (ci + 1) * CO]
                                .try_into()
                                .unwrap(),
                        );
                    }
                    let ix0 = x_lo + kx - pad_x;
                    for (acc, px) in row_acc[x_lo..x_hi]
                        .iter_mut()
                        .zip(in_row[ix0 * c_in..].chunks_exact(c_in))
                    {
                        // keep the accumulator in registers across channels
                        let mut local = *acc;
                        for (wr, &v) in wtap.iter().zip(px) {
                            for o in 0..CO {
                                local[o] += v * wr[o];
                            }
                        }
                        *acc = local;
                    }
                }
            }
            for acc in &row_acc {
                out_data.extend_from_slice(acc);
            }
        }
    }
    FeatureMap::from_vec(out_data, n, h, w, CO)
}

/// Fallback for unusual output widths (identical loop structure).
fn conv2d_mono_dyn(input: &FeatureMap, kernel: &ConvKernel) -> FeatureMap {
    let (n, h, w) = (input.n, input.h, input.w);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    let c_in = kernel.c_in;
    let c_out = kernel.c_out;
    let mut out_data: Vec<f64> = Vec::with_capacity(n * h * w * c_out);

    let mut row_acc = vec![0.0f64; w * c_out];
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                row_acc[x * c_out..(x + 1) * c_out].copy_from_slice(&kernel.bias);
            }
            for ky in 0..kernel.kh {
                let iy = y + ky;
                if iy < pad_y || iy - pad_y >= h {
                    continue;
                }
                let iy = iy - pad_y;
                let in_start = input.idx(b, iy, 0, 0);
                let in_row = &input.data[in_start..in_start + w * c_in];
                for kx in 0..kernel.kw {
                    let x_lo = pad_x.saturating_sub(kx);
                    let x_hi = (w + pad_x - kx).min(w);
                    let wbase = (ky * kernel.kw + kx) * c_in * c_out;
                    let wblock = &kernel.weights[wbase..wbase + c_in * c_out];
                    for x in x_lo..x_hi {
                        let ix = x + kx - pad_x;
                        let px = &in_row[ix * c_in..(ix + 1) * c_in];
                        let acc = &mut row_acc[x * c_out..(x + 1) * c_out];
                        for (ci, &v) in px.iter().enumerate() {
                            let wrow = &wblock[ci * c_out..(ci + 1) * c_out];
                            for (a, &wv) in acc.iter_mut().zip(wrow) {
                                *a += v * wv;
                            }
                        }
                    }
                }
            }
            out_data.extend_from_slice(&row_acc);
        }
    }
    FeatureMap::from_vec(out_data, n, h, w, c_out)
}

/// Backward pass of [`conv2d`]: input, weight, and bias gradients.
pub fn conv2d_backward(
    input: &FeatureMap,
    kernel: &ConvKernel,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Vec<f64>, Vec<f64>), NnError> {
    if grad_out.shape() != (input.n, input.h, input.w, kernel.c_out) {
        return Err(NnError::Shape("conv2d_backward: grad shape mismatch".into()));
    }
    Ok(match (kernel.c_out, kernel.c_in) {
        (8, 1) => conv2d_backward_mono::<8, 1>(input, kernel, grad_out),
        (8, 3) => conv2d_backward_mono::<8, 3>(input, kernel, grad_out),
        (16, 8) => conv2d_backward_mono::<16, 8>(input, kernel, grad_out),
        _ => conv2d_backward_dyn(input, kernel, grad_out),
    })
}

/// Two passes per kernel tap: input gradients through the transposed
/// weight block, then weight gradients with a register accumulator.
fn conv2d_backward_mono<const CO: usize, const CI: usize>(
    input: &FeatureMap,
    kernel: &ConvKernel,
    grad_out: &FeatureMap,
) -> (FeatureMap, Vec<f64>, Vec<f64>) {
    let (n, h, w) = (input.n, input.h, input.w);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    debug_assert_eq!((kernel.c_out, kernel.c_in), (CO, CI));

    let mut grad_in = FeatureMap::zeros(n, h, w, CI);
    let mut grad_w = vec![0.0f64; kernel.weights.len()];
    let mut grad_b = [0.0f64; CO];
    let mut transposed = [[0.0f64; CI]; CO];

    for b in 0..n {
        for y in 0..h {
            let g_start = grad_out.idx(b, y, 0, 0);
            let g_row = &grad_out.data[g_start..g_start + w * CO];
            for g in g_row.chunks_exact(CO) {
                for o in 0..CO {
                    grad_b[o] += g[o];
                }
            }
            for ky in 0..kernel.kh {
                let iy = y + ky;
                if iy < pad_y || iy - pad_y >= h {
                    continue;
                }
                let iy = iy - pad_y;
                let in_start = input.idx(b, iy, 0, 0);
                let gi_start = grad_in.idx(b, iy, 0, 0);
                for kx in 0..kernel.kw {
                    let x_lo = pad_x.saturating_sub(kx);
                    let x_hi = (w + pad_x - kx).min(w);
                    let ix0 = x_lo + kx - pad_x;
                    let wbase = (ky * kernel.kw + kx) * CI * CO;
                    for ci in 0..CI {
                        for o in 0..CO {
                            transposed[o][ci] = kernel.weights[wbase + ci * CO + o];
                        }
                    }

                    // input gradients
                    let g_cells = g_row[x_lo * CO..x_hi * CO].chunks_exact(CO);
                    let gi_cells = grad_in.data
                        [gi_start + ix0 * CI..gi_start + (ix0 + x_hi - x_lo) * CI]
                        .chunks_exact_mut(CI);
                    for (g, gi) in g_cells.zip(gi_cells) {
                        let mut local = [0.0f64; CI];
                        for o in 0..CO {
                            let gv = g[o];
                            for ci in 0..CI {
                                local[ci] += transposed[o][ci] * gv;
                            }
                        }
                        for ci in 0..CI {
                            gi[ci] += local[ci];
                        }
                    }

                    // weight gradients, one register accumulator per input channel
                    let in_cells =
                        &input.data[in_start + ix0 * CI..in_start + (ix0 + x_hi - x_lo) * CI];
                    for ci in 0..CI {
                        let mut acc = [0.0f64; CO];
                        for (g, px) in
                            g_row[x_lo * CO..x_hi * CO].chunks_exact(CO).zip(in_cells.chunks_exact(CI))
                        {
                            let v = px[ci];
                            for o in 0..CO {
                                acc[o] += v * g[o];
                            }
                        }
                        for o in 0..CO {
                            grad_w[wbase + ci * CO + o] += acc[o];
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w, grad_b.to_vec())
}

/// Fallback for unusual channel pairs (identical math, dynamic widths).
fn conv2d_backward_dyn(
    input: &FeatureMap,
    kernel: &ConvKernel,
    grad_out: &FeatureMap,
) -> (FeatureMap, Vec<f64>, Vec<f64>) {
    let (n, h, w) = (input.n, input.h, input.w);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    let c_in = kernel.c_in;
    let c_out = kernel.c_out;

    let mut grad_in = FeatureMap::zeros(n, h, w, c_in);
    let mut grad_w = vec![0.0f64; kernel.weights.len()];
    let mut grad_b = vec![0.0f64; c_out];

    for b in 0..n {
        for y in 0..h {
            let g_start = grad_out.idx(b, y, 0, 0);
            let g_row = &grad_out.data[g_start..g_start + w * c_out];
            for g in g_row.chunks_exact(c_out) {
                for (gb, &gv) in grad_b.iter_mut().zip(g) {
                    *gb += gv;
                }
            }
            for ky in 0..kernel.kh {
                let iy = y + ky;
                if iy < pad_y || iy - pad_y >= h {
                    continue;
                }
                let iy = iy - pad_y;
                let in_start = input.idx(b, iy, 0, 0);
                let gi_start = grad_in.idx(b, iy, 0, 0);
                for kx in 0..kernel.kw {
                    let x_lo = pad_x.saturating_sub(kx);
                    let x_hi = (w + pad_x - kx).min(w);
                    let ix0 = x_lo + kx - pad_x;
                    let wbase = (ky * kernel.kw + kx) * c_in * c_out;
                    let wblock = &kernel.weights[wbase..wbase + c_in * c_out];
                    let gwblock = &mut grad_w[wbase..wbase + c_in * c_out];
                    let g_cells = g_row[x_lo * c_out..x_hi * c_out].chunks_exact(c_out);
                    let in_cells = input.data
                        [in_start + ix0 * c_in..in_start + (ix0 + x_hi - x_lo) * c_in]
                        .chunks_exact(c_in);
                    let gi_cells = grad_in.data
                        [gi_start + ix0 * c_in..gi_start + (ix0 + x_hi - x_lo) * c_in]
                        .chunks_exact_mut(c_in);
                    for ((g, px), gi) in g_cells.zip(in_cells).zip(gi_cells) {
                        for (ci, &v) in px.iter().enumerate() {
                            let wr = &wblock[ci * c_out..(ci + 1) * c_out];
                            let gw = &mut gwblock[ci * c_out..(ci + 1) * c_out];
                            let mut dot = 0.0f64;
                            for ((&wv, gwv), &gv) in wr.iter().zip(gw.iter_mut()).zip(g) {
                                dot += wv * gv;
                                *gwv += v * gv;
                            }
                            gi[ci] += dot;
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w, grad_b)
}

/// Same-padded depthwise convolution: one spatial filter per channel,
/// producing `c` feature maps (no bias).
pub fn depthwise_conv2d(input: &FeatureMap, kernel: &DepthwiseKernel) -> Result<FeatureMap, NnError> {
    if input.c != kernel.c {
        return Err(NnError::Shape(format!(
            "depthwise: input has {} channels, kernel expects {}",
            input.c, kernel.c
        )));
    }
    if kernel.kh == 3 && kernel.kw == 3 {
        match kernel.c {
            3 => return Ok(depthwise_mono33::<3>(input, kernel)),
            8 => return Ok(depthwise_mono33::<8>(input, kernel)),
            16 => return Ok(depthwise_mono33::<16>(input, kernel)),
            _ => {}
        }
    }
    Ok(depthwise_dyn(input, kernel))
}

/// 3x3 depthwise with a register accumulator per pixel; interior pixels
/// take the unguarded path. Tap order matches the generic loop.
fn depthwise_mono33<const C: usize>(input: &FeatureMap, kernel: &DepthwiseKernel) -> FeatureMap {
    let (n, h, w) = (input.n, input.h, input.w);
    let mut taps = [[0.0f64; C]; 9];
    for (t, tap) in taps.iter_mut().enumerate() {
        for ch in 0..C {
            tap[ch] = kernel.weights[kernel.widx(t / 3, t % 3, ch)];
        }
    }

    let mut out_data: Vec<f64> = super::tensor::pooled_vec(n * h * w * C);
    let cell = |b: usize, y: usize, x: usize, out: &mut Vec<f64>| {
        let mut acc = [0.0f64; C];
        for ky in 0..3usize {
            let iy = (y + ky).wrapping_sub(1);
            if iy >= h {
                continue;
            }
            for kx in 0..3usize {
                let ix = (x + kx).wrapping_sub(1);
                if ix >= w {
                    continue;
                }
                let px = input.pixel(b, iy, ix);
                let wr = &taps[ky * 3 + kx];
                for ch in 0..C {
                    acc[ch] += px[ch] * wr[ch];
                }
            }
        }
        out.extend_from_slice(&acc);
    };

    for b in 0..n {
        for y in 0..h {
            if y == 0 || y + 1 >= h || w < 3 {
                for x in 0..w {
                    cell(b, y, x, &mut out_data);
                }
                continue;
            }
            let rows = [
                &input.data[input.idx(b, y - 1, 0, 0)..input.idx(b, y - 1, 0, 0) + w * C],
                &input.data[input.idx(b, y, 0, 0)..input.idx(b, y, 0, 0) + w * C],
                &input.data[input.idx(b, y + 1, 0, 0)..input.idx(b, y + 1, 0, 0) + w * C],
            ];
            cell(b, y, 0, &mut out_data);
            for x in 1..w - 1 {
                let base = (x - 1) * C;
                let mut acc = [0.0f64; C];
                for (t, row) in rows.iter().enumerate() {
                    let px3 = &row[base..base + 3 * C];
                    for k in 0..3 {
                        let wr = &taps[t * 3 + k];
                        for ch in 0..C {
                            acc[ch] += px3[k * C + ch] * wr[ch];
                        }
                    }
                }
                out_data.extend_from_slice(&acc);
            }
            cell(b, y, w - 1, &mut out_data);
        }
    }
    FeatureMap::from_vec(out_data, n, h, w, C)
}

fn depthwise_dyn(input: &FeatureMap, kernel: &DepthwiseKernel) -> FeatureMap {
    let (n, h, w, c) = (input.n, input.h, input.w, input.c);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    let mut out = FeatureMap::zeros(n, h, w, c);
    let stored = kernel.stored_channels();

    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let base = out.idx(b, y, x, 0);
                for ky in 0..kernel.kh {
                    let iy = y + ky;
                    if iy < pad_y || iy - pad_y >= h {
                        continue;
                    }
                    let iy = iy - pad_y;
                    for kx in 0..kernel.kw {
                        let ix = x + kx;
                        if ix < pad_x || ix - pad_x >= w {
                            continue;
                        }
                        let ix = ix - pad_x;
                        let px = input.pixel(b, iy, ix);
                        let wtap = (ky * kernel.kw + kx) * stored;
                        if kernel.shared {
                            let wv = kernel.weights[wtap];
                            for (o, &v) in out.data[base..base + c].iter_mut().zip(px) {
                                *o += v * wv;
                            }
                        } else {
                            let wrow = &kernel.weights[wtap..wtap + c];
                            for ((o, &v), &wv) in out.data[base..base + c].iter_mut().zip(px).zip(wrow)
                            {
                                *o += v * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward pass of [`depthwise_conv2d`].
pub fn depthwise_conv2d_backward(
    input: &FeatureMap,
    kernel: &DepthwiseKernel,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Vec<f64>), NnError> {
    if grad_out.shape() != input.shape() {
        return Err(NnError::Shape("depthwise_backward: grad shape mismatch".into()));
    }
    if kernel.kh == 3 && kernel.kw == 3 {
        match kernel.c {
            3 => return Ok(depthwise_backward_mono33::<3>(input, kernel, grad_out)),
            8 => return Ok(depthwise_backward_mono33::<8>(input, kernel, grad_out)),
            16 => return Ok(depthwise_backward_mono33::<16>(input, kernel, grad_out)),
            _ => {}
        }
    }
    Ok(depthwise_backward_dyn(input, kernel, grad_out))
}

/// Lane-wise 3x3 depthwise backward; per tap, weight gradients accumulate
/// in registers and flush once per row.
fn depthwise_backward_mono33<const C: usize>(
    input: &FeatureMap,
    kernel: &DepthwiseKernel,
    grad_out: &FeatureMap,
) -> (FeatureMap, Vec<f64>) {
    let (n, h, w) = (input.n, input.h, input.w);
    let mut taps = [[0.0f64; C]; 9];
    for (t, tap) in taps.iter_mut().enumerate() {
        for ch in 0..C {
            tap[ch] = kernel.weights[kernel.widx(t / 3, t % 3, ch)];
        }
    }

    let mut grad_in = FeatureMap::zeros(n, h, w, C);
    let mut grad_w = vec![0.0f64; kernel.weights.len()];
    for b in 0..n {
        for y in 0..h {
            let g_start = grad_out.idx(b, y, 0, 0);
            let g_row = &grad_out.data[g_start..g_start + w * C];
            for ky in 0..3usize {
                let iy = (y + ky).wrapping_sub(1);
                if iy >= h {
                    continue;
                }
                let in_start = input.idx(b, iy, 0, 0);
                let gi_start = grad_in.idx(b, iy, 0, 0);
                for kx in 0..3usize {
                    let x_lo = 1usize.saturating_sub(kx);
                    let x_hi = (w + 1 - kx).min(w);
                    let ix0 = x_lo + kx - 1;
                    let t = ky * 3 + kx;
                    let wr = &taps[t];
                    let mut gw_acc = [0.0f64; C];
                    let g_cells = g_row[x_lo * C..x_hi * C].chunks_exact(C);
                    let in_cells = input.data
                        [in_start + ix0 * C..in_start + (ix0 + x_hi - x_lo) * C]
                        .chunks_exact(C);
                    let gi_cells = grad_in.data
                        [gi_start + ix0 * C..gi_start + (ix0 + x_hi - x_lo) * C]
                        .chunks_exact_mut(C);
                    for ((g, px), gi) in g_cells.zip(in_cells).zip(gi_cells) {
                        for ch in 0..C {
                            gi[ch] += wr[ch] * g[ch];
                            gw_acc[ch] += px[ch] * g[ch];
                        }
                    }
                    if kernel.shared {
                        grad_w[t] += gw_acc.iter().sum::<f64>();
                    } else {
                        for ch in 0..C {
                            grad_w[t * C + ch] += gw_acc[ch];
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w)
}

fn depthwise_backward_dyn(
    input: &FeatureMap,
    kernel: &DepthwiseKernel,
    grad_out: &FeatureMap,
) -> (FeatureMap, Vec<f64>) {
    let (n, h, w, c) = (input.n, input.h, input.w, input.c);
    let (pad_y, pad_x) = (kernel.kh / 2, kernel.kw / 2);
    let stored = kernel.stored_channels();
    let mut grad_in = FeatureMap::zeros(n, h, w, c);
    let mut grad_w = vec![0.0f64; kernel.weights.len()];

    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let g_base = grad_out.idx(b, y, x, 0);
                for ky in 0..kernel.kh {
                    let iy = y + ky;
                    if iy < pad_y || iy - pad_y >= h {
                        continue;
                    }
                    let iy = iy - pad_y;
                    for kx in 0..kernel.kw {
                        let ix = x + kx;
                        if ix < pad_x || ix - pad_x >= w {
                            continue;
                        }
                        let ix = ix - pad_x;
                        let wtap = (ky * kernel.kw + kx) * stored;
                        let px = input.pixel(b, iy, ix);
                        let gi = grad_in.pixel_mut(b, iy, ix);
                        let g = &grad_out.data[g_base..g_base + c];
                        if kernel.shared {
                            let wv = kernel.weights[wtap];
                            let mut acc = 0.0f64;
                            for ((gi_c, &v), &gv) in gi.iter_mut().zip(px).zip(g) {
                                *gi_c += wv * gv;
                                acc += v * gv;
                            }
                            grad_w[wtap] += acc;
                        } else {
                            let wrow = &kernel.weights[wtap..wtap + c];
                            let gwrow = &mut grad_w[wtap..wtap + c];
                            for (((gi_c, &v), (&wv, gw)), &gv) in
                                gi.iter_mut().zip(px).zip(wrow.iter().zip(gwrow.iter_mut())).zip(g)
                            {
                                *gi_c += wv * gv;
                                *gw += v * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    (grad_in, grad_w)
}

/// 1x1 pointwise channel mixing with bias.
///
/// Delegates to [`conv2d`] with a 1x1 kernel; layout and summation order
/// are identical, so results match the dedicated formula bit for bit.
pub fn pointwise_conv2d(input: &FeatureMap, kernel: &PointwiseKernel) -> Result<FeatureMap, NnError> {
    if input.c != kernel.c_in {
        return Err(NnError::Shape(format!(
            "pointwise: input has {} channels, kernel expects {}",
            input.c, kernel.c_in
        )));
    }
    conv2d(input, &kernel.as_conv())
}

/// Backward pass of [`pointwise_conv2d`].
pub fn pointwise_conv2d_backward(
    input: &FeatureMap,
    kernel: &PointwiseKernel,
    grad_out: &FeatureMap,
) -> Result<(FeatureMap, Vec<f64>, Vec<f64>), NnError> {
    if grad_out.shape() != (input.n, input.h, input.w, kernel.c_out) {
        return Err(NnError::Shape("pointwise_backward: grad shape mismatch".into()));
    }
    conv2d_backward(input, &kernel.as_conv(), grad_out)
}

/// Depthwise separable convolution: the pointwise stage applied to the
/// depthwise stage. This is the composition itself, not a fused variant.
pub fn sepconv2d(
    input: &FeatureMap,
    dw: &DepthwiseKernel,
    pw: &PointwiseKernel,
) -> Result<FeatureMap, NnError> {
    if dw.c != pw.c_in {
        return Err(NnError::Shape(format!(
            "sepconv2d: depthwise yields {} channels, pointwise expects {}",
            dw.c, pw.c_in
        )));
    }
    let mid = depthwise_conv2d(input, dw)?;
    pointwise_conv2d(&mid, pw)
}

/// Weight counts (bias excluded) of a standard `c -> c` convolution with a
/// `k`-element receptive field versus its depthwise separable counterpart:
/// `c*k*c` versus `c*k + c*c`.
pub fn conv_vs_separable_weights(c: usize, k: usize) -> (usize, usize) {
    (c * k * c, c * k + c * c)
}
