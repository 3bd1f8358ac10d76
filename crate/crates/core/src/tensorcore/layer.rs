//! Layer vocabulary with forward, backward and multiply-add semantics.
//!
//! Every layer is a pure function of its inputs and weights. Weight layouts:
//!
//! | kind          | weights                                         |
//! |---------------|-------------------------------------------------|
//! | `Linear`      | `[out, in]`, bias `[out]`                       |
//! | `Conv2d`      | `[out_ch, in_ch, k_h, k_w]`, bias `[out_ch]`    |
//! | `BatchNorm2d` | gamma, beta, running mean, running var (`[C]`)  |
//!
//! Only `Linear` and `Conv2d` contribute multiply-adds.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Conv2dSpec {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let ph = h + 2 * self.padding;
        let pw = w + 2 * self.padding;
        if ph < self.kernel_h || pw < self.kernel_w || self.stride == 0 {
            return None;
        }
        Some(((ph - self.kernel_h) / self.stride + 1, (pw - self.kernel_w) / self.stride + 1))
    }
}

/// A node kind in a computation graph.
///
/// `Input`, `Identity`, `Mean` and `Switch` are graph plumbing: `Mean` averages
/// its inputs elementwise (used for the output ensemble) and `Switch` forwards
/// its first input, which by convention is the original connection.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Input,
    Linear { in_features: usize, out_features: usize },
    Conv2d(Conv2dSpec),
    Relu,
    MaxPool2d { window: usize, stride: usize },
    AvgPool2d { window: usize, stride: usize },
    GlobalAvgPool2d,
    Flatten,
    Add { arity: usize },
    Concat { axis: usize, arity: usize },
    BatchNorm2d { channels: usize, eps: f32 },
    Softmax,
    Identity,
    Mean { arity: usize },
    Switch { arity: usize },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Input => "input",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2d { .. } => "max_pool2d",
            LayerSpec::AvgPool2d { .. } => "avg_pool2d",
            LayerSpec::GlobalAvgPool2d => "global_avg_pool2d",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Add { .. } => "add",
            LayerSpec::Concat { .. } => "concat",
            LayerSpec::BatchNorm2d { .. } => "batch_norm2d",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Identity => "identity",
            LayerSpec::Mean { .. } => "mean",
            LayerSpec::Switch { .. } => "switch",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            LayerSpec::Input => 0,
            LayerSpec::Add { arity }
            | LayerSpec::Concat { arity, .. }
            | LayerSpec::Mean { arity }
            | LayerSpec::Switch { arity } => *arity,
            _ => 1,
        }
    }

    /// Expected weight tensor shapes, in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match self {
            LayerSpec::Linear { in_features, out_features } => {
                vec![vec![*out_features, *in_features], vec![*out_features]]
            }
            LayerSpec::Conv2d(c) => vec![
                vec![c.out_channels, c.in_channels, c.kernel_h, c.kernel_w],
                vec![c.out_channels],
            ],
            LayerSpec::BatchNorm2d { channels, .. } => vec![vec![*channels]; 4],
            _ => Vec::new(),
        }
    }

    /// Number of leading weight tensors that receive gradient updates.
    pub fn trainable_params(&self) -> usize {
        match self {
            LayerSpec::Linear { .. } | LayerSpec::Conv2d(_) | LayerSpec::BatchNorm2d { .. } => 2,
            _ => 0,
        }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::shape(format!("{self:?}"), detail)
    }

    /// Checks internal consistency of hyperparameters.
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LayerSpec::Linear { in_features, out_features } => *in_features > 0 && *out_features > 0,
            LayerSpec::Conv2d(c) => {
                c.in_channels > 0 && c.out_channels > 0 && c.kernel_h > 0 && c.kernel_w > 0 && c.stride > 0
            }
            LayerSpec::MaxPool2d { window, stride } | LayerSpec::AvgPool2d { window, stride } => {
                *window > 0 && *stride > 0
            }
            LayerSpec::Add { arity } | LayerSpec::Mean { arity } => *arity >= 2,
            LayerSpec::Concat { axis, arity } => *arity >= 2 && *axis >= 1,
            LayerSpec::Switch { arity } => *arity >= 1,
            LayerSpec::BatchNorm2d { channels, eps } => *channels > 0 && *eps >= 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(self.err("inconsistent hyperparameters"))
        }
    }

    pub fn check_weights(&self, weights: &[Tensor]) -> Result<()> {
        let expected = self.param_shapes();
        if expected.len() != weights.len() {
            return Err(self.err(format!(
                "expected {} weight tensors, got {}",
                expected.len(),
                weights.len()
            )));
        }
        for (i, (e, w)) in expected.iter().zip(weights).enumerate() {
            if e.as_slice() != w.shape() {
                return Err(self.err(format!("weight {i} has shape {:?}, expected {e:?}", w.shape())));
            }
        }
        Ok(())
    }

    /// Output shape (batch dimension included) for the given input shapes.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        if inputs.len() != self.arity() {
            return Err(self.err(format!("expected {} inputs, got {}", self.arity(), inputs.len())));
        }
        let four = |s: &[usize]| -> Result<(usize, usize, usize, usize)> {
            if s.len() != 4 {
                return Err(self.err(format!("expected a 4-d input, got {s:?}")));
            }
            Ok((s[0], s[1], s[2], s[3]))
        };
        match self {
            LayerSpec::Input => Err(self.err("input nodes have no computed shape")),
            LayerSpec::Linear { in_features, out_features } => {
                let s = inputs[0];
                if s.len() != 2 || s[1] != *in_features {
                    return Err(self.err(format!("expected [B, {in_features}], got {s:?}")));
                }
                Ok(vec![s[0], *out_features])
            }
            LayerSpec::Conv2d(c) => {
                let (b, ch, h, w) = four(inputs[0])?;
                if ch != c.in_channels {
                    return Err(self.err(format!("expected {} channels, got {ch}", c.in_channels)));
                }
                let (oh, ow) = c
                    .out_hw(h, w)
                    .ok_or_else(|| self.err(format!("kernel larger than padded input {h}x{w}")))?;
                Ok(vec![b, c.out_channels, oh, ow])
            }
            LayerSpec::MaxPool2d { window, stride } | LayerSpec::AvgPool2d { window, stride } => {
                let (b, ch, h, w) = four(inputs[0])?;
                if h < *window || w < *window {
                    return Err(self.err(format!("window {window} larger than input {h}x{w}")));
                }
                Ok(vec![b, ch, (h - window) / stride + 1, (w - window) / stride + 1])
            }
            LayerSpec::GlobalAvgPool2d => {
                let (b, ch, _, _) = four(inputs[0])?;
                Ok(vec![b, ch])
            }
            LayerSpec::Flatten => {
                let s = inputs[0];
                if s.len() < 2 {
                    return Err(self.err(format!("cannot flatten {s:?}")));
                }
                Ok(vec![s[0], s[1..].iter().product()])
            }
            LayerSpec::BatchNorm2d { channels, .. } => {
                let (_, ch, _, _) = four(inputs[0])?;
                if ch != *channels {
                    return Err(self.err(format!("expected {channels} channels, got {ch}")));
                }
                Ok(inputs[0].to_vec())
            }
            LayerSpec::Softmax => {
                if inputs[0].len() != 2 {
                    return Err(self.err(format!("softmax expects [B, K], got {:?}", inputs[0])));
                }
                Ok(inputs[0].to_vec())
            }
            LayerSpec::Relu | LayerSpec::Identity => Ok(inputs[0].to_vec()),
            LayerSpec::Add { .. } | LayerSpec::Mean { .. } | LayerSpec::Switch { .. } => {
                let first = inputs[0];
                for s in &inputs[1..] {
                    if *s != first {
                        return Err(self.err(format!("input shapes differ: {first:?} vs {s:?}")));
                    }
                }
                Ok(first.to_vec())
            }
            LayerSpec::Concat { axis, .. } => {
                let first = inputs[0];
                if *axis >= first.len() {
                    return Err(self.err(format!("axis {axis} out of range for {first:?}")));
                }
                let mut out = first.to_vec();
                for s in &inputs[1..] {
                    let same_rank = s.len() == first.len();
                    let others_match = same_rank
                        && s.iter().zip(first.iter()).enumerate().all(|(d, (a, b))| d == *axis || a == b);
                    if !others_match {
                        return Err(self.err(format!("cannot concat {first:?} with {s:?} on axis {axis}")));
                    }
                    out[*axis] += s[*axis];
                }
                Ok(out)
            }
        }
    }

    /// Multiply-adds for one forward pass with the given input shapes.
    pub fn madds(&self, inputs: &[&[usize]]) -> Result<u64> {
        let out = self.output_shape(inputs)?;
        Ok(match self {
            LayerSpec::Linear { in_features, out_features } => (out[0] * in_features * out_features) as u64,
            LayerSpec::Conv2d(c) => {
                (out[0] * c.kernel_h * c.kernel_w * c.in_channels * c.out_channels * out[2] * out[3]) as u64
            }
            _ => 0,
        })
    }

    /// Initial weights: He-normal for linear/conv with zero bias, identity batch norm.
    pub fn init_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Tensor> {
        let he = |fan_in: usize, shape: &[usize], rng: &mut R| {
            let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).unwrap();
            Tensor::from_fn(shape, |_| normal.sample(rng))
        };
        match self {
            LayerSpec::Linear { in_features, out_features } => vec![
                he(*in_features, &[*out_features, *in_features], rng),
                Tensor::zeros(&[*out_features]),
            ],
            LayerSpec::Conv2d(c) => vec![
                he(
                    c.in_channels * c.kernel_h * c.kernel_w,
                    &[c.out_channels, c.in_channels, c.kernel_h, c.kernel_w],
                    rng,
                ),
                Tensor::zeros(&[c.out_channels]),
            ],
            LayerSpec::BatchNorm2d { channels, .. } => vec![
                Tensor::full(&[*channels], 1.0),
                Tensor::zeros(&[*channels]),
                Tensor::zeros(&[*channels]),
                Tensor::full(&[*channels], 1.0),
            ],
            _ => Vec::new(),
        }
    }

    pub fn forward(&self, weights: &[Tensor], inputs: &[&Tensor]) -> Result<Tensor> {
        let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
        let out_shape = self.output_shape(&shapes)?;
        self.check_weights(weights)?;
        let x = inputs[0];
        let out = match self {
            LayerSpec::Input => unreachable!("rejected by output_shape"),
            LayerSpec::Linear { in_features, out_features } => {
                linear_forward(x.data(), weights[0].data(), weights[1].data(), *in_features, *out_features)
            }
            LayerSpec::Conv2d(c) => conv_forward(c, x, weights, &out_shape),
            LayerSpec::Relu => x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            LayerSpec::MaxPool2d { window, stride } => pool_forward(x, *window, *stride, &out_shape, true),
            LayerSpec::AvgPool2d { window, stride } => pool_forward(x, *window, *stride, &out_shape, false),
            LayerSpec::GlobalAvgPool2d => {
                let plane = x.shape()[2] * x.shape()[3];
                let inv = 1.0 / plane as f32;
                x.data().chunks(plane).map(|p| p.iter().sum::<f32>() * inv).collect()
            }
            LayerSpec::Flatten | LayerSpec::Identity => x.data().to_vec(),
            LayerSpec::Switch { .. } => x.data().to_vec(),
            LayerSpec::Add { .. } => {
                let mut acc = x.data().to_vec();
                for t in &inputs[1..] {
                    acc.iter_mut().zip(t.data()).for_each(|(a, b)| *a += b);
                }
                acc
            }
            LayerSpec::Mean { arity } => {
                let mut acc = x.data().to_vec();
                for t in &inputs[1..] {
                    acc.iter_mut().zip(t.data()).for_each(|(a, b)| *a += b);
                }
                let inv = 1.0 / *arity as f32;
                acc.iter_mut().for_each(|a| *a *= inv);
                acc
            }
            LayerSpec::Concat { axis, .. } => concat_forward(inputs, *axis, &out_shape),
            LayerSpec::BatchNorm2d { eps, .. } => {
                let (scale, shift) = bn_affine(weights, *eps);
                let plane = x.shape()[2] * x.shape()[3];
                let ch = x.shape()[1];
                let mut out = x.data().to_vec();
                for (i, p) in out.chunks_mut(plane).enumerate() {
                    let c = i % ch;
                    p.iter_mut().for_each(|v| *v = *v * scale[c] + shift[c]);
                }
                out
            }
            LayerSpec::Softmax => {
                let k = x.shape()[1];
                let mut out = x.data().to_vec();
                for row in out.chunks_mut(k) {
                    softmax_in_place(row);
                }
                out
            }
        };
        Tensor::new(out_shape, out)
    }

    /// Gradients with respect to every input and every weight tensor.
    pub fn backward(
        &self,
        weights: &[Tensor],
        inputs: &[&Tensor],
        upstream: &Tensor,
    ) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
        let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
        let out_shape = self.output_shape(&shapes)?;
        self.check_weights(weights)?;
        if upstream.shape() != out_shape.as_slice() {
            return Err(self.err(format!(
                "upstream gradient {:?} does not match output {out_shape:?}",
                upstream.shape()
            )));
        }
        let x = inputs[0];
        let g = upstream.data();
        let same = |data: Vec<f32>| Tensor::new(x.shape().to_vec(), data);
        match self {
            LayerSpec::Input => unreachable!("rejected by output_shape"),
            LayerSpec::Linear { in_features, out_features } => {
                let (n, m) = (*in_features, *out_features);
                let w = weights[0].data();
                let batch = x.batch();
                let mut dx = vec![0.0f32; batch * n];
                let mut dw = vec![0.0f32; m * n];
                let mut db = vec![0.0f32; m];
                for b in 0..batch {
                    let xr = &x.data()[b * n..(b + 1) * n];
                    let dxr = &mut dx[b * n..(b + 1) * n];
                    for o in 0..m {
                        let go = g[b * m + o];
                        db[o] += go;
                        let wr = &w[o * n..(o + 1) * n];
                        let dwr = &mut dw[o * n..(o + 1) * n];
                        for i in 0..n {
                            dxr[i] += go * wr[i];
                            dwr[i] += go * xr[i];
                        }
                    }
                }
                Ok((
                    vec![same(dx)?],
                    vec![Tensor::new(vec![m, n], dw)?, Tensor::new(vec![m], db)?],
                ))
            }
            LayerSpec::Conv2d(c) => {
                let (dx, dw, db) = conv_backward(c, x, weights, upstream);
                Ok((
                    vec![same(dx)?],
                    vec![
                        Tensor::new(weights[0].shape().to_vec(), dw)?,
                        Tensor::new(vec![c.out_channels], db)?,
                    ],
                ))
            }
            LayerSpec::Relu => {
                let dx = x.data().iter().zip(g).map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 }).collect();
                Ok((vec![same(dx)?], vec![]))
            }
            LayerSpec::MaxPool2d { window, stride } => {
                Ok((vec![same(pool_backward(x, *window, *stride, &out_shape, g, true))?], vec![]))
            }
            LayerSpec::AvgPool2d { window, stride } => {
                Ok((vec![same(pool_backward(x, *window, *stride, &out_shape, g, false))?], vec![]))
            }
            LayerSpec::GlobalAvgPool2d => {
                let plane = x.shape()[2] * x.shape()[3];
                let inv = 1.0 / plane as f32;
                let dx = g.iter().flat_map(|&gi| std::iter::repeat(gi * inv).take(plane)).collect();
                Ok((vec![same(dx)?], vec![]))
            }
            LayerSpec::Flatten | LayerSpec::Identity => Ok((vec![same(g.to_vec())?], vec![])),
            LayerSpec::Switch { arity } => {
                let mut grads = vec![same(g.to_vec())?];
                grads.extend((1..*arity).map(|i| Tensor::zeros(inputs[i].shape())));
                Ok((grads, vec![]))
            }
            LayerSpec::Add { arity } => {
                let grads = (0..*arity).map(|_| same(g.to_vec())).collect::<Result<_>>()?;
                Ok((grads, vec![]))
            }
            LayerSpec::Mean { arity } => {
                let inv = 1.0 / *arity as f32;
                let scaled: Vec<f32> = g.iter().map(|v| v * inv).collect();
                let grads = (0..*arity).map(|_| same(scaled.clone())).collect::<Result<_>>()?;
                Ok((grads, vec![]))
            }
            LayerSpec::Concat { axis, .. } => Ok((concat_backward(inputs, *axis, upstream)?, vec![])),
            LayerSpec::BatchNorm2d { channels, eps } => {
                let (scale, _) = bn_affine(weights, *eps);
                let mean = weights[2].data();
                let var = weights[3].data();
                let plane = x.shape()[2] * x.shape()[3];
                let mut dx = vec![0.0f32; x.len()];
                let mut dgamma = vec![0.0f32; *channels];
                let mut dbeta = vec![0.0f32; *channels];
                for (i, ((gp, xp), dxp)) in g
                    .chunks(plane)
                    .zip(x.data().chunks(plane))
                    .zip(dx.chunks_mut(plane))
                    .enumerate()
                {
                    let c = i % channels;
                    let inv_std = 1.0 / (var[c] + eps).sqrt();
                    for j in 0..plane {
                        dxp[j] = gp[j] * scale[c];
                        dgamma[c] += gp[j] * (xp[j] - mean[c]) * inv_std;
                        dbeta[c] += gp[j];
                    }
                }
                Ok((
                    vec![same(dx)?],
                    vec![
                        Tensor::new(vec![*channels], dgamma)?,
                        Tensor::new(vec![*channels], dbeta)?,
                        Tensor::zeros(&[*channels]),
                        Tensor::zeros(&[*channels]),
                    ],
                ))
            }
            LayerSpec::Softmax => {
                let y = self.forward(weights, inputs)?;
                let k = x.shape()[1];
                let mut dx = vec![0.0f32; x.len()];
                for ((yr, gr), dr) in y.data().chunks(k).zip(g.chunks(k)).zip(dx.chunks_mut(k)) {
                    let dot: f32 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..k {
                        dr[j] = yr[j] * (gr[j] - dot);
                    }
                }
                Ok((vec![same(dx)?], vec![]))
            }
        }
    }
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    row.iter_mut().for_each(|v| *v *= inv);
}

fn bn_affine(weights: &[Tensor], eps: f32) -> (Vec<f32>, Vec<f32>) {
    let gamma = weights[0].data();
    let beta = weights[1].data();
    let mean = weights[2].data();
    let var = weights[3].data();
    let scale: Vec<f32> = gamma.iter().zip(var).map(|(g, v)| g / (v + eps).sqrt()).collect();
    let shift = beta.iter().zip(mean).zip(&scale).map(|((b, m), s)| b - m * s).collect();
    (scale, shift)
}

fn linear_forward(x: &[f32], w: &[f32], bias: &[f32], n: usize, m: usize) -> Vec<f32> {
    let batch = x.len() / n;
    let mut out = Vec::with_capacity(batch * m);
    for xr in x.chunks(n) {
        for o in 0..m {
            let wr = &w[o * n..(o + 1) * n];
            let dot: f32 = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            out.push(dot + bias[o]);
        }
    }
    out
}

/// Range of output columns whose input column `ox*stride + k - pad` lies in `[0, w)`.
#[inline]
fn valid_range(out_len: usize, in_len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let k = k as isize;
    let (s, p) = (stride as isize, pad as isize);
    // smallest o with o*s + k - p >= 0
    let lo = if p - k > 0 { (p - k + s - 1) / s } else { 0 };
    // largest o with o*s + k - p <= in_len - 1
    let top = in_len as isize - 1 + p - k;
    if top < 0 {
        return (0, 0);
    }
    let hi = (top / s + 1).min(out_len as isize);
    if lo >= hi {
        (0, 0)
    } else {
        (lo as usize, hi as usize)
    }
}

fn conv_forward(c: &Conv2dSpec, x: &Tensor, weights: &[Tensor], out_shape: &[usize]) -> Vec<f32> {
    let (batch, ih, iw) = (x.shape()[0], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let (kh, kw, s, p) = (c.kernel_h, c.kernel_w, c.stride, c.padding);
    let w = weights[0].data();
    let bias = weights[1].data();
    let xd = x.data();
    let mut out = vec![0.0f32; batch * c.out_channels * oh * ow];
    for b in 0..batch {
        for oc in 0..c.out_channels {
            let plane = &mut out[(b * c.out_channels + oc) * oh * ow..][..oh * ow];
            plane.iter_mut().for_each(|v| *v = bias[oc]);
            for ic in 0..c.in_channels {
                let xin = &xd[(b * c.in_channels + ic) * ih * iw..][..ih * iw];
                for ky in 0..kh {
                    let (y0, y1) = valid_range(oh, ih, ky, s, p);
                    for kx in 0..kw {
                        let wv = w[((oc * c.in_channels + ic) * kh + ky) * kw + kx];
                        let (x0, x1) = valid_range(ow, iw, kx, s, p);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = oy * s + ky - p;
                            let row = &xin[iy * iw..(iy + 1) * iw];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            if s == 1 {
                                let ix0 = x0 + kx - p;
                                let src = &row[ix0..ix0 + (x1 - x0)];
                                for (o, &v) in orow[x0..x1].iter_mut().zip(src) {
                                    *o += wv * v;
                                }
                            } else {
                                for ox in x0..x1 {
                                    orow[ox] += wv * row[ox * s + kx - p];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(c: &Conv2dSpec, x: &Tensor, weights: &[Tensor], upstream: &Tensor) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let (batch, ih, iw) = (x.shape()[0], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (upstream.shape()[2], upstream.shape()[3]);
    let (kh, kw, s, p) = (c.kernel_h, c.kernel_w, c.stride, c.padding);
    let w = weights[0].data();
    let xd = x.data();
    let g = upstream.data();
    let mut dx = vec![0.0f32; xd.len()];
    let mut dw = vec![0.0f32; w.len()];
    let mut db = vec![0.0f32; c.out_channels];
    for b in 0..batch {
        for oc in 0..c.out_channels {
            let gp = &g[(b * c.out_channels + oc) * oh * ow..][..oh * ow];
            db[oc] += gp.iter().sum::<f32>();
            for ic in 0..c.in_channels {
                let base = (b * c.in_channels + ic) * ih * iw;
                for ky in 0..kh {
                    let (y0, y1) = valid_range(oh, ih, ky, s, p);
                    for kx in 0..kw {
                        let widx = ((oc * c.in_channels + ic) * kh + ky) * kw + kx;
                        let wv = w[widx];
                        let (x0, x1) = valid_range(ow, iw, kx, s, p);
                        let mut acc = 0.0f32;
                        for oy in y0..y1 {
                            let iy = oy * s + ky - p;
                            for ox in x0..x1 {
                                let ix = ox * s + kx - p;
                                let gv = gp[oy * ow + ox];
                                acc += gv * xd[base + iy * iw + ix];
                                dx[base + iy * iw + ix] += gv * wv;
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

fn pool_forward(x: &Tensor, window: usize, stride: usize, out_shape: &[usize], max: bool) -> Vec<f32> {
    let (ih, iw) = (x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let inv = 1.0 / (window * window) as f32;
    let mut out = Vec::with_capacity(out_shape.iter().product());
    for plane in x.data().chunks(ih * iw) {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = if max { f32::NEG_INFINITY } else { 0.0 };
                for dy in 0..window {
                    let row = &plane[(oy * stride + dy) * iw..];
                    for dx in 0..window {
                        let v = row[ox * stride + dx];
                        if max {
                            if v > acc {
                                acc = v;
                            }
                        } else {
                            acc += v;
                        }
                    }
                }
                out.push(if max { acc } else { acc * inv });
            }
        }
    }
    out
}

fn pool_backward(x: &Tensor, window: usize, stride: usize, out_shape: &[usize], g: &[f32], max: bool) -> Vec<f32> {
    let (ih, iw) = (x.shape()[2], x.shape()[3]);
    let (oh, ow) = (out_shape[2], out_shape[3]);
    let inv = 1.0 / (window * window) as f32;
    let mut dx = vec![0.0f32; x.len()];
    for (pi, plane) in x.data().chunks(ih * iw).enumerate() {
        let dplane = &mut dx[pi * ih * iw..(pi + 1) * ih * iw];
        let gplane = &g[pi * oh * ow..(pi + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = gplane[oy * ow + ox];
                if max {
                    let mut best = (f32::NEG_INFINITY, 0usize);
                    for dy in 0..window {
                        for dxo in 0..window {
                            let idx = (oy * stride + dy) * iw + ox * stride + dxo;
                            if plane[idx] > best.0 {
                                best = (plane[idx], idx);
                            }
                        }
                    }
                    dplane[best.1] += gv;
                } else {
                    for dy in 0..window {
                        for dxo in 0..window {
                            dplane[(oy * stride + dy) * iw + ox * stride + dxo] += gv * inv;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Splits a shape into (outer, axis, inner) extents around `axis`.
fn around(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

fn concat_forward(inputs: &[&Tensor], axis: usize, out_shape: &[usize]) -> Vec<f32> {
    let (outer, _, inner) = around(out_shape, axis);
    let mut out = Vec::with_capacity(out_shape.iter().product());
    for o in 0..outer {
        for t in inputs {
            let (_, a, _) = around(t.shape(), axis);
            out.extend_from_slice(&t.data()[o * a * inner..(o + 1) * a * inner]);
        }
    }
    out
}

fn concat_backward(inputs: &[&Tensor], axis: usize, upstream: &Tensor) -> Result<Vec<Tensor>> {
    let (outer, total, inner) = around(upstream.shape(), axis);
    let mut grads: Vec<Vec<f32>> = inputs.iter().map(|t| Vec::with_capacity(t.len())).collect();
    let g = upstream.data();
    for o in 0..outer {
        let mut offset = 0;
        for (t, grad) in inputs.iter().zip(grads.iter_mut()) {
            let (_, a, _) = around(t.shape(), axis);
            let start = (o * total + offset) * inner;
            grad.extend_from_slice(&g[start..start + a * inner]);
            offset += a;
        }
    }
    inputs
        .iter()
        .zip(grads)
        .map(|(t, gd)| Tensor::new(t.shape().to_vec(), gd))
        .collect()
}

/// Free-function form of [`LayerSpec::forward`].
pub fn forward_layer(spec: &LayerSpec, weights: &[Tensor], inputs: &[&Tensor]) -> Result<Tensor> {
    spec.forward(weights, inputs)
}

/// Free-function form of [`LayerSpec::backward`].
pub fn backward_layer(
    spec: &LayerSpec,
    weights: &[Tensor],
    inputs: &[&Tensor],
    upstream: &Tensor,
) -> Result<(Vec<Tensor>, Vec<Tensor>)> {
    spec.backward(weights, inputs, upstream)
}

/// Free-function form of [`LayerSpec::madds`].
pub fn madds_of_layer(spec: &LayerSpec, input_shapes: &[&[usize]]) -> Result<u64> {
    spec.madds(input_shapes)
}
