//! Layer kinds and their forward/backward math.
//!
//! Convolutions are 3x3, stride 1, zero-padded to preserve the spatial
//! extent; pooling is 3x3 windows at stride 2. All dot products and
//! reductions accumulate in f64 regardless of the element type.

use super::tensor::{Element, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How max-pooling treats edges. `Same` pads so the spatial extent maps
/// n -> ceil(n/2) (96 -> 48 -> 24); `Valid` uses only full windows,
/// n -> floor((n-3)/2) + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoolPadding {
    #[default]
    Same,
    Valid,
}

/// Kernel size shared by convolution and pooling layers.
pub const KERNEL: usize = 3;
/// Pooling stride.
pub const POOL_STRIDE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// 3x3 convolution, stride 1, same padding.
    Conv2d { in_channels: usize, out_channels: usize },
    /// 3x3 max pooling, stride 2.
    MaxPool2d { padding: PoolPadding },
    Dense { in_features: usize, out_features: usize },
    Relu,
    Softmax,
    /// Inverted dropout: keeps activations with probability `keep` and
    /// scales survivors by 1/keep, so inference needs no correction.
    Dropout { keep: f32 },
    Flatten,
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv2d { .. } => "conv2d",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::Dense { .. } => "dense",
            Layer::Relu => "relu",
            Layer::Softmax => "softmax",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
        }
    }

    /// Trainable parameter count (weights + biases).
    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Conv2d { in_channels, out_channels } => {
                KERNEL * KERNEL * in_channels * out_channels + out_channels
            }
            Layer::Dense { in_features, out_features } => {
                in_features * out_features + out_features
            }
            _ => 0,
        }
    }

    /// Output shape for a given input shape, or a reason it is invalid.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        match *self {
            Layer::Conv2d { in_channels, out_channels } => match input {
                [h, w, c] if *c == in_channels => Ok(vec![*h, *w, out_channels]),
                [_, _, c] => Err(format!("conv2d expects {in_channels} channels, got {c}")),
                other => Err(format!("conv2d expects [h, w, c] input, got {other:?}")),
            },
            Layer::MaxPool2d { padding } => match input {
                [h, w, c] => {
                    let oh = pooled_extent(*h, padding)?;
                    let ow = pooled_extent(*w, padding)?;
                    Ok(vec![oh, ow, *c])
                }
                other => Err(format!("maxpool2d expects [h, w, c] input, got {other:?}")),
            },
            Layer::Dense { in_features, out_features } => match input {
                [n] if *n == in_features => Ok(vec![out_features]),
                [n] => Err(format!("dense expects {in_features} features, got {n}")),
                other => Err(format!("dense expects flat input, got {other:?}")),
            },
            Layer::Relu | Layer::Softmax | Layer::Dropout { .. } => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

pub fn pooled_extent(n: usize, padding: PoolPadding) -> Result<usize, String> {
    match padding {
        PoolPadding::Same => Ok(n.div_ceil(POOL_STRIDE)),
        PoolPadding::Valid => {
            if n < KERNEL {
                Err(format!("valid pooling needs extent >= {KERNEL}, got {n}"))
            } else {
                Ok((n - KERNEL) / POOL_STRIDE + 1)
            }
        }
    }
}

/// Per-layer artifacts saved during a training forward pass.
#[derive(Debug, Clone)]
pub enum Aux<T> {
    None,
    /// Flat input index of each window maximum.
    Pool(Vec<u32>),
    /// Survival mask of a dropout layer.
    Mask(Vec<bool>),
    /// Softmax output probabilities.
    Probs(Vec<T>),
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

pub fn conv2d_forward<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Tensor<T> {
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let cout = bias.numel();
    let x = input.data();
    let wt = weight.data();
    let mut out = vec![T::zero(); h * w * cout];

    for y in 0..h {
        for xcol in 0..w {
            let out_base = (y * w + xcol) * cout;
            for o in 0..cout {
                let mut acc = bias.data()[o].to_acc();
                for ky in 0..KERNEL {
                    let iy = (y + ky).wrapping_sub(1);
                    if iy >= h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = (xcol + kx).wrapping_sub(1);
                        if ix >= w {
                            continue;
                        }
                        let xrow = &x[(iy * w + ix) * cin..][..cin];
                        let wrow = &wt[((o * KERNEL + ky) * KERNEL + kx) * cin..][..cin];
                        for (a, b) in xrow.iter().zip(wrow) {
                            acc += a.to_acc() * b.to_acc();
                        }
                    }
                }
                out[out_base + o] = T::from_acc(acc);
            }
        }
    }
    Tensor::from_vec(&[h, w, cout], out)
}

pub struct ConvGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}

pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    delta: &Tensor<T>,
) -> ConvGrads<T> {
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let cout = delta.shape()[2];
    let x = input.data();
    let wt = weight.data();
    let d = delta.data();

    let mut dw = vec![0.0f64; weight.numel()];
    let mut db = vec![0.0f64; cout];
    let mut dx = vec![0.0f64; x.len()];

    for y in 0..h {
        for xcol in 0..w {
            let d_base = (y * w + xcol) * cout;
            for o in 0..cout {
                let g = d[d_base + o].to_acc();
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                for ky in 0..KERNEL {
                    let iy = (y + ky).wrapping_sub(1);
                    if iy >= h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = (xcol + kx).wrapping_sub(1);
                        if ix >= w {
                            continue;
                        }
                        let in_base = (iy * w + ix) * cin;
                        let w_base = ((o * KERNEL + ky) * KERNEL + kx) * cin;
                        let xrow = &x[in_base..in_base + cin];
                        let wrow = &wt[w_base..w_base + cin];
                        let dwrow = &mut dw[w_base..w_base + cin];
                        let dxrow = &mut dx[in_base..in_base + cin];
                        for i in 0..cin {
                            dwrow[i] += g * xrow[i].to_acc();
                            dxrow[i] += g * wrow[i].to_acc();
                        }
                    }
                }
            }
        }
    }

    ConvGrads {
        weight: Tensor::from_vec(weight.shape(), dw.into_iter().map(T::from_acc).collect()),
        bias: Tensor::from_vec(&[cout], db.into_iter().map(T::from_acc).collect()),
        input: Tensor::from_vec(input.shape(), dx.into_iter().map(T::from_acc).collect()),
    }
}

// ---------------------------------------------------------------------------
// max pooling
// ---------------------------------------------------------------------------

fn pool_pad_before(n: usize, out: usize) -> usize {
    let total = ((out - 1) * POOL_STRIDE + KERNEL).saturating_sub(n);
    total / 2
}

pub fn maxpool_forward<T: Element>(
    input: &Tensor<T>,
    padding: PoolPadding,
    record: bool,
) -> (Tensor<T>, Aux<T>) {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let oh = pooled_extent(h, padding).expect("shape validated at build");
    let ow = pooled_extent(w, padding).expect("shape validated at build");
    let (pad_y, pad_x) = match padding {
        PoolPadding::Same => (pool_pad_before(h, oh), pool_pad_before(w, ow)),
        PoolPadding::Valid => (0, 0),
    };
    let x = input.data();
    let mut out = vec![T::zero(); oh * ow * c];
    let mut argmax = if record { vec![0u32; oh * ow * c] } else { Vec::new() };

    for oy in 0..oh {
        let y0 = (oy * POOL_STRIDE).wrapping_sub(pad_y);
        for ox in 0..ow {
            let x0 = (ox * POOL_STRIDE).wrapping_sub(pad_x);
            let out_base = (oy * ow + ox) * c;
            for ch in 0..c {
                let mut best = T::neg_infinity();
                let mut best_at = 0u32;
                for ky in 0..KERNEL {
                    let iy = y0.wrapping_add(ky);
                    if iy >= h {
                        continue;
                    }
                    for kx in 0..KERNEL {
                        let ix = x0.wrapping_add(kx);
                        if ix >= w {
                            continue;
                        }
                        let v = x[(iy * w + ix) * c + ch];
                        if v > best {
                            best = v;
                            best_at = ((iy * w + ix) * c + ch) as u32;
                        }
                    }
                }
                out[out_base + ch] = best;
                if record {
                    argmax[out_base + ch] = best_at;
                }
            }
        }
    }
    let aux = if record { Aux::Pool(argmax) } else { Aux::None };
    (Tensor::from_vec(&[oh, ow, c], out), aux)
}

pub fn maxpool_backward<T: Element>(
    input_shape: &[usize],
    argmax: &[u32],
    delta: &Tensor<T>,
) -> Tensor<T> {
    let mut dx = vec![0.0f64; input_shape.iter().product()];
    for (&at, &g) in argmax.iter().zip(delta.data()) {
        dx[at as usize] += g.to_acc();
    }
    Tensor::from_vec(input_shape, dx.into_iter().map(T::from_acc).collect())
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

/// Weight layout is [out_features, in_features] row-major, so each output
/// unit reads one contiguous row.
pub fn dense_forward<T: Element>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Tensor<T> {
    let n_in = input.numel();
    let n_out = bias.numel();
    let x = input.data();
    let out = (0..n_out)
        .map(|o| {
            let row = &weight.data()[o * n_in..(o + 1) * n_in];
            let mut acc = bias.data()[o].to_acc();
            for (a, b) in x.iter().zip(row) {
                acc += a.to_acc() * b.to_acc();
            }
            T::from_acc(acc)
        })
        .collect();
    Tensor::from_vec(&[n_out], out)
}

pub fn dense_backward<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    delta: &Tensor<T>,
) -> ConvGrads<T> {
    let n_in = input.numel();
    let n_out = delta.numel();
    let x = input.data();
    let mut dw = vec![T::zero(); weight.numel()];
    let mut db = vec![T::zero(); n_out];
    let mut dx = vec![0.0f64; n_in];

    for o in 0..n_out {
        let g = delta.data()[o].to_acc();
        db[o] = T::from_acc(g);
        let wrow = &weight.data()[o * n_in..(o + 1) * n_in];
        let dwrow = &mut dw[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            dwrow[i] = T::from_acc(g * x[i].to_acc());
            dx[i] += g * wrow[i].to_acc();
        }
    }

    ConvGrads {
        weight: Tensor::from_vec(weight.shape(), dw),
        bias: Tensor::from_vec(&[n_out], db),
        input: Tensor::from_vec(input.shape(), dx.into_iter().map(T::from_acc).collect()),
    }
}

// ---------------------------------------------------------------------------
// activations, dropout, flatten
// ---------------------------------------------------------------------------

pub fn relu_forward<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    Tensor::from_vec(
        input.shape(),
        input.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
    )
}

pub fn relu_backward<T: Element>(input: &Tensor<T>, delta: &Tensor<T>) -> Tensor<T> {
    Tensor::from_vec(
        input.shape(),
        input
            .iter()
            .zip(delta.iter())
            .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
            .collect(),
    )
}

/// Numerically stabilized softmax: shifts by the max logit before
/// exponentiating, sums in f64.
pub fn softmax_forward<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    let max = input.iter().fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let exps: Vec<f64> = input.iter().map(|&v| (v - max).to_acc().exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::from_vec(input.shape(), exps.into_iter().map(|e| T::from_acc(e / sum)).collect())
}

pub fn dropout_forward<T: Element>(input: &Tensor<T>, keep: f32, rng: &mut ChaCha8Rng) -> (Tensor<T>, Vec<bool>) {
    let keep64 = keep as f64;
    let scale = T::from_acc(1.0 / keep64);
    let mask: Vec<bool> = (0..input.numel()).map(|_| rng.gen::<f64>() < keep64).collect();
    let out = input
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v * scale } else { T::zero() })
        .collect();
    (Tensor::from_vec(input.shape(), out), mask)
}

pub fn dropout_backward<T: Element>(mask: &[bool], keep: f32, delta: &Tensor<T>) -> Tensor<T> {
    let scale = T::from_acc(1.0 / keep as f64);
    Tensor::from_vec(
        delta.shape(),
        delta
            .iter()
            .zip(mask)
            .map(|(&g, &m)| if m { g * scale } else { T::zero() })
            .collect(),
    )
}
