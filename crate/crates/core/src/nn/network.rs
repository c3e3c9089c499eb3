//! Sequential layer stacks with an activation tape for backpropagation.

use super::layer::{self, Aux, Layer};
use super::tensor::{Element, Tensor};
use super::NnError;
use rand_chacha::ChaCha8Rng;

/// Forward execution mode. Dropout masks activations only in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Weights of one parameterized layer (also reused to carry its gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients per layer, aligned with [`Network::layers`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub per_layer: Vec<Option<LayerParams<T>>>,
}

/// Activation record of one train-mode forward pass.
pub struct Tape<T> {
    inputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
    output: Tensor<T>,
    mode: Mode,
}

impl<T: Element> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

/// An ordered stack of layers with their weights.
///
/// The stack is validated at construction: every layer must accept its
/// predecessor's output shape, and softmax may appear only as the final
/// activation.
#[derive(Debug, Clone)]
pub struct Network<T: Element> {
    layers: Vec<Layer>,
    params: Vec<Option<LayerParams<T>>>,
    /// Input shape of every layer, plus the output shape at the end.
    shapes: Vec<Vec<usize>>,
}

impl<T: Element> Network<T> {
    /// Build a zero-initialized network. Call [`Network::init_weights`] to
    /// seed trainable weights.
    pub fn new(layers: Vec<Layer>, input_shape: &[usize]) -> Result<Self, NnError> {
        let mut shapes = vec![input_shape.to_vec()];
        for (idx, layer) in layers.iter().enumerate() {
            if matches!(layer, Layer::Softmax) && idx + 1 != layers.len() {
                return Err(NnError::InvalidStack {
                    layer: idx,
                    reason: "softmax must be the final activation".into(),
                });
            }
            if let Layer::Dropout { keep } = layer {
                if !(*keep > 0.0 && *keep <= 1.0) {
                    return Err(NnError::InvalidStack {
                        layer: idx,
                        reason: format!("dropout keep probability {keep} outside (0, 1]"),
                    });
                }
            }
            let out = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|reason| NnError::InvalidStack { layer: idx, reason })?;
            shapes.push(out);
        }
        let params = layers
            .iter()
            .map(|layer| match *layer {
                Layer::Conv2d { in_channels, out_channels } => Some(LayerParams {
                    weight: Tensor::zeros(&[out_channels, layer::KERNEL, layer::KERNEL, in_channels]),
                    bias: Tensor::zeros(&[out_channels]),
                }),
                Layer::Dense { in_features, out_features } => Some(LayerParams {
                    weight: Tensor::zeros(&[out_features, in_features]),
                    bias: Tensor::zeros(&[out_features]),
                }),
                _ => None,
            })
            .collect();
        Ok(Network { layers, params, shapes })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn params(&self) -> &[Option<LayerParams<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams<T>>] {
        &mut self.params
    }

    /// Total number of trainable parameters.
    pub fn count_params(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// He-uniform init for layers feeding ReLU, Glorot-uniform for the final
    /// dense layer, zero biases. Deterministic in `seed`.
    pub fn init_weights(&mut self, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last_dense = self
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Dense { .. }));
        for (idx, (layer, params)) in self.layers.iter().zip(self.params.iter_mut()).enumerate() {
            let Some(params) = params else { continue };
            let (fan_in, fan_out) = match *layer {
                Layer::Conv2d { in_channels, out_channels } => {
                    (layer::KERNEL * layer::KERNEL * in_channels, layer::KERNEL * layer::KERNEL * out_channels)
                }
                Layer::Dense { in_features, out_features } => (in_features, out_features),
                _ => unreachable!(),
            };
            let limit = if Some(idx) == last_dense {
                (6.0 / (fan_in + fan_out) as f64).sqrt() // Glorot
            } else {
                (6.0 / fan_in as f64).sqrt() // He
            };
            for v in params.weight.data_mut() {
                *v = T::from_acc(rng.gen_range(-limit..limit));
            }
            for v in params.bias.data_mut() {
                *v = T::zero();
            }
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(), NnError> {
        if input.shape() != self.shapes[0].as_slice() {
            return Err(NnError::ShapeMismatch {
                layer: 0,
                expected: self.shapes[0].clone(),
                got: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Run the stack. In `Train` mode an activation tape is recorded and
    /// dropout needs an RNG; in `Infer` mode dropout is the identity.
    pub fn forward(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor<T>, Tape<T>), NnError> {
        self.check_input(input)?;
        let record = mode == Mode::Train;
        let mut inputs = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut aux = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut current = input.clone();

        for (idx, (layer, params)) in self.layers.iter().zip(&self.params).enumerate() {
            let (out, a) = match layer {
                Layer::Conv2d { .. } => {
                    let p = params.as_ref().unwrap();
                    (layer::conv2d_forward(&current, &p.weight, &p.bias), Aux::None)
                }
                Layer::MaxPool2d { padding } => layer::maxpool_forward(&current, *padding, record),
                Layer::Dense { .. } => {
                    let p = params.as_ref().unwrap();
                    (layer::dense_forward(&current, &p.weight, &p.bias), Aux::None)
                }
                Layer::Relu => (layer::relu_forward(&current), Aux::None),
                Layer::Softmax => {
                    let out = layer::softmax_forward(&current);
                    let probs = Aux::Probs(out.data().to_vec());
                    (out, probs)
                }
                Layer::Dropout { keep } => {
                    if mode == Mode::Infer {
                        (current.clone(), Aux::None)
                    } else {
                        let rng = rng.as_deref_mut().ok_or(NnError::MissingRng { layer: idx })?;
                        let (out, mask) = layer::dropout_forward(&current, *keep, rng);
                        (out, Aux::Mask(mask))
                    }
                }
                Layer::Flatten => (current.reshaped(&self.shapes[idx + 1]), Aux::None),
            };
            if record {
                inputs.push(std::mem::replace(&mut current, out));
                aux.push(a);
            } else {
                current = out;
            }
        }

        let tape = Tape { inputs, aux, output: current.clone(), mode };
        Ok((current, tape))
    }

    /// Inference without tape bookkeeping.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.forward(input, Mode::Infer, None)?.0)
    }

    /// Gradients of the categorical cross-entropy loss against `target`
    /// (one-hot) with respect to every weight. The tape must come from a
    /// train-mode forward on this same stack; dropout masks are reused.
    pub fn backward(&self, tape: &Tape<T>, target: &Tensor<T>) -> Result<Gradients<T>, NnError> {
        if tape.mode != Mode::Train {
            return Err(NnError::TapeMismatch { reason: "tape was recorded in infer mode".into() });
        }
        if tape.inputs.len() != self.layers.len() {
            return Err(NnError::TapeMismatch {
                reason: format!(
                    "tape has {} layers, network has {}",
                    tape.inputs.len(),
                    self.layers.len()
                ),
            });
        }
        for (idx, (input, shape)) in tape.inputs.iter().zip(&self.shapes).enumerate() {
            if input.shape() != shape.as_slice() {
                return Err(NnError::TapeMismatch {
                    reason: format!("layer {idx} input shape {:?} does not match network ({shape:?})", input.shape()),
                });
            }
        }
        if !matches!(self.layers.last(), Some(Layer::Softmax)) {
            return Err(NnError::TapeMismatch { reason: "final layer is not softmax".into() });
        }
        if target.shape() != tape.output.shape() {
            return Err(NnError::ShapeMismatch {
                layer: self.layers.len() - 1,
                expected: tape.output.shape().to_vec(),
                got: target.shape().to_vec(),
            });
        }

        // softmax + cross-entropy: d(loss)/d(logits) = probs - target
        let probs = match tape.aux.last() {
            Some(Aux::Probs(p)) => p,
            _ => return Err(NnError::TapeMismatch { reason: "tape lacks softmax probabilities".into() }),
        };
        let mut delta = Tensor::from_vec(
            target.shape(),
            probs.iter().zip(target.iter()).map(|(&p, &t)| p - t).collect(),
        );

        let mut per_layer: Vec<Option<LayerParams<T>>> = vec![None; self.layers.len()];
        for idx in (0..self.layers.len() - 1).rev() {
            let input = &tape.inputs[idx];
            delta = match &self.layers[idx] {
                Layer::Conv2d { .. } => {
                    let p = self.params[idx].as_ref().unwrap();
                    let grads = layer::conv2d_backward(input, &p.weight, &delta);
                    per_layer[idx] = Some(LayerParams { weight: grads.weight, bias: grads.bias });
                    grads.input
                }
                Layer::MaxPool2d { .. } => {
                    let argmax = match &tape.aux[idx] {
                        Aux::Pool(a) => a,
                        _ => return Err(NnError::TapeMismatch { reason: format!("layer {idx}: missing pool indices") }),
                    };
                    layer::maxpool_backward(input.shape(), argmax, &delta)
                }
                Layer::Dense { .. } => {
                    let p = self.params[idx].as_ref().unwrap();
                    let grads = layer::dense_backward(input, &p.weight, &delta);
                    per_layer[idx] = Some(LayerParams { weight: grads.weight, bias: grads.bias });
                    grads.input
                }
                Layer::Relu => layer::relu_backward(input, &delta),
                Layer::Softmax => unreachable!("softmax is final"),
                Layer::Dropout { keep } => {
                    let mask = match &tape.aux[idx] {
                        Aux::Mask(m) => m,
                        _ => return Err(NnError::TapeMismatch { reason: format!("layer {idx}: missing dropout mask") }),
                    };
                    layer::dropout_backward(mask, *keep, &delta)
                }
                Layer::Flatten => delta.reshaped(input.shape()),
            };
        }
        Ok(Gradients { per_layer })
    }
}

/// Categorical cross-entropy, reduced in f64. Probabilities are clamped to
/// 1e-300 before the log so an exactly-zero probability stays finite; the
/// gradient path uses the closed form and needs no clamp.
pub fn cross_entropy<T: Element>(output: &Tensor<T>, target: &Tensor<T>) -> f64 {
    output
        .iter()
        .zip(target.iter())
        .map(|(&p, &t)| {
            let t = t.to_acc();
            if t == 0.0 {
                0.0
            } else {
                -t * p.to_acc().max(1e-300).ln()
            }
        })
        .sum()
}

/// One-hot tensor helper.
pub fn one_hot<T: Element>(dim: usize, hot: usize) -> Tensor<T> {
    let mut data = vec![T::zero(); dim];
    data[hot] = T::one();
    Tensor::from_vec(&[dim], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny_net() -> Network<f64> {
        let mut net = Network::new(
            vec![
                Layer::Conv2d { in_channels: 1, out_channels: 2 },
                Layer::Relu,
                Layer::MaxPool2d { padding: Default::default() },
                Layer::Flatten,
                Layer::Dense { in_features: 3 * 3 * 2, out_features: 4 },
                Layer::Softmax,
            ],
            &[5, 5, 1],
        )
        .unwrap();
        net.init_weights(7);
        net
    }

    fn random_input(seed: u64, shape: &[usize]) -> Tensor<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec(shape, (0..shape.iter().product()).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn output_is_probability_vector() {
        let net = tiny_net();
        let out = net.infer(&random_input(1, &[5, 5, 1])).unwrap();
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
        assert!(out.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let net = tiny_net();
        let err = net.infer(&random_input(1, &[4, 4, 1])).unwrap_err();
        match err {
            NnError::ShapeMismatch { layer, .. } => assert_eq!(layer, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn softmax_must_be_last() {
        let err = Network::<f32>::new(
            vec![Layer::Softmax, Layer::Dense { in_features: 4, out_features: 2 }],
            &[4],
        )
        .unwrap_err();
        assert!(matches!(err, NnError::InvalidStack { layer: 0, .. }));
    }

    #[test]
    fn dense_size_mismatch_rejected_at_build() {
        let err = Network::<f32>::new(
            vec![Layer::Flatten, Layer::Dense { in_features: 10, out_features: 2 }],
            &[3, 3, 1],
        )
        .unwrap_err();
        assert!(matches!(err, NnError::InvalidStack { layer: 1, .. }));
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_gradient() {
        // drive the softmax input so one class saturates, then check the
        // closed-form (p - t) at the output layer
        let probs = Tensor::<f64>::from_vec(&[3], vec![0.0, 1.0, 0.0]);
        let target = Tensor::<f64>::from_vec(&[3], vec![0.0, 1.0, 0.0]);
        assert_eq!(cross_entropy(&probs, &target), 0.0);
        let grad: Vec<f64> = probs.iter().zip(target.iter()).map(|(p, t)| p - t).collect();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_infer_tape() {
        let net = tiny_net();
        let (_, tape) = net.forward(&random_input(3, &[5, 5, 1]), Mode::Infer, None).unwrap();
        let err = net.backward(&tape, &one_hot(4, 0)).unwrap_err();
        assert!(matches!(err, NnError::TapeMismatch { .. }));
    }

    #[test]
    fn backward_rejects_foreign_tape() {
        let net = tiny_net();
        let other = Network::<f64>::new(
            vec![Layer::Flatten, Layer::Dense { in_features: 25, out_features: 4 }, Layer::Softmax],
            &[5, 5, 1],
        )
        .unwrap();
        let (_, tape) = other.forward(&random_input(3, &[5, 5, 1]), Mode::Train, None).unwrap();
        assert!(net.backward(&tape, &one_hot(4, 0)).is_err());
    }

    // Central finite differences over every weight of a small conv net.
    #[test]
    fn gradients_match_finite_differences() {
        let net = tiny_net();
        let input = random_input(11, &[5, 5, 1]);
        let target = one_hot::<f64>(4, 2);

        let (_, tape) = net.forward(&input, Mode::Train, None).unwrap();
        let grads = net.backward(&tape, &target).unwrap();

        let h = 1e-4;
        let mut checked = 0usize;
        for layer_idx in 0..net.layers().len() {
            let Some(g) = &grads.per_layer[layer_idx] else { continue };
            for part in 0..2 {
                let n = if part == 0 { g.weight.numel() } else { g.bias.numel() };
                for i in 0..n {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    for (copy, sign) in [(&mut plus, 1.0), (&mut minus, -1.0)] {
                        let p = copy.params_mut()[layer_idx].as_mut().unwrap();
                        let slot = if part == 0 {
                            &mut p.weight.data_mut()[i]
                        } else {
                            &mut p.bias.data_mut()[i]
                        };
                        *slot += sign * h;
                    }
                    let lp = cross_entropy(&plus.infer(&input).unwrap(), &target);
                    let lm = cross_entropy(&minus.infer(&input).unwrap(), &target);
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic =
                        if part == 0 { g.weight.data()[i] } else { g.bias.data()[i] };
                    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "layer {layer_idx} part {part} idx {i}: analytic {analytic} vs numeric {numeric}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 50, "only {checked} entries checked");
    }

    #[test]
    fn dropout_infer_is_identity_and_train_needs_rng() {
        let net = Network::<f32>::new(
            vec![
                Layer::Flatten,
                Layer::Dropout { keep: 0.5 },
                Layer::Dense { in_features: 4, out_features: 2 },
                Layer::Softmax,
            ],
            &[2, 2, 1],
        )
        .unwrap();
        let input = Tensor::from_vec(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        // infer twice: identical (identity dropout)
        let a = net.infer(&input).unwrap();
        let b = net.infer(&input).unwrap();
        assert_eq!(a, b);
        // train without an RNG is an error
        assert!(matches!(
            net.forward(&input, Mode::Train, None),
            Err(NnError::MissingRng { layer: 1 })
        ));
        // train with the same seed is deterministic
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let (o1, _) = net.forward(&input, Mode::Train, Some(&mut r1)).unwrap();
        let (o2, _) = net.forward(&input, Mode::Train, Some(&mut r2)).unwrap();
        assert_eq!(o1, o2);
    }

    #[test]
    fn count_params_examples() {
        let dense = Network::<f32>::new(
            vec![Layer::Dense { in_features: 10, out_features: 7 }, Layer::Softmax],
            &[10],
        )
        .unwrap();
        assert_eq!(dense.count_params(), 77);

        let conv = Network::<f32>::new(
            vec![Layer::Conv2d { in_channels: 1, out_channels: 16 }],
            &[8, 8, 1],
        )
        .unwrap();
        assert_eq!(conv.count_params(), 160);
    }
}
