//! Adam with bias correction.

use super::network::{Gradients, Network};
use super::tensor::{Element, Tensor};
use super::NnError;

/// Optimizer state: step counter plus first/second moment estimates shaped
/// like the network's weights. Defaults are beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps.
    pub t: u64,
    moments: Vec<Option<Moment<T>>>,
}

#[derive(Debug, Clone)]
struct Moment<T> {
    m_weight: Tensor<T>,
    v_weight: Tensor<T>,
    m_bias: Tensor<T>,
    v_bias: Tensor<T>,
}

impl<T: Element> AdamState<T> {
    pub fn new(net: &Network<T>, lr: f64) -> Self {
        let moments = net
            .params()
            .iter()
            .map(|p| {
                p.as_ref().map(|p| Moment {
                    m_weight: Tensor::zeros(p.weight.shape()),
                    v_weight: Tensor::zeros(p.weight.shape()),
                    m_bias: Tensor::zeros(p.bias.shape()),
                    v_bias: Tensor::zeros(p.bias.shape()),
                })
            })
            .collect();
        AdamState { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, moments }
    }

    /// One Adam update. Fails fast on any non-finite gradient entry rather
    /// than poisoning the weights.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<(), NnError> {
        if grads.per_layer.len() != self.moments.len() {
            return Err(NnError::TapeMismatch {
                reason: format!(
                    "gradients cover {} layers, optimizer state {}",
                    grads.per_layer.len(),
                    self.moments.len()
                ),
            });
        }
        for (layer, g) in grads.per_layer.iter().enumerate() {
            if let Some(g) = g {
                if !g.weight.is_finite() || !g.bias.is_finite() {
                    return Err(NnError::NonFiniteGradient { layer });
                }
            }
        }

        self.t += 1;
        let scalars = Scalars {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            bc1: 1.0 - self.beta1.powi(self.t as i32),
            bc2: 1.0 - self.beta2.powi(self.t as i32),
        };

        for (layer, (params, moment)) in
            net.params_mut().iter_mut().zip(self.moments.iter_mut()).enumerate()
        {
            let (Some(params), Some(moment)) = (params, moment) else { continue };
            let g = grads.per_layer[layer].as_ref().ok_or_else(|| NnError::TapeMismatch {
                reason: format!("layer {layer} has weights but no gradient"),
            })?;
            update(
                params.weight.data_mut(),
                moment.m_weight.data_mut(),
                moment.v_weight.data_mut(),
                g.weight.data(),
                &scalars,
            );
            update(
                params.bias.data_mut(),
                moment.m_bias.data_mut(),
                moment.v_bias.data_mut(),
                g.bias.data(),
                &scalars,
            );
        }
        Ok(())
    }
}

struct Scalars {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

fn update<T: Element>(w: &mut [T], m: &mut [T], v: &mut [T], g: &[T], s: &Scalars) {
    for i in 0..w.len() {
        let gi = g[i].to_acc();
        let mi = s.beta1 * m[i].to_acc() + (1.0 - s.beta1) * gi;
        let vi = s.beta2 * v[i].to_acc() + (1.0 - s.beta2) * gi * gi;
        m[i] = T::from_acc(mi);
        v[i] = T::from_acc(vi);
        let m_hat = mi / s.bc1;
        let v_hat = vi / s.bc2;
        w[i] = T::from_acc(w[i].to_acc() - s.lr * m_hat / (v_hat.sqrt() + s.eps));
    }
}
