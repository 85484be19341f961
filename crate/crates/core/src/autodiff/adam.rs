use super::Tensor;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &[Tensor<S>]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<S: Scalar>(
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut AdamState<S>,
    lr: f64,
    config: AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return shape_err(format!(
            "adam: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return shape_err(format!("adam: param {:?} vs grad {:?}", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = S::lit(config.beta1);
    let b2 = S::lit(config.beta2);
    let c1 = S::lit(1.0 - config.beta1.powi(t));
    let c2 = S::lit(1.0 - config.beta2.powi(t));
    let lr = S::lit(lr);
    let eps = S::lit(config.eps);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mi = b1 * *mi + (S::one() - b1) * gi;
            *vi = b2 * *vi + (S::one() - b2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *pi -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Tensor<S>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.sq_norm().to_f64_lossy())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = S::lit(max_norm / norm);
        grads.iter_mut().for_each(|g| g.scale_assign(k));
    }
    norm
}
