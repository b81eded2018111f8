//! Forward/backward pairs for every primitive the encoders and losses use.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng as _;

use crate::error::{invalid, shape, Result};
use crate::seed::Rng;

use super::tensor::{matmul, Tensor};

/// Logits are clamped to this range before the sigmoid.
pub const LOGIT_CLAMP: f64 = 30.0;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `y = x W + b`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if b.len() != w.cols() || w.shape().len() != 2 {
        return Err(shape(format!("weight {:?} with bias {:?}", w.shape(), b.shape())));
    }
    let mut y = matmul(x, false, w, false)?;
    let c = y.cols();
    for r in y.data_mut().chunks_exact_mut(c) {
        r.iter_mut().zip(b.data()).for_each(|(v, bb)| *v += bb);
    }
    Ok(y)
}

pub struct LinearGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn linear_backward(x: &Tensor, w: &Tensor, dy: &Tensor) -> Result<LinearGrads> {
    Ok(LinearGrads {
        dx: matmul(dy, false, w, true)?,
        dw: matmul(x, true, dy, false)?,
        db: dy.sum_rows(),
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Exact (erf-based) GELU, `x * Phi(x)`.
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

pub fn gelu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    x.check_same(dy)?;
    let mut dx = dy.clone();
    dx.data_mut().iter_mut().zip(x.data()).for_each(|(g, &v)| *g *= gelu_derivative(v));
    Ok(dx)
}

pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

/// Per-row standardization (biased variance) followed by `gamma * xhat + beta`.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<(Tensor, LayerNormCache)> {
    let d = x.cols();
    if gamma.len() != d || beta.len() != d {
        return Err(shape(format!("layer_norm over {d} features with gamma/beta of {}/{}", gamma.len(), beta.len())));
    }
    let mut xhat = x.clone();
    let mut y = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for (xr, yr) in xhat.data_mut().chunks_exact_mut(d).zip(y.data_mut().chunks_exact_mut(d)) {
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        inv_std.push(inv);
        for (j, (h, o)) in xr.iter_mut().zip(yr.iter_mut()).enumerate() {
            *h = (*h - mean) * inv;
            *o = gamma.data()[j] * *h + beta.data()[j];
        }
    }
    Ok((y, LayerNormCache { xhat, inv_std }))
}

/// Returns `(dx, dgamma, dbeta)`.
pub fn layer_norm_backward(cache: &LayerNormCache, gamma: &Tensor, dy: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    cache.xhat.check_same(dy)?;
    let d = dy.cols();
    let mut dx = Tensor::zeros(dy.shape());
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for (r, ((dyr, xh), dxr)) in dy
        .data()
        .chunks_exact(d)
        .zip(cache.xhat.data().chunks_exact(d))
        .zip(dx.data_mut().chunks_exact_mut(d))
        .enumerate()
    {
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for j in 0..d {
            let g = dyr[j] * gamma.data()[j];
            sum_g += g;
            sum_gx += g * xh[j];
            dgamma[j] += dyr[j] * xh[j];
            dbeta[j] += dyr[j];
        }
        let inv = cache.inv_std[r];
        for j in 0..d {
            let g = dyr[j] * gamma.data()[j];
            dxr[j] = inv / d as f64 * (d as f64 * g - sum_g - xh[j] * sum_gx);
        }
    }
    Ok((dx, Tensor::vector(dgamma), Tensor::vector(dbeta)))
}

/// Per-entry multipliers: 0 for dropped entries, `1/(1-p)` for survivors.
#[derive(Clone, Debug)]
pub struct DropoutMask(Option<Vec<f64>>);

impl DropoutMask {
    pub fn survivors(&self) -> Option<usize> {
        self.0.as_ref().map(|m| m.iter().filter(|&&v| v != 0.0).count())
    }
}

/// Inverted dropout; identity outside training or when `p == 0`.
pub fn dropout(x: &Tensor, p: f64, rng: &mut Rng, train: bool) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("dropout probability {p} must be in [0, 1)")));
    }
    if !train || p == 0.0 {
        return Ok((x.clone(), DropoutMask(None)));
    }
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..x.len()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
    let mut y = x.clone();
    y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
    Ok((y, DropoutMask(Some(mask))))
}

pub fn dropout_backward(mask: &DropoutMask, dy: &Tensor) -> Tensor {
    match &mask.0 {
        None => dy.clone(),
        Some(m) => {
            let mut dx = dy.clone();
            dx.data_mut().iter_mut().zip(m).for_each(|(g, k)| *g *= k);
            dx
        }
    }
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).exp())
}

pub fn sigmoid(z: &Tensor) -> Tensor {
    z.map(sigmoid_scalar)
}

fn check_targets(p: &Tensor, y: &Tensor) -> Result<()> {
    p.check_same(y)?;
    if let Some(bad) = y.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(invalid(format!("binary target {bad} is not 0 or 1")));
    }
    Ok(())
}

fn p_bounds() -> (f64, f64) {
    (sigmoid_scalar(-LOGIT_CLAMP), sigmoid_scalar(LOGIT_CLAMP))
}

/// Binary cross entropy: sum over classes, mean over rows.
pub fn bce(p: &Tensor, y: &Tensor) -> Result<f64> {
    check_targets(p, y)?;
    let (lo, hi) = p_bounds();
    let total: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&pi, &yi)| {
            let pc = pi.clamp(lo, hi);
            -(yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln())
        })
        .sum();
    Ok(total / p.rows() as f64)
}

pub fn bce_backward(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    check_targets(p, y)?;
    let (lo, hi) = p_bounds();
    let n = p.rows() as f64;
    let mut dp = p.clone();
    dp.data_mut().iter_mut().zip(y.data()).for_each(|(g, &yi)| {
        let pi = *g;
        *g = if pi < lo || pi > hi { 0.0 } else { (-yi / pi + (1.0 - yi) / (1.0 - pi)) / n };
    });
    Ok(dp)
}

/// Sigmoid followed by [`bce`]; returns the loss and its gradient with
/// respect to the logits.
pub fn sigmoid_bce(logits: &Tensor, y: &Tensor) -> Result<(f64, Tensor)> {
    let p = sigmoid(logits);
    let loss = bce(&p, y)?;
    let n = logits.rows() as f64;
    let mut dz = p;
    dz.data_mut().iter_mut().zip(y.data()).zip(logits.data()).for_each(|((g, &yi), &z)| {
        *g = if z.abs() > LOGIT_CLAMP { 0.0 } else { (*g - yi) / n };
    });
    Ok((loss, dz))
}
