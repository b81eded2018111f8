use crate::error::{shape, Error, Result};
use crate::nn::ops::{bce, bce_backward};
use crate::nn::{matmul, Tensor};

/// Cosine-similarity logits `Z[k][l] = cos(q_k, t_l) * e^tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLogits {
    pub z: Tensor,
    pub tau: f64,
}

/// Unit-normalized rows and norms kept for the backward pass.
pub struct CosineCache {
    qn: Tensor,
    tn: Tensor,
    q_norms: Vec<f64>,
    t_norms: Vec<f64>,
    scale: f64,
}

fn normalize_rows(x: &Tensor, side: &str) -> Result<(Tensor, Vec<f64>)> {
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    let d = x.cols();
    for (i, row) in out.data_mut().chunks_exact_mut(d).enumerate() {
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm(format!("{side} row {i}")));
        }
        row.iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

pub fn pairwise_logits(queries: &Tensor, targets: &Tensor, tau: f64) -> Result<BatchLogits> {
    Ok(pairwise_logits_cached(queries, targets, tau)?.0)
}

pub fn pairwise_logits_cached(queries: &Tensor, targets: &Tensor, tau: f64) -> Result<(BatchLogits, CosineCache)> {
    if queries.shape().len() != 2 || queries.shape() != targets.shape() || queries.rows() == 0 {
        return Err(shape(format!("queries {:?} vs targets {:?}", queries.shape(), targets.shape())));
    }
    let (qn, q_norms) = normalize_rows(queries, "query")?;
    let (tn, t_norms) = normalize_rows(targets, "target")?;
    let scale = tau.exp();
    let mut z = matmul(&qn, false, &tn, true)?;
    if scale != 1.0 {
        z.data_mut().iter_mut().for_each(|v| *v *= scale);
    }
    Ok((BatchLogits { z, tau }, CosineCache { qn, tn, q_norms, t_norms, scale }))
}

fn unnormalize_grad(xn: &Tensor, norms: &[f64], dxn: &Tensor) -> Tensor {
    let d = xn.cols();
    let mut dx = dxn.clone();
    for (i, row) in dx.data_mut().chunks_exact_mut(d).enumerate() {
        let u = xn.row(i);
        let proj: f64 = row.iter().zip(u).map(|(g, v)| g * v).sum();
        row.iter_mut().zip(u).for_each(|(g, v)| *g = (*g - proj * v) / norms[i]);
    }
    dx
}

/// Gradients of the logits with respect to the raw queries and targets.
pub fn pairwise_logits_backward(cache: &CosineCache, dz: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut dz = dz.clone();
    if cache.scale != 1.0 {
        dz.data_mut().iter_mut().for_each(|v| *v *= cache.scale);
    }
    let dqn = matmul(&dz, false, &cache.tn, false)?;
    let dtn = matmul(&dz, true, &cache.qn, false)?;
    Ok((unnormalize_grad(&cache.qn, &cache.q_norms, &dqn), unnormalize_grad(&cache.tn, &cache.t_norms, &dtn)))
}

/// Log-softmax of the diagonal entry along each row (or column), with the
/// softmax itself for the gradient.
fn diag_log_softmax(z: &Tensor, by_rows: bool) -> (Vec<f64>, Tensor) {
    let b = z.rows();
    let at = |i: usize, j: usize| if by_rows { z.data()[i * b + j] } else { z.data()[j * b + i] };
    let mut logp = Vec::with_capacity(b);
    let mut soft = Tensor::zeros(&[b, b]);
    for i in 0..b {
        let m = (0..b).map(|j| at(i, j)).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..b).map(|j| (at(i, j) - m).exp()).sum();
        let lse = m + sum.ln();
        logp.push(at(i, i) - lse);
        for j in 0..b {
            let p = (at(i, j) - lse).exp();
            if by_rows {
                soft.data_mut()[i * b + j] = p;
            } else {
                soft.data_mut()[j * b + i] = p;
            }
        }
    }
    (logp, soft)
}

/// Symmetric cross-entropy over rows and columns of `Z`, summed over the
/// batch: `-1/2 [sum_i log softmax_row_i(Z)_i + sum_i log softmax_col_i(Z)_i]`.
/// Returns the loss and `dL/dZ`.
pub fn contrastive_loss(logits: &BatchLogits) -> Result<(f64, Tensor)> {
    let z = &logits.z;
    if z.shape().len() != 2 || z.rows() != z.cols() || z.rows() == 0 {
        return Err(shape(format!("logits must be a nonempty square matrix, got {:?}", z.shape())));
    }
    let b = z.rows();
    let (lr, sr) = diag_log_softmax(z, true);
    let (lc, sc) = diag_log_softmax(z, false);
    let loss = -0.5 * (lr.iter().sum::<f64>() + lc.iter().sum::<f64>());
    let mut dz = sr;
    dz.add_assign(&sc)?;
    dz.data_mut().iter_mut().for_each(|v| *v *= 0.5);
    for i in 0..b {
        dz.data_mut()[i * b + i] -= 1.0;
    }
    Ok((loss.max(0.0), dz))
}

/// `bce(p_a, v) + bce(p_b, w)`.
pub fn classification_loss(p_a: &Tensor, v: &Tensor, p_b: &Tensor, w: &Tensor) -> Result<f64> {
    Ok(bce(p_a, v)? + bce(p_b, w)?)
}

/// Gradients of [`classification_loss`] with respect to `p_a` and `p_b`.
pub fn classification_loss_backward(p_a: &Tensor, v: &Tensor, p_b: &Tensor, w: &Tensor) -> Result<(Tensor, Tensor)> {
    Ok((bce_backward(p_a, v)?, bce_backward(p_b, w)?))
}
