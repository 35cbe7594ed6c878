use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::Float;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LossOutput<F> {
    pub loss: F,
    pub probabilities: Array1<F>,
    /// Gradient of the loss with respect to the logits.
    pub gradient: Array1<F>,
}

/// Softmax cross-entropy restricted to the entries where `mask` is true.
///
/// Masked entries get probability and gradient zero.
pub fn softmax_xent<F: Float>(logits: ArrayView1<F>, gold: usize, mask: Option<&[bool]>) -> Result<LossOutput<F>> {
    let allowed = |i: usize| mask.is_none_or(|m| m[i]);
    if let Some(m) = mask {
        if m.len() != logits.len() {
            return Err(Error::Shape(format!("mask of {} for {} logits", m.len(), logits.len())));
        }
    }
    if gold >= logits.len() || !allowed(gold) {
        return Err(Error::MaskedGold(gold));
    }

    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &v)| v)
        .fold(F::neg_infinity(), F::max);
    let mut probabilities = Array1::zeros(logits.len());
    let mut total = F::zero();
    for (i, &v) in logits.iter().enumerate() {
        if allowed(i) {
            let e = (v - max).exp();
            probabilities[i] = e;
            total += e;
        }
    }
    probabilities /= total;

    let loss = -((logits[gold] - max) - total.ln());
    let mut gradient = probabilities.clone();
    gradient[gold] -= F::one();
    Ok(LossOutput {
        loss,
        probabilities,
        gradient,
    })
}

/// Mean loss over a batch and the gradient of that mean.
pub fn softmax_xent_batch<F: Float>(
    logits: ArrayView2<F>,
    gold: &[usize],
    masks: &[Vec<bool>],
) -> Result<(F, Array2<F>)> {
    let batch = F::of(logits.nrows() as f64);
    let mut loss = F::zero();
    let mut gradient = Array2::zeros(logits.raw_dim());
    for (row, ((l, &g), m)) in logits.outer_iter().zip(gold).zip(masks).enumerate() {
        let out = softmax_xent(l, g, Some(m))?;
        loss += out.loss;
        gradient.row_mut(row).assign(&(out.gradient / batch));
    }
    Ok((loss / batch, gradient))
}
