use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// Row-wise softmax of a `(n, K)` logit tensor, computed via log-sum-exp.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let k = logits.item_len();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch and its gradient `(p - onehot) / n`.
pub fn softmax_xent<T: Real>(logits: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>)> {
    let n = logits.batch();
    let k = logits.item_len();
    if targets.len() != n {
        return Err(Error::shape(format!(
            "{} targets for a batch of {n}",
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::invalid(format!("target class {t} out of range for {k} classes")));
    }
    let n_t = T::from_usize(n).expect("batch size");
    let mut grad = softmax(logits);
    let mut loss = T::zero();
    for ((row, logit_row), &t) in grad
        .data_mut()
        .chunks_exact_mut(k)
        .zip(logits.data().chunks_exact(k))
        .zip(targets)
    {
        let max = logit_row.iter().cloned().fold(T::neg_infinity(), T::max);
        let lse = max + logit_row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss += lse - logit_row[t];
        row[t] -= T::one();
        for v in row.iter_mut() {
            *v /= n_t;
        }
    }
    Ok((loss / n_t, grad))
}
