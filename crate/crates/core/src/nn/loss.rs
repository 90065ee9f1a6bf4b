use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over a batch and its gradient `(softmax − onehot)/N`.
///
/// Logits are shifted by their row maximum before exponentiation.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let [n, k] = <[usize; 2]>::try_from(logits.shape())
        .map_err(|_| Error::Input(format!("logits must be [N, K], got {:?}", logits.shape())))?;
    if labels.len() != n {
        return Err(Error::Input(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Input(format!("label {bad} out of range for {k} classes")));
    }
    let inv_n = T::one() / T::lit(n as f64);
    let mut grad = Tensor::zeros(vec![n, k]);
    let mut loss = T::zero();
    for ((row, g), &label) in logits.data().chunks(k).zip(grad.data_mut().chunks_mut(k)).zip(labels) {
        let probs = softmax(row);
        // −log p[label] = log Σ exp(z − max) − (z[label] − max)
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_sum = row.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
        loss += log_sum - (row[label] - max);
        for (j, (gj, &p)) in g.iter_mut().zip(&probs).enumerate() {
            let onehot = if j == label { T::one() } else { T::zero() };
            *gj = (p - onehot) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// Numerically stabilized softmax of one row of scores.
pub fn softmax<T: Scalar>(row: &[T]) -> Vec<T> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
