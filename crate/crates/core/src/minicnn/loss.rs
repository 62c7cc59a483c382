use crate::error::{Error, Result};

use super::tensor::Tensor3;
use super::Scalar;

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before the log.
pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`:
/// `(p - y) / (p (1 - p)) / count` at the clamped prediction `p`.
pub fn bce_loss<T: Scalar>(pred: &Tensor3<T>, target: &Tensor3<T>) -> Result<(f64, Tensor3<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    let (h, w, c) = pred.shape();
    let count = (h * w * c) as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.data().len());
    for (&p, &y) in pred.data().iter().zip(target.data()) {
        let p = p.as_f64().clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        let y = y.as_f64();
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        grad.push(T::of((p - y) / (p * (1.0 - p)) / count));
    }
    Ok((total / count, Tensor3::new(h, w, c, grad)?))
}
