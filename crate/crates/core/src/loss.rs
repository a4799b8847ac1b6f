//! Mean cross-entropy over predicted class probabilities.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Probabilities below this are clamped before the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Mean over the batch of -log p[label].
pub fn cross_entropy<T: Scalar>(probabilities: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let classes = *probabilities.shape().last().unwrap();
    let batch = probabilities.len() / classes;
    if labels.len() != batch {
        return Err(Error::arg(format!(
            "{batch} probability rows but {} labels",
            labels.len()
        )));
    }
    let clamp = T::from_f64(PROB_CLAMP);
    let mut total = T::zero();
    for (n, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::arg(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let p = probabilities.data()[n * classes + label].max(clamp);
        total = total - p.ln();
    }
    Ok(total / T::from_f64(batch as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_zero_loss() {
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let loss = cross_entropy(&p, &[1]).unwrap();
        assert!(loss.abs() <= 1e-9);
    }

    #[test]
    fn uniform_prediction_over_ten_classes() {
        let p = Tensor::<f64>::filled(&[2, 10], 0.1);
        let loss = cross_entropy(&p, &[3, 7]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12);
        assert!((loss - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn direct_arithmetic_case() {
        let p = Tensor::<f64>::from_vec(&[1, 3], vec![0.7, 0.2, 0.1]).unwrap();
        let loss = cross_entropy(&p, &[1]).unwrap();
        assert!((loss - 1.609438).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_label_rejected() {
        let p = Tensor::<f64>::filled(&[1, 3], 1.0 / 3.0);
        assert!(cross_entropy(&p, &[3]).is_err());
    }

    #[test]
    fn zero_probability_is_clamped() {
        let p = Tensor::<f64>::from_vec(&[1, 2], vec![1.0, 0.0]).unwrap();
        let loss = cross_entropy(&p, &[1]).unwrap();
        assert!(loss.is_finite());
        assert!((loss - (-PROB_CLAMP.ln())).abs() < 1e-6);
    }
}
