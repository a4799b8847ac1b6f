//! Elementwise / shape ops: relu, flatten, concat, residual add, softmax.

use crate::par;
use crate::tensor::{Scalar, Tensor};

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

/// dx = dout where the forward output was positive.
pub fn relu_backward<T: Scalar>(out: &Tensor<T>, dout: &Tensor<T>) -> Tensor<T> {
    let mut dx = dout.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(out.data()) {
        if o <= T::zero() {
            *d = T::zero();
        }
    }
    dx
}

pub fn flatten_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let batch = x.shape()[0];
    let rest: usize = x.shape()[1..].iter().product();
    x.clone().reshape(&[batch, rest]).expect("same volume")
}

pub fn flatten_backward<T: Scalar>(x_shape: &[usize], dout: &Tensor<T>) -> Tensor<T> {
    dout.clone().reshape(x_shape).expect("same volume")
}

/// Concatenates along the trailing axis; all leading axes must agree.
pub fn concat_forward<T: Scalar>(xs: &[&Tensor<T>]) -> Tensor<T> {
    let lead = &xs[0].shape()[..xs[0].rank() - 1];
    let widths: Vec<usize> = xs.iter().map(|x| *x.shape().last().unwrap()).collect();
    let total: usize = widths.iter().sum();
    let rows: usize = lead.iter().product();
    let mut shape = lead.to_vec();
    shape.push(total);
    let mut out = Tensor::zeros(&shape);
    let od = out.data_mut();
    for row in 0..rows {
        let mut offset = 0;
        for (x, &wdt) in xs.iter().zip(&widths) {
            let src = &x.data()[row * wdt..(row + 1) * wdt];
            od[row * total + offset..row * total + offset + wdt].copy_from_slice(src);
            offset += wdt;
        }
    }
    out
}

/// Splits the trailing-axis gradient back into per-input gradients.
pub fn concat_backward<T: Scalar>(dout: &Tensor<T>, widths: &[usize]) -> Vec<Tensor<T>> {
    let total = *dout.shape().last().unwrap();
    let lead = &dout.shape()[..dout.rank() - 1];
    let rows: usize = lead.iter().product();
    let dod = dout.data();
    let mut grads: Vec<Tensor<T>> = widths
        .iter()
        .map(|&w| {
            let mut shape = lead.to_vec();
            shape.push(w);
            Tensor::zeros(&shape)
        })
        .collect();
    for row in 0..rows {
        let mut offset = 0;
        for (g, &wdt) in grads.iter_mut().zip(widths) {
            let dst = &mut g.data_mut()[row * wdt..(row + 1) * wdt];
            dst.copy_from_slice(&dod[row * total + offset..row * total + offset + wdt]);
            offset += wdt;
        }
    }
    grads
}

pub fn add_forward<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o = *o + v;
    }
    out
}

/// Numerically stable softmax over the trailing axis.
pub fn softmax_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let classes = *x.shape().last().unwrap();
    let xd = x.data();
    let mut out = Tensor::zeros(x.shape());
    par::for_each_chunk_mut(out.data_mut(), classes, |row_idx, row| {
        let src = &xd[row_idx * classes..(row_idx + 1) * classes];
        let max = src.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (o, &v) in row.iter_mut().zip(src) {
            *o = (v - max).exp();
            sum = sum + *o;
        }
        for o in row.iter_mut() {
            *o = *o / sum;
        }
    });
    out
}

/// Gradient of mean cross-entropy w.r.t. the softmax *input*:
/// (probabilities - one_hot(labels)) / batch.
pub fn softmax_xent_input_grad<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Tensor<T> {
    let classes = *probs.shape().last().unwrap();
    let batch = T::from_f64(labels.len() as f64);
    let mut grad = probs.clone();
    let gd = grad.data_mut();
    for (n, &label) in labels.iter().enumerate() {
        gd[n * classes + label] = gd[n * classes + label] - T::one();
    }
    for v in gd.iter_mut() {
        *v = *v / batch;
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zero_logits_is_uniform() {
        let x = Tensor::<f64>::zeros(&[2, 10]);
        let p = softmax_forward(&x);
        for &v in p.data() {
            assert!((v - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Tensor::<f32>::from_vec(&[2, 3], vec![5.0, -3.0, 0.5, 100.0, 99.0, 98.0]).unwrap();
        let p = softmax_forward(&x);
        for row in p.data().chunks(3) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn concat_round_trip() {
        let a = Tensor::<f32>::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::<f32>::from_vec(&[2, 3], vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        let cat = concat_forward(&[&a, &b]);
        assert_eq!(cat.shape(), &[2, 5]);
        assert_eq!(cat.data(), &[1.0, 2.0, 5.0, 6.0, 7.0, 3.0, 4.0, 8.0, 9.0, 10.0]);
        let parts = concat_backward(&cat, &[2, 3]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }
}
