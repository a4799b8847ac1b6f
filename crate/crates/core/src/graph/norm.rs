//! Batch normalization over the trailing (channel/feature) axis.
//!
//! Works for both (B, H, W, C) and (B, F) activations: statistics reduce over
//! every axis except the last. Four per-channel parameter vectors: scale
//! (gamma), shift (beta), running mean, running variance. Variance is biased
//! (1/N) both for normalization and for the running estimate.

use crate::par;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug)]
pub struct BnCache<T: Scalar> {
    pub x_hat: Tensor<T>,
    pub inv_std: Vec<T>,
}

pub struct BnForward<T: Scalar> {
    pub out: Tensor<T>,
    pub cache: Option<BnCache<T>>,
    /// (batch mean, batch variance) per channel, training mode only.
    pub batch_stats: Option<(Vec<T>, Vec<T>)>,
}

fn channel_sums<T: Scalar>(data: &[T], channels: usize) -> Vec<T> {
    par::map_indexed(channels, |c| {
        let mut acc = T::zero();
        let mut i = c;
        while i < data.len() {
            acc = acc + data[i];
            i += channels;
        }
        acc
    })
}

pub fn bn_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    epsilon: f64,
    training: bool,
) -> BnForward<T> {
    let channels = *x.shape().last().unwrap();
    let reduce_n = x.len() / channels;
    let n = T::from_f64(reduce_n as f64);
    let eps = T::from_f64(epsilon);
    let xd = x.data();

    let (mean, var): (Vec<T>, Vec<T>) = if training {
        let mean: Vec<T> = channel_sums(xd, channels).into_iter().map(|s| s / n).collect();
        let var: Vec<T> = par::map_indexed(channels, |c| {
            let m = mean[c];
            let mut acc = T::zero();
            let mut i = c;
            while i < xd.len() {
                let d = xd[i] - m;
                acc = acc + d * d;
                i += channels;
            }
            acc / n
        });
        (mean, var)
    } else {
        (running_mean.data().to_vec(), running_var.data().to_vec())
    };

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();

    let mut out = Tensor::zeros(x.shape());
    let mut x_hat = training.then(|| Tensor::zeros(x.shape()));
    let (gd, bd) = (gamma.data(), beta.data());
    match x_hat.as_mut() {
        Some(xh) => {
            // Fill x_hat rows in parallel, then the affine output.
            let (mean_r, inv_r) = (&mean, &inv_std);
            par::for_each_chunk_mut(xh.data_mut(), channels, |row_idx, row| {
                let src = &xd[row_idx * channels..(row_idx + 1) * channels];
                for c in 0..channels {
                    row[c] = (src[c] - mean_r[c]) * inv_r[c];
                }
            });
            let xhd = xh.data();
            par::for_each_chunk_mut(out.data_mut(), channels, |row_idx, row| {
                let src = &xhd[row_idx * channels..(row_idx + 1) * channels];
                for c in 0..channels {
                    row[c] = gd[c] * src[c] + bd[c];
                }
            });
        }
        None => {
            let (mean_r, inv_r) = (&mean, &inv_std);
            par::for_each_chunk_mut(out.data_mut(), channels, |row_idx, row| {
                let src = &xd[row_idx * channels..(row_idx + 1) * channels];
                for c in 0..channels {
                    row[c] = gd[c] * (src[c] - mean_r[c]) * inv_r[c] + bd[c];
                }
            });
        }
    }

    BnForward {
        out,
        cache: x_hat.map(|x_hat| BnCache {
            x_hat,
            inv_std: inv_std.clone(),
        }),
        batch_stats: training.then(|| (mean, var)),
    }
}

/// Returns (dx, dgamma, dbeta). Training-mode statistics only.
pub fn bn_backward<T: Scalar>(
    dout: &Tensor<T>,
    gamma: &Tensor<T>,
    cache: &BnCache<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let channels = *dout.shape().last().unwrap();
    let reduce_n = dout.len() / channels;
    let n = T::from_f64(reduce_n as f64);
    let (dod, xhd, gd) = (dout.data(), cache.x_hat.data(), gamma.data());

    // s1[c] = sum dy, s2[c] = sum dy * x_hat
    let sums: Vec<(T, T)> = par::map_indexed(channels, |c| {
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        let mut i = c;
        while i < dod.len() {
            s1 = s1 + dod[i];
            s2 = s2 + dod[i] * xhd[i];
            i += channels;
        }
        (s1, s2)
    });

    let mut dgamma = Tensor::zeros(&[channels]);
    let mut dbeta = Tensor::zeros(&[channels]);
    for c in 0..channels {
        dgamma.data_mut()[c] = sums[c].1;
        dbeta.data_mut()[c] = sums[c].0;
    }

    let inv = &cache.inv_std;
    let mut dx = Tensor::zeros(dout.shape());
    par::for_each_chunk_mut(dx.data_mut(), channels, |row_idx, row| {
        let base = row_idx * channels;
        for c in 0..channels {
            let (s1, s2) = sums[c];
            let dy = dod[base + c];
            row[c] = gd[c] * inv[c] * (dy - s1 / n - xhd[base + c] * s2 / n);
        }
    });

    (dx, dgamma, dbeta)
}

/// running <- momentum * running + (1 - momentum) * batch_stat
pub fn update_running<T: Scalar>(running: &mut Tensor<T>, batch_stat: &[T], momentum: f64) {
    let m = T::from_f64(momentum);
    let one_minus = T::one() - m;
    for (r, &s) in running.data_mut().iter_mut().zip(batch_stat) {
        *r = m * *r + one_minus * s;
    }
}
