//! Fully connected layer kernels. Weights are (in, out) row-major.

use crate::par;
use crate::tensor::{Scalar, Tensor};

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Tensor<T> {
    let (batch, in_f) = (x.shape()[0], x.shape()[1]);
    let out_f = w.shape()[1];
    let mut out = Tensor::zeros(&[batch, out_f]);
    let (xd, wd) = (x.data(), w.data());
    par::for_each_chunk_mut(out.data_mut(), out_f, |n, row| {
        if let Some(bias) = b {
            row.copy_from_slice(bias.data());
        }
        let xrow = &xd[n * in_f..(n + 1) * in_f];
        for (k, &xv) in xrow.iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            let wrow = &wd[k * out_f..(k + 1) * out_f];
            for (o, &wv) in row.iter_mut().zip(wrow) {
                *o = *o + xv * wv;
            }
        }
    });
    out
}

/// Returns (dx if requested, dw, db if requested).
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
    need_dx: bool,
    need_db: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Option<Tensor<T>>) {
    let (batch, in_f) = (x.shape()[0], x.shape()[1]);
    let out_f = w.shape()[1];
    let (xd, wd, dod) = (x.data(), w.data(), dout.data());

    let db = need_db.then(|| {
        let mut db = Tensor::zeros(&[out_f]);
        let d = db.data_mut();
        for row in dod.chunks(out_f) {
            for (acc, &v) in d.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        db
    });

    let mut dx = need_dx.then(|| Tensor::zeros(&[batch, in_f]));
    if let Some(dxt) = dx.as_mut() {
        par::for_each_chunk_mut(dxt.data_mut(), in_f, |n, drow| {
            let dorow = &dod[n * out_f..(n + 1) * out_f];
            for (k, dv) in drow.iter_mut().enumerate() {
                let wrow = &wd[k * out_f..(k + 1) * out_f];
                let mut acc = T::zero();
                for (dov, wv) in dorow.iter().zip(wrow) {
                    acc = acc + *dov * *wv;
                }
                *dv = acc;
            }
        });
    }

    let mut dw = Tensor::zeros(w.shape());
    par::for_each_chunk_mut(dw.data_mut(), out_f, |k, dwrow| {
        for n in 0..batch {
            let xv = xd[n * in_f + k];
            if xv == T::zero() {
                continue;
            }
            let dorow = &dod[n * out_f..(n + 1) * out_f];
            for (acc, &dv) in dwrow.iter_mut().zip(dorow) {
                *acc = *acc + xv * dv;
            }
        }
    });

    (dx, dw, db)
}
