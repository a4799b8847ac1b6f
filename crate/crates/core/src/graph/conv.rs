//! Direct NHWC convolution kernels (standard and depthwise) via im2col.
//!
//! Weight layout is (Kh, Kw, Cin, Cout) for conv2d and (Kh, Kw, Cin) for
//! depthwise, so the flattened weight buffer is already the (K, Cout) matrix
//! the im2col product needs. Parallel loops only ever partition disjoint
//! output regions; accumulation order inside each region is fixed.

use super::shapes::{out_extent, pad_before, Padding};
use crate::par;
use crate::tensor::{Scalar, Tensor};

/// Upper bound on the transient im2col buffer during weight-gradient
/// accumulation; batches larger than this are processed in image chunks.
const COL_BUFFER_BYTES: usize = 64 << 20;

pub struct ConvGeometry {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn resolve(
        x_shape: &[usize],
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        out_c: usize,
    ) -> Self {
        let (batch, in_h, in_w, in_c) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        let out_h = out_extent(in_h, kernel.0, stride.0, padding).expect("validated at build");
        let out_w = out_extent(in_w, kernel.1, stride.1, padding).expect("validated at build");
        ConvGeometry {
            batch,
            in_h,
            in_w,
            in_c,
            out_h,
            out_w,
            out_c,
            kernel,
            stride,
            pad_top: pad_before(in_h, kernel.0, stride.0, padding),
            pad_left: pad_before(in_w, kernel.1, stride.1, padding),
        }
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn patch_len(&self) -> usize {
        self.kernel.0 * self.kernel.1 * self.in_c
    }
}

/// out[i, :] += a * b[:]
#[inline]
fn axpy<T: Scalar>(out: &mut [T], a: T, b: &[T]) {
    if a == T::zero() {
        return;
    }
    for (o, &v) in out.iter_mut().zip(b) {
        *o = *o + a * v;
    }
}

/// C (m x n, zeroed) += A (m x k) * B (k x n)
fn matmul_accum<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            axpy(crow, av, &b[kk * n..(kk + 1) * n]);
        }
    }
}

/// Writes the im2col patch matrix (positions x patch_len) for image `n`.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeometry, n: usize, col: &mut [T]) {
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let frame = &x[n * g.in_h * g.in_w * g.in_c..(n + 1) * g.in_h * g.in_w * g.in_c];
    col.iter_mut().for_each(|v| *v = T::zero());
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = (oy * g.out_w + ox) * g.patch_len();
            for ky in 0..kh {
                let iy = (oy * sh + ky) as isize - g.pad_top as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox * sw + kx) as isize - g.pad_left as isize;
                    if ix < 0 || ix >= g.in_w as isize {
                        continue;
                    }
                    let src = (iy as usize * g.in_w + ix as usize) * g.in_c;
                    let dst = row + (ky * kw + kx) * g.in_c;
                    col[dst..dst + g.in_c].copy_from_slice(&frame[src..src + g.in_c]);
                }
            }
        }
    }
}

/// Scatter-adds a patch-gradient matrix back onto the input gradient frame.
fn col2im_add<T: Scalar>(dcol: &[T], g: &ConvGeometry, dframe: &mut [T]) {
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let row = (oy * g.out_w + ox) * g.patch_len();
            for ky in 0..kh {
                let iy = (oy * sh + ky) as isize - g.pad_top as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox * sw + kx) as isize - g.pad_left as isize;
                    if ix < 0 || ix >= g.in_w as isize {
                        continue;
                    }
                    let dst = (iy as usize * g.in_w + ix as usize) * g.in_c;
                    let src = row + (ky * kw + kx) * g.in_c;
                    for c in 0..g.in_c {
                        dframe[dst + c] = dframe[dst + c] + dcol[src + c];
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    stride: (usize, usize),
    padding: Padding,
) -> Tensor<T> {
    let out_c = w.shape()[3];
    let g = ConvGeometry::resolve(x.shape(), (w.shape()[0], w.shape()[1]), stride, padding, out_c);
    let mut out = Tensor::zeros(&[g.batch, g.out_h, g.out_w, g.out_c]);
    let frame_len = g.positions() * g.out_c;
    let (xd, wd) = (x.data(), w.data());
    par::for_each_chunk_mut(out.data_mut(), frame_len, |n, frame| {
        let mut col = vec![T::zero(); g.positions() * g.patch_len()];
        im2col(xd, &g, n, &mut col);
        matmul_accum(&col, wd, frame, g.positions(), g.patch_len(), g.out_c);
        if let Some(bias) = b {
            for row in frame.chunks_mut(g.out_c) {
                for (v, &bv) in row.iter_mut().zip(bias.data()) {
                    *v = *v + bv;
                }
            }
        }
    });
    out
}

/// Returns (dx if requested, dw, db if requested).
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
    stride: (usize, usize),
    padding: Padding,
    need_dx: bool,
    need_db: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Option<Tensor<T>>) {
    let out_c = w.shape()[3];
    let g = ConvGeometry::resolve(x.shape(), (w.shape()[0], w.shape()[1]), stride, padding, out_c);
    let positions = g.positions();
    let patch = g.patch_len();
    let (xd, wd, dod) = (x.data(), w.data(), dout.data());

    let db = need_db.then(|| {
        let mut db = Tensor::zeros(&[out_c]);
        let d = db.data_mut();
        for row in dod.chunks(out_c) {
            for (acc, &v) in d.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        db
    });

    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
    let mut dw = Tensor::zeros(w.shape());

    let col_bytes = positions * patch * std::mem::size_of::<T>();
    let chunk_images = (COL_BUFFER_BYTES / col_bytes.max(1)).clamp(1, g.batch);
    let mut cols = vec![T::zero(); chunk_images * positions * patch];

    let frame_in = g.in_h * g.in_w * g.in_c;
    let frame_out = positions * out_c;

    for chunk_start in (0..g.batch).step_by(chunk_images) {
        let chunk = (g.batch - chunk_start).min(chunk_images);
        let col_stride = positions * patch;

        // Per-image pass: im2col plus (optionally) the input gradient.
        {
            let dx_slice = dx.as_mut().map(|t| {
                let range = chunk_start * frame_in..(chunk_start + chunk) * frame_in;
                &mut t.data_mut()[range]
            });
            let cols_chunk = &mut cols[..chunk * col_stride];
            match dx_slice {
                Some(dxs) => {
                    // Zip disjoint per-image regions of cols and dx.
                    let pairs: Vec<(&mut [T], &mut [T])> = cols_chunk
                        .chunks_mut(col_stride)
                        .zip(dxs.chunks_mut(frame_in))
                        .collect();
                    let run = |(i, (col, dframe)): (usize, (&mut [T], &mut [T]))| {
                        let n = chunk_start + i;
                        im2col(xd, &g, n, col);
                        let dout_frame = &dod[n * frame_out..(n + 1) * frame_out];
                        let mut dcol = vec![T::zero(); col_stride];
                        // dcol[p, k] = sum_j dout[p, j] * w[k, j]
                        for p in 0..positions {
                            let drow = &dout_frame[p * out_c..(p + 1) * out_c];
                            let crow = &mut dcol[p * patch..(p + 1) * patch];
                            for (kk, cv) in crow.iter_mut().enumerate() {
                                let wrow = &wd[kk * out_c..(kk + 1) * out_c];
                                let mut acc = T::zero();
                                for (dv, wv) in drow.iter().zip(wrow) {
                                    acc = acc + *dv * *wv;
                                }
                                *cv = acc;
                            }
                        }
                        col2im_add(&dcol, &g, dframe);
                    };
                    #[cfg(feature = "parallel")]
                    {
                        use rayon::prelude::*;
                        pairs.into_par_iter().enumerate().for_each(run);
                    }
                    #[cfg(not(feature = "parallel"))]
                    pairs.into_iter().enumerate().for_each(run);
                }
                None => {
                    par::for_each_chunk_mut(cols_chunk, col_stride, |i, col| {
                        im2col(xd, &g, chunk_start + i, col);
                    });
                }
            }
        }

        // Weight gradient: each task owns one patch row of dw.
        let cols_ref = &cols;
        par::for_each_chunk_mut(dw.data_mut(), out_c, |kk, dwrow| {
            for i in 0..chunk {
                let n = chunk_start + i;
                let col = &cols_ref[i * col_stride..(i + 1) * col_stride];
                let dout_frame = &dod[n * frame_out..(n + 1) * frame_out];
                for p in 0..positions {
                    axpy(dwrow, col[p * patch + kk], &dout_frame[p * out_c..(p + 1) * out_c]);
                }
            }
        });
    }

    (dx, dw, db)
}

pub fn depthwise_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    stride: (usize, usize),
    padding: Padding,
) -> Tensor<T> {
    let c = x.shape()[3];
    let g = ConvGeometry::resolve(x.shape(), (w.shape()[0], w.shape()[1]), stride, padding, c);
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let mut out = Tensor::zeros(&[g.batch, g.out_h, g.out_w, c]);
    let frame_out = g.positions() * c;
    let frame_in = g.in_h * g.in_w * c;
    let (xd, wd) = (x.data(), w.data());
    par::for_each_chunk_mut(out.data_mut(), frame_out, |n, frame| {
        let src = &xd[n * frame_in..(n + 1) * frame_in];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let orow = &mut frame[(oy * g.out_w + ox) * c..(oy * g.out_w + ox + 1) * c];
                for ky in 0..kh {
                    let iy = (oy * sh + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * sw + kx) as isize - g.pad_left as isize;
                        if ix < 0 || ix >= g.in_w as isize {
                            continue;
                        }
                        let xrow = &src[(iy as usize * g.in_w + ix as usize) * c..];
                        let wrow = &wd[(ky * kw + kx) * c..(ky * kw + kx + 1) * c];
                        for ch in 0..c {
                            orow[ch] = orow[ch] + xrow[ch] * wrow[ch];
                        }
                    }
                }
                if let Some(bias) = b {
                    for (v, &bv) in orow.iter_mut().zip(bias.data()) {
                        *v = *v + bv;
                    }
                }
            }
        }
    });
    out
}

pub fn depthwise_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dout: &Tensor<T>,
    stride: (usize, usize),
    padding: Padding,
    need_dx: bool,
    need_db: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Option<Tensor<T>>) {
    let c = x.shape()[3];
    let g = ConvGeometry::resolve(x.shape(), (w.shape()[0], w.shape()[1]), stride, padding, c);
    let (kh, kw) = g.kernel;
    let (sh, sw) = g.stride;
    let frame_out = g.positions() * c;
    let frame_in = g.in_h * g.in_w * c;
    let (xd, wd, dod) = (x.data(), w.data(), dout.data());

    let db = need_db.then(|| {
        let mut db = Tensor::zeros(&[c]);
        let d = db.data_mut();
        for row in dod.chunks(c) {
            for (acc, &v) in d.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        db
    });

    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
    if let Some(dxt) = dx.as_mut() {
        par::for_each_chunk_mut(dxt.data_mut(), frame_in, |n, dframe| {
            let dsrc = &dod[n * frame_out..(n + 1) * frame_out];
            for oy in 0..g.out_h {
                for ox in 0..g.out_w {
                    let drow = &dsrc[(oy * g.out_w + ox) * c..(oy * g.out_w + ox + 1) * c];
                    for ky in 0..kh {
                        let iy = (oy * sh + ky) as isize - g.pad_top as isize;
                        if iy < 0 || iy >= g.in_h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * sw + kx) as isize - g.pad_left as isize;
                            if ix < 0 || ix >= g.in_w as isize {
                                continue;
                            }
                            let dst = (iy as usize * g.in_w + ix as usize) * c;
                            let wrow = &wd[(ky * kw + kx) * c..(ky * kw + kx + 1) * c];
                            for ch in 0..c {
                                dframe[dst + ch] = dframe[dst + ch] + drow[ch] * wrow[ch];
                            }
                        }
                    }
                }
            }
        });
    }

    let mut dw = Tensor::zeros(w.shape());
    par::for_each_chunk_mut(dw.data_mut(), c, |kidx, dwrow| {
        let (ky, kx) = (kidx / kw, kidx % kw);
        for n in 0..g.batch {
            let src = &xd[n * frame_in..(n + 1) * frame_in];
            let dsrc = &dod[n * frame_out..(n + 1) * frame_out];
            for oy in 0..g.out_h {
                let iy = (oy * sh + ky) as isize - g.pad_top as isize;
                if iy < 0 || iy >= g.in_h as isize {
                    continue;
                }
                for ox in 0..g.out_w {
                    let ix = (ox * sw + kx) as isize - g.pad_left as isize;
                    if ix < 0 || ix >= g.in_w as isize {
                        continue;
                    }
                    let xrow = &src[(iy as usize * g.in_w + ix as usize) * c..];
                    let drow = &dsrc[(oy * g.out_w + ox) * c..(oy * g.out_w + ox + 1) * c];
                    for ch in 0..c {
                        dwrow[ch] = dwrow[ch] + xrow[ch] * drow[ch];
                    }
                }
            }
        }
    });

    (dx, dw, db)
}
