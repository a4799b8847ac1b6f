//! Spatial pooling kernels. Padded cells are excluded from both the max
//! candidates and the average divisor.

use super::shapes::{out_extent, pad_before, Padding};
use crate::par;
use crate::tensor::{Scalar, Tensor};

struct PoolGeometry {
    batch: usize,
    in_h: usize,
    in_w: usize,
    c: usize,
    out_h: usize,
    out_w: usize,
    size: (usize, usize),
    stride: (usize, usize),
    pad_top: usize,
    pad_left: usize,
}

impl PoolGeometry {
    fn resolve(
        x_shape: &[usize],
        size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Self {
        let (batch, in_h, in_w, c) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
        PoolGeometry {
            batch,
            in_h,
            in_w,
            c,
            out_h: out_extent(in_h, size.0, stride.0, padding).expect("validated at build"),
            out_w: out_extent(in_w, size.1, stride.1, padding).expect("validated at build"),
            size,
            stride,
            pad_top: pad_before(in_h, size.0, stride.0, padding),
            pad_left: pad_before(in_w, size.1, stride.1, padding),
        }
    }

    /// In-bounds input coordinate range for output cell (oy, ox).
    fn window(&self, oy: usize, ox: usize) -> (usize, usize, usize, usize) {
        let y0 = (oy * self.stride.0) as isize - self.pad_top as isize;
        let x0 = (ox * self.stride.1) as isize - self.pad_left as isize;
        let ys = y0.max(0) as usize;
        let xs = x0.max(0) as usize;
        let ye = ((y0 + self.size.0 as isize) as usize).min(self.in_h);
        let xe = ((x0 + self.size.1 as isize) as usize).min(self.in_w);
        (ys, ye, xs, xe)
    }
}

/// Forward max pooling; `argmax` records the winning spatial cell (iy*W+ix)
/// for every output element, for gradient routing.
pub fn max_pool_forward<T: Scalar>(
    x: &Tensor<T>,
    size: (usize, usize),
    stride: (usize, usize),
    padding: Padding,
) -> (Tensor<T>, Vec<u32>) {
    let g = PoolGeometry::resolve(x.shape(), size, stride, padding);
    let frame_out = g.out_h * g.out_w * g.c;
    let frame_in = g.in_h * g.in_w * g.c;
    let mut out = Tensor::zeros(&[g.batch, g.out_h, g.out_w, g.c]);
    let mut argmax = vec![0u32; g.batch * frame_out];
    let xd = x.data();

    // Disjoint per-image regions of out and argmax, zipped.
    let pairs: Vec<(&mut [T], &mut [u32])> = out
        .data_mut()
        .chunks_mut(frame_out)
        .zip(argmax.chunks_mut(frame_out))
        .collect();
    let run = |(n, (frame, amax)): (usize, (&mut [T], &mut [u32]))| {
        let src = &xd[n * frame_in..(n + 1) * frame_in];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let (ys, ye, xs, xe) = g.window(oy, ox);
                let obase = (oy * g.out_w + ox) * g.c;
                for c in 0..g.c {
                    let mut best = T::neg_infinity();
                    let mut best_cell = 0u32;
                    for iy in ys..ye {
                        for ix in xs..xe {
                            let v = src[(iy * g.in_w + ix) * g.c + c];
                            if v > best {
                                best = v;
                                best_cell = (iy * g.in_w + ix) as u32;
                            }
                        }
                    }
                    frame[obase + c] = best;
                    amax[obase + c] = best_cell;
                }
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pairs.into_par_iter().enumerate().for_each(run);
    }
    #[cfg(not(feature = "parallel"))]
    pairs.into_iter().enumerate().for_each(run);

    (out, argmax)
}

pub fn max_pool_backward<T: Scalar>(
    x_shape: &[usize],
    dout: &Tensor<T>,
    argmax: &[u32],
) -> Tensor<T> {
    let c = x_shape[3];
    let frame_in = x_shape[1] * x_shape[2] * c;
    let frame_out = dout.len() / x_shape[0];
    let dod = dout.data();
    let mut dx = Tensor::zeros(x_shape);
    par::for_each_chunk_mut(dx.data_mut(), frame_in, |n, dframe| {
        let dsrc = &dod[n * frame_out..(n + 1) * frame_out];
        let asrc = &argmax[n * frame_out..(n + 1) * frame_out];
        for (i, &dv) in dsrc.iter().enumerate() {
            let cell = asrc[i] as usize;
            let ch = i % c;
            dframe[cell * c + ch] = dframe[cell * c + ch] + dv;
        }
    });
    dx
}

pub fn avg_pool_forward<T: Scalar>(
    x: &Tensor<T>,
    size: (usize, usize),
    stride: (usize, usize),
    padding: Padding,
) -> Tensor<T> {
    let g = PoolGeometry::resolve(x.shape(), size, stride, padding);
    let frame_out = g.out_h * g.out_w * g.c;
    let frame_in = g.in_h * g.in_w * g.c;
    let mut out = Tensor::zeros(&[g.batch, g.out_h, g.out_w, g.c]);
    let xd = x.data();
    par::for_each_chunk_mut(out.data_mut(), frame_out, |n, frame| {
        let src = &xd[n * frame_in..(n + 1) * frame_in];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let (ys, ye, xs, xe) = g.window(oy, ox);
                let count = T::from_f64(((ye - ys) * (xe - xs)) as f64);
                let obase = (oy * g.out_w + ox) * g.c;
                for c in 0..g.c {
                    let mut acc = T::zero();
                    for iy in ys..ye {
                        for ix in xs..xe {
                            acc = acc + src[(iy * g.in_w + ix) * g.c + c];
                        }
                    }
                    frame[obase + c] = acc / count;
                }
            }
        }
    });
    out
}

pub fn avg_pool_backward<T: Scalar>(
    x_shape: &[usize],
    dout: &Tensor<T>,
    size: (usize, usize),
    stride: (usize, usize),
    padding: Padding,
) -> Tensor<T> {
    let g = PoolGeometry::resolve(x_shape, size, stride, padding);
    let frame_out = g.out_h * g.out_w * g.c;
    let frame_in = g.in_h * g.in_w * g.c;
    let dod = dout.data();
    let mut dx = Tensor::zeros(x_shape);
    par::for_each_chunk_mut(dx.data_mut(), frame_in, |n, dframe| {
        let dsrc = &dod[n * frame_out..(n + 1) * frame_out];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let (ys, ye, xs, xe) = g.window(oy, ox);
                let count = T::from_f64(((ye - ys) * (xe - xs)) as f64);
                let obase = (oy * g.out_w + ox) * g.c;
                for c in 0..g.c {
                    let share = dsrc[obase + c] / count;
                    for iy in ys..ye {
                        for ix in xs..xe {
                            let idx = (iy * g.in_w + ix) * g.c + c;
                            dframe[idx] = dframe[idx] + share;
                        }
                    }
                }
            }
        }
    });
    dx
}

pub fn global_avg_pool_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (batch, h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let spatial = h * w;
    let n = T::from_f64(spatial as f64);
    let frame_in = spatial * c;
    let xd = x.data();
    let mut out = Tensor::zeros(&[batch, c]);
    par::for_each_chunk_mut(out.data_mut(), c, |b, row| {
        let src = &xd[b * frame_in..(b + 1) * frame_in];
        for cell in src.chunks(c) {
            for (acc, &v) in row.iter_mut().zip(cell) {
                *acc = *acc + v;
            }
        }
        for v in row.iter_mut() {
            *v = *v / n;
        }
    });
    out
}

pub fn global_avg_pool_backward<T: Scalar>(x_shape: &[usize], dout: &Tensor<T>) -> Tensor<T> {
    let (h, w, c) = (x_shape[1], x_shape[2], x_shape[3]);
    let spatial = T::from_f64((h * w) as f64);
    let frame_in = h * w * c;
    let dod = dout.data();
    let mut dx = Tensor::zeros(x_shape);
    par::for_each_chunk_mut(dx.data_mut(), frame_in, |n, dframe| {
        let drow = &dod[n * c..(n + 1) * c];
        for cell in dframe.chunks_mut(c) {
            for (v, &dv) in cell.iter_mut().zip(drow) {
                *v = dv / spatial;
            }
        }
    });
    dx
}
