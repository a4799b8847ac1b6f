//! Deterministic photometric adjustments.

use super::{from_f64, to_f64};
use crate::datasets::Image;

/// Additive brightness shift on every channel.
pub fn brightness(image: &Image, delta: f64) -> Image {
    let mut buf = to_f64(image);
    for v in &mut buf {
        *v += delta;
    }
    from_f64(image.height(), image.width(), &buf)
}

/// Scales deviations from the per-channel image mean by `factor` (< 1
/// washes the image out).
pub fn contrast(image: &Image, factor: f64) -> Image {
    let mut buf = to_f64(image);
    let n = (image.height() * image.width()) as f64;
    let mut means = [0.0f64; 3];
    for px in buf.chunks(3) {
        for (m, &v) in means.iter_mut().zip(px) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    for px in buf.chunks_mut(3) {
        for (v, m) in px.iter_mut().zip(&means) {
            *v = (*v - m) * factor + m;
        }
    }
    from_f64(image.height(), image.width(), &buf)
}

/// Scales deviations from the pixel's gray value: factor > 1 saturates,
/// factor < 1 desaturates.
pub fn saturate(image: &Image, factor: f64) -> Image {
    let mut buf = to_f64(image);
    for px in buf.chunks_mut(3) {
        let gray = (px[0] + px[1] + px[2]) / 3.0;
        for v in px.iter_mut() {
            *v = gray + (*v - gray) * factor;
        }
    }
    from_f64(image.height(), image.width(), &buf)
}
