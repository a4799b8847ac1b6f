//! Closed-form blur kernels: gaussian (separable, truncated at 3 sigma),
//! defocus (disk), motion (oriented line), zoom (averaged center-scaled
//! resamples). Borders mirror-reflect.

use super::{from_f64, to_f64};
use crate::datasets::Image;

/// Mirror reflection: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Dense 2D convolution with a (kh x kw) kernel centered on each pixel.
fn convolve(image: &Image, kernel: &[f64], kh: usize, kw: usize) -> Image {
    let (h, w) = (image.height(), image.width());
    let src = to_f64(image);
    let mut out = vec![0.0f64; src.len()];
    let (cy, cx) = (kh as isize / 2, kw as isize / 2);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for ky in 0..kh {
                let iy = reflect(y as isize + ky as isize - cy, h);
                for kx in 0..kw {
                    let kv = kernel[ky * kw + kx];
                    if kv == 0.0 {
                        continue;
                    }
                    let ix = reflect(x as isize + kx as isize - cx, w);
                    let base = (iy * w + ix) * 3;
                    for c in 0..3 {
                        acc[c] += kv * src[base + c];
                    }
                }
            }
            let base = (y * w + x) * 3;
            out[base..base + 3].copy_from_slice(&acc);
        }
    }
    from_f64(h, w, &out)
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable gaussian blur, kernel truncated at 3 sigma.
pub fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    let taps = gaussian_taps(sigma);
    let horizontal = convolve(image, &taps, 1, taps.len());
    convolve(&horizontal, &taps, taps.len(), 1)
}

/// Smooths a single-channel f64 field in place (used by elastic transform).
pub(crate) fn smooth_field(field: &mut Vec<f64>, h: usize, w: usize, sigma: f64) {
    let taps = gaussian_taps(sigma);
    let r = taps.len() / 2;
    let mut tmp = vec![0.0f64; field.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let ix = reflect(x as isize + k as isize - r as isize, w);
                acc += t * field[y * w + ix];
            }
            tmp[y * w + x] = acc;
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let iy = reflect(y as isize + k as isize - r as isize, h);
                acc += t * tmp[iy * w + x];
            }
            field[y * w + x] = acc;
        }
    }
}

/// Uniform disk kernel of the given radius.
pub fn defocus_blur(image: &Image, radius: f64) -> Image {
    let r = radius.ceil() as isize;
    let side = (2 * r + 1) as usize;
    let mut kernel = vec![0.0f64; side * side];
    let mut count = 0.0;
    for y in -r..=r {
        for x in -r..=r {
            if (y * y + x * x) as f64 <= radius * radius {
                kernel[(y + r) as usize * side + (x + r) as usize] = 1.0;
                count += 1.0;
            }
        }
    }
    for v in &mut kernel {
        *v /= count;
    }
    convolve(image, &kernel, side, side)
}

/// Diagonal line kernel of odd length (fixed 45-degree direction keeps the
/// kind seed-free).
pub fn motion_blur(image: &Image, length: usize) -> Image {
    let side = length;
    let mut kernel = vec![0.0f64; side * side];
    for i in 0..length {
        kernel[i * side + i] = 1.0 / length as f64;
    }
    convolve(image, &kernel, side, side)
}

#[inline]
pub(crate) fn bilinear(src: &[f64], h: usize, w: usize, y: f64, x: f64, c: usize) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let at = |yy: usize, xx: usize| src[(yy * w + xx) * 3 + c];
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Averages bilinear resamples scaled about the center by factors
/// 1.0, 1.01, ..., max_zoom.
pub fn zoom_blur(image: &Image, max_zoom: f64) -> Image {
    let (h, w) = (image.height(), image.width());
    let src = to_f64(image);
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let mut factors = Vec::new();
    let mut f = 1.0;
    while f <= max_zoom + 1e-9 {
        factors.push(f);
        f += 0.01;
    }
    let mut acc = vec![0.0f64; src.len()];
    for &factor in &factors {
        for y in 0..h {
            for x in 0..w {
                let sy = cy + (y as f64 - cy) / factor;
                let sx = cx + (x as f64 - cx) / factor;
                let base = (y * w + x) * 3;
                for c in 0..3 {
                    acc[base + c] += bilinear(&src, h, w, sy, sx, c);
                }
            }
        }
    }
    let n = factors.len() as f64;
    for v in &mut acc {
        *v /= n;
    }
    from_f64(h, w, &acc)
}
