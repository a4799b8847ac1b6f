//! Geometric distortions: pixelation and elastic warping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blur::{bilinear, smooth_field};
use super::{from_f64, to_f64};
use crate::datasets::Image;

/// Box-averages `block`-sized tiles and replicates them back (block 1 is
/// the identity). Edge tiles shrink when the size does not divide evenly.
pub fn pixelate(image: &Image, block: usize) -> Image {
    if block <= 1 {
        return image.clone();
    }
    let (h, w) = (image.height(), image.width());
    let mut out = Image::zeros(h, w);
    let mut y0 = 0;
    while y0 < h {
        let y1 = (y0 + block).min(h);
        let mut x0 = 0;
        while x0 < w {
            let x1 = (x0 + block).min(w);
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            let mut mean = [0.0f64; 3];
            for y in y0..y1 {
                for x in x0..x1 {
                    for (m, c) in mean.iter_mut().zip(0..3) {
                        *m += image.get(y, x, c) as f64;
                    }
                }
            }
            let px: Vec<u8> = mean
                .iter()
                .map(|m| (m / count).round().clamp(0.0, 255.0) as u8)
                .collect();
            for y in y0..y1 {
                for x in x0..x1 {
                    for c in 0..3 {
                        out.set(y, x, c, px[c]);
                    }
                }
            }
            x0 = x1;
        }
        y0 = y1;
    }
    out
}

/// Gaussian-smoothed random displacement field (scale `alpha` pixels,
/// smoothing `sigma`), sampled bilinearly.
pub fn elastic_transform(image: &Image, alpha: f64, sigma: f64, seed: u64) -> Image {
    let (h, w) = (image.height(), image.width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dy: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut dx: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    smooth_field(&mut dy, h, w, sigma);
    smooth_field(&mut dx, h, w, sigma);
    let src = to_f64(image);
    let mut out = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let sy = y as f64 + dy[y * w + x] * alpha;
            let sx = x as f64 + dx[y * w + x] * alpha;
            let base = (y * w + x) * 3;
            for c in 0..3 {
                out[base + c] = bilinear(&src, h, w, sy, sx, c);
            }
        }
    }
    from_f64(h, w, &out)
}
