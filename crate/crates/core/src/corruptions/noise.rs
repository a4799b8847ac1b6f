//! Stochastic pixel noise generators. All draw from a ChaCha stream seeded
//! per call, scanning pixels row-major, so results are reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::{from_f64, to_f64};
use crate::datasets::Image;
use crate::error::{Error, Result};

/// Adds zero-mean gaussian noise with the given sigma (0-255 scale).
pub fn gaussian_noise(image: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma from the table is positive");
    let mut buf = to_f64(image);
    for v in &mut buf {
        *v += normal.sample(&mut rng);
    }
    from_f64(image.height(), image.width(), &buf)
}

/// Photon-counting noise: each channel value v becomes
/// Poisson(v/255 * photons) / photons * 255. Fewer photons, stronger noise.
pub fn shot_noise(image: &Image, photons: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = to_f64(image);
    for v in &mut buf {
        let lambda = *v / 255.0 * photons;
        if lambda > 0.0 {
            let poisson = Poisson::new(lambda).expect("lambda positive and finite");
            *v = poisson.sample(&mut rng) / photons * 255.0;
        }
    }
    from_f64(image.height(), image.width(), &buf)
}

/// Color salt-and-pepper: each pixel is hit with probability `fraction`;
/// hit pixels get an independent 0-or-255 coin per channel.
pub fn impulse_noise(image: &Image, fraction: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if rng.random::<f64>() < fraction {
                for c in 0..Image::CHANNELS {
                    let v = if rng.random::<bool>() { 255 } else { 0 };
                    out.set(y, x, c, v);
                }
            }
        }
    }
    out
}

/// Multiplicative noise: v * (1 + N(0, sigma)).
pub fn speckle_noise(image: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma from the table is positive");
    let mut buf = to_f64(image);
    for v in &mut buf {
        *v += *v * normal.sample(&mut rng);
    }
    from_f64(image.height(), image.width(), &buf)
}

/// Zeroes random pixels (all three channels) with probability `p`.
pub fn random_zero(image: &Image, p: f64, seed: u64) -> Result<Image> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(format!("zero fraction {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if rng.random::<f64>() < p {
                for c in 0..Image::CHANNELS {
                    out.set(y, x, c, 0);
                }
            }
        }
    }
    Ok(out)
}
