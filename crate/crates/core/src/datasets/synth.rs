//! Synthetic fallback dataset: parametric renderings of filled shapes at
//! varied position, scale, and color. CI-friendly stand-in when the CIFAR-10
//! archive is not on disk.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Image, LabeledImageSet};
use crate::error::{Error, Result};

const SIDE: usize = 32;
const MAX_CLASSES: usize = 10;

fn inside(class: usize, dx: f64, dy: f64, r: f64) -> bool {
    match class {
        0 => dx * dx + dy * dy <= r * r,                       // disc
        1 => dx.abs().max(dy.abs()) <= r * 0.8,                // square
        2 => dy >= -r && dy <= r && dx.abs() <= (dy + r) / 2.0, // triangle
        3 => (dx.abs() <= r / 3.0 && dy.abs() <= r) || (dy.abs() <= r / 3.0 && dx.abs() <= r), // plus
        4 => {
            let d2 = dx * dx + dy * dy;
            d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r)        // ring
        }
        5 => dy.abs() <= r / 3.0 && dx.abs() <= r,             // horizontal bar
        6 => dx.abs() <= r / 3.0 && dy.abs() <= r,             // vertical bar
        7 => dx.abs() + dy.abs() <= r,                         // diamond
        8 => {
            let cell = (r / 2.0).max(1.0);
            dx.abs().max(dy.abs()) <= r
                && ((dx / cell).floor() as i64 + (dy / cell).floor() as i64).rem_euclid(2) == 0 // checker
        }
        9 => (dx.abs() - dy.abs()).abs() <= r / 3.0 && dx.abs().max(dy.abs()) <= r, // x-cross
        _ => unreachable!("class count validated"),
    }
}

/// Deterministic, class-balanced (within 1) synthetic set of `n` 32x32
/// images over `classes` shape classes.
pub fn synth_shapes(n: usize, classes: usize, seed: u64) -> Result<LabeledImageSet> {
    if classes == 0 || classes > MAX_CLASSES {
        return Err(Error::arg(format!(
            "classes must be in 1..={MAX_CLASSES}, got {classes}"
        )));
    }
    if n < classes {
        return Err(Error::arg(format!(
            "need at least one sample per class ({classes}), got n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let cx = 16.0 + rng.random_range(-5.0..5.0);
        let cy = 16.0 + rng.random_range(-5.0..5.0);
        let r = rng.random_range(6.0..11.0);
        // dark-ish background, bright foreground: keeps classes separable
        // under moderate corruption
        let bg: [f64; 3] = [
            rng.random_range(0.0..90.0),
            rng.random_range(0.0..90.0),
            rng.random_range(0.0..90.0),
        ];
        let fg: [f64; 3] = [
            rng.random_range(150.0..256.0),
            rng.random_range(150.0..256.0),
            rng.random_range(150.0..256.0),
        ];
        let mut img = Image::zeros(SIDE, SIDE);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let color = if inside(class, dx, dy, r) { &fg } else { &bg };
                for c in 0..3 {
                    img.set(y, x, c, color[c].min(255.0) as u8);
                }
            }
        }
        images.push(img);
        labels.push(class as u8);
    }
    LabeledImageSet::new(images, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let a = synth_shapes(100, 10, 42).unwrap();
        let b = synth_shapes(100, 10, 42).unwrap();
        assert_eq!(a.labels, b.labels);
        assert!(a
            .images
            .iter()
            .zip(&b.images)
            .all(|(x, y)| x.data() == y.data()));
        let c = synth_shapes(100, 10, 43).unwrap();
        assert!(a.images.iter().zip(&c.images).any(|(x, y)| x.data() != y.data()));
    }

    #[test]
    fn classes_balanced_within_one() {
        let set = synth_shapes(100, 10, 1).unwrap();
        assert_eq!(set.class_counts(), vec![10; 10]);
        let set = synth_shapes(101, 10, 1).unwrap();
        let counts = set.class_counts();
        assert_eq!(counts.iter().max().unwrap() - counts.iter().min().unwrap(), 1);
    }

    #[test]
    fn rejects_more_classes_than_samples() {
        assert!(synth_shapes(5, 10, 0).is_err());
        assert!(synth_shapes(0, 1, 0).is_err());
    }
}
