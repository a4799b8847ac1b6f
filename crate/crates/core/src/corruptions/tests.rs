use super::*;
use crate::datasets::synth_shapes;
use proptest::prelude::*;

fn gradient_image(side: usize) -> Image {
    let mut img = Image::zeros(side, side);
    for y in 0..side {
        for x in 0..side {
            img.set(y, x, 0, (x * 255 / (side - 1)) as u8);
            img.set(y, x, 1, (y * 255 / (side - 1)) as u8);
            img.set(y, x, 2, ((x + y) * 255 / (2 * side - 2)) as u8);
        }
    }
    img
}

fn constant_image(side: usize, v: u8) -> Image {
    let mut img = Image::zeros(side, side);
    img.data_mut().fill(v);
    img
}

#[test]
fn pixelate_block_one_is_identity() {
    let img = gradient_image(32);
    assert_eq!(pixelate(&img, 1), img);
    let c = Corruption::new(CorruptionKind::Pixelate, 0, 0).unwrap();
    assert_eq!(apply(&img, &c).unwrap(), img);
}

#[test]
fn severity_zero_rejected_except_pixelate() {
    assert!(Corruption::new(CorruptionKind::Pixelate, 0, 0).is_ok());
    assert!(Corruption::new(CorruptionKind::GaussianNoise, 0, 0).is_err());
    assert!(Corruption::new(CorruptionKind::GaussianNoise, 6, 0).is_err());
}

#[test]
fn gaussian_noise_is_zero_mean_across_seeds() {
    // severity 3 on a mid-gray image; mean offset per seed within +-1.5
    let img = constant_image(32, 128);
    for seed in 0..30u64 {
        let c = Corruption::new(CorruptionKind::GaussianNoise, 3, seed).unwrap();
        let out = apply(&img, &c).unwrap();
        let diff: f64 = out
            .data()
            .iter()
            .zip(img.data())
            .map(|(&a, &b)| a as f64 - b as f64)
            .sum::<f64>()
            / img.data().len() as f64;
        assert!(diff.abs() < 1.5, "seed {seed}: mean shift {diff}");
    }
}

#[test]
fn impulse_noise_hits_the_requested_pixel_fraction() {
    // interior-valued pixels always change when hit
    let img = constant_image(32, 100);
    for severity in 1..=5u8 {
        let p = severity::impulse_fraction(severity);
        let c = Corruption::new(CorruptionKind::ImpulseNoise, severity, 7).unwrap();
        let out = apply(&img, &c).unwrap();
        let mut altered = 0usize;
        for y in 0..32 {
            for x in 0..32 {
                if out.pixel(y, x) != img.pixel(y, x) {
                    altered += 1;
                }
            }
        }
        let fraction = altered as f64 / 1024.0;
        assert!(
            (fraction - p).abs() <= 0.02,
            "severity {severity}: altered fraction {fraction} vs p={p}"
        );
    }
}

#[test]
fn random_zero_identity_and_saturation_ends() {
    let img = gradient_image(32);
    assert_eq!(random_zero(&img, 0.0, 9).unwrap(), img);
    let all_zero = random_zero(&img, 1.0, 9).unwrap();
    assert!(all_zero.data().iter().all(|&v| v == 0));
    assert!(random_zero(&img, -0.1, 0).is_err());
    assert!(random_zero(&img, 1.1, 0).is_err());
}

#[test]
fn random_zero_count_within_binomial_interval() {
    // p=0.3 on 32x32: mean 307.2, sd sqrt(1024*0.3*0.7)=14.66, 99% z=2.576
    let img = constant_image(32, 200);
    let out = random_zero(&img, 0.3, 1234).unwrap();
    let mut zeroed = 0usize;
    for y in 0..32 {
        for x in 0..32 {
            if out.pixel(y, x) == [0, 0, 0] {
                zeroed += 1;
            }
        }
    }
    let mean = 1024.0 * 0.3;
    let sd = (1024.0 * 0.3 * 0.7f64).sqrt();
    let (lo, hi) = (mean - 2.576 * sd, mean + 2.576 * sd);
    assert!(
        (zeroed as f64) > lo && (zeroed as f64) < hi,
        "zeroed {zeroed} outside [{lo:.1}, {hi:.1}]"
    );
}

#[test]
fn stochastic_kinds_are_deterministic_under_seed() {
    let img = gradient_image(32);
    for kind in ALL_KINDS {
        let c = Corruption::new(kind, 3, 99).unwrap();
        let a = apply(&img, &c).unwrap();
        let b = apply(&img, &c).unwrap();
        assert_eq!(a, b, "{kind} not reproducible");
        if kind.is_stochastic() {
            let c2 = Corruption::new(kind, 3, 100).unwrap();
            let d = apply(&img, &c2).unwrap();
            assert_ne!(a, d, "{kind} ignored its seed");
        }
    }
}

#[test]
fn severity_five_actually_distorts() {
    let img = gradient_image(32);
    for kind in ALL_KINDS {
        let c = Corruption::new(kind, 5, 3).unwrap();
        let out = apply(&img, &c).unwrap();
        assert_ne!(out, img, "{kind} at severity 5 left the image unchanged");
    }
}

#[test]
fn near_zero_blur_approximates_identity() {
    let img = gradient_image(32);
    let out = gaussian_blur(&img, 0.01);
    for (&a, &b) in out.data().iter().zip(img.data()) {
        assert!((a as i16 - b as i16).abs() <= 1);
    }
}

#[test]
fn brightness_shifts_interior_values_exactly() {
    let img = constant_image(8, 100);
    let out = brightness(&img, 38.0);
    assert!(out.data().iter().all(|&v| v == 138));
    let clipped = brightness(&img, 200.0);
    assert!(clipped.data().iter().all(|&v| v == 255));
}

#[test]
fn contrast_preserves_channel_means() {
    let img = gradient_image(16);
    let out = contrast(&img, 0.5);
    for c in 0..3 {
        let mean_in: f64 = (0..16)
            .flat_map(|y| (0..16).map(move |x| (y, x)))
            .map(|(y, x)| img.get(y, x, c) as f64)
            .sum::<f64>()
            / 256.0;
        let mean_out: f64 = (0..16)
            .flat_map(|y| (0..16).map(move |x| (y, x)))
            .map(|(y, x)| out.get(y, x, c) as f64)
            .sum::<f64>()
            / 256.0;
        assert!((mean_in - mean_out).abs() < 1.0);
    }
}

#[test]
fn corrupt_set_preserves_labels_and_is_reproducible() {
    let set = synth_shapes(20, 10, 5).unwrap();
    let c = Corruption::new(CorruptionKind::GaussianNoise, 2, 77).unwrap();
    let a = corrupt_set(&set, &c).unwrap();
    let b = corrupt_set(&set, &c).unwrap();
    assert_eq!(a.labels, set.labels);
    assert_eq!(a.ids, set.ids);
    assert!(a
        .images
        .iter()
        .zip(&b.images)
        .all(|(x, y)| x.data() == y.data()));
    assert!(matches!(
        a.provenance,
        crate::datasets::Provenance::Corrupted { .. }
    ));
}

#[test]
fn corrupt_set_matches_apply_with_derived_seed() {
    let set = synth_shapes(3, 3, 8).unwrap();
    let c = Corruption::new(CorruptionKind::ImpulseNoise, 4, 31).unwrap();
    let out = corrupt_set(&set, &c).unwrap();
    for i in 0..3 {
        let per_image = Corruption {
            seed: c.seed ^ i as u64,
            ..c
        };
        assert_eq!(out.images[i], apply(&set.images[i], &per_image).unwrap());
    }
}

#[test]
fn corrupt_set_of_empty_set_is_empty() {
    let empty = crate::datasets::LabeledImageSet::new(vec![], vec![], 10).unwrap();
    let c = Corruption::new(CorruptionKind::Brightness, 1, 0).unwrap();
    assert_eq!(corrupt_set(&empty, &c).unwrap().len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Reproducibility and in-range output for every kind on small images.
    #[test]
    fn corruption_contract_holds(
        kind_idx in 0usize..14,
        severity in 1u8..=5,
        seed in any::<u64>(),
        fill in any::<u8>(),
    ) {
        let kind = ALL_KINDS[kind_idx];
        let mut img = gradient_image(8);
        img.set(3, 3, 0, fill);
        let c = Corruption::new(kind, severity, seed).unwrap();
        let a = apply(&img, &c).unwrap();
        let b = apply(&img, &c).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.height(), 8);
        prop_assert_eq!(a.width(), 8);
    }
}
