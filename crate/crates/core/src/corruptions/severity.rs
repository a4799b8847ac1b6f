//! Severity -> parameter ladders, one row per (kind, severity, parameter).
//!
//! Ladders follow the published Cifar10-C parameter spirit where that needs
//! no external assets, scaled for 32x32 inputs, and every kind's nominal
//! strength is non-decreasing in severity. `cli corrupt
//! --print-severity-table` emits this table as CSV so experiments are
//! auditable.

use super::CorruptionKind;

const GAUSSIAN_SIGMA: [f64; 5] = [8.0, 13.0, 18.0, 26.0, 38.0];
const SHOT_PHOTONS: [f64; 5] = [60.0, 25.0, 12.0, 5.0, 3.0];
const IMPULSE_FRACTION: [f64; 5] = [0.03, 0.06, 0.09, 0.17, 0.27];
const SPECKLE_SIGMA: [f64; 5] = [0.06, 0.10, 0.12, 0.16, 0.20];
const RANDOM_ZERO_FRACTION: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const BRIGHTNESS_DELTA: [f64; 5] = [13.0, 26.0, 38.0, 51.0, 77.0];
const CONTRAST_FACTOR: [f64; 5] = [0.75, 0.5, 0.4, 0.3, 0.15];
const SATURATE_FACTOR: [f64; 5] = [1.5, 2.0, 3.0, 5.0, 8.0];
const GAUSSIAN_BLUR_SIGMA: [f64; 5] = [0.4, 0.6, 0.8, 1.0, 1.5];
const DEFOCUS_RADIUS: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];
const MOTION_LENGTH: [usize; 5] = [3, 5, 7, 9, 11];
const ZOOM_MAX: [f64; 5] = [1.06, 1.11, 1.16, 1.21, 1.26];
const PIXELATE_BLOCK: [usize; 5] = [2, 3, 4, 6, 8];
const ELASTIC_ALPHA: [f64; 5] = [2.0, 3.0, 4.0, 5.0, 6.0];
const ELASTIC_SIGMA: [f64; 5] = [5.0, 4.5, 4.0, 3.5, 3.0];

fn idx(severity: u8) -> usize {
    debug_assert!((1..=5).contains(&severity));
    severity as usize - 1
}

pub fn gaussian_sigma(severity: u8) -> f64 {
    GAUSSIAN_SIGMA[idx(severity)]
}

pub fn shot_photons(severity: u8) -> f64 {
    SHOT_PHOTONS[idx(severity)]
}

pub fn impulse_fraction(severity: u8) -> f64 {
    IMPULSE_FRACTION[idx(severity)]
}

pub fn speckle_sigma(severity: u8) -> f64 {
    SPECKLE_SIGMA[idx(severity)]
}

pub fn random_zero_fraction(severity: u8) -> f64 {
    RANDOM_ZERO_FRACTION[idx(severity)]
}

pub fn brightness_delta(severity: u8) -> f64 {
    BRIGHTNESS_DELTA[idx(severity)]
}

pub fn contrast_factor(severity: u8) -> f64 {
    CONTRAST_FACTOR[idx(severity)]
}

pub fn saturate_factor(severity: u8) -> f64 {
    SATURATE_FACTOR[idx(severity)]
}

pub fn gaussian_blur_sigma(severity: u8) -> f64 {
    GAUSSIAN_BLUR_SIGMA[idx(severity)]
}

pub fn defocus_radius(severity: u8) -> f64 {
    DEFOCUS_RADIUS[idx(severity)]
}

pub fn motion_length(severity: u8) -> usize {
    MOTION_LENGTH[idx(severity)]
}

pub fn zoom_max(severity: u8) -> f64 {
    ZOOM_MAX[idx(severity)]
}

/// Severity 0 is the documented identity entry for testing.
pub fn pixelate_block(severity: u8) -> usize {
    if severity == 0 {
        1
    } else {
        PIXELATE_BLOCK[idx(severity)]
    }
}

/// (displacement scale in pixels, field smoothing sigma)
pub fn elastic_params(severity: u8) -> (f64, f64) {
    (ELASTIC_ALPHA[idx(severity)], ELASTIC_SIGMA[idx(severity)])
}

/// Monotone severity ordering is asserted on this scalar, which abstracts
/// "how strong" each kind is at a given severity (distance from identity).
pub fn nominal_strength(kind: CorruptionKind, severity: u8) -> f64 {
    match kind {
        CorruptionKind::GaussianNoise => gaussian_sigma(severity),
        CorruptionKind::ShotNoise => 1.0 / shot_photons(severity),
        CorruptionKind::ImpulseNoise => impulse_fraction(severity),
        CorruptionKind::SpeckleNoise => speckle_sigma(severity),
        CorruptionKind::RandomZero => random_zero_fraction(severity),
        CorruptionKind::Brightness => brightness_delta(severity),
        CorruptionKind::Contrast => 1.0 - contrast_factor(severity),
        CorruptionKind::Saturate => saturate_factor(severity),
        CorruptionKind::GaussianBlur => gaussian_blur_sigma(severity),
        CorruptionKind::DefocusBlur => defocus_radius(severity),
        CorruptionKind::MotionBlur => motion_length(severity) as f64,
        CorruptionKind::ZoomBlur => zoom_max(severity),
        CorruptionKind::Pixelate => pixelate_block(severity) as f64,
        CorruptionKind::ElasticTransform => elastic_params(severity).0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityEntry {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub parameter: &'static str,
    pub value: f64,
}

pub fn severity_table() -> Vec<SeverityEntry> {
    let mut rows = Vec::new();
    for s in 1..=5u8 {
        let mut push = |kind, parameter, value| {
            rows.push(SeverityEntry {
                kind,
                severity: s,
                parameter,
                value,
            })
        };
        push(CorruptionKind::GaussianNoise, "sigma", gaussian_sigma(s));
        push(CorruptionKind::ShotNoise, "photons", shot_photons(s));
        push(CorruptionKind::ImpulseNoise, "fraction", impulse_fraction(s));
        push(CorruptionKind::SpeckleNoise, "sigma", speckle_sigma(s));
        push(
            CorruptionKind::RandomZero,
            "fraction",
            random_zero_fraction(s),
        );
        push(CorruptionKind::Brightness, "delta", brightness_delta(s));
        push(CorruptionKind::Contrast, "factor", contrast_factor(s));
        push(CorruptionKind::Saturate, "factor", saturate_factor(s));
        push(
            CorruptionKind::GaussianBlur,
            "sigma",
            gaussian_blur_sigma(s),
        );
        push(CorruptionKind::DefocusBlur, "radius", defocus_radius(s));
        push(CorruptionKind::MotionBlur, "length", motion_length(s) as f64);
        push(CorruptionKind::ZoomBlur, "max_zoom", zoom_max(s));
        push(CorruptionKind::Pixelate, "block", pixelate_block(s) as f64);
        let (alpha, sigma) = elastic_params(s);
        push(CorruptionKind::ElasticTransform, "alpha", alpha);
        push(CorruptionKind::ElasticTransform, "sigma", sigma);
    }
    rows
}

/// CSV columns: kind,severity,parameter,value
pub fn severity_table_csv() -> String {
    let mut out = String::from("kind,severity,parameter,value\n");
    for row in severity_table() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.kind, row.severity, row.parameter, row.value
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruptions::ALL_KINDS;

    #[test]
    fn nominal_strength_is_strictly_increasing() {
        for kind in ALL_KINDS {
            for s in 1..5u8 {
                assert!(
                    nominal_strength(kind, s + 1) > nominal_strength(kind, s),
                    "{kind} strength not increasing at severity {s}"
                );
            }
        }
    }

    #[test]
    fn table_covers_every_kind_at_every_severity() {
        let table = severity_table();
        for kind in ALL_KINDS {
            for s in 1..=5u8 {
                assert!(
                    table.iter().any(|r| r.kind == kind && r.severity == s),
                    "missing row for {kind} severity {s}"
                );
            }
        }
    }

    #[test]
    fn pixelate_severity_zero_is_identity_block() {
        assert_eq!(pixelate_block(0), 1);
    }
}
