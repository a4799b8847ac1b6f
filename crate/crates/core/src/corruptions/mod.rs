//! From-scratch, asset-free image corruption generators for evaluation and
//! augmentation. Severity 1..=5 maps to the parameter ladders in
//! [`severity`]; stochastic kinds are pure functions of
//! (image, kind, severity, seed) and deterministic kinds ignore the seed.

mod blur;
mod geom;
mod noise;
mod photometric;
pub mod severity;

pub use blur::{defocus_blur, gaussian_blur, motion_blur, zoom_blur};
pub use geom::{elastic_transform, pixelate};
pub use noise::{gaussian_noise, impulse_noise, random_zero, shot_noise, speckle_noise};
pub use photometric::{brightness, contrast, saturate};
pub use severity::{nominal_strength, severity_table, severity_table_csv, SeverityEntry};

use crate::datasets::{Image, LabeledImageSet, Provenance};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    RandomZero,
    Brightness,
    Contrast,
    Saturate,
    GaussianBlur,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    Pixelate,
    ElasticTransform,
}

pub const ALL_KINDS: [CorruptionKind; 14] = [
    CorruptionKind::GaussianNoise,
    CorruptionKind::ShotNoise,
    CorruptionKind::ImpulseNoise,
    CorruptionKind::SpeckleNoise,
    CorruptionKind::RandomZero,
    CorruptionKind::Brightness,
    CorruptionKind::Contrast,
    CorruptionKind::Saturate,
    CorruptionKind::GaussianBlur,
    CorruptionKind::DefocusBlur,
    CorruptionKind::MotionBlur,
    CorruptionKind::ZoomBlur,
    CorruptionKind::Pixelate,
    CorruptionKind::ElasticTransform,
];

impl CorruptionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian-noise",
            CorruptionKind::ShotNoise => "shot-noise",
            CorruptionKind::ImpulseNoise => "impulse-noise",
            CorruptionKind::SpeckleNoise => "speckle-noise",
            CorruptionKind::RandomZero => "random-zero",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Saturate => "saturate",
            CorruptionKind::GaussianBlur => "gaussian-blur",
            CorruptionKind::DefocusBlur => "defocus-blur",
            CorruptionKind::MotionBlur => "motion-blur",
            CorruptionKind::ZoomBlur => "zoom-blur",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::ElasticTransform => "elastic-transform",
        }
    }

    /// Whether the generator consumes the seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            CorruptionKind::GaussianNoise
                | CorruptionKind::ShotNoise
                | CorruptionKind::ImpulseNoise
                | CorruptionKind::SpeckleNoise
                | CorruptionKind::RandomZero
                | CorruptionKind::ElasticTransform
        )
    }
}

impl std::fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_KINDS
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ALL_KINDS.iter().map(|k| k.as_str()).collect();
                Error::arg(format!(
                    "unknown corruption kind `{s}`; valid kinds: {}",
                    names.join(", ")
                ))
            })
    }
}

/// A parameterized distortion. Severity 0 exists only for pixelate (the
/// identity entry used by tests); every other kind requires 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl Corruption {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<Self> {
        let min = if kind == CorruptionKind::Pixelate { 0 } else { 1 };
        if severity < min || severity > 5 {
            return Err(Error::arg(format!(
                "severity {severity} outside {min}..=5 for {kind}"
            )));
        }
        Ok(Corruption {
            kind,
            severity,
            seed,
        })
    }
}

/// Applies one corruption; output stays in [0, 255].
pub fn apply(image: &Image, corruption: &Corruption) -> Result<Image> {
    let c = Corruption::new(corruption.kind, corruption.severity, corruption.seed)?;
    let s = c.severity;
    Ok(match c.kind {
        CorruptionKind::GaussianNoise => {
            gaussian_noise(image, severity::gaussian_sigma(s), c.seed)
        }
        CorruptionKind::ShotNoise => shot_noise(image, severity::shot_photons(s), c.seed),
        CorruptionKind::ImpulseNoise => {
            impulse_noise(image, severity::impulse_fraction(s), c.seed)
        }
        CorruptionKind::SpeckleNoise => {
            speckle_noise(image, severity::speckle_sigma(s), c.seed)
        }
        CorruptionKind::RandomZero => {
            random_zero(image, severity::random_zero_fraction(s), c.seed)?
        }
        CorruptionKind::Brightness => brightness(image, severity::brightness_delta(s)),
        CorruptionKind::Contrast => contrast(image, severity::contrast_factor(s)),
        CorruptionKind::Saturate => saturate(image, severity::saturate_factor(s)),
        CorruptionKind::GaussianBlur => gaussian_blur(image, severity::gaussian_blur_sigma(s)),
        CorruptionKind::DefocusBlur => defocus_blur(image, severity::defocus_radius(s)),
        CorruptionKind::MotionBlur => motion_blur(image, severity::motion_length(s)),
        CorruptionKind::ZoomBlur => zoom_blur(image, severity::zoom_max(s)),
        CorruptionKind::Pixelate => pixelate(image, severity::pixelate_block(s)),
        CorruptionKind::ElasticTransform => {
            let (alpha, sigma) = severity::elastic_params(s);
            elastic_transform(image, alpha, sigma, c.seed)
        }
    })
}

/// Corrupts every image; per-image seeds are `corruption.seed ^ index`, so
/// each image's result is reproducible and independent of the others.
pub fn corrupt_set(set: &LabeledImageSet, corruption: &Corruption) -> Result<LabeledImageSet> {
    Corruption::new(corruption.kind, corruption.severity, corruption.seed)?;
    let images: Vec<Result<Image>> = par::map_indexed(set.len(), |i| {
        let per_image = Corruption {
            seed: corruption.seed ^ i as u64,
            ..*corruption
        };
        apply(&set.images[i], &per_image)
    });
    let images = images.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = set.clone();
    out.images = images;
    out.provenance = Provenance::Corrupted {
        kind: corruption.kind.as_str().to_string(),
        severity: corruption.severity,
        seed: corruption.seed,
    };
    Ok(out)
}

/// Shared by the generators: image -> f64 buffer and back with clamping.
pub(crate) fn to_f64(image: &Image) -> Vec<f64> {
    image.data().iter().map(|&v| v as f64).collect()
}

pub(crate) fn from_f64(height: usize, width: usize, buf: &[f64]) -> Image {
    let data: Vec<u8> = buf
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    Image::from_vec(height, width, data).expect("buffer sized by construction")
}

#[cfg(test)]
mod tests;
