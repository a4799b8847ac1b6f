//! Labeled image sets: CIFAR-10 binary ingestion, a synthetic fallback
//! renderer, and the train/test augmentation split.

mod cifar;
mod split;
mod synth;

pub use cifar::{
    load_cifar10, parse_records, write_records, BATCH_FILE_BYTES, RECORD_BYTES,
    TEST_RECORDS, TRAIN_RECORDS,
};
pub use split::{augmentation_split, random_split, seeded_shuffle};
pub use synth::synth_shapes;

use crate::error::{Error, Result};

/// 8-bit RGB image, interleaved row-major (H, W, 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn zeros(height: usize, width: usize) -> Self {
        Image {
            height,
            width,
            data: vec![0; height * width * Self::CHANNELS],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * Self::CHANNELS {
            return Err(Error::arg(format!(
                "image buffer length {} does not match {height}x{width}x3",
                data.len()
            )));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * Self::CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * Self::CHANNELS + c] = v;
    }

    /// Pixel as an RGB triple.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * Self::CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channel-planar bytes (all R, all G, all B), the CIFAR record layout.
    pub fn to_planar(&self) -> Vec<u8> {
        let hw = self.height * self.width;
        let mut out = vec![0u8; hw * Self::CHANNELS];
        for i in 0..hw {
            for c in 0..Self::CHANNELS {
                out[c * hw + i] = self.data[i * Self::CHANNELS + c];
            }
        }
        out
    }

    pub fn from_planar(height: usize, width: usize, planar: &[u8]) -> Result<Self> {
        let hw = height * width;
        if planar.len() != hw * Self::CHANNELS {
            return Err(Error::arg(format!(
                "planar buffer length {} does not match {height}x{width}x3",
                planar.len()
            )));
        }
        let mut img = Image::zeros(height, width);
        for i in 0..hw {
            for c in 0..Self::CHANNELS {
                img.data[i * Self::CHANNELS + c] = planar[c * hw + i];
            }
        }
        Ok(img)
    }
}

/// Where a set's pixels came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Clean,
    Corrupted {
        kind: String,
        severity: u8,
        seed: u64,
    },
}

/// Images with labels and stable per-image ids (ids survive corruption and
/// splitting, which is what the train/test leakage check keys on).
#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub ids: Vec<u64>,
    pub provenance: Provenance,
    num_classes: usize,
}

impl LabeledImageSet {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Dataset(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Dataset(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let ids = (0..images.len() as u64).collect();
        Ok(LabeledImageSet {
            images,
            labels,
            ids,
            provenance: Provenance::Clean,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// New set holding the given indices, ids preserved.
    pub fn subset(&self, indices: &[usize]) -> LabeledImageSet {
        LabeledImageSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            provenance: self.provenance.clone(),
            num_classes: self.num_classes,
        }
    }

    /// Appends another set of the same class count (ids kept as-is).
    pub fn extend(&mut self, other: &LabeledImageSet) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::Dataset("class count mismatch".into()));
        }
        self.images.extend(other.images.iter().cloned());
        self.labels.extend(other.labels.iter().copied());
        self.ids.extend(other.ids.iter().copied());
        Ok(())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
