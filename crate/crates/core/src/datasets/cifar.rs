//! CIFAR-10 binary-version IO.
//!
//! One record = 1 label byte + 3072 pixel bytes (channel-planar R, G, B,
//! row-major within each channel). Batch files hold 10,000 records each.

use std::fs;
use std::path::Path;

use super::{Image, LabeledImageSet};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 3073;
pub const BATCH_FILE_BYTES: u64 = 30_730_000;
pub const TRAIN_RECORDS: usize = 50_000;
pub const TEST_RECORDS: usize = 10_000;

const SIDE: usize = 32;
const CLASSES: usize = 10;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

/// Parses a buffer of whole records (any count) into a labeled set.
pub fn parse_records(bytes: &[u8]) -> Result<LabeledImageSet> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::Dataset(format!(
            "wrong file size: {} bytes is not a multiple of the {RECORD_BYTES}-byte record",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, record) in bytes.chunks(RECORD_BYTES).enumerate() {
        let label = record[0];
        if label as usize >= CLASSES {
            return Err(Error::Dataset(format!(
                "record {i}: label byte {label} exceeds 9"
            )));
        }
        labels.push(label);
        images.push(Image::from_planar(SIDE, SIDE, &record[1..])?);
    }
    LabeledImageSet::new(images, labels, CLASSES)
}

fn load_batch(path: &Path, expect_bytes: u64) -> Result<LabeledImageSet> {
    let meta = fs::metadata(path)
        .map_err(|e| Error::Dataset(format!("missing file {}: {e}", path.display())))?;
    if meta.len() != expect_bytes {
        return Err(Error::Dataset(format!(
            "wrong file size for {}: {} bytes, expected {expect_bytes}",
            path.display(),
            meta.len()
        )));
    }
    parse_records(&fs::read(path)?)
}

/// Loads the binary-version archive: 50,000 train / 10,000 test records.
pub fn load_cifar10(directory: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let mut train: Option<LabeledImageSet> = None;
    for name in TRAIN_FILES {
        let batch = load_batch(&directory.join(name), BATCH_FILE_BYTES)?;
        match train.as_mut() {
            None => train = Some(batch),
            Some(t) => t.extend(&batch)?,
        }
    }
    let mut train = train.unwrap();
    // ids must stay unique across the concatenated batches
    train.ids = (0..train.len() as u64).collect();
    let test = load_batch(&directory.join(TEST_FILE), BATCH_FILE_BYTES)?;
    Ok((train, test))
}

/// Writes a set in the same record format (reusable by tooling).
pub fn write_records(set: &LabeledImageSet, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(set.len() * RECORD_BYTES);
    for (img, &label) in set.images.iter().zip(&set.labels) {
        out.push(label);
        out.extend_from_slice(&img.to_planar());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, fill: u8) -> Vec<u8> {
        let mut r = vec![label];
        r.extend(std::iter::repeat_n(fill, 3072));
        r
    }

    #[test]
    fn parses_well_formed_records() {
        let mut bytes = record(3, 7);
        bytes.extend(record(9, 200));
        let set = parse_records(&bytes).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.labels, vec![3, 9]);
        assert!(set.images[1].data().iter().all(|&v| v == 200));
    }

    #[test]
    fn rejects_truncated_buffer() {
        let bytes = vec![0u8; RECORD_BYTES - 1];
        let err = parse_records(&bytes).unwrap_err();
        assert!(err.to_string().contains("wrong file size"), "got: {err}");
    }

    #[test]
    fn rejects_label_byte_above_nine() {
        let bytes = record(10, 0);
        assert!(parse_records(&bytes).is_err());
    }

    #[test]
    fn wrong_sized_batch_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data_batch_1.bin");
        std::fs::write(&p, vec![0u8; 100]).unwrap();
        let err = load_cifar10(dir.path()).unwrap_err();
        assert!(err.to_string().contains("wrong file size"), "got: {err}");
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let mut bytes = Vec::new();
        for i in 0..5u8 {
            let mut r = record(i, 0);
            for (j, v) in r[1..].iter_mut().enumerate() {
                *v = (i as usize * 31 + j) as u8;
            }
            bytes.extend(r);
        }
        let set = parse_records(&bytes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.bin");
        write_records(&set, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }
}
