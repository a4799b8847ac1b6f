//! Intensity slicing: decomposes an image into N slices, each keeping only
//! the pixels whose intensity falls inside one bin and zeroing the rest.
//! Slices over the default equal-width bins partition the image exactly, so
//! their elementwise sum reproduces the original.

use crate::datasets::Image;
use crate::error::{Error, Result};

pub const PIXEL_RANGE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMode {
    /// Whole RGB pixel kept or zeroed by its mean intensity (default:
    /// slices preserve original colors).
    PixelLuminance,
    /// Each channel value binned independently.
    PerChannel,
}

impl SliceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceMode::PixelLuminance => "pixel-luminance",
            SliceMode::PerChannel => "per-channel",
        }
    }
}

impl std::str::FromStr for SliceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel-luminance" => Ok(SliceMode::PixelLuminance),
            "per-channel" => Ok(SliceMode::PerChannel),
            other => Err(Error::arg(format!(
                "unknown slice mode `{other}` (expected pixel-luminance or per-channel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub num_slices: usize,
    pub mode: SliceMode,
    /// num_slices + 1 ascending boundaries over [0, 256).
    pub edges: Vec<f64>,
    /// The last bin is closed above.
    pub include_upper_on_last: bool,
}

impl SliceSpec {
    fn bin_of(&self, v: f64) -> usize {
        for k in 0..self.num_slices {
            if v < self.edges[k + 1] {
                return k;
            }
        }
        self.num_slices - 1
    }
}

/// Equal-width spec: edges[k] = 256k / num_slices.
pub fn make_spec(num_slices: usize, mode: SliceMode) -> Result<SliceSpec> {
    if num_slices == 0 {
        return Err(Error::arg("num_slices must be at least 1"));
    }
    let edges = (0..=num_slices)
        .map(|k| PIXEL_RANGE * k as f64 / num_slices as f64)
        .collect();
    Ok(SliceSpec {
        num_slices,
        mode,
        edges,
        include_upper_on_last: true,
    })
}

/// Splits `image` into `spec.num_slices` images; slice k is bin k.
pub fn slice_image(image: &Image, spec: &SliceSpec) -> Vec<Image> {
    let (h, w) = (image.height(), image.width());
    let mut slices = vec![Image::zeros(h, w); spec.num_slices];
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = image.pixel(y, x);
            match spec.mode {
                SliceMode::PixelLuminance => {
                    let mean = (r as f64 + g as f64 + b as f64) / 3.0;
                    let k = spec.bin_of(mean);
                    slices[k].set(y, x, 0, r);
                    slices[k].set(y, x, 1, g);
                    slices[k].set(y, x, 2, b);
                }
                SliceMode::PerChannel => {
                    for (c, v) in [r, g, b].into_iter().enumerate() {
                        slices[spec.bin_of(v as f64)].set(y, x, c, v);
                    }
                }
            }
        }
    }
    slices
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_width_edges_for_five_slices() {
        let spec = make_spec(5, SliceMode::PixelLuminance).unwrap();
        assert_eq!(spec.edges, vec![0.0, 51.2, 102.4, 153.6, 204.8, 256.0]);
    }

    #[test]
    fn edges_for_one_and_two_slices() {
        assert_eq!(
            make_spec(1, SliceMode::PixelLuminance).unwrap().edges,
            vec![0.0, 256.0]
        );
        assert_eq!(
            make_spec(2, SliceMode::PixelLuminance).unwrap().edges,
            vec![0.0, 128.0, 256.0]
        );
    }

    #[test]
    fn zero_slices_rejected() {
        assert!(make_spec(0, SliceMode::PixelLuminance).is_err());
    }

    #[test]
    fn constant_image_lands_in_exactly_one_slice() {
        let spec = make_spec(5, SliceMode::PixelLuminance).unwrap();
        let mut img = Image::zeros(4, 4);
        img.data_mut().fill(100); // mean 100 is inside [51.2, 102.4)
        let slices = slice_image(&img, &spec);
        assert_eq!(slices[1], img);
        for (k, s) in slices.iter().enumerate() {
            if k != 1 {
                assert!(s.data().iter().all(|&v| v == 0));
            }
        }
    }

    #[test]
    fn single_slice_is_identity() {
        let spec = make_spec(1, SliceMode::PixelLuminance).unwrap();
        let mut img = Image::zeros(3, 3);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i * 9) as u8;
        }
        let slices = slice_image(&img, &spec);
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0], img);
    }

    #[test]
    fn top_intensity_pixel_falls_in_last_bin() {
        let spec = make_spec(5, SliceMode::PixelLuminance).unwrap();
        let mut img = Image::zeros(1, 1);
        img.data_mut().fill(255);
        let slices = slice_image(&img, &spec);
        assert_eq!(slices[4], img);
    }
}
