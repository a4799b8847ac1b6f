//! Spatial shape arithmetic shared by the executor and the cost analyzer.

use crate::error::{Error, Result};

/// Convolution/pooling padding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial extent = ceil(input / stride); zero padding split
    /// floor-before / rest-after.
    Same,
    /// No padding; window must fit.
    Valid,
}

impl Padding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Padding::Same => "same",
            Padding::Valid => "valid",
        }
    }
}

impl std::str::FromStr for Padding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same" => Ok(Padding::Same),
            "valid" => Ok(Padding::Valid),
            other => Err(Error::arg(format!("unknown padding mode `{other}`"))),
        }
    }
}

/// Output extent along one axis.
pub fn out_extent(input: usize, kernel: usize, stride: usize, padding: Padding) -> Result<usize> {
    if stride == 0 {
        return Err(Error::arg("stride must be positive"));
    }
    match padding {
        Padding::Same => Ok(input.div_ceil(stride)),
        Padding::Valid => {
            if kernel > input {
                return Err(Error::arg(format!(
                    "valid padding: kernel {kernel} exceeds input extent {input}"
                )));
            }
            Ok((input - kernel) / stride + 1)
        }
    }
}

/// Padding inserted before the first element along one axis.
pub fn pad_before(input: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            total / 2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_halves_with_stride_two() {
        assert_eq!(out_extent(32, 3, 2, Padding::Same).unwrap(), 16);
        assert_eq!(out_extent(32, 7, 2, Padding::Same).unwrap(), 16);
        assert_eq!(out_extent(33, 3, 2, Padding::Same).unwrap(), 17);
    }

    #[test]
    fn valid_padding_requires_fit() {
        assert_eq!(out_extent(32, 2, 2, Padding::Valid).unwrap(), 16);
        assert!(out_extent(3, 5, 1, Padding::Valid).is_err());
    }

    #[test]
    fn same_padding_splits_floor_first() {
        // 32 -> 16 with a 7-wide kernel needs 5 total: 2 before, 3 after.
        assert_eq!(pad_before(32, 7, 2, Padding::Same), 2);
        assert_eq!(pad_before(32, 3, 1, Padding::Same), 1);
        assert_eq!(pad_before(32, 3, 1, Padding::Valid), 0);
    }
}
