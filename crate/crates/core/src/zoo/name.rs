//! The model naming template: STNet{num_streams}_{scale}_{base}.

use super::BaseFamily;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StnetName {
    pub num_streams: usize,
    /// Positive real factor every conv width is divided by; for
    /// MobileNetV2 the width multiplier is alpha = 1/scale.
    pub scale: f64,
    pub base: BaseFamily,
}

impl StnetName {
    pub fn alpha(&self) -> f64 {
        1.0 / self.scale
    }
}

pub fn format_stnet_name(name: &StnetName) -> String {
    format!("STNet{}_{}_{}", name.num_streams, name.scale, name.base)
}

impl std::fmt::Display for StnetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&format_stnet_name(self))
    }
}

fn err_at(position: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position,
        message: message.into(),
    }
}

/// Parses "STNet{n}_{scale}_{base}"; errors carry the byte offset of the
/// offending part.
pub fn parse_stnet_name(text: &str) -> Result<StnetName> {
    let rest = text
        .strip_prefix("STNet")
        .ok_or_else(|| err_at(0, "expected the `STNet` prefix"))?;
    let mut pos = "STNet".len();

    let digits_end = rest
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(rest.len());
    if digits_end == 0 {
        return Err(err_at(pos, "expected the number of streams"));
    }
    let num_streams: usize = rest[..digits_end]
        .parse()
        .map_err(|_| err_at(pos, "bad stream count"))?;
    if num_streams == 0 {
        return Err(err_at(pos, "stream count must be at least 1"));
    }
    pos += digits_end;

    let rest = rest[digits_end..]
        .strip_prefix('_')
        .ok_or_else(|| err_at(pos, "expected `_` after the stream count"))?;
    pos += 1;

    let scale_end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(rest.len());
    if scale_end == 0 {
        return Err(err_at(pos, "expected the scale factor"));
    }
    let scale: f64 = rest[..scale_end]
        .parse()
        .map_err(|_| err_at(pos, "bad scale factor"))?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(err_at(pos, "scale factor must be positive"));
    }
    pos += scale_end;

    let rest = rest[scale_end..]
        .strip_prefix('_')
        .ok_or_else(|| err_at(pos, "expected `_` after the scale factor"))?;
    pos += 1;

    let base: BaseFamily = rest
        .parse()
        .map_err(|_| err_at(pos, format!("unknown base network `{rest}`")))?;

    Ok(StnetName {
        num_streams,
        scale,
        base,
    })
}

impl std::str::FromStr for StnetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_stnet_name(s)
    }
}
