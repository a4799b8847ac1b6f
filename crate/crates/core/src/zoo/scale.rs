//! Width down-scaling: every conv/dense-hidden width divided by a factor.

use super::models::base_desc;
use super::{mobilenetv2_desc, ArchDescription, BaseFamily, LayerTemplate};
use crate::error::{Error, Result};

/// Standard width-multiplier rounding: nearest multiple of 8, never below
/// 8, bumped up one step if rounding lost more than 10%.
pub fn round_to_multiple_of_8(v: f64) -> usize {
    let rounded = (((v + 4.0) as usize) / 8 * 8).max(8);
    if (rounded as f64) < 0.9 * v {
        rounded + 8
    } else {
        rounded
    }
}

/// Half-up rounding with a floor of one filter.
fn scale_width(w: usize, factor: f64) -> usize {
    ((w as f64 / factor + 0.5).floor() as usize).max(1)
}

fn scale_templates(templates: &[LayerTemplate], factor: f64) -> Vec<LayerTemplate> {
    templates
        .iter()
        .map(|t| match t {
            LayerTemplate::Conv {
                filters,
                kernel,
                stride,
                padding,
                bias,
            } => LayerTemplate::Conv {
                filters: scale_width(*filters, factor),
                kernel: *kernel,
                stride: *stride,
                padding: *padding,
                bias: *bias,
            },
            LayerTemplate::Residual { body, shortcut } => LayerTemplate::Residual {
                body: scale_templates(body, factor),
                shortcut: scale_templates(shortcut, factor),
            },
            other => other.clone(),
        })
        .collect()
}

/// Scales hidden dense widths; the final classifier dense is untouched.
fn scale_head(head: &[LayerTemplate], factor: f64) -> Vec<LayerTemplate> {
    let last_dense = head
        .iter()
        .rposition(|t| matches!(t, LayerTemplate::Dense { .. }));
    head.iter()
        .enumerate()
        .map(|(i, t)| match t {
            LayerTemplate::Dense { units, bias } if Some(i) != last_dense => {
                LayerTemplate::Dense {
                    units: scale_width(*units, factor),
                    bias: *bias,
                }
            }
            other => other.clone(),
        })
        .collect()
}

/// Divides every filter count (and hidden dense width) by `factor`,
/// rounding half-up with a floor of 1. MobileNetV2 descriptions instead
/// route through their native width multiplier: alpha' = alpha / factor
/// with the multiple-of-8 rule.
pub fn downscale(desc: &ArchDescription, factor: f64) -> Result<ArchDescription> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(Error::arg(format!(
            "scale factor must be at least 1, got {factor}"
        )));
    }
    if desc.family == BaseFamily::MobileNetV2 {
        let alpha = desc.alpha.unwrap_or(1.0) / factor;
        let mut scaled = mobilenetv2_desc(alpha, desc.input, desc.classes()?)?;
        scaled.num_streams = desc.num_streams;
        return Ok(scaled);
    }
    if factor == 1.0 {
        return Ok(desc.clone());
    }
    Ok(ArchDescription {
        name: format!("{}_div{}", desc.name, factor),
        family: desc.family,
        input: desc.input,
        num_streams: desc.num_streams,
        alpha: None,
        layers: scale_templates(&desc.layers, factor),
        head: scale_head(&desc.head, factor),
    })
}

/// Resolves a base-family description at canonical settings.
pub fn family_desc(
    family: BaseFamily,
    input: (usize, usize, usize),
    classes: usize,
) -> Result<ArchDescription> {
    base_desc(family, input, classes)
}
