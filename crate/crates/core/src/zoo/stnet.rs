//! Multi-stream assembly: N down-scaled copies of a base body feeding one
//! joint classifier through concatenation.

use super::name::{format_stnet_name, StnetName};
use super::scale::downscale;
use super::{compile, ArchDescription, LayerTemplate};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::Scalar;

/// Width of the joint head's hidden dense layer.
pub const JOINT_HEAD_UNITS: usize = 400;

/// Builds the multi-stream description: each stream is `downscale(base,
/// scale)` with the base classifier head removed (the stream ends at its
/// last feature layer, flattened); the joint head is
/// dense-400 + ReLU, batch-norm, ReLU, dense-classes + softmax.
pub fn stnet_desc(
    base: &ArchDescription,
    num_streams: usize,
    scale: f64,
    classes: usize,
) -> Result<ArchDescription> {
    if num_streams == 0 {
        return Err(Error::arg("num_streams must be at least 1"));
    }
    if base.num_streams != 1 {
        return Err(Error::arg(format!(
            "base description `{}` is already multi-stream",
            base.name
        )));
    }
    let scaled = downscale(base, scale)?;
    let mut layers = scaled.layers;
    // Streams end flattened; global-avg-pool already yields a vector.
    if !matches!(layers.last(), Some(LayerTemplate::GlobalAvgPool)) {
        layers.push(LayerTemplate::Flatten);
    }
    let head = vec![
        LayerTemplate::Dense {
            units: JOINT_HEAD_UNITS,
            bias: true,
        },
        LayerTemplate::Relu,
        LayerTemplate::BatchNorm,
        LayerTemplate::Relu,
        LayerTemplate::Dense {
            units: classes,
            bias: true,
        },
        LayerTemplate::Softmax,
    ];
    let name = format_stnet_name(&StnetName {
        num_streams,
        scale,
        base: base.family,
    });
    Ok(ArchDescription {
        name,
        family: base.family,
        input: base.input,
        num_streams,
        alpha: scaled.alpha,
        layers,
        head,
    })
}

/// Description + compilation in one step.
pub fn build_stnet<T: Scalar>(
    base: &ArchDescription,
    num_streams: usize,
    scale: f64,
    classes: usize,
    seed: u64,
) -> Result<Graph<T>> {
    compile(&stnet_desc(base, num_streams, scale, classes)?, seed)
}
