//! Declarative architecture descriptions: the base models, the
//! down-scaling transform that turns them into streams, the multi-stream
//! assembler, the naming template, and compilation into executable graphs.

mod compile;
mod models;
mod name;
mod scale;
mod stnet;
mod text;

pub use compile::compile;
pub use models::{minivgg_desc, mobilenetv2_desc, resnet50_desc, vgg16_desc, MINIVGG_DEFAULT_FILTERS};
pub use name::{format_stnet_name, parse_stnet_name, StnetName};
pub use scale::{downscale, family_desc, round_to_multiple_of_8};
pub use stnet::{build_stnet, stnet_desc, JOINT_HEAD_UNITS};
pub use text::{parse_arch, serialize_arch};

use crate::error::{Error, Result};
use crate::graph::Padding;

/// Base architecture families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseFamily {
    Vgg16,
    ResNet50,
    MobileNetV2,
    MiniVgg,
}

pub const ALL_FAMILIES: [BaseFamily; 4] = [
    BaseFamily::Vgg16,
    BaseFamily::ResNet50,
    BaseFamily::MobileNetV2,
    BaseFamily::MiniVgg,
];

impl BaseFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaseFamily::Vgg16 => "VGG16",
            BaseFamily::ResNet50 => "ResNet50",
            BaseFamily::MobileNetV2 => "MobileNetV2",
            BaseFamily::MiniVgg => "MiniVGG",
        }
    }
}

impl std::fmt::Display for BaseFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resolves a model name — a base family ("VGG16") or a template
/// ("STNet5_5_ResNet50") — to its description.
pub fn desc_from_name(
    text: &str,
    input: (usize, usize, usize),
    classes: usize,
) -> Result<ArchDescription> {
    if let Ok(family) = text.parse::<BaseFamily>() {
        return family_desc(family, input, classes);
    }
    let name = parse_stnet_name(text)?;
    let base = family_desc(name.base, input, classes)?;
    stnet_desc(&base, name.num_streams, name.scale, classes)
}

impl std::str::FromStr for BaseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_FAMILIES
            .iter()
            .find(|f| f.as_str() == s)
            .copied()
            .ok_or_else(|| {
                Error::arg(format!(
                    "unknown base network `{s}` (expected VGG16, ResNet50, MobileNetV2 or MiniVGG)"
                ))
            })
    }
}

/// One layer template. Residual wraps a main branch and an optional
/// projection shortcut (empty = identity).
#[derive(Debug, Clone, PartialEq)]
pub enum LayerTemplate {
    Conv {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    },
    DepthwiseConv {
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    },
    BatchNorm,
    Relu,
    MaxPool {
        size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    },
    AvgPool {
        size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    },
    GlobalAvgPool,
    Flatten,
    Dense {
        units: usize,
        bias: bool,
    },
    Softmax,
    Residual {
        body: Vec<LayerTemplate>,
        shortcut: Vec<LayerTemplate>,
    },
}

/// Declarative description of a network: a per-stream body replicated
/// `num_streams` times (with independent parameters) and a shared head.
/// Base models have `num_streams == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchDescription {
    pub name: String,
    pub family: BaseFamily,
    /// (H, W, C) per stream input.
    pub input: (usize, usize, usize),
    pub num_streams: usize,
    /// MobileNetV2 width multiplier, when applicable.
    pub alpha: Option<f64>,
    /// Per-stream body.
    pub layers: Vec<LayerTemplate>,
    /// Classifier head (applied after concatenation when multi-stream).
    pub head: Vec<LayerTemplate>,
}

impl ArchDescription {
    /// Output width of the classifier (units of the last dense layer).
    pub fn classes(&self) -> Result<usize> {
        self.head
            .iter()
            .rev()
            .find_map(|t| match t {
                LayerTemplate::Dense { units, .. } => Some(*units),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidGraph("head has no dense classifier".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_streams == 0 {
            return Err(Error::InvalidGraph("num_streams must be at least 1".into()));
        }
        if self.input.0 == 0 || self.input.1 == 0 || self.input.2 == 0 {
            return Err(Error::InvalidGraph("zero input extent".into()));
        }
        if !matches!(self.head.last(), Some(LayerTemplate::Softmax)) {
            return Err(Error::InvalidGraph("head must end with softmax".into()));
        }
        fn check(templates: &[LayerTemplate]) -> Result<()> {
            for t in templates {
                match t {
                    LayerTemplate::Conv { filters: 0, .. } => {
                        return Err(Error::InvalidGraph("zero-filter conv".into()))
                    }
                    LayerTemplate::Dense { units: 0, .. } => {
                        return Err(Error::InvalidGraph("zero-unit dense".into()))
                    }
                    LayerTemplate::Residual { body, shortcut } => {
                        check(body)?;
                        check(shortcut)?;
                    }
                    _ => {}
                }
            }
            Ok(())
        }
        check(&self.layers)?;
        check(&self.head)
    }

    /// Canonical text form (embedded in checkpoints).
    pub fn to_text(&self) -> String {
        serialize_arch(self)
    }
}
