//! Base model descriptions. VGG16, ResNet50 and MobileNetV2 follow the
//! canonical reference layer stacks (convolutions feeding batch-norm never
//! carry biases; batch-norm owns scale/shift plus running statistics).
//! MiniVGG is a small stand-in sized so training experiments finish on a CPU.

use super::scale::round_to_multiple_of_8;
use super::{ArchDescription, BaseFamily, LayerTemplate};
use crate::error::{Error, Result};
use crate::graph::Padding;

use LayerTemplate as L;

const K1: (usize, usize) = (1, 1);
const K3: (usize, usize) = (3, 3);
const S1: (usize, usize) = (1, 1);
const S2: (usize, usize) = (2, 2);

fn conv(filters: usize, kernel: (usize, usize), stride: (usize, usize), bias: bool) -> L {
    L::Conv {
        filters,
        kernel,
        stride,
        padding: Padding::Same,
        bias,
    }
}

/// 13 conv layers in five blocks, each followed by 2x2/2 max-pooling, then
/// the 4096-4096-classes dense head.
pub fn vgg16_desc(input: (usize, usize, usize), classes: usize) -> ArchDescription {
    let blocks: [&[usize]; 5] = [
        &[64, 64],
        &[128, 128],
        &[256, 256, 256],
        &[512, 512, 512],
        &[512, 512, 512],
    ];
    let mut layers = Vec::new();
    for widths in blocks {
        for &w in widths {
            layers.push(conv(w, K3, S1, true));
            layers.push(L::Relu);
        }
        layers.push(L::MaxPool {
            size: (2, 2),
            stride: S2,
            padding: Padding::Valid,
        });
    }
    let head = vec![
        L::Flatten,
        L::Dense {
            units: 4096,
            bias: true,
        },
        L::Relu,
        L::Dense {
            units: 4096,
            bias: true,
        },
        L::Relu,
        L::Dense {
            units: classes,
            bias: true,
        },
        L::Softmax,
    ];
    ArchDescription {
        name: "VGG16".into(),
        family: BaseFamily::Vgg16,
        input,
        num_streams: 1,
        alpha: None,
        layers,
        head,
    }
}

fn bottleneck(mid: usize, out: usize, stride: (usize, usize), project: bool) -> Vec<L> {
    // Reference ResNet50 keeps conv biases even though batch-norm follows;
    // Table II's parameter count includes them.
    let body = vec![
        conv(mid, K1, stride, true),
        L::BatchNorm,
        L::Relu,
        conv(mid, K3, S1, true),
        L::BatchNorm,
        L::Relu,
        conv(out, K1, S1, true),
        L::BatchNorm,
    ];
    let shortcut = if project {
        vec![conv(out, K1, stride, true), L::BatchNorm]
    } else {
        Vec::new()
    };
    vec![L::Residual { body, shortcut }, L::Relu]
}

/// Canonical v1 bottleneck ResNet50: 7x7/2 stem, 3-4-6-3 stages, projection
/// shortcut on each stage's first block, global average pooling.
pub fn resnet50_desc(input: (usize, usize, usize), classes: usize) -> ArchDescription {
    let mut layers = vec![
        conv(64, (7, 7), S2, true),
        L::BatchNorm,
        L::Relu,
        L::MaxPool {
            size: (3, 3),
            stride: S2,
            padding: Padding::Same,
        },
    ];
    let stages: [(usize, usize, usize, (usize, usize)); 4] = [
        (64, 256, 3, S1),
        (128, 512, 4, S2),
        (256, 1024, 6, S2),
        (512, 2048, 3, S2),
    ];
    for (mid, out, blocks, stride) in stages {
        layers.extend(bottleneck(mid, out, stride, true));
        for _ in 1..blocks {
            layers.extend(bottleneck(mid, out, S1, false));
        }
    }
    layers.push(L::GlobalAvgPool);
    let head = vec![
        L::Dense {
            units: classes,
            bias: true,
        },
        L::Softmax,
    ];
    ArchDescription {
        name: "ResNet50".into(),
        family: BaseFamily::ResNet50,
        input,
        num_streams: 1,
        alpha: None,
        layers,
        head,
    }
}

/// Expansion factor, output channels, repeats, first stride.
const MOBILENET_BLOCKS: [(usize, usize, usize, usize); 7] = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
];

fn inverted_residual(in_c: usize, out_c: usize, expansion: usize, stride: usize) -> Vec<L> {
    let mut body = Vec::new();
    if expansion != 1 {
        body.push(conv(in_c * expansion, K1, S1, false));
        body.push(L::BatchNorm);
        body.push(L::Relu);
    }
    body.push(L::DepthwiseConv {
        kernel: K3,
        stride: (stride, stride),
        padding: Padding::Same,
        bias: false,
    });
    body.push(L::BatchNorm);
    body.push(L::Relu);
    body.push(conv(out_c, K1, S1, false));
    body.push(L::BatchNorm);
    if stride == 1 && in_c == out_c {
        vec![L::Residual {
            body,
            shortcut: Vec::new(),
        }]
    } else {
        body
    }
}

/// Canonical inverted-residual MobileNetV2 with width multiplier `alpha`.
/// Channel counts round to the nearest multiple of 8 (never below 8); the
/// final 1x1 conv stays at 1280 unless alpha exceeds 1.
pub fn mobilenetv2_desc(
    alpha: f64,
    input: (usize, usize, usize),
    classes: usize,
) -> Result<ArchDescription> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::arg(format!("alpha must be positive, got {alpha}")));
    }
    let stem = round_to_multiple_of_8(32.0 * alpha);
    let mut layers = vec![conv(stem, K3, S2, false), L::BatchNorm, L::Relu];
    let mut in_c = stem;
    for (expansion, c, repeats, first_stride) in MOBILENET_BLOCKS {
        let out_c = round_to_multiple_of_8(c as f64 * alpha);
        for i in 0..repeats {
            let stride = if i == 0 { first_stride } else { 1 };
            layers.extend(inverted_residual(in_c, out_c, expansion, stride));
            in_c = out_c;
        }
    }
    let last = if alpha > 1.0 {
        round_to_multiple_of_8(1280.0 * alpha)
    } else {
        1280
    };
    layers.push(conv(last, K1, S1, false));
    layers.push(L::BatchNorm);
    layers.push(L::Relu);
    layers.push(L::GlobalAvgPool);
    let head = vec![
        L::Dense {
            units: classes,
            bias: true,
        },
        L::Softmax,
    ];
    let name = if (alpha - 1.0).abs() < 1e-12 {
        "MobileNetV2".to_string()
    } else {
        format!("MobileNetV2_alpha{alpha}")
    };
    Ok(ArchDescription {
        name,
        family: BaseFamily::MobileNetV2,
        input,
        num_streams: 1,
        alpha: Some(alpha),
        layers,
        head,
    })
}

pub const MINIVGG_DEFAULT_FILTERS: [usize; 4] = [16, 16, 32, 32];

/// Conv-conv-pool blocks over the filter list (a trailing odd filter forms
/// a conv-pool block), then flatten, dense 128, dense classes.
pub fn minivgg_desc(
    filters: &[usize],
    input: (usize, usize, usize),
    classes: usize,
) -> Result<ArchDescription> {
    if filters.is_empty() {
        return Err(Error::arg("MiniVGG needs at least one filter count"));
    }
    if filters.iter().any(|&f| f == 0) {
        return Err(Error::arg("MiniVGG filter counts must be positive"));
    }
    let pools = filters.len().div_ceil(2);
    let min_side = input.0.min(input.1);
    if min_side >> pools == 0 {
        return Err(Error::arg(format!(
            "{pools} pooling stages exhaust a {min_side}-pixel input"
        )));
    }
    let mut layers = Vec::new();
    for pair in filters.chunks(2) {
        for &f in pair {
            layers.push(conv(f, K3, S1, true));
            layers.push(L::Relu);
        }
        layers.push(L::MaxPool {
            size: (2, 2),
            stride: S2,
            padding: Padding::Valid,
        });
    }
    let head = vec![
        L::Flatten,
        L::Dense {
            units: 128,
            bias: true,
        },
        L::Relu,
        L::Dense {
            units: classes,
            bias: true,
        },
        L::Softmax,
    ];
    Ok(ArchDescription {
        name: "MiniVGG".into(),
        family: BaseFamily::MiniVgg,
        input,
        num_streams: 1,
        alpha: None,
        layers,
        head,
    })
}

/// Convenience: a family's canonical description at default parameters.
pub(crate) fn base_desc(
    family: BaseFamily,
    input: (usize, usize, usize),
    classes: usize,
) -> Result<ArchDescription> {
    match family {
        BaseFamily::Vgg16 => Ok(vgg16_desc(input, classes)),
        BaseFamily::ResNet50 => Ok(resnet50_desc(input, classes)),
        BaseFamily::MobileNetV2 => mobilenetv2_desc(1.0, input, classes),
        BaseFamily::MiniVgg => minivgg_desc(&MINIVGG_DEFAULT_FILTERS, input, classes),
    }
}
