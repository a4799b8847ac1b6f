//! Deterministic parameter and FLOPs accounting over architecture
//! descriptions, plus base-vs-multi-stream comparison reports.
//!
//! The default cost convention, `stnet-default-v1`:
//!   - conv / dense: 2 FLOPs per multiply-accumulate, + 1 per output
//!     element when a bias is present
//!   - batch-norm (inference): 2 per element
//!   - relu: 1 per element
//!   - pooling: window - 1 per output element (nominal window size)
//!   - global-avg-pool: H*W - 1 per channel
//!   - residual add: 1 per element
//!   - softmax: 5 per class
//!   - input / flatten / concat: free
//! Parameter counts include batch-norm running statistics (4 per channel).

use crate::error::{Error, Result};
use crate::graph::shapes::out_extent;
use crate::zoo::{
    parse_stnet_name, stnet_desc, ArchDescription, LayerTemplate, StnetName,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlopsConvention {
    #[default]
    DefaultV1,
}

impl FlopsConvention {
    pub fn name(&self) -> &'static str {
        match self {
            FlopsConvention::DefaultV1 => "stnet-default-v1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCost {
    pub name: String,
    pub kind: &'static str,
    pub params: u64,
    pub flops: u64,
    pub out_shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub model: String,
    pub convention: &'static str,
    pub rows: Vec<LayerCost>,
    pub total_params: u64,
    pub total_flops: u64,
}

impl CostReport {
    /// CSV columns: name,kind,params,flops,out_shape
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,kind,params,flops,out_shape\n");
        for r in &self.rows {
            let shape = r
                .out_shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("x");
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.name, r.kind, r.params, r.flops, shape
            ));
        }
        out.push_str(&format!(
            "total,,{},{},\n",
            self.total_params, self.total_flops
        ));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Spatial(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    fn elements(&self) -> u64 {
        match *self {
            Shape::Spatial(h, w, c) => (h * w * c) as u64,
            Shape::Flat(f) => f as u64,
        }
    }

    fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Spatial(h, w, c) => vec![h, w, c],
            Shape::Flat(f) => vec![f],
        }
    }
}

struct Walker {
    rows: Vec<LayerCost>,
    counter: usize,
}

impl Walker {
    fn push(&mut self, prefix: &str, kind: &'static str, params: u64, flops: u64, out: Shape) {
        self.counter += 1;
        self.rows.push(LayerCost {
            name: format!("{prefix}/{kind}{}", self.counter),
            kind,
            params,
            flops,
            out_shape: out.dims(),
        });
    }

    fn walk(
        &mut self,
        templates: &[LayerTemplate],
        mut shape: Shape,
        prefix: &str,
    ) -> Result<Shape> {
        for t in templates {
            shape = self.layer(t, shape, prefix)?;
        }
        Ok(shape)
    }

    fn layer(&mut self, t: &LayerTemplate, shape: Shape, prefix: &str) -> Result<Shape> {
        let spatial = |what: &str| match shape {
            Shape::Spatial(h, w, c) => Ok((h, w, c)),
            Shape::Flat(_) => Err(Error::InvalidGraph(format!(
                "{what} needs a spatial input, got a flat vector"
            ))),
        };
        match t {
            LayerTemplate::Conv {
                filters,
                kernel,
                stride,
                padding,
                bias,
            } => {
                let (h, w, c) = spatial("conv")?;
                let oh = out_extent(h, kernel.0, stride.0, *padding)?;
                let ow = out_extent(w, kernel.1, stride.1, *padding)?;
                let macs_per_out = (kernel.0 * kernel.1 * c) as u64;
                let outs = (oh * ow * filters) as u64;
                let params = (macs_per_out + u64::from(*bias)) * *filters as u64;
                let flops = 2 * macs_per_out * outs + if *bias { outs } else { 0 };
                let out = Shape::Spatial(oh, ow, *filters);
                self.push(prefix, "conv2d", params, flops, out);
                Ok(out)
            }
            LayerTemplate::DepthwiseConv {
                kernel,
                stride,
                padding,
                bias,
            } => {
                let (h, w, c) = spatial("depthwise-conv")?;
                let oh = out_extent(h, kernel.0, stride.0, *padding)?;
                let ow = out_extent(w, kernel.1, stride.1, *padding)?;
                let taps = (kernel.0 * kernel.1) as u64;
                let outs = (oh * ow * c) as u64;
                let params = taps * c as u64 + if *bias { c as u64 } else { 0 };
                let flops = 2 * taps * outs + if *bias { outs } else { 0 };
                let out = Shape::Spatial(oh, ow, c);
                self.push(prefix, "depthwise-conv2d", params, flops, out);
                Ok(out)
            }
            LayerTemplate::Dense { units, bias } => {
                let f = match shape {
                    Shape::Flat(f) => f,
                    Shape::Spatial(..) => {
                        return Err(Error::InvalidGraph(
                            "dense needs a flat input; add flatten first".into(),
                        ))
                    }
                };
                let params = (f as u64 + u64::from(*bias)) * *units as u64;
                let flops = 2 * (f * units) as u64 + if *bias { *units as u64 } else { 0 };
                let out = Shape::Flat(*units);
                self.push(prefix, "dense", params, flops, out);
                Ok(out)
            }
            LayerTemplate::BatchNorm => {
                let c = match shape {
                    Shape::Spatial(_, _, c) => c,
                    Shape::Flat(f) => f,
                };
                self.push(prefix, "batch-norm", 4 * c as u64, 2 * shape.elements(), shape);
                Ok(shape)
            }
            LayerTemplate::Relu => {
                self.push(prefix, "relu", 0, shape.elements(), shape);
                Ok(shape)
            }
            LayerTemplate::MaxPool {
                size,
                stride,
                padding,
            }
            | LayerTemplate::AvgPool {
                size,
                stride,
                padding,
            } => {
                let kind = if matches!(t, LayerTemplate::MaxPool { .. }) {
                    "max-pool"
                } else {
                    "avg-pool"
                };
                let (h, w, c) = spatial(kind)?;
                let oh = out_extent(h, size.0, stride.0, *padding)?;
                let ow = out_extent(w, size.1, stride.1, *padding)?;
                let out = Shape::Spatial(oh, ow, c);
                let flops = (size.0 * size.1 - 1) as u64 * out.elements();
                self.push(prefix, kind, 0, flops, out);
                Ok(out)
            }
            LayerTemplate::GlobalAvgPool => {
                let (h, w, c) = spatial("global-avg-pool")?;
                let out = Shape::Flat(c);
                let flops = (h * w - 1) as u64 * c as u64;
                self.push(prefix, "global-avg-pool", 0, flops, out);
                Ok(out)
            }
            LayerTemplate::Flatten => {
                let out = Shape::Flat(shape.elements() as usize);
                self.push(prefix, "flatten", 0, 0, out);
                Ok(out)
            }
            LayerTemplate::Softmax => {
                let classes = shape.elements();
                self.push(prefix, "softmax", 0, 5 * classes, shape);
                Ok(shape)
            }
            LayerTemplate::Residual { body, shortcut } => {
                self.counter += 1;
                let res_prefix = format!("{prefix}/res{}", self.counter);
                let main = self.walk(body, shape, &res_prefix)?;
                let side = if shortcut.is_empty() {
                    shape
                } else {
                    self.walk(shortcut, shape, &format!("{res_prefix}/shortcut"))?
                };
                if main != side {
                    return Err(Error::InvalidGraph(format!(
                        "residual branches disagree: {:?} vs {:?}",
                        main.dims(),
                        side.dims()
                    )));
                }
                self.push(&res_prefix, "residual-add", 0, main.elements(), main);
                Ok(main)
            }
        }
    }
}

/// Per-layer cost rows for a description (streams expanded).
pub fn cost_report(desc: &ArchDescription, convention: FlopsConvention) -> Result<CostReport> {
    desc.validate()?;
    let mut walker = Walker {
        rows: Vec::new(),
        counter: 0,
    };
    let input = Shape::Spatial(desc.input.0, desc.input.1, desc.input.2);
    let mut tails = Vec::new();
    for k in 0..desc.num_streams {
        tails.push(walker.walk(&desc.layers, input, &format!("stream{k}"))?);
    }
    let merged = if desc.num_streams > 1 {
        let mut total = 0usize;
        for tail in &tails {
            match tail {
                Shape::Flat(f) => total += f,
                Shape::Spatial(..) => {
                    return Err(Error::InvalidGraph(
                        "streams must end flattened before concatenation".into(),
                    ))
                }
            }
        }
        Shape::Flat(total)
    } else {
        tails[0]
    };
    walker.walk(&desc.head, merged, "head")?;
    let total_params = walker.rows.iter().map(|r| r.params).sum();
    let total_flops = walker.rows.iter().map(|r| r.flops).sum();
    Ok(CostReport {
        model: desc.name.clone(),
        convention: convention.name(),
        rows: walker.rows,
        total_params,
        total_flops,
    })
}

/// Total parameter count (batch-norm running statistics included).
pub fn count_params(desc: &ArchDescription) -> Result<u64> {
    Ok(cost_report(desc, FlopsConvention::default())?.total_params)
}

/// Total FLOPs under the given convention.
pub fn count_flops(desc: &ArchDescription, convention: FlopsConvention) -> Result<u64> {
    Ok(cost_report(desc, convention)?.total_flops)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub stnet: CostReport,
    pub base: CostReport,
    /// stnet / base
    pub ratio_params: f64,
    pub ratio_flops: f64,
}

/// Builds both descriptions named by the template and compares totals.
pub fn compare(
    name: &StnetName,
    input: (usize, usize, usize),
    classes: usize,
    convention: FlopsConvention,
) -> Result<Comparison> {
    let base = crate::zoo::family_desc(name.base, input, classes)?;
    let stnet = stnet_desc(&base, name.num_streams, name.scale, classes)?;
    let base_report = cost_report(&base, convention)?;
    let stnet_report = cost_report(&stnet, convention)?;
    Ok(Comparison {
        ratio_params: stnet_report.total_params as f64 / base_report.total_params as f64,
        ratio_flops: stnet_report.total_flops as f64 / base_report.total_flops as f64,
        stnet: stnet_report,
        base: base_report,
    })
}

/// Parses a model name (template or base family) and reports its costs;
/// template names also yield the comparison.
pub fn analyze_name(
    text: &str,
    input: (usize, usize, usize),
    classes: usize,
    convention: FlopsConvention,
) -> Result<(CostReport, Option<Comparison>)> {
    if let Ok(family) = text.parse::<crate::zoo::BaseFamily>() {
        let desc = crate::zoo::family_desc(family, input, classes)?;
        return Ok((cost_report(&desc, convention)?, None));
    }
    let name = parse_stnet_name(text)?;
    let cmp = compare(&name, input, classes, convention)?;
    Ok((cmp.stnet.clone(), Some(cmp)))
}

pub fn format_thousands(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Two-row markdown table (stnet with bracketed ratios, then the base).
pub fn comparison_markdown(cmp: &Comparison) -> String {
    let mut out = String::from("| Name | FLOPs | Num of Params |\n|---|---|---|\n");
    out.push_str(&format!(
        "| {} | {} ({:.5}) | {} ({:.3}) |\n",
        cmp.stnet.model,
        format_thousands(cmp.stnet.total_flops),
        cmp.ratio_flops,
        format_thousands(cmp.stnet.total_params),
        cmp.ratio_params
    ));
    out.push_str(&format!(
        "| {} | {} | {} |\n",
        cmp.base.model,
        format_thousands(cmp.base.total_flops),
        format_thousands(cmp.base.total_params)
    ));
    out
}

#[cfg(test)]
mod tests;
