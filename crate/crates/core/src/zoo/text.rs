//! Canonical line-oriented text form of an architecture description.
//! One layer per line; residual blocks nest in braces. Round-trips exactly.

use super::{ArchDescription, BaseFamily, LayerTemplate};
use crate::error::{Error, Result};
use crate::graph::Padding;

const HEADER: &str = "stnet-arch v1";

pub fn serialize_arch(desc: &ArchDescription) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("name {}\n", desc.name));
    out.push_str(&format!("family {}\n", desc.family));
    out.push_str(&format!(
        "input {} {} {}\n",
        desc.input.0, desc.input.1, desc.input.2
    ));
    out.push_str(&format!("streams {}\n", desc.num_streams));
    if let Some(alpha) = desc.alpha {
        out.push_str(&format!("alpha {alpha}\n"));
    }
    out.push_str("body {\n");
    write_templates(&mut out, &desc.layers);
    out.push_str("}\n");
    out.push_str("head {\n");
    write_templates(&mut out, &desc.head);
    out.push_str("}\n");
    out
}

fn kernel_str(k: (usize, usize)) -> String {
    format!("k{}x{}", k.0, k.1)
}

fn stride_str(s: (usize, usize)) -> String {
    format!("s{}x{}", s.0, s.1)
}

fn bias_str(b: bool) -> &'static str {
    if b {
        "bias"
    } else {
        "nobias"
    }
}

fn write_templates(out: &mut String, templates: &[LayerTemplate]) {
    for t in templates {
        match t {
            LayerTemplate::Conv {
                filters,
                kernel,
                stride,
                padding,
                bias,
            } => out.push_str(&format!(
                "conv {filters} {} {} {} {}\n",
                kernel_str(*kernel),
                stride_str(*stride),
                padding.as_str(),
                bias_str(*bias)
            )),
            LayerTemplate::DepthwiseConv {
                kernel,
                stride,
                padding,
                bias,
            } => out.push_str(&format!(
                "dwconv {} {} {} {}\n",
                kernel_str(*kernel),
                stride_str(*stride),
                padding.as_str(),
                bias_str(*bias)
            )),
            LayerTemplate::BatchNorm => out.push_str("bn\n"),
            LayerTemplate::Relu => out.push_str("relu\n"),
            LayerTemplate::MaxPool {
                size,
                stride,
                padding,
            } => out.push_str(&format!(
                "maxpool {} {} {}\n",
                kernel_str(*size),
                stride_str(*stride),
                padding.as_str()
            )),
            LayerTemplate::AvgPool {
                size,
                stride,
                padding,
            } => out.push_str(&format!(
                "avgpool {} {} {}\n",
                kernel_str(*size),
                stride_str(*stride),
                padding.as_str()
            )),
            LayerTemplate::GlobalAvgPool => out.push_str("gap\n"),
            LayerTemplate::Flatten => out.push_str("flatten\n"),
            LayerTemplate::Dense { units, bias } => {
                out.push_str(&format!("dense {units} {}\n", bias_str(*bias)))
            }
            LayerTemplate::Softmax => out.push_str("softmax\n"),
            LayerTemplate::Residual { body, shortcut } => {
                out.push_str("residual {\n");
                write_templates(out, body);
                if !shortcut.is_empty() {
                    out.push_str("} shortcut {\n");
                    write_templates(out, shortcut);
                }
                out.push_str("}\n");
            }
        }
    }
}

struct Parser<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            position: self.pos + 1, // 1-based line number
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of text"))?;
        self.pos += 1;
        Ok(line)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn expect(&mut self, what: &str) -> Result<()> {
        let line = self.next_line()?;
        if line != what {
            return Err(Error::Parse {
                position: self.pos,
                message: format!("expected `{what}`, found `{line}`"),
            });
        }
        Ok(())
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Parse {
                position: self.pos,
                message: format!("expected `{key} ...`, found `{line}`"),
            })
    }

    /// Parses templates until a closing line; leaves the closer unconsumed.
    fn templates(&mut self) -> Result<Vec<LayerTemplate>> {
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.err("missing `}`")),
                Some("}") | Some("} shortcut {") => return Ok(out),
                Some("residual {") => {
                    self.pos += 1;
                    let body = self.templates()?;
                    let shortcut = if self.peek() == Some("} shortcut {") {
                        self.pos += 1;
                        self.templates()?
                    } else {
                        Vec::new()
                    };
                    self.expect("}")?;
                    out.push(LayerTemplate::Residual { body, shortcut });
                }
                Some(line) => {
                    self.pos += 1;
                    out.push(self.layer(line)?);
                }
            }
        }
    }

    fn layer(&self, line: &str) -> Result<LayerTemplate> {
        let parts: Vec<&str> = line.split(' ').collect();
        let t = match parts.as_slice() {
            ["conv", filters, k, s, pad, bias] => LayerTemplate::Conv {
                filters: self.int(filters)?,
                kernel: self.pair(k, 'k')?,
                stride: self.pair(s, 's')?,
                padding: self.padding(pad)?,
                bias: self.bias(bias)?,
            },
            ["dwconv", k, s, pad, bias] => LayerTemplate::DepthwiseConv {
                kernel: self.pair(k, 'k')?,
                stride: self.pair(s, 's')?,
                padding: self.padding(pad)?,
                bias: self.bias(bias)?,
            },
            ["bn"] => LayerTemplate::BatchNorm,
            ["relu"] => LayerTemplate::Relu,
            ["maxpool", k, s, pad] => LayerTemplate::MaxPool {
                size: self.pair(k, 'k')?,
                stride: self.pair(s, 's')?,
                padding: self.padding(pad)?,
            },
            ["avgpool", k, s, pad] => LayerTemplate::AvgPool {
                size: self.pair(k, 'k')?,
                stride: self.pair(s, 's')?,
                padding: self.padding(pad)?,
            },
            ["gap"] => LayerTemplate::GlobalAvgPool,
            ["flatten"] => LayerTemplate::Flatten,
            ["dense", units, bias] => LayerTemplate::Dense {
                units: self.int(units)?,
                bias: self.bias(bias)?,
            },
            ["softmax"] => LayerTemplate::Softmax,
            _ => return Err(self.err(format!("unknown layer line `{line}`"))),
        };
        Ok(t)
    }

    fn int(&self, s: &str) -> Result<usize> {
        s.parse()
            .map_err(|_| self.err(format!("bad integer `{s}`")))
    }

    fn pair(&self, s: &str, prefix: char) -> Result<(usize, usize)> {
        let body = s
            .strip_prefix(prefix)
            .ok_or_else(|| self.err(format!("expected `{prefix}HxW`, found `{s}`")))?;
        let (a, b) = body
            .split_once('x')
            .ok_or_else(|| self.err(format!("expected `{prefix}HxW`, found `{s}`")))?;
        Ok((self.int(a)?, self.int(b)?))
    }

    fn padding(&self, s: &str) -> Result<Padding> {
        s.parse().map_err(|_| self.err(format!("bad padding `{s}`")))
    }

    fn bias(&self, s: &str) -> Result<bool> {
        match s {
            "bias" => Ok(true),
            "nobias" => Ok(false),
            other => Err(self.err(format!("expected bias/nobias, found `{other}`"))),
        }
    }
}

pub fn parse_arch(text: &str) -> Result<ArchDescription> {
    let mut p = Parser {
        lines: text.lines().collect(),
        pos: 0,
    };
    p.expect(HEADER)?;
    let name = p.keyed("name")?.to_string();
    let family: BaseFamily = p.keyed("family")?.parse()?;
    let input_line = p.keyed("input")?;
    let dims: Vec<usize> = input_line
        .split(' ')
        .map(|v| p.int(v))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(p.err("input needs three extents"));
    }
    let streams_raw = p.keyed("streams")?;
    let num_streams = p.int(streams_raw)?;
    let alpha = if p.peek().is_some_and(|l| l.starts_with("alpha ")) {
        let raw = p.keyed("alpha")?;
        Some(
            raw.parse::<f64>()
                .map_err(|_| p.err(format!("bad alpha `{raw}`")))?,
        )
    } else {
        None
    };
    p.expect("body {")?;
    let layers = p.templates()?;
    p.expect("}")?;
    p.expect("head {")?;
    let head = p.templates()?;
    p.expect("}")?;
    if p.peek().is_some() {
        return Err(p.err("trailing text after head"));
    }
    let desc = ArchDescription {
        name,
        family,
        input: (dims[0], dims[1], dims[2]),
        num_streams,
        alpha,
        layers,
        head,
    };
    desc.validate()?;
    Ok(desc)
}
