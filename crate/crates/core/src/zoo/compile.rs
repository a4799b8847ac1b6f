//! Description -> executable graph.

use super::{ArchDescription, LayerTemplate};
use crate::error::Result;
use crate::graph::{Graph, GraphBuilder, NodeRef};
use crate::tensor::Scalar;

struct Emitter {
    counter: usize,
}

impl Emitter {
    fn emit<T: Scalar>(
        &mut self,
        b: &mut GraphBuilder<T>,
        templates: &[LayerTemplate],
        mut cur: NodeRef,
        prefix: &str,
    ) -> Result<NodeRef> {
        for t in templates {
            self.counter += 1;
            let name = |kind: &str, c: usize| format!("{prefix}/{kind}{c}");
            let c = self.counter;
            cur = match t {
                LayerTemplate::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                    bias,
                } => b.conv2d(
                    name("conv", c),
                    cur,
                    *filters,
                    *kernel,
                    *stride,
                    *padding,
                    *bias,
                )?,
                LayerTemplate::DepthwiseConv {
                    kernel,
                    stride,
                    padding,
                    bias,
                } => b.depthwise_conv2d(name("dwconv", c), cur, *kernel, *stride, *padding, *bias)?,
                LayerTemplate::BatchNorm => b.batch_norm(name("bn", c), cur)?,
                LayerTemplate::Relu => b.relu(name("relu", c), cur),
                LayerTemplate::MaxPool {
                    size,
                    stride,
                    padding,
                } => b.max_pool(name("maxpool", c), cur, *size, *stride, *padding)?,
                LayerTemplate::AvgPool {
                    size,
                    stride,
                    padding,
                } => b.avg_pool(name("avgpool", c), cur, *size, *stride, *padding)?,
                LayerTemplate::GlobalAvgPool => b.global_avg_pool(name("gap", c), cur)?,
                LayerTemplate::Flatten => b.flatten(name("flatten", c), cur),
                LayerTemplate::Dense { units, bias } => {
                    b.dense(name("dense", c), cur, *units, *bias)?
                }
                LayerTemplate::Softmax => b.softmax(name("softmax", c), cur)?,
                LayerTemplate::Residual { body, shortcut } => {
                    let entry = cur;
                    let main = self.emit(b, body, entry, &format!("{prefix}/res{c}"))?;
                    let side = if shortcut.is_empty() {
                        entry
                    } else {
                        self.emit(b, shortcut, entry, &format!("{prefix}/res{c}/shortcut"))?
                    };
                    b.residual_add(format!("{prefix}/res{c}/add"), main, side)?
                }
            };
        }
        Ok(cur)
    }
}

/// Compiles a description into an executable graph with seeded He-uniform
/// initialization. Multi-stream descriptions get one entry point per
/// stream, structurally distinct stream parameters, and a shared head.
pub fn compile<T: Scalar>(desc: &ArchDescription, seed: u64) -> Result<Graph<T>> {
    desc.validate()?;
    let mut b = GraphBuilder::new(seed);
    let input_shape = [desc.input.0, desc.input.1, desc.input.2];
    let mut emitter = Emitter { counter: 0 };
    let mut tails = Vec::with_capacity(desc.num_streams);
    for k in 0..desc.num_streams {
        let input = b.input(format!("input{k}"), &input_shape);
        if desc.num_streams > 1 {
            b.begin_stream(k);
        }
        let tail = emitter.emit(&mut b, &desc.layers, input, &format!("stream{k}"))?;
        b.end_stream();
        tails.push(tail);
    }
    let merged = if tails.len() > 1 {
        b.concat("concat", &tails)?
    } else {
        tails[0]
    };
    let output = emitter.emit(&mut b, &desc.head, merged, "head")?;
    let mut graph = b.build(output)?;
    graph.set_arch_text(desc.to_text());
    if desc.num_streams > 1 {
        graph.check_stream_isolation()?;
    }
    Ok(graph)
}
