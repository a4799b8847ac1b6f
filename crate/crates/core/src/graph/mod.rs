//! Executable computation graphs: a topologically ordered DAG of layer nodes
//! with multiple named entry points (one per stream) and a single softmax
//! output. Supports training-mode forward, backprop into per-parameter
//! gradient buffers, and deterministic seeded initialization.

mod conv;
mod dense;
mod elem;
mod norm;
mod pool;
pub mod shapes;

pub use shapes::Padding;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Batch-norm epsilon (reference-implementation default).
pub const BN_EPSILON: f64 = 1e-3;
/// Batch-norm running-statistics momentum.
pub const BN_MOMENTUM: f64 = 0.99;

/// Layer kind plus hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input,
    Conv2d {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    },
    DepthwiseConv2d {
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    },
    Dense {
        units: usize,
        bias: bool,
    },
    BatchNorm {
        epsilon: f64,
        momentum: f64,
    },
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
    Concat,
    ResidualAdd,
    Softmax,
}

impl Op {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Conv2d { .. } => "conv2d",
            Op::DepthwiseConv2d { .. } => "depthwise-conv2d",
            Op::Dense { .. } => "dense",
            Op::BatchNorm { .. } => "batch-norm",
            Op::Relu => "relu",
            Op::MaxPool { .. } => "max-pool",
            Op::AvgPool { .. } => "avg-pool",
            Op::GlobalAvgPool => "global-avg-pool",
            Op::Flatten => "flatten",
            Op::Concat => "concat",
            Op::ResidualAdd => "residual-add",
            Op::Softmax => "softmax",
        }
    }
}

/// A parameter tensor with its gradient buffer.
#[derive(Debug, Clone)]
pub struct Param<T: Scalar> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    /// Running batch-norm statistics are parameters but not trainable.
    pub trainable: bool,
}

impl<T: Scalar> Param<T> {
    fn new(name: &'static str, value: Tensor<T>, trainable: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            name,
            value,
            grad,
            trainable,
        }
    }
}

#[derive(Debug)]
enum Cache<T: Scalar> {
    None,
    MaxPool(Vec<u32>),
    BatchNorm(norm::BnCache<T>),
}

#[derive(Debug)]
pub struct Node<T: Scalar> {
    name: String,
    op: Op,
    deps: Vec<usize>,
    params: Vec<Param<T>>,
    /// Per-sample output shape (batch axis excluded).
    out_shape: Vec<usize>,
    stream: Option<usize>,
    out: Option<Tensor<T>>,
    grad: Option<Tensor<T>>,
    cache: Cache<T>,
}

impl<T: Scalar> Node<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn op(&self) -> &Op {
        &self.op
    }

    pub fn deps(&self) -> &[usize] {
        &self.deps
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    /// Stream index this node belongs to; `None` for shared/head nodes.
    pub fn stream(&self) -> Option<usize> {
        self.stream
    }

    /// Last forward activation, if any.
    pub fn output(&self) -> Option<&Tensor<T>> {
        self.out.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef(usize);

impl NodeRef {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Incrementally builds a validated graph; shape inference runs per added node.
pub struct GraphBuilder<T: Scalar> {
    nodes: Vec<Node<T>>,
    inputs: Vec<usize>,
    rng: ChaCha8Rng,
    current_stream: Option<usize>,
}

impl<T: Scalar> GraphBuilder<T> {
    pub fn new(seed: u64) -> Self {
        GraphBuilder {
            nodes: Vec::new(),
            inputs: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            current_stream: None,
        }
    }

    /// Nodes added until `end_stream` are tagged as belonging to `stream`.
    pub fn begin_stream(&mut self, stream: usize) {
        self.current_stream = Some(stream);
    }

    pub fn end_stream(&mut self) {
        self.current_stream = None;
    }

    fn he_uniform(&mut self, fan_in: usize, shape: &[usize]) -> Tensor<T> {
        let limit = (6.0 / fan_in as f64).sqrt();
        let len: usize = shape.iter().product();
        let data: Vec<T> = (0..len)
            .map(|_| T::from_f64((self.rng.random::<f64>() * 2.0 - 1.0) * limit))
            .collect();
        Tensor::from_vec(shape, data).expect("shape/data consistent")
    }

    fn push(
        &mut self,
        name: impl Into<String>,
        op: Op,
        deps: Vec<usize>,
        params: Vec<Param<T>>,
        out_shape: Vec<usize>,
    ) -> NodeRef {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            name: name.into(),
            op,
            deps,
            params,
            out_shape,
            stream: self.current_stream,
            out: None,
            grad: None,
            cache: Cache::None,
        });
        NodeRef(idx)
    }

    fn shape_of(&self, dep: NodeRef) -> &[usize] {
        &self.nodes[dep.0].out_shape
    }

    fn expect_spatial(&self, dep: NodeRef, what: &str) -> Result<(usize, usize, usize)> {
        let s = self.shape_of(dep);
        if s.len() != 3 {
            return Err(Error::InvalidGraph(format!(
                "{what} requires an (H, W, C) input, got {s:?} from `{}`",
                self.nodes[dep.0].name
            )));
        }
        Ok((s[0], s[1], s[2]))
    }

    pub fn input(&mut self, name: impl Into<String>, shape: &[usize]) -> NodeRef {
        let idx = self.nodes.len();
        let r = self.push(name, Op::Input, vec![], vec![], shape.to_vec());
        self.inputs.push(idx);
        r
    }

    pub fn conv2d(
        &mut self,
        name: impl Into<String>,
        dep: NodeRef,
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    ) -> Result<NodeRef> {
        let name = name.into();
        if filters == 0 {
            return Err(Error::arg(format!("conv `{name}`: zero filters")));
        }
        let (h, w, c) = self.expect_spatial(dep, "conv2d")?;
        let oh = shapes::out_extent(h, kernel.0, stride.0, padding)?;
        let ow = shapes::out_extent(w, kernel.1, stride.1, padding)?;
        let weight = self.he_uniform(kernel.0 * kernel.1 * c, &[kernel.0, kernel.1, c, filters]);
        let mut params = vec![Param::new("weight", weight, true)];
        if bias {
            params.push(Param::new("bias", Tensor::zeros(&[filters]), true));
        }
        Ok(self.push(
            name,
            Op::Conv2d {
                filters,
                kernel,
                stride,
                padding,
                bias,
            },
            vec![dep.0],
            params,
            vec![oh, ow, filters],
        ))
    }

    pub fn depthwise_conv2d(
        &mut self,
        name: impl Into<String>,
        dep: NodeRef,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        bias: bool,
    ) -> Result<NodeRef> {
        let (h, w, c) = self.expect_spatial(dep, "depthwise-conv2d")?;
        let oh = shapes::out_extent(h, kernel.0, stride.0, padding)?;
        let ow = shapes::out_extent(w, kernel.1, stride.1, padding)?;
        let weight = self.he_uniform(kernel.0 * kernel.1, &[kernel.0, kernel.1, c]);
        let mut params = vec![Param::new("weight", weight, true)];
        if bias {
            params.push(Param::new("bias", Tensor::zeros(&[c]), true));
        }
        Ok(self.push(
            name,
            Op::DepthwiseConv2d {
                kernel,
                stride,
                padding,
                bias,
            },
            vec![dep.0],
            params,
            vec![oh, ow, c],
        ))
    }

    pub fn dense(
        &mut self,
        name: impl Into<String>,
        dep: NodeRef,
        units: usize,
        bias: bool,
    ) -> Result<NodeRef> {
        let name = name.into();
        if units == 0 {
            return Err(Error::arg(format!("dense `{name}`: zero units")));
        }
        let s = self.shape_of(dep);
        if s.len() != 1 {
            return Err(Error::InvalidGraph(format!(
                "dense `{name}` requires a flat (F,) input, got {s:?}"
            )));
        }
        let in_f = s[0];
        let weight = self.he_uniform(in_f, &[in_f, units]);
        let mut params = vec![Param::new("weight", weight, true)];
        if bias {
            params.push(Param::new("bias", Tensor::zeros(&[units]), true));
        }
        Ok(self.push(
            name,
            Op::Dense { units, bias },
            vec![dep.0],
            params,
            vec![units],
        ))
    }

    pub fn batch_norm(&mut self, name: impl Into<String>, dep: NodeRef) -> Result<NodeRef> {
        let shape = self.shape_of(dep).to_vec();
        let channels = *shape.last().unwrap();
        let params = vec![
            Param::new("scale", Tensor::filled(&[channels], T::one()), true),
            Param::new("shift", Tensor::zeros(&[channels]), true),
            Param::new("running_mean", Tensor::zeros(&[channels]), false),
            Param::new("running_var", Tensor::filled(&[channels], T::one()), false),
        ];
        Ok(self.push(
            name,
            Op::BatchNorm {
                epsilon: BN_EPSILON,
                momentum: BN_MOMENTUM,
            },
            vec![dep.0],
            params,
            shape,
        ))
    }

    pub fn relu(&mut self, name: impl Into<String>, dep: NodeRef) -> NodeRef {
        let shape = self.shape_of(dep).to_vec();
        self.push(name, Op::Relu, vec![dep.0], vec![], shape)
    }

    pub fn max_pool(
        &mut self,
        name: impl Into<String>,
        dep: NodeRef,
        size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<NodeRef> {
        let (h, w, c) = self.expect_spatial(dep, "max-pool")?;
        let oh = shapes::out_extent(h, size.0, stride.0, padding)?;
        let ow = shapes::out_extent(w, size.1, stride.1, padding)?;
        Ok(self.push(
            name,
            Op::MaxPool {
                size,
                stride,
                padding,
            },
            vec![dep.0],
            vec![],
            vec![oh, ow, c],
        ))
    }

    pub fn avg_pool(
        &mut self,
        name: impl Into<String>,
        dep: NodeRef,
        size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<NodeRef> {
        let (h, w, c) = self.expect_spatial(dep, "avg-pool")?;
        let oh = shapes::out_extent(h, size.0, stride.0, padding)?;
        let ow = shapes::out_extent(w, size.1, stride.1, padding)?;
        Ok(self.push(
            name,
            Op::AvgPool {
                size,
                stride,
                padding,
            },
            vec![dep.0],
            vec![],
            vec![oh, ow, c],
        ))
    }

    pub fn global_avg_pool(&mut self, name: impl Into<String>, dep: NodeRef) -> Result<NodeRef> {
        let (_, _, c) = self.expect_spatial(dep, "global-avg-pool")?;
        Ok(self.push(name, Op::GlobalAvgPool, vec![dep.0], vec![], vec![c]))
    }

    pub fn flatten(&mut self, name: impl Into<String>, dep: NodeRef) -> NodeRef {
        let volume: usize = self.shape_of(dep).iter().product();
        self.push(name, Op::Flatten, vec![dep.0], vec![], vec![volume])
    }

    pub fn concat(&mut self, name: impl Into<String>, deps: &[NodeRef]) -> Result<NodeRef> {
        let name = name.into();
        if deps.len() < 2 {
            return Err(Error::InvalidGraph(format!(
                "concat `{name}` joins {} branch(es); at least 2 required",
                deps.len()
            )));
        }
        let first = self.shape_of(deps[0]).to_vec();
        let lead = &first[..first.len() - 1];
        let mut total = 0;
        for d in deps {
            let s = self.shape_of(*d);
            if &s[..s.len() - 1] != lead {
                return Err(Error::InvalidGraph(format!(
                    "concat `{name}`: leading axes differ ({:?} vs {:?})",
                    first,
                    s
                )));
            }
            total += s.last().unwrap();
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        Ok(self.push(
            name,
            Op::Concat,
            deps.iter().map(|d| d.0).collect(),
            vec![],
            shape,
        ))
    }

    pub fn residual_add(
        &mut self,
        name: impl Into<String>,
        a: NodeRef,
        b: NodeRef,
    ) -> Result<NodeRef> {
        let name = name.into();
        let sa = self.shape_of(a).to_vec();
        let sb = self.shape_of(b);
        if sa != sb {
            return Err(Error::InvalidGraph(format!(
                "residual-add `{name}`: branch shapes differ ({sa:?} vs {sb:?})"
            )));
        }
        Ok(self.push(name, Op::ResidualAdd, vec![a.0, b.0], vec![], sa))
    }

    pub fn softmax(&mut self, name: impl Into<String>, dep: NodeRef) -> Result<NodeRef> {
        let s = self.shape_of(dep).to_vec();
        if s.len() != 1 {
            return Err(Error::InvalidGraph(format!(
                "softmax requires a flat (classes,) input, got {s:?}"
            )));
        }
        Ok(self.push(name, Op::Softmax, vec![dep.0], vec![], s))
    }

    pub fn build(self, output: NodeRef) -> Result<Graph<T>> {
        let nodes = self.nodes;
        let inputs = self.inputs;
        if inputs.is_empty() {
            return Err(Error::InvalidGraph("graph has no inputs".into()));
        }
        if !matches!(nodes[output.0].op, Op::Softmax) {
            return Err(Error::InvalidGraph(format!(
                "output node `{}` is not softmax",
                nodes[output.0].name
            )));
        }
        for (i, n) in nodes.iter().enumerate() {
            if matches!(n.op, Op::Softmax) && i != output.0 {
                return Err(Error::InvalidGraph(format!(
                    "softmax node `{}` is not the graph output",
                    n.name
                )));
            }
            if n.deps.iter().any(|&d| d >= i) {
                return Err(Error::InvalidGraph(format!(
                    "node `{}` depends on a later node; order is not topological",
                    n.name
                )));
            }
        }
        // every node reachable from some input
        let mut reachable = vec![false; nodes.len()];
        for &i in &inputs {
            reachable[i] = true;
        }
        for (i, n) in nodes.iter().enumerate() {
            if !n.deps.is_empty() && n.deps.iter().any(|&d| reachable[d]) {
                reachable[i] = true;
            }
        }
        if let Some(i) = reachable.iter().position(|r| !r) {
            return Err(Error::InvalidGraph(format!(
                "node `{}` is unreachable from any input",
                nodes[i].name
            )));
        }
        let classes = nodes[output.0].out_shape[0];
        let num_streams = nodes
            .iter()
            .filter_map(|n| n.stream)
            .max()
            .map_or(1, |m| m + 1);
        Ok(Graph {
            nodes,
            inputs,
            output: output.0,
            classes,
            num_streams,
            arch_text: None,
            last_batch: None,
            last_training: false,
        })
    }
}

/// Executable network with owned parameters.
#[derive(Debug)]
pub struct Graph<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
    inputs: Vec<usize>,
    output: usize,
    classes: usize,
    num_streams: usize,
    arch_text: Option<String>,
    last_batch: Option<usize>,
    last_training: bool,
}

impl<T: Scalar> Graph<T> {
    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node<T> {
        &self.nodes[idx]
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut Node<T> {
        &mut self.nodes[idx]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_shapes(&self) -> Vec<&[usize]> {
        self.inputs
            .iter()
            .map(|&i| self.nodes[i].out_shape.as_slice())
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn num_streams(&self) -> usize {
        self.num_streams
    }

    /// Canonical architecture text this graph was compiled from, if any.
    pub fn arch_text(&self) -> Option<&str> {
        self.arch_text.as_deref()
    }

    pub fn set_arch_text(&mut self, text: String) {
        self.arch_text = Some(text);
    }

    pub fn total_params(&self) -> usize {
        self.nodes
            .iter()
            .flat_map(|n| &n.params)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn for_each_param(&self, mut f: impl FnMut(&str, &Param<T>)) {
        for n in &self.nodes {
            for p in &n.params {
                f(&n.name, p);
            }
        }
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut Param<T>)) {
        for n in &mut self.nodes {
            for p in &mut n.params {
                f(&n.name, p);
            }
        }
    }

    /// Casts every parameter into a fresh graph of another precision.
    pub fn cast<U: Scalar>(&self) -> Graph<U> {
        Graph {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    name: n.name.clone(),
                    op: n.op.clone(),
                    deps: n.deps.clone(),
                    params: n
                        .params
                        .iter()
                        .map(|p| Param {
                            name: p.name,
                            value: p.value.cast(),
                            grad: Tensor::zeros(p.grad.shape()),
                            trainable: p.trainable,
                        })
                        .collect(),
                    out_shape: n.out_shape.clone(),
                    stream: n.stream,
                    out: None,
                    grad: None,
                    cache: Cache::None,
                })
                .collect(),
            inputs: self.inputs.clone(),
            output: self.output,
            classes: self.classes,
            num_streams: self.num_streams,
            arch_text: self.arch_text.clone(),
            last_batch: None,
            last_training: false,
        }
    }

    /// Runs the network on one batch per entry point; returns class
    /// probabilities of shape (batch, classes).
    pub fn forward(&mut self, inputs: &[Tensor<T>], training: bool) -> Result<Tensor<T>> {
        if inputs.len() != self.inputs.len() {
            return Err(Error::arg(format!(
                "graph has {} entry point(s), got {} input tensor(s)",
                self.inputs.len(),
                inputs.len()
            )));
        }
        let batch = inputs[0].shape()[0];
        for (k, t) in inputs.iter().enumerate() {
            let node = &self.nodes[self.inputs[k]];
            if t.shape()[0] != batch || t.shape()[1..] != node.out_shape[..] {
                let mut expected = vec![batch];
                expected.extend_from_slice(&node.out_shape);
                return Err(Error::ShapeMismatch {
                    node: node.name.clone(),
                    expected: format!("{expected:?}"),
                    actual: format!("{:?}", t.shape()),
                });
            }
            if !t.all_finite() {
                return Err(Error::NonFinite(format!("input `{}`", node.name)));
            }
        }

        for n in &mut self.nodes {
            n.out = None;
            n.grad = None;
            n.cache = Cache::None;
        }

        for idx in 0..self.nodes.len() {
            let (done, rest) = self.nodes.split_at_mut(idx);
            let node = &mut rest[0];
            let dep_out = |d: usize| done[d].out.as_ref().expect("topological order");
            let (out, cache) = match &node.op {
                Op::Input => {
                    let k = self.inputs.iter().position(|&i| i == idx).unwrap();
                    (inputs[k].clone(), Cache::None)
                }
                Op::Conv2d {
                    stride,
                    padding,
                    bias,
                    ..
                } => {
                    let b = bias.then(|| &node.params[1].value);
                    (
                        conv::conv2d_forward(
                            dep_out(node.deps[0]),
                            &node.params[0].value,
                            b,
                            *stride,
                            *padding,
                        ),
                        Cache::None,
                    )
                }
                Op::DepthwiseConv2d {
                    stride,
                    padding,
                    bias,
                    ..
                } => {
                    let b = bias.then(|| &node.params[1].value);
                    (
                        conv::depthwise_forward(
                            dep_out(node.deps[0]),
                            &node.params[0].value,
                            b,
                            *stride,
                            *padding,
                        ),
                        Cache::None,
                    )
                }
                Op::Dense { bias, .. } => {
                    let b = bias.then(|| &node.params[1].value);
                    (
                        dense::dense_forward(dep_out(node.deps[0]), &node.params[0].value, b),
                        Cache::None,
                    )
                }
                Op::BatchNorm { epsilon, momentum } => {
                    let fwd = norm::bn_forward(
                        dep_out(node.deps[0]),
                        &node.params[0].value,
                        &node.params[1].value,
                        &node.params[2].value,
                        &node.params[3].value,
                        *epsilon,
                        training,
                    );
                    if let Some((mean, var)) = &fwd.batch_stats {
                        norm::update_running(&mut node.params[2].value, mean, *momentum);
                        norm::update_running(&mut node.params[3].value, var, *momentum);
                    }
                    (
                        fwd.out,
                        fwd.cache.map_or(Cache::None, Cache::BatchNorm),
                    )
                }
                Op::Relu => (elem::relu_forward(dep_out(node.deps[0])), Cache::None),
                Op::MaxPool {
                    size,
                    stride,
                    padding,
                } => {
                    let (out, argmax) =
                        pool::max_pool_forward(dep_out(node.deps[0]), *size, *stride, *padding);
                    (out, Cache::MaxPool(argmax))
                }
                Op::AvgPool {
                    size,
                    stride,
                    padding,
                } => (
                    pool::avg_pool_forward(dep_out(node.deps[0]), *size, *stride, *padding),
                    Cache::None,
                ),
                Op::GlobalAvgPool => (
                    pool::global_avg_pool_forward(dep_out(node.deps[0])),
                    Cache::None,
                ),
                Op::Flatten => (elem::flatten_forward(dep_out(node.deps[0])), Cache::None),
                Op::Concat => {
                    let parts: Vec<&Tensor<T>> = node.deps.iter().map(|&d| dep_out(d)).collect();
                    (elem::concat_forward(&parts), Cache::None)
                }
                Op::ResidualAdd => (
                    elem::add_forward(dep_out(node.deps[0]), dep_out(node.deps[1])),
                    Cache::None,
                ),
                Op::Softmax => (elem::softmax_forward(dep_out(node.deps[0])), Cache::None),
            };
            node.out = Some(out);
            node.cache = cache;
        }

        self.last_batch = Some(batch);
        self.last_training = training;
        Ok(self.nodes[self.output].out.clone().unwrap())
    }

    /// Fills every trainable parameter's gradient buffer from the mean
    /// softmax cross-entropy loss against `labels`.
    pub fn backward(&mut self, labels: &[usize]) -> Result<()> {
        let batch = self.last_batch.ok_or(Error::BackwardBeforeForward)?;
        if !self.last_training {
            return Err(Error::arg(
                "backward requires the preceding forward to run in training mode",
            ));
        }
        if labels.len() != batch {
            return Err(Error::arg(format!(
                "batch size {batch} but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::arg(format!(
                "label {bad} out of range for {} classes",
                self.classes
            )));
        }

        for n in &mut self.nodes {
            n.grad = None;
            for p in &mut n.params {
                p.grad.fill(T::zero());
            }
        }

        // Fused softmax + cross-entropy gradient at the logits.
        let logits_idx = self.nodes[self.output].deps[0];
        let fused = {
            let probs = self.nodes[self.output].out.as_ref().unwrap();
            elem::softmax_xent_input_grad(probs, labels)
        };
        accumulate(&mut self.nodes[logits_idx].grad, fused);

        for idx in (0..self.nodes.len()).rev() {
            if idx == self.output || matches!(self.nodes[idx].op, Op::Input) {
                continue;
            }
            let Some(dout) = self.nodes[idx].grad.take() else {
                continue;
            };
            let (done, rest) = self.nodes.split_at_mut(idx);
            let node = &mut rest[0];
            let deps = node.deps.clone();
            let need: Vec<bool> = deps
                .iter()
                .map(|&d| !matches!(done[d].op, Op::Input))
                .collect();

            match &node.op {
                Op::Input | Op::Softmax => unreachable!(),
                Op::Conv2d {
                    stride,
                    padding,
                    bias,
                    ..
                } => {
                    let x = done[deps[0]].out.as_ref().unwrap();
                    let (dx, dw, db) = conv::conv2d_backward(
                        x,
                        &node.params[0].value,
                        &dout,
                        *stride,
                        *padding,
                        need[0],
                        *bias,
                    );
                    add_param_grad(&mut node.params[0].grad, dw);
                    if let Some(db) = db {
                        add_param_grad(&mut node.params[1].grad, db);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::DepthwiseConv2d {
                    stride,
                    padding,
                    bias,
                    ..
                } => {
                    let x = done[deps[0]].out.as_ref().unwrap();
                    let (dx, dw, db) = conv::depthwise_backward(
                        x,
                        &node.params[0].value,
                        &dout,
                        *stride,
                        *padding,
                        need[0],
                        *bias,
                    );
                    add_param_grad(&mut node.params[0].grad, dw);
                    if let Some(db) = db {
                        add_param_grad(&mut node.params[1].grad, db);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::Dense { bias, .. } => {
                    let x = done[deps[0]].out.as_ref().unwrap();
                    let (dx, dw, db) = dense::dense_backward(
                        x,
                        &node.params[0].value,
                        &dout,
                        need[0],
                        *bias,
                    );
                    add_param_grad(&mut node.params[0].grad, dw);
                    if let Some(db) = db {
                        add_param_grad(&mut node.params[1].grad, db);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::BatchNorm { .. } => {
                    let Cache::BatchNorm(cache) = &node.cache else {
                        return Err(Error::arg(format!(
                            "batch-norm `{}` has no training-mode cache",
                            node.name
                        )));
                    };
                    let (dx, dgamma, dbeta) =
                        norm::bn_backward(&dout, &node.params[0].value, cache);
                    add_param_grad(&mut node.params[0].grad, dgamma);
                    add_param_grad(&mut node.params[1].grad, dbeta);
                    if need[0] {
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::Relu => {
                    if need[0] {
                        let dx = elem::relu_backward(node.out.as_ref().unwrap(), &dout);
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::MaxPool { .. } => {
                    if need[0] {
                        let Cache::MaxPool(argmax) = &node.cache else {
                            unreachable!("max-pool always caches switches")
                        };
                        let x_shape = done[deps[0]].out.as_ref().unwrap().shape().to_vec();
                        let dx = pool::max_pool_backward(&x_shape, &dout, argmax);
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::AvgPool {
                    size,
                    stride,
                    padding,
                } => {
                    if need[0] {
                        let x_shape = done[deps[0]].out.as_ref().unwrap().shape().to_vec();
                        let dx =
                            pool::avg_pool_backward(&x_shape, &dout, *size, *stride, *padding);
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::GlobalAvgPool => {
                    if need[0] {
                        let x_shape = done[deps[0]].out.as_ref().unwrap().shape().to_vec();
                        let dx = pool::global_avg_pool_backward(&x_shape, &dout);
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::Flatten => {
                    if need[0] {
                        let x_shape = done[deps[0]].out.as_ref().unwrap().shape().to_vec();
                        let dx = elem::flatten_backward(&x_shape, &dout);
                        accumulate(&mut done[deps[0]].grad, dx);
                    }
                }
                Op::Concat => {
                    let widths: Vec<usize> = deps
                        .iter()
                        .map(|&d| *done[d].out.as_ref().unwrap().shape().last().unwrap())
                        .collect();
                    let parts = elem::concat_backward(&dout, &widths);
                    for ((&d, part), &wanted) in deps.iter().zip(parts).zip(&need) {
                        if wanted {
                            accumulate(&mut done[d].grad, part);
                        }
                    }
                }
                Op::ResidualAdd => {
                    for (&d, &wanted) in deps.iter().zip(&need) {
                        if wanted {
                            accumulate(&mut done[d].grad, dout.clone());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Structural weight-decoupling check: every parameterized node is
    /// either private to exactly one stream (reachable from a single entry
    /// point) or part of the shared head (reachable from all of them).
    pub fn check_stream_isolation(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut reach: Vec<Vec<bool>> = vec![vec![false; n]; self.inputs.len()];
        for (k, &inp) in self.inputs.iter().enumerate() {
            reach[k][inp] = true;
            for i in 0..n {
                if !self.nodes[i].deps.is_empty()
                    && self.nodes[i].deps.iter().any(|&d| reach[k][d])
                {
                    reach[k][i] = true;
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.params.is_empty() {
                continue;
            }
            let reaching = reach.iter().filter(|r| r[i]).count();
            match node.stream {
                Some(s) => {
                    if reaching != 1 || !reach[s][i] {
                        return Err(Error::InvalidGraph(format!(
                            "stream node `{}` is reachable from {} entry points",
                            node.name, reaching
                        )));
                    }
                }
                None => {
                    if reaching != self.inputs.len() {
                        return Err(Error::InvalidGraph(format!(
                            "head node `{}` is reachable from {} of {} entry points",
                            node.name,
                            reaching,
                            self.inputs.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, delta: Tensor<T>) {
    match slot {
        None => *slot = Some(delta),
        Some(g) => {
            for (a, &b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a = *a + b;
            }
        }
    }
}

fn add_param_grad<T: Scalar>(grad: &mut Tensor<T>, delta: Tensor<T>) {
    for (a, &b) in grad.data_mut().iter_mut().zip(delta.data()) {
        *a = *a + b;
    }
}

#[cfg(test)]
mod tests;
