//! Parameter update rules. SGD with momentum is the default; Adam is kept
//! behind a config flag. Running batch-norm statistics are never touched.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::arg(format!(
                "unknown optimizer `{other}` (expected sgd or adam)"
            ))),
        }
    }
}

pub enum Optimizer<T: Scalar> {
    Sgd(Sgd<T>),
    Adam(Adam<T>),
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(lr, momentum)),
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(lr)),
        }
    }

    pub fn step(&mut self, graph: &mut Graph<T>) -> Result<()> {
        match self {
            Optimizer::Sgd(o) => o.step(graph),
            Optimizer::Adam(o) => o.step(graph),
        }
    }
}

/// Aborts before mutating anything if any gradient is non-finite.
fn check_grads_finite<T: Scalar>(graph: &Graph<T>) -> Result<()> {
    for node in graph.nodes() {
        for p in node.params() {
            if p.trainable && !p.grad.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of `{}` at node `{}`",
                    p.name,
                    node.name()
                )));
            }
        }
    }
    Ok(())
}

/// v <- momentum*v + g;  w <- w - lr*v
pub struct Sgd<T: Scalar> {
    pub lr: T,
    pub momentum: T,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Sgd {
            lr: T::from_f64(lr),
            momentum: T::from_f64(momentum),
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, graph: &mut Graph<T>) -> Result<()> {
        check_grads_finite(graph)?;
        if self.velocity.is_empty() {
            graph.for_each_param(|_, p| {
                if p.trainable {
                    self.velocity.push(Tensor::zeros(p.value.shape()));
                }
            });
        }
        let (lr, momentum) = (self.lr, self.momentum);
        let mut slot = 0;
        let velocity = &mut self.velocity;
        graph.for_each_param_mut(|_, p| {
            if !p.trainable {
                return;
            }
            let v = &mut velocity[slot];
            slot += 1;
            for ((vv, &g), w) in v
                .data_mut()
                .iter_mut()
                .zip(p.grad.data())
                .zip(p.value.data_mut())
            {
                *vv = momentum * *vv + g;
                *w = *w - lr * *vv;
            }
        });
        Ok(())
    }
}

/// Adam with bias correction; defaults beta1=0.9, beta2=0.999, eps=1e-8.
pub struct Adam<T: Scalar> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    t: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr: T::from_f64(lr),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            epsilon: T::from_f64(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, graph: &mut Graph<T>) -> Result<()> {
        check_grads_finite(graph)?;
        if self.m.is_empty() {
            graph.for_each_param(|_, p| {
                if p.trainable {
                    self.m.push(Tensor::zeros(p.value.shape()));
                    self.v.push(Tensor::zeros(p.value.shape()));
                }
            });
        }
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.epsilon);
        let mut slot = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        graph.for_each_param_mut(|_, p| {
            if !p.trainable {
                return;
            }
            let m = &mut ms[slot];
            let v = &mut vs[slot];
            slot += 1;
            for (((mv, vv), &g), w) in m
                .data_mut()
                .iter_mut()
                .zip(v.data_mut())
                .zip(p.grad.data())
                .zip(p.value.data_mut())
            {
                *mv = b1 * *mv + (T::one() - b1) * g;
                *vv = b2 * *vv + (T::one() - b2) * g * g;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn tiny_graph() -> Graph<f64> {
        let mut b = GraphBuilder::new(0);
        let x = b.input("input", &[2]);
        let d = b.dense("logits", x, 2, false).unwrap();
        let s = b.softmax("probs", d).unwrap();
        b.build(s).unwrap()
    }

    fn set_grads(g: &mut Graph<f64>, grads: &[f64]) {
        let idx = g.node_index("logits").unwrap();
        g.node_mut(idx)
            .param_mut("weight")
            .unwrap()
            .grad
            .data_mut()
            .copy_from_slice(grads);
    }

    fn weights(g: &Graph<f64>) -> Vec<f64> {
        let idx = g.node_index("logits").unwrap();
        g.node(idx).param("weight").unwrap().value.data().to_vec()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut g = tiny_graph();
        let before = weights(&g);
        set_grads(&mut g, &[1.0, -2.0, 3.0, 4.0]);
        let mut opt = Sgd::new(0.0, 0.9);
        for _ in 0..5 {
            opt.step(&mut g).unwrap();
        }
        assert_eq!(weights(&g), before);
    }

    #[test]
    fn plain_sgd_single_step() {
        let mut g = tiny_graph();
        let idx = g.node_index("logits").unwrap();
        let w = g.node_mut(idx).param_mut("weight").unwrap();
        w.value.fill(0.0);
        w.value.data_mut()[0] = 1.0;
        set_grads(&mut g, &[2.0, 0.0, 0.0, 0.0]);
        let mut opt = Sgd::new(0.1, 0.0);
        opt.step(&mut g).unwrap();
        assert!((weights(&g)[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn momentum_recurrence_two_steps() {
        // v1 = 1, w = -0.1; v2 = 0.9 + 1 = 1.9, w = -0.1 - 0.19 = -0.29
        let mut g = tiny_graph();
        let idx = g.node_index("logits").unwrap();
        g.node_mut(idx).param_mut("weight").unwrap().value.fill(0.0);
        let mut opt = Sgd::new(0.1, 0.9);
        set_grads(&mut g, &[1.0, 1.0, 1.0, 1.0]);
        opt.step(&mut g).unwrap();
        set_grads(&mut g, &[1.0, 1.0, 1.0, 1.0]);
        opt.step(&mut g).unwrap();
        for &w in &weights(&g) {
            assert!((w - (-0.29)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_step_naming_the_node() {
        let mut g = tiny_graph();
        let before = weights(&g);
        set_grads(&mut g, &[1.0, f64::NAN, 1.0, 1.0]);
        let mut opt = Sgd::new(0.1, 0.0);
        let err = opt.step(&mut g).unwrap_err();
        assert!(err.to_string().contains("logits"), "got: {err}");
        assert_eq!(weights(&g), before);
    }

    #[test]
    fn adam_moves_parameters_against_gradient_sign() {
        let mut g = tiny_graph();
        let before = weights(&g);
        set_grads(&mut g, &[1.0, -1.0, 1.0, -1.0]);
        let mut opt = Adam::new(0.01);
        opt.step(&mut g).unwrap();
        let after = weights(&g);
        assert!(after[0] < before[0]);
        assert!(after[1] > before[1]);
    }
}
