//! Central finite-difference verification of analytic gradients.
//!
//! Intended for 64-bit graphs on small batches. At least
//! [`SAMPLES_PER_KIND`] trainable parameters are checked per layer kind
//! (all of them when a kind has fewer). Max-pooling argmax ties can foil a
//! finite-difference probe; callers use continuous random inputs and a step
//! small enough not to flip the winning cell.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::error::Result;
use crate::graph::Graph;
use crate::loss::cross_entropy;
use crate::tensor::{Scalar, Tensor};

pub const SAMPLES_PER_KIND: usize = 100;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max over sampled parameters of |analytic - numeric| / max(|a|, |n|, 1e-8)
    pub max_rel_err: f64,
    /// worst error per layer kind, in first-encounter order
    pub by_kind: Vec<(&'static str, f64)>,
}

struct Coord {
    node: usize,
    param: usize,
    elem: usize,
    kind: &'static str,
    analytic: f64,
}

/// Compares backprop gradients against (L(w+h) - L(w-h)) / 2h.
pub fn grad_check<T: Scalar>(
    graph: &mut Graph<T>,
    inputs: &[Tensor<T>],
    labels: &[usize],
    step: f64,
) -> Result<GradCheckReport> {
    // Snapshot parameters (running statistics drift across probe forwards).
    let snapshot: Vec<Tensor<T>> = {
        let mut s = Vec::new();
        graph.for_each_param(|_, p| s.push(p.value.clone()));
        s
    };

    let probs = graph.forward(inputs, true)?;
    let _ = cross_entropy(&probs, labels)?;
    graph.backward(labels)?;

    // Group trainable coordinates by layer kind and sample each group.
    let mut kinds: Vec<&'static str> = Vec::new();
    let mut group_sizes: Vec<usize> = Vec::new();
    let mut group_coords: Vec<Vec<(usize, usize, usize)>> = Vec::new(); // (node, param, len)
    for (ni, node) in graph.nodes().iter().enumerate() {
        for (pi, p) in node.params().iter().enumerate() {
            if !p.trainable {
                continue;
            }
            let kind = node.op().kind_name();
            let g = match kinds.iter().position(|&k| k == kind) {
                Some(g) => g,
                None => {
                    kinds.push(kind);
                    group_sizes.push(0);
                    group_coords.push(Vec::new());
                    kinds.len() - 1
                }
            };
            group_sizes[g] += p.value.len();
            group_coords[g].push((ni, pi, p.value.len()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut coords: Vec<Coord> = Vec::new();
    for (g, kind) in kinds.iter().enumerate() {
        let total = group_sizes[g];
        let flat_picks: Vec<usize> = if total <= SAMPLES_PER_KIND {
            (0..total).collect()
        } else {
            let mut seen = HashSet::new();
            let mut picks = Vec::with_capacity(SAMPLES_PER_KIND);
            while picks.len() < SAMPLES_PER_KIND {
                let i = rng.random_range(0..total);
                if seen.insert(i) {
                    picks.push(i);
                }
            }
            picks
        };
        for flat in flat_picks {
            let mut offset = flat;
            for &(ni, pi, len) in &group_coords[g] {
                if offset < len {
                    let analytic = graph.node(ni).params()[pi].grad.data()[offset].to_f64();
                    coords.push(Coord {
                        node: ni,
                        param: pi,
                        elem: offset,
                        kind,
                        analytic,
                    });
                    break;
                }
                offset -= len;
            }
        }
    }

    let h = T::from_f64(step);
    let mut max_rel = 0.0f64;
    let mut by_kind: Vec<(&'static str, f64)> = kinds.iter().map(|&k| (k, 0.0)).collect();
    for c in &coords {
        let original = graph.node(c.node).params()[c.param].value.data()[c.elem];

        graph.node_mut(c.node).params_mut()[c.param].value.data_mut()[c.elem] = original + h;
        let plus = cross_entropy(&graph.forward(inputs, true)?, labels)?.to_f64();

        graph.node_mut(c.node).params_mut()[c.param].value.data_mut()[c.elem] = original - h;
        let minus = cross_entropy(&graph.forward(inputs, true)?, labels)?.to_f64();

        graph.node_mut(c.node).params_mut()[c.param].value.data_mut()[c.elem] = original;

        let numeric = (plus - minus) / (2.0 * step);
        let rel = (c.analytic - numeric).abs() / c.analytic.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
        let slot = by_kind.iter_mut().find(|(k, _)| *k == c.kind).unwrap();
        slot.1 = slot.1.max(rel);
    }

    // Restore the exact pre-check state (running statistics included).
    let mut it = snapshot.into_iter();
    graph.for_each_param_mut(|_, p| p.value = it.next().expect("same param layout"));

    Ok(GradCheckReport {
        max_rel_err: max_rel,
        by_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, Padding};

    fn random_input(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn dense_only_graph_checks_tightly() {
        let mut b = GraphBuilder::new(1);
        let x = b.input("input", &[6]);
        let d1 = b.dense("hidden", x, 5, true).unwrap();
        let r = b.relu("relu", d1);
        let d2 = b.dense("logits", r, 3, true).unwrap();
        let s = b.softmax("probs", d2).unwrap();
        let mut g = b.build(s).unwrap();
        let report = grad_check(&mut g, &[random_input(&[4, 6], 2)], &[0, 1, 2, 0], 1e-4).unwrap();
        assert!(report.max_rel_err < 1e-7, "max err {}", report.max_rel_err);
    }

    #[test]
    fn batch_norm_graph_checks_in_training_mode() {
        let mut b = GraphBuilder::new(2);
        let x = b.input("input", &[4, 4, 2]);
        let c = b.conv2d("conv", x, 3, (3, 3), (1, 1), Padding::Same, false).unwrap();
        let bn = b.batch_norm("bn", c).unwrap();
        let r = b.relu("relu", bn);
        let f = b.flatten("flat", r);
        let d = b.dense("logits", f, 3, true).unwrap();
        let s = b.softmax("probs", d).unwrap();
        let mut g = b.build(s).unwrap();
        let before: Vec<f64> = {
            let mut v = Vec::new();
            g.for_each_param(|_, p| v.extend(p.value.data().iter().copied()));
            v
        };
        let report =
            grad_check(&mut g, &[random_input(&[4, 4 * 4 * 2], 3).reshape(&[4, 4, 4, 2]).unwrap()], &[0, 1, 2, 0], 1e-4)
                .unwrap();
        assert!(report.max_rel_err < 1e-5, "max err {}", report.max_rel_err);
        // the probe restored parameters and running statistics exactly
        let after: Vec<f64> = {
            let mut v = Vec::new();
            g.for_each_param(|_, p| v.extend(p.value.data().iter().copied()));
            v
        };
        assert_eq!(before, after);
    }

    #[test]
    fn max_pool_graph_checks_with_tie_free_input() {
        let mut b = GraphBuilder::new(3);
        let x = b.input("input", &[6, 6, 2]);
        let c = b.conv2d("conv", x, 4, (3, 3), (1, 1), Padding::Same, true).unwrap();
        let r = b.relu("relu", c);
        let p = b.max_pool("pool", r, (2, 2), (2, 2), Padding::Valid).unwrap();
        let f = b.flatten("flat", p);
        let d = b.dense("logits", f, 3, true).unwrap();
        let s = b.softmax("probs", d).unwrap();
        let mut g = b.build(s).unwrap();
        let input = random_input(&[2, 6 * 6 * 2], 4).reshape(&[2, 6, 6, 2]).unwrap();
        let report = grad_check(&mut g, &[input], &[0, 2], 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-5, "max err {}", report.max_rel_err);
    }
}
