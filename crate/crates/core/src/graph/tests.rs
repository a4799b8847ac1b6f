use super::*;
use crate::loss::cross_entropy;

fn seeded_image(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
    Tensor::from_vec(shape, data).unwrap()
}

#[test]
fn one_by_one_identity_conv_preserves_input() {
    let x = seeded_image(&[2, 3, 3, 4], 7);
    // w[0,0,ci,co] = 1 if ci == co
    let mut w = Tensor::<f64>::zeros(&[1, 1, 4, 4]);
    for c in 0..4 {
        w.data_mut()[c * 4 + c] = 1.0;
    }
    let b = Tensor::<f64>::zeros(&[4]);
    let out = conv::conv2d_forward(&x, &w, Some(&b), (1, 1), Padding::Same);
    assert_eq!(out, x);
}

#[test]
fn conv_same_padding_matches_hand_computation() {
    // 3x3 input, single channel, 3x3 kernel of ones, stride 1 same:
    // center output = sum of all 9, corner = sum of its 4-neighborhood.
    let x = Tensor::<f64>::from_vec(
        &[1, 3, 3, 1],
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
    )
    .unwrap();
    let w = Tensor::<f64>::filled(&[3, 3, 1, 1], 1.0);
    let out = conv::conv2d_forward(&x, &w, None, (1, 1), Padding::Same);
    assert_eq!(out.shape(), &[1, 3, 3, 1]);
    assert_eq!(out.data()[4], 45.0);
    assert_eq!(out.data()[0], 1.0 + 2.0 + 4.0 + 5.0);
    assert_eq!(out.data()[8], 5.0 + 6.0 + 8.0 + 9.0);
}

#[test]
fn depthwise_conv_applies_per_channel_kernels() {
    // Two channels, 1x1 kernels scaling by 2 and 3 respectively.
    let x = Tensor::<f64>::from_vec(&[1, 1, 2, 2], vec![1.0, 10.0, 2.0, 20.0]).unwrap();
    let w = Tensor::<f64>::from_vec(&[1, 1, 2], vec![2.0, 3.0]).unwrap();
    let out = conv::depthwise_forward(&x, &w, None, (1, 1), Padding::Same);
    assert_eq!(out.data(), &[2.0, 30.0, 4.0, 60.0]);
}

#[test]
fn max_pool_tracks_argmax_and_routes_gradient() {
    let x = Tensor::<f64>::from_vec(
        &[1, 2, 4, 1],
        vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 8.0, 6.0],
    )
    .unwrap();
    let (out, argmax) = pool::max_pool_forward(&x, (2, 2), (2, 2), Padding::Valid);
    assert_eq!(out.shape(), &[1, 1, 2, 1]);
    assert_eq!(out.data(), &[5.0, 8.0]);
    let dout = Tensor::<f64>::from_vec(&[1, 1, 2, 1], vec![0.5, 0.25]).unwrap();
    let dx = pool::max_pool_backward(&[1, 2, 4, 1], &dout, &argmax);
    assert_eq!(dx.data(), &[0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0]);
}

#[test]
fn avg_pool_excludes_padding_from_divisor() {
    // 3x3 input, 2x2 pool stride 2 same -> 2x2 output; bottom-right window
    // covers only cell (2,2).
    let x = Tensor::<f64>::from_vec(
        &[1, 3, 3, 1],
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
    )
    .unwrap();
    let out = pool::avg_pool_forward(&x, (2, 2), (2, 2), Padding::Same);
    assert_eq!(out.shape(), &[1, 2, 2, 1]);
    assert_eq!(out.data()[0], (1.0 + 2.0 + 4.0 + 5.0) / 4.0);
    assert_eq!(out.data()[1], (3.0 + 6.0) / 2.0);
    assert_eq!(out.data()[3], 9.0);
}

fn dense_softmax_graph(in_f: usize, classes: usize) -> Graph<f64> {
    let mut b = GraphBuilder::new(0);
    let x = b.input("input", &[in_f]);
    let d = b.dense("logits", x, classes, true).unwrap();
    let s = b.softmax("probs", d).unwrap();
    b.build(s).unwrap()
}

#[test]
fn dense_logit_gradient_is_probs_minus_onehot_over_batch() {
    let mut g = dense_softmax_graph(3, 3);
    // Zero weights -> uniform probabilities; identity input makes the
    // weight gradient equal the logit gradient.
    g.node_mut(1).param_mut("weight").unwrap().value.fill(0.0);
    let mut x = Tensor::<f64>::zeros(&[3, 3]);
    for i in 0..3 {
        x.data_mut()[i * 3 + i] = 1.0;
    }
    let labels = [0usize, 1, 2];
    let probs = g.forward(&[x], true).unwrap();
    for &p in probs.data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
    g.backward(&labels).unwrap();
    let dw = &g.node(1).param("weight").unwrap().grad;
    for i in 0..3 {
        for j in 0..3 {
            let expected = ((1.0 / 3.0) - if i == j { 1.0 } else { 0.0 }) / 3.0;
            assert!((dw.data()[i * 3 + j] - expected).abs() < 1e-12);
        }
    }
    // bias gradient sums logit gradients over the batch: zero here
    let db = &g.node(1).param("bias").unwrap().grad;
    for &v in db.data() {
        assert!(v.abs() < 1e-12);
    }
}

#[test]
fn parameter_off_the_output_path_gets_zero_gradient() {
    let mut b = GraphBuilder::new(3);
    let x = b.input("input", &[4, 4, 1]);
    let main = b
        .conv2d("main", x, 2, (3, 3), (1, 1), Padding::Same, true)
        .unwrap();
    let _dangling = b
        .conv2d("dangling", x, 2, (3, 3), (1, 1), Padding::Same, true)
        .unwrap();
    let f = b.flatten("flat", main);
    let d = b.dense("logits", f, 2, true).unwrap();
    let s = b.softmax("probs", d).unwrap();
    let mut g = b.build(s).unwrap();

    let input = seeded_image(&[2, 4, 4, 1], 11);
    g.forward(&[input], true).unwrap();
    g.backward(&[0, 1]).unwrap();
    let idx = g.node_index("dangling").unwrap();
    for p in g.node(idx).params() {
        assert!(p.grad.data().iter().all(|&v| v == 0.0));
    }
    let main_idx = g.node_index("main").unwrap();
    assert!(g.node(main_idx).params()[0]
        .grad
        .data()
        .iter()
        .any(|&v| v != 0.0));
}

#[test]
fn forward_rejects_shape_mismatch_naming_the_node() {
    let mut g = dense_softmax_graph(4, 2);
    let bad = Tensor::<f64>::zeros(&[1, 5]);
    let err = g.forward(&[bad], false).unwrap_err();
    assert!(err.to_string().contains("input"), "got: {err}");
    assert!(matches!(err, Error::ShapeMismatch { .. }));
}

#[test]
fn forward_rejects_non_finite_input() {
    let mut g = dense_softmax_graph(4, 2);
    let mut bad = Tensor::<f64>::zeros(&[1, 4]);
    bad.data_mut()[2] = f64::INFINITY;
    assert!(matches!(
        g.forward(&[bad], false),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn forward_rejects_wrong_arity() {
    let mut g = dense_softmax_graph(4, 2);
    let x = Tensor::<f64>::zeros(&[1, 4]);
    assert!(g.forward(&[x.clone(), x], false).is_err());
}

#[test]
fn backward_before_forward_rejected() {
    let mut g = dense_softmax_graph(4, 2);
    assert!(matches!(
        g.backward(&[0]),
        Err(Error::BackwardBeforeForward)
    ));
}

#[test]
fn backward_after_inference_forward_rejected() {
    let mut g = dense_softmax_graph(4, 2);
    let x = Tensor::<f64>::zeros(&[1, 4]);
    g.forward(&[x], false).unwrap();
    assert!(g.backward(&[0]).is_err());
}

#[test]
fn biased_conv_before_batch_norm_trains_cleanly() {
    // Reference ResNet50 keeps conv biases even under batch-norm; the bias
    // is redundant there but must build and train without issue.
    let mut b = GraphBuilder::<f64>::new(0);
    let x = b.input("input", &[4, 4, 3]);
    let c = b
        .conv2d("conv", x, 4, (3, 3), (1, 1), Padding::Same, true)
        .unwrap();
    let bn = b.batch_norm("bn", c).unwrap();
    let f = b.flatten("flat", bn);
    let d = b.dense("logits", f, 2, true).unwrap();
    let s = b.softmax("probs", d).unwrap();
    let mut g = b.build(s).unwrap();
    let input = seeded_image(&[2, 4, 4, 3], 5);
    g.forward(&[input], true).unwrap();
    g.backward(&[0, 1]).unwrap();
}

#[test]
fn builder_rejects_single_branch_concat() {
    let mut b = GraphBuilder::<f32>::new(0);
    let x = b.input("input", &[4]);
    assert!(b.concat("cat", &[x]).is_err());
}

#[test]
fn builder_rejects_non_softmax_output() {
    let mut b = GraphBuilder::<f32>::new(0);
    let x = b.input("input", &[4]);
    let d = b.dense("logits", x, 2, true).unwrap();
    assert!(b.build(d).is_err());
}

#[test]
fn batch_norm_normalizes_in_training_mode() {
    let mut b = GraphBuilder::new(0);
    let x = b.input("input", &[2]);
    let bn = b.batch_norm("bn", x).unwrap();
    let d = b.dense("logits", bn, 2, true).unwrap();
    let s = b.softmax("probs", d).unwrap();
    let mut g = b.build(s).unwrap();

    let input =
        Tensor::<f64>::from_vec(&[4, 2], vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0])
            .unwrap();
    g.forward(&[input], true).unwrap();
    let bn_idx = g.node_index("bn").unwrap();
    let out = g.node(bn_idx).output().unwrap();
    // per-feature mean ~0, variance ~1 (epsilon keeps it slightly under)
    for c in 0..2 {
        let col: Vec<f64> = (0..4).map(|n| out.data()[n * 2 + c]).collect();
        let mean: f64 = col.iter().sum::<f64>() / 4.0;
        let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 0.01);
    }
    // running statistics moved toward the batch statistics
    let rm = &g.node(bn_idx).param("running_mean").unwrap().value;
    assert!(rm.data()[0] > 0.0 && rm.data()[1] > 0.0);
}

#[test]
fn cross_entropy_drops_while_fitting_one_batch() {
    let mut g = dense_softmax_graph(4, 3);
    let x = seeded_image(&[6, 4], 42);
    let labels = [0usize, 1, 2, 0, 1, 2];
    let mut opt = crate::optim::Sgd::new(0.5, 0.0);
    let first = cross_entropy(&g.forward(&[x.clone()], true).unwrap(), &labels).unwrap();
    for _ in 0..300 {
        g.forward(&[x.clone()], true).unwrap();
        g.backward(&labels).unwrap();
        opt.step(&mut g).unwrap();
    }
    let last = cross_entropy(&g.forward(&[x], true).unwrap(), &labels).unwrap();
    assert!(last < first * 0.5, "loss {first} -> {last}");
}
