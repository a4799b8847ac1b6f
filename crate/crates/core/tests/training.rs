//! Training-behavior checks that actually run the optimizer for a while.

use stnet_core::datasets::synth_shapes;
use stnet_core::graph::Graph;
use stnet_core::harness::{evaluate, train, TrainConfig};
use stnet_core::zoo::{compile, minivgg_desc, MINIVGG_DEFAULT_FILTERS};

#[test]
fn one_sample_memorization_drives_loss_to_zero() {
    // single image, 200 steps: the network must memorize it
    let data = synth_shapes(1, 1, 41).unwrap();
    let desc = minivgg_desc(&MINIVGG_DEFAULT_FILTERS, (32, 32, 3), 10).unwrap();
    let mut g: Graph<f32> = compile(&desc, 41).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 1,
        learning_rate: 0.01,
        momentum: 0.9,
        seed: 41,
        ..TrainConfig::default()
    };
    let history = train(&mut g, &data, &cfg).unwrap();
    let last = *history.last().unwrap();
    assert!(last < 0.01, "final loss {last}");
}

#[test]
fn synthetic_shapes_are_separable_for_a_tiny_network() {
    // 500 samples, 5 epochs, train accuracy at least 90%
    let data = synth_shapes(500, 10, 7).unwrap();
    let desc = minivgg_desc(&[8, 8], (32, 32, 3), 10).unwrap();
    let mut g: Graph<f32> = compile(&desc, 7).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 32,
        learning_rate: 0.05,
        momentum: 0.9,
        seed: 7,
        ..TrainConfig::default()
    };
    train(&mut g, &data, &cfg).unwrap();
    let acc = evaluate(&mut g, &data, None).unwrap();
    assert!(acc >= 0.9, "train accuracy {acc}");
}
