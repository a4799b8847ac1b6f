use super::*;
use crate::corruptions::CorruptionKind;
use crate::datasets::synth_shapes;
use crate::zoo::{compile, minivgg_desc, stnet_desc};

fn tiny_minivgg(seed: u64) -> Graph<f32> {
    let desc = minivgg_desc(&[4, 4], (32, 32, 3), 10).unwrap();
    compile(&desc, seed).unwrap()
}

fn param_bits(g: &Graph<f32>) -> Vec<u32> {
    let mut out = Vec::new();
    g.for_each_param(|_, p| out.extend(p.value.data().iter().map(|v| v.to_bits())));
    out
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = synth_shapes(32, 10, 1).unwrap();
    let mut g = tiny_minivgg(3);
    let before = param_bits(&g);
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        learning_rate: 0.0,
        momentum: 0.9,
        ..TrainConfig::default()
    };
    train(&mut g, &data, &cfg).unwrap();
    // batch-norm-free MiniVGG: every parameter is optimizer-owned
    assert_eq!(param_bits(&g), before);
}

#[test]
fn training_is_bit_deterministic_under_seed() {
    let data = synth_shapes(48, 10, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        seed: 77,
        ..TrainConfig::default()
    };
    let mut a = tiny_minivgg(9);
    let hist_a = train(&mut a, &data, &cfg).unwrap();
    let mut b = tiny_minivgg(9);
    let hist_b = train(&mut b, &data, &cfg).unwrap();
    assert_eq!(hist_a, hist_b);
    assert_eq!(param_bits(&a), param_bits(&b));

    let mut c = tiny_minivgg(9);
    let cfg_other_seed = TrainConfig { seed: 78, ..cfg };
    train(&mut c, &data, &cfg_other_seed).unwrap();
    assert_ne!(param_bits(&a), param_bits(&c));
}

#[test]
fn train_rejects_arity_mismatch_before_stepping() {
    let data = synth_shapes(16, 10, 3).unwrap();
    let desc = stnet_desc(&minivgg_desc(&[4, 4], (32, 32, 3), 10).unwrap(), 3, 3.0, 10).unwrap();
    let mut g: Graph<f32> = compile(&desc, 1).unwrap();
    let before = param_bits(&g);
    let cfg = TrainConfig::default(); // no slice spec: 1 stream vs 3 inputs
    assert!(train(&mut g, &data, &cfg).is_err());
    assert_eq!(param_bits(&g), before);
}

#[test]
fn evaluate_counts_argmax_matches() {
    // force logits that always pick class 0
    let mut g = tiny_minivgg(4);
    let idx = g
        .node_index("head/dense10")
        .or_else(|| {
            // resolve the final dense by walking names
            (0..g.nodes().len())
                .rev()
                .find(|&i| g.node(i).name().starts_with("head/dense"))
        })
        .unwrap();
    {
        let node = g.node_mut(idx);
        node.param_mut("weight").unwrap().value.fill(0.0);
        let bias = node.param_mut("bias").unwrap();
        bias.value.fill(0.0);
        bias.value.data_mut()[0] = 5.0;
    }
    let mut data = synth_shapes(12, 10, 5).unwrap();
    data.labels.iter_mut().for_each(|l| *l = 0);
    assert_eq!(evaluate(&mut g, &data, None).unwrap(), 1.0);
    let again = evaluate(&mut g, &data, None).unwrap();
    assert_eq!(again, 1.0);

    // 2 of 3 labels match the forced prediction
    let mut data = synth_shapes(3, 3, 5).unwrap();
    data.labels.copy_from_slice(&[0, 1, 0]);
    let acc = evaluate(&mut g, &data, None).unwrap();
    assert!((acc - 2.0 / 3.0).abs() < 1e-12);

    let empty = crate::datasets::LabeledImageSet::new(vec![], vec![], 10).unwrap();
    assert!(evaluate(&mut g, &empty, None).is_err());
}

#[test]
fn suite_with_no_corruptions_is_clean_only() {
    let mut g = tiny_minivgg(6);
    let data = synth_shapes(10, 10, 6).unwrap();
    let report =
        eval_corruption_suite(&mut g, "MiniVGG", Protocol::NoAug, &data, &[], &[], None, 1)
            .unwrap();
    assert!(report.rows.is_empty());
    assert_eq!(report.clean_n, 10);
    assert_eq!(report.mean_corrupted_accuracy(), report.clean_accuracy);
}

#[test]
fn suite_is_reproducible_under_its_seed() {
    let mut g = tiny_minivgg(6);
    let data = synth_shapes(10, 10, 6).unwrap();
    let kinds = [CorruptionKind::GaussianNoise, CorruptionKind::Pixelate];
    let a = eval_corruption_suite(
        &mut g,
        "MiniVGG",
        Protocol::NoAug,
        &data,
        &kinds,
        &[1, 3],
        None,
        42,
    )
    .unwrap();
    let b = eval_corruption_suite(
        &mut g,
        "MiniVGG",
        Protocol::NoAug,
        &data,
        &kinds,
        &[1, 3],
        None,
        42,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
}

#[test]
fn identity_strength_corruption_matches_clean_accuracy() {
    let mut g = tiny_minivgg(6);
    let data = synth_shapes(10, 10, 6).unwrap();
    let report = eval_corruption_suite(
        &mut g,
        "MiniVGG",
        Protocol::NoAug,
        &data,
        &[CorruptionKind::Pixelate],
        &[0],
        None,
        9,
    )
    .unwrap();
    assert_eq!(report.rows[0].accuracy, report.clean_accuracy);
}

fn fixture_report(protocol: Protocol, brightness: f64, contrast: f64) -> EvalReport {
    EvalReport {
        model: "VGG16".into(),
        protocol,
        clean_accuracy: 0.9,
        clean_n: 10_000,
        rows: vec![
            EvalRow {
                kind: CorruptionKind::Brightness,
                severity: 3,
                accuracy: brightness,
                n: 10_000,
            },
            EvalRow {
                kind: CorruptionKind::Contrast,
                severity: 3,
                accuracy: contrast,
                n: 10_000,
            },
        ],
    }
}

#[test]
fn identical_reports_give_zero_boost() {
    let aug = fixture_report(Protocol::Aug, 0.5, 0.4);
    let noaug = fixture_report(Protocol::NoAug, 0.5, 0.4);
    let rows = augmentation_boost(&aug, &noaug).unwrap();
    assert!(rows.iter().all(|r| r.boost == 0.0));
}

#[test]
fn reported_brightness_boosts_reproduce_to_three_decimals() {
    let aug = fixture_report(Protocol::Aug, 0.890, 0.881);
    let noaug = fixture_report(Protocol::NoAug, 0.771, 0.527);
    let rows = augmentation_boost(&aug, &noaug).unwrap();
    assert_eq!((rows[0].boost * 1000.0).round() as i64, 119);

    let mut aug = fixture_report(Protocol::Aug, 0.966, 0.965);
    let mut noaug = fixture_report(Protocol::NoAug, 0.746, 0.526);
    aug.model = "STNet5_1.5_VGG16".into();
    noaug.model = "STNet5_1.5_VGG16".into();
    let rows = augmentation_boost(&aug, &noaug).unwrap();
    assert_eq!((rows[0].boost * 1000.0).round() as i64, 220);
}

#[test]
fn boost_rejects_mismatched_reports() {
    let aug = fixture_report(Protocol::Aug, 0.9, 0.8);
    let mut other = fixture_report(Protocol::NoAug, 0.9, 0.8);
    other.rows[1].kind = CorruptionKind::Saturate;
    assert!(augmentation_boost(&aug, &other).is_err());

    let mut wrong_model = fixture_report(Protocol::NoAug, 0.9, 0.8);
    wrong_model.model = "ResNet50".into();
    assert!(augmentation_boost(&aug, &wrong_model).is_err());

    // both tagged aug
    let a = fixture_report(Protocol::Aug, 0.9, 0.8);
    let b = fixture_report(Protocol::Aug, 0.9, 0.8);
    assert!(augmentation_boost(&a, &b).is_err());

    // boost + noaug == aug, exactly, per row
    let aug = fixture_report(Protocol::Aug, 0.966, 0.965);
    let noaug = fixture_report(Protocol::NoAug, 0.746, 0.526);
    for (row, (a, n)) in augmentation_boost(&aug, &noaug)
        .unwrap()
        .iter()
        .zip([(0.966, 0.746), (0.965, 0.526)])
    {
        assert_eq!(row.boost + n, a);
    }
}

#[test]
fn report_csv_round_trips() {
    let report = fixture_report(Protocol::Aug, 0.887, 0.7215);
    let csv = report.to_csv();
    let parsed = EvalReport::from_csv(&csv).unwrap();
    assert_eq!(parsed, report);
    assert!(EvalReport::from_csv("nope").is_err());
}

#[test]
fn derive_corruption_seed_is_stable_and_spread() {
    let a = derive_corruption_seed(1, CorruptionKind::GaussianNoise, 3);
    let b = derive_corruption_seed(1, CorruptionKind::GaussianNoise, 3);
    assert_eq!(a, b);
    let c = derive_corruption_seed(1, CorruptionKind::GaussianNoise, 4);
    let d = derive_corruption_seed(1, CorruptionKind::ShotNoise, 3);
    let e = derive_corruption_seed(2, CorruptionKind::GaussianNoise, 3);
    assert!(a != c && a != d && a != e);
}

#[test]
fn markdown_mirrors_rows_and_models() {
    let aug = fixture_report(Protocol::Aug, 0.89, 0.881);
    let noaug = fixture_report(Protocol::NoAug, 0.771, 0.527);
    let md = reports_markdown(&[&noaug, &aug]);
    assert!(md.contains("| Noise Type |"));
    assert!(md.contains("brightness"));
    assert!(md.contains("0.771"));
    assert!(md.contains("0.890"));
}
