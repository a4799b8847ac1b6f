use super::*;
use crate::graph::Padding;
use crate::zoo::{
    downscale, minivgg_desc, mobilenetv2_desc, parse_arch, resnet50_desc, serialize_arch,
    stnet_desc, vgg16_desc, BaseFamily, MINIVGG_DEFAULT_FILTERS,
};

const INPUT: (usize, usize, usize) = (32, 32, 3);

fn flat_dense_desc(in_f: usize, units: usize, bias: bool) -> ArchDescription {
    ArchDescription {
        name: "dense-probe".into(),
        family: BaseFamily::MiniVgg,
        input: (1, 1, in_f),
        num_streams: 1,
        alpha: None,
        layers: vec![],
        head: vec![
            LayerTemplate::Flatten,
            LayerTemplate::Dense { units, bias },
            LayerTemplate::Softmax,
        ],
    }
}

#[test]
fn dense_param_and_flop_formulas() {
    // (10 + 1) * 5 parameters
    let d = flat_dense_desc(10, 5, true);
    let report = cost_report(&d, FlopsConvention::default()).unwrap();
    let dense = report.rows.iter().find(|r| r.kind == "dense").unwrap();
    assert_eq!(dense.params, 55);

    // 2 * 512 * 10 + 10 FLOPs
    let d = flat_dense_desc(512, 10, true);
    let report = cost_report(&d, FlopsConvention::default()).unwrap();
    let dense = report.rows.iter().find(|r| r.kind == "dense").unwrap();
    assert_eq!(dense.flops, 10_250);
}

#[test]
fn conv_flop_formula() {
    // 3x3, Cin=3, Cout=64, 32x32 same-padding output, no bias
    let d = ArchDescription {
        name: "conv-probe".into(),
        family: BaseFamily::MiniVgg,
        input: INPUT,
        num_streams: 1,
        alpha: None,
        layers: vec![LayerTemplate::Conv {
            filters: 64,
            kernel: (3, 3),
            stride: (1, 1),
            padding: Padding::Same,
            bias: false,
        }],
        head: vec![
            LayerTemplate::Flatten,
            LayerTemplate::Dense {
                units: 10,
                bias: true,
            },
            LayerTemplate::Softmax,
        ],
    };
    let report = cost_report(&d, FlopsConvention::default()).unwrap();
    let conv = report.rows.iter().find(|r| r.kind == "conv2d").unwrap();
    assert_eq!(conv.flops, 2 * 3 * 3 * 3 * 64 * 1024);
    assert_eq!(conv.flops, 3_538_944);
}

#[test]
fn vgg16_conv_stack_macs_match_independent_ledger() {
    // Spreadsheet-style oracle: (kh*kw*cin) * cout * output positions for
    // each of the 13 conv layers at 32x32 with 2x2/2 pools between blocks.
    let spec: [(usize, usize, usize); 13] = [
        (3, 64, 32),
        (64, 64, 32),
        (64, 128, 16),
        (128, 128, 16),
        (128, 256, 8),
        (256, 256, 8),
        (256, 256, 8),
        (256, 512, 4),
        (512, 512, 4),
        (512, 512, 4),
        (512, 512, 2),
        (512, 512, 2),
        (512, 512, 2),
    ];
    let oracle: u64 = spec
        .iter()
        .map(|&(cin, cout, side)| (9 * cin * cout * side * side) as u64)
        .sum();
    assert_eq!(oracle, 313_196_544);
    assert!((oracle as f64 - 313e6).abs() / 313e6 < 0.01);

    let report = cost_report(&vgg16_desc(INPUT, 10), FlopsConvention::default()).unwrap();
    let conv_macs: u64 = report
        .rows
        .iter()
        .filter(|r| r.kind == "conv2d")
        .map(|r| {
            // subtract the bias add, then halve the multiply-accumulate
            let outs: u64 = r.out_shape.iter().product::<usize>() as u64;
            (r.flops - outs) / 2
        })
        .sum();
    assert_eq!(conv_macs, oracle);
}

#[test]
fn totals_equal_row_sums_and_survive_serialization() {
    for d in [
        vgg16_desc(INPUT, 10),
        resnet50_desc(INPUT, 10),
        mobilenetv2_desc(1.0, INPUT, 10).unwrap(),
    ] {
        let report = cost_report(&d, FlopsConvention::default()).unwrap();
        assert_eq!(
            report.total_params,
            report.rows.iter().map(|r| r.params).sum::<u64>()
        );
        assert_eq!(
            report.total_flops,
            report.rows.iter().map(|r| r.flops).sum::<u64>()
        );
        let round_tripped = parse_arch(&serialize_arch(&d)).unwrap();
        assert_eq!(
            count_params(&round_tripped).unwrap(),
            report.total_params,
            "serialization changed the count for {}",
            d.name
        );
    }
}

#[test]
fn downscale_by_one_preserves_counts() {
    for d in [
        vgg16_desc(INPUT, 10),
        resnet50_desc(INPUT, 10),
        minivgg_desc(&MINIVGG_DEFAULT_FILTERS, INPUT, 10).unwrap(),
    ] {
        let same = downscale(&d, 1.0).unwrap();
        assert_eq!(count_params(&d).unwrap(), count_params(&same).unwrap());
    }
}

#[test]
fn pure_conv_stack_params_scale_inverse_square() {
    // widths divisible by every probed scale, no bias; the input channel
    // count scales too so every conv is "interior"
    let stack = |w: usize| ArchDescription {
        name: "synthetic".into(),
        family: BaseFamily::MiniVgg,
        input: (8, 8, w),
        num_streams: 1,
        alpha: None,
        layers: vec![
            LayerTemplate::Conv {
                filters: w,
                kernel: (3, 3),
                stride: (1, 1),
                padding: Padding::Same,
                bias: false,
            };
            3
        ],
        head: vec![
            LayerTemplate::Flatten,
            LayerTemplate::Dense {
                units: 10,
                bias: false,
            },
            LayerTemplate::Softmax,
        ],
    };
    let conv_params = |d: &ArchDescription| -> u64 {
        cost_report(d, FlopsConvention::default())
            .unwrap()
            .rows
            .iter()
            .filter(|r| r.kind == "conv2d")
            .map(|r| r.params)
            .sum()
    };
    let base = stack(60);
    for s in [2usize, 3, 5] {
        let scaled = stack(60 / s);
        assert_eq!(
            conv_params(&base),
            conv_params(&scaled) * (s * s) as u64,
            "scale {s}"
        );
    }
}

#[test]
fn comparison_directions_from_the_reported_ratios() {
    let conv = FlopsConvention::default();
    let resnet = compare(
        &crate::zoo::parse_stnet_name("STNet5_5_ResNet50").unwrap(),
        INPUT,
        10,
        conv,
    )
    .unwrap();
    assert!(
        resnet.ratio_flops < 1.0,
        "ResNet50 pair flops ratio {}",
        resnet.ratio_flops
    );
    assert!(resnet.ratio_params < 1.0);

    let vgg = compare(
        &crate::zoo::parse_stnet_name("STNet5_1.5_VGG16").unwrap(),
        INPUT,
        10,
        conv,
    )
    .unwrap();
    assert!(
        vgg.ratio_params < 1.05,
        "VGG16 pair params ratio {}",
        vgg.ratio_params
    );

    let mobile = compare(
        &crate::zoo::parse_stnet_name("STNet5_2.5_MobileNetV2").unwrap(),
        INPUT,
        10,
        conv,
    )
    .unwrap();
    assert!(
        mobile.ratio_params > 1.0,
        "MobileNetV2 pair params ratio {}",
        mobile.ratio_params
    );
}

#[test]
fn counting_is_deterministic() {
    let d = stnet_desc(&resnet50_desc(INPUT, 10), 5, 5.0, 10).unwrap();
    let a = cost_report(&d, FlopsConvention::default()).unwrap();
    let b = cost_report(&d, FlopsConvention::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn markdown_table_shape() {
    let cmp = compare(
        &crate::zoo::parse_stnet_name("STNet5_5_ResNet50").unwrap(),
        INPUT,
        10,
        FlopsConvention::default(),
    )
    .unwrap();
    let md = comparison_markdown(&cmp);
    assert!(md.contains("| Name | FLOPs | Num of Params |"));
    assert!(md.contains("STNet5_5_ResNet50"));
    assert!(md.contains("| ResNet50 |"));
    assert!(md.contains('('), "ratios belong in brackets");
    assert!(md.contains("23,608,202"));
}

#[test]
fn analyze_name_handles_both_templates_and_bases() {
    let (report, cmp) = analyze_name("VGG16", INPUT, 10, FlopsConvention::default()).unwrap();
    assert_eq!(report.total_params, 33_638_218);
    assert!(cmp.is_none());
    let (report, cmp) =
        analyze_name("STNet5_5_ResNet50", INPUT, 10, FlopsConvention::default()).unwrap();
    assert!(cmp.is_some());
    assert_eq!(report.model, "STNet5_5_ResNet50");
    assert!(analyze_name("STNet5_5_AlexNet", INPUT, 10, FlopsConvention::default()).is_err());
}

#[test]
fn thousands_formatting() {
    assert_eq!(format_thousands(0), "0");
    assert_eq!(format_thousands(999), "999");
    assert_eq!(format_thousands(33_638_218), "33,638,218");
}
