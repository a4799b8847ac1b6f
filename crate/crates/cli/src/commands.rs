use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use stnet_core::analyzer::{analyze_name, comparison_markdown, format_thousands, FlopsConvention};
use stnet_core::checkpoint::{load_checkpoint, save_checkpoint};
use stnet_core::corruptions::{corrupt_set, severity_table_csv, Corruption, CorruptionKind};
use stnet_core::datasets::{
    load_cifar10, parse_records, synth_shapes, write_records, Image, LabeledImageSet,
};
use stnet_core::graph::Graph;
use stnet_core::harness::{
    augmentation_boost, boost_csv, eval_corruption_suite, reports_markdown, EvalReport, Protocol,
    TrainConfig,
};
use stnet_core::slicer::{make_spec, slice_image, SliceMode, SliceSpec};
use stnet_core::zoo::{compile, desc_from_name, parse_arch};

use crate::config::{KeyValues, TRAIN_KEYS};
use crate::manifest::ManifestBuilder;

const INPUT: (usize, usize, usize) = (32, 32, 3);
const NAME_TEMPLATE_HINT: &str =
    "model names are a base network (VGG16, ResNet50, MobileNetV2, MiniVGG) \
     or the template STNet{num of streams}_{scale}_{base network name}, e.g. STNet5_5_ResNet50";

// ---------------------------------------------------------------- slice

#[derive(Args)]
pub struct SliceArgs {
    /// Raw planar RGB image (R plane, G plane, B plane)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 32)]
    height: usize,
    /// Number of slices
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value = "pixel-luminance")]
    mode: String,
    /// Output directory for slice_<k>.raw files
    #[arg(long)]
    out: PathBuf,
    /// Verify that the written slices sum back to the input exactly
    #[arg(long)]
    check_partition: bool,
}

pub fn slice(args: SliceArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("slice");
    manifest
        .flag("input", args.input.display())
        .flag("width", args.width)
        .flag("height", args.height)
        .flag("n", args.n)
        .flag("mode", &args.mode)
        .flag("check-partition", args.check_partition);

    let mode: SliceMode = args.mode.parse()?;
    let spec = make_spec(args.n, mode)?;
    let bytes = std::fs::read(&args.input)
        .with_context(|| format!("cannot read image {}", args.input.display()))?;
    let image = Image::from_planar(args.height, args.width, &bytes)
        .with_context(|| format!("bad image file {}", args.input.display()))?;

    std::fs::create_dir_all(&args.out)?;
    let slices = slice_image(&image, &spec);
    for (k, s) in slices.iter().enumerate() {
        let path = args.out.join(format!("slice_{k}.raw"));
        std::fs::write(&path, s.to_planar())?;
        manifest.artifact(&path);
    }

    if args.check_partition {
        let mut sum = vec![0u16; image.data().len()];
        for k in 0..args.n {
            let path = args.out.join(format!("slice_{k}.raw"));
            let written = std::fs::read(&path)?;
            let written = Image::from_planar(args.height, args.width, &written)?;
            for (acc, &v) in sum.iter_mut().zip(written.data()) {
                *acc += v as u16;
            }
        }
        let matches = sum
            .iter()
            .zip(image.data())
            .all(|(&s, &orig)| s == orig as u16);
        if !matches {
            bail!("partition check failed: slices do not sum to the input");
        }
        println!("partition ok: {} slices sum to the input exactly", args.n);
    }

    manifest.finish(&args.out)?;
    Ok(())
}

// -------------------------------------------------------------- corrupt

#[derive(Args)]
pub struct CorruptArgs {
    /// Corruption kind (see --print-severity-table for the full list)
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    severity: Option<u8>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input image set in the 3073-byte record format
    #[arg(long)]
    set: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the severity -> parameter table as CSV and exit
    #[arg(long)]
    print_severity_table: bool,
}

pub fn corrupt(args: CorruptArgs) -> Result<()> {
    if args.print_severity_table {
        print!("{}", severity_table_csv());
        return Ok(());
    }
    let (Some(kind), Some(severity), Some(set), Some(out)) =
        (&args.kind, args.severity, &args.set, &args.out)
    else {
        bail!("--kind, --severity, --set and --out are required (or use --print-severity-table)");
    };
    let mut manifest = ManifestBuilder::start("corrupt");
    manifest
        .flag("kind", kind)
        .flag("severity", severity)
        .flag("set", set.display())
        .flag("out", out.display())
        .seed("corruption", args.seed);

    let kind: CorruptionKind = kind.parse()?;
    let corruption = Corruption::new(kind, severity, args.seed)?;
    let bytes =
        std::fs::read(set).with_context(|| format!("cannot read set {}", set.display()))?;
    let images = parse_records(&bytes)?;
    let corrupted = corrupt_set(&images, &corruption)?;
    write_records(&corrupted, out)?;
    manifest.artifact(out);
    manifest.finish(out)?;
    Ok(())
}

// ---------------------------------------------------------------- build

#[derive(Args)]
pub struct BuildArgs {
    /// Model name (base network or STNet template)
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
    /// Also print the canonical architecture text
    #[arg(long)]
    dump: bool,
    #[arg(long, default_value_t = 10)]
    classes: usize,
}

pub fn build(args: BuildArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("build");
    manifest
        .flag("model", &args.model)
        .flag("classes", args.classes)
        .flag("out", args.out.display())
        .seed("init", args.seed);

    let desc = desc_from_name(&args.model, INPUT, args.classes)
        .with_context(|| NAME_TEMPLATE_HINT.to_string())?;
    let graph: Graph<f32> = compile(&desc, args.seed)?;
    save_checkpoint(&graph, &args.out)?;
    if args.dump {
        print!("{}", desc.to_text());
    }
    manifest.artifact(&args.out);
    manifest.finish(&args.out)?;
    Ok(())
}

// -------------------------------------------------------------- analyze

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Model name (base network or STNet template)
    #[arg(long)]
    model: String,
    /// csv (per-layer rows) or md (totals table with ratios)
    #[arg(long, default_value = "md")]
    format: String,
    /// Write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    classes: usize,
}

pub fn analyze(args: AnalyzeArgs) -> Result<()> {
    let (report, comparison) = analyze_name(
        &args.model,
        INPUT,
        args.classes,
        FlopsConvention::default(),
    )
    .with_context(|| NAME_TEMPLATE_HINT.to_string())?;
    let text = match args.format.as_str() {
        "csv" => report.to_csv(),
        "md" => match &comparison {
            Some(cmp) => comparison_markdown(cmp),
            None => {
                let mut out = String::from("| Name | FLOPs | Num of Params |\n|---|---|---|\n");
                out.push_str(&format!(
                    "| {} | {} | {} |\n",
                    report.model,
                    format_thousands(report.total_flops),
                    format_thousands(report.total_params)
                ));
                out
            }
        },
        other => bail!("unknown format `{other}` (expected csv or md)"),
    };
    match &args.out {
        None => print!("{text}"),
        Some(path) => {
            let mut manifest = ManifestBuilder::start("analyze");
            manifest
                .flag("model", &args.model)
                .flag("format", &args.format)
                .flag("convention", report.convention);
            std::fs::write(path, text)?;
            manifest.artifact(path);
            manifest.finish(path)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Args)]
pub struct TrainArgs {
    /// Key-value config file (overridable with --set)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set learning-rate=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss history CSV
    #[arg(long)]
    history: Option<PathBuf>,
}

/// `data` values: `synth` (generated), `cifar10` (from STNET_DATA_DIR),
/// or a directory containing the binary batch files.
fn load_train_data(
    data: &str,
    train_size: usize,
    classes: usize,
    synth_seed: u64,
) -> Result<LabeledImageSet> {
    let set = match data {
        "synth" => synth_shapes(train_size.max(classes), classes, synth_seed)?,
        other => {
            let dir = resolve_data_dir(other)?;
            let (train, _) = load_cifar10(&dir)?;
            train
        }
    };
    Ok(limit(set, train_size))
}

fn resolve_data_dir(data: &str) -> Result<PathBuf> {
    if data == "cifar10" {
        let dir = std::env::var("STNET_DATA_DIR")
            .context("data = cifar10 needs STNET_DATA_DIR to point at the dataset root")?;
        Ok(PathBuf::from(dir))
    } else {
        Ok(PathBuf::from(data))
    }
}

fn limit(set: LabeledImageSet, size: usize) -> LabeledImageSet {
    if size == 0 || size >= set.len() {
        set
    } else {
        set.subset(&(0..size).collect::<Vec<_>>())
    }
}

fn slice_spec_for(streams: usize, mode: SliceMode) -> Result<Option<SliceSpec>> {
    Ok(if streams > 1 {
        Some(make_spec(streams, mode)?)
    } else {
        None
    })
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut kv = match &args.config {
        Some(path) => KeyValues::from_file(path, TRAIN_KEYS)?,
        None => KeyValues::default(),
    };
    kv.apply_overrides(&args.overrides, TRAIN_KEYS)?;

    let model = kv.get_or("model", "MiniVGG");
    let data = kv.get_or("data", "synth");
    let classes: usize = kv.parse_or("classes", 10)?;
    let train_size: usize = kv.parse_or("train-size", 500)?;
    let seed: u64 = kv.parse_or("seed", 0)?;
    let synth_seed: u64 = kv.parse_or("synth-seed", 7)?;
    let slice_mode: SliceMode = kv.get_or("slice-mode", "pixel-luminance").parse()?;
    let precision = kv.get_or("precision", "f32");
    let config = TrainConfig {
        epochs: kv.parse_or("epochs", 10)?,
        batch_size: kv.parse_or("batch-size", 64)?,
        learning_rate: kv.parse_or("learning-rate", 0.01)?,
        momentum: kv.parse_or("momentum", 0.9)?,
        optimizer: kv.get_or("optimizer", "sgd").parse()?,
        seed,
        slice_spec: None, // filled per model arity below
    };

    let mut manifest = ManifestBuilder::start("train");
    for (k, v) in kv.iter() {
        manifest.flag(k, v);
    }
    manifest.flag("out", args.out.display());
    manifest.seed("train", seed);
    manifest.seed("synth", synth_seed);

    let desc = desc_from_name(&model, INPUT, classes)
        .with_context(|| NAME_TEMPLATE_HINT.to_string())?;
    let dataset = load_train_data(&data, train_size, classes, synth_seed)?;
    let config = TrainConfig {
        slice_spec: slice_spec_for(desc.num_streams, slice_mode)?,
        ..config
    };

    let history = match precision {
        "f32" => {
            let mut graph: Graph<f32> = compile(&desc, seed)?;
            let history = stnet_core::harness::train(&mut graph, &dataset, &config)?;
            save_checkpoint(&graph, &args.out)?;
            history
        }
        "f64" => {
            let mut graph: Graph<f64> = compile(&desc, seed)?;
            let history = stnet_core::harness::train(&mut graph, &dataset, &config)?;
            save_checkpoint(&graph, &args.out)?;
            history
        }
        other => bail!("unknown precision `{other}` (expected f32 or f64)"),
    };
    manifest.artifact(&args.out);

    if let Some(path) = &args.history {
        let mut csv = String::from("epoch,loss\n");
        for (i, loss) in history.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", i + 1, loss));
        }
        std::fs::write(path, csv)?;
        manifest.artifact(path);
    }
    manifest.finish(&args.out)?;
    Ok(())
}

// ----------------------------------------------------------------- eval

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// `synth`, `cifar10`, or a dataset directory (test split is used)
    #[arg(long, default_value = "synth")]
    data: String,
    /// Cap on evaluation samples (0 = all)
    #[arg(long, default_value_t = 0)]
    test_size: usize,
    /// Comma-separated corruption kinds (empty = clean only)
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<String>,
    /// Comma-separated severities
    #[arg(long, value_delimiter = ',', default_values_t = vec![3u8])]
    severities: Vec<u8>,
    #[arg(long, default_value_t = 0)]
    suite_seed: u64,
    /// Report protocol tag: no-aug or aug
    #[arg(long, default_value = "no-aug")]
    protocol: String,
    #[arg(long, default_value = "pixel-luminance")]
    slice_mode: String,
    #[arg(long, default_value_t = 500)]
    synth_size: usize,
    #[arg(long, default_value_t = 99)]
    synth_seed: u64,
    /// Report CSV output path
    #[arg(long)]
    out: PathBuf,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("eval");
    manifest
        .flag("checkpoint", args.checkpoint.display())
        .flag("data", &args.data)
        .flag("kinds", args.kinds.join(","))
        .flag(
            "severities",
            args.severities
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )
        .flag("protocol", &args.protocol)
        .seed("suite", args.suite_seed)
        .seed("synth", args.synth_seed);

    let mut graph: Graph<f32> = load_checkpoint(&args.checkpoint)?;
    let desc = parse_arch(graph.arch_text().expect("checkpoints carry the text"))?;
    let protocol: Protocol = args.protocol.parse()?;
    let mode: SliceMode = args.slice_mode.parse()?;
    let spec = slice_spec_for(graph.num_inputs(), mode)?;
    let kinds = args
        .kinds
        .iter()
        .filter(|k| !k.is_empty())
        .map(|k| k.parse())
        .collect::<stnet_core::Result<Vec<CorruptionKind>>>()?;

    let test = match args.data.as_str() {
        "synth" => synth_shapes(args.synth_size, graph.num_classes(), args.synth_seed)?,
        other => {
            let (_, test) = load_cifar10(&resolve_data_dir(other)?)?;
            test
        }
    };
    let test = limit(test, args.test_size);

    let report = eval_corruption_suite(
        &mut graph,
        &desc.name,
        protocol,
        &test,
        &kinds,
        &args.severities,
        spec.as_ref(),
        args.suite_seed,
    )?;
    std::fs::write(&args.out, report.to_csv())?;
    manifest.artifact(&args.out);
    manifest.finish(&args.out)?;
    Ok(())
}

// --------------------------------------------------------------- report

#[derive(Args)]
pub struct ReportArgs {
    /// Evaluation CSV produced under the augmentation protocol
    #[arg(long)]
    aug: PathBuf,
    /// Evaluation CSV produced without augmentation
    #[arg(long)]
    noaug: PathBuf,
    /// Boost CSV output path
    #[arg(long)]
    out: PathBuf,
    /// Also write a markdown accuracy table here
    #[arg(long)]
    md: Option<PathBuf>,
}

pub fn report(args: ReportArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::start("report");
    manifest
        .flag("aug", args.aug.display())
        .flag("noaug", args.noaug.display());

    let aug = EvalReport::from_csv(&std::fs::read_to_string(&args.aug)?)?;
    let noaug = EvalReport::from_csv(&std::fs::read_to_string(&args.noaug)?)?;
    let rows = augmentation_boost(&aug, &noaug)?;
    std::fs::write(&args.out, boost_csv(&aug.model, &rows))?;
    manifest.artifact(&args.out);
    if let Some(md) = &args.md {
        std::fs::write(md, reports_markdown(&[&noaug, &aug]))?;
        manifest.artifact(md);
    }
    manifest.finish(&args.out)?;
    Ok(())
}
