//! The desk-scale directional robustness experiment: MiniVGG against a
//! 3-stream, 3x down-scaled MiniVGG-based network, trained clean, evaluated
//! on a fixed corruption panel, repeated over seeds.

use super::{eval_corruption_suite, train, EvalReport, Protocol, TrainConfig};
use crate::corruptions::CorruptionKind;
use crate::datasets::LabeledImageSet;
use crate::error::Result;
use crate::graph::Graph;
use crate::optim::OptimizerKind;
use crate::slicer::{make_spec, SliceMode};
use crate::zoo::{compile, minivgg_desc, stnet_desc, MINIVGG_DEFAULT_FILTERS};

#[derive(Debug, Clone)]
pub struct DeskExperimentConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seeds: Vec<u64>,
    pub kinds: Vec<CorruptionKind>,
    pub severity: u8,
    pub num_streams: usize,
    pub scale: f64,
    pub suite_seed: u64,
}

impl Default for DeskExperimentConfig {
    fn default() -> Self {
        DeskExperimentConfig {
            epochs: 15,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            seeds: vec![1, 2, 3],
            kinds: vec![
                CorruptionKind::GaussianNoise,
                CorruptionKind::ImpulseNoise,
                CorruptionKind::DefocusBlur,
                CorruptionKind::Contrast,
                CorruptionKind::Pixelate,
            ],
            severity: 3,
            num_streams: 3,
            scale: 3.0,
            suite_seed: 0x57ee7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeskSeedResult {
    pub seed: u64,
    pub base: EvalReport,
    pub stnet: EvalReport,
}

impl DeskSeedResult {
    pub fn stnet_wins(&self) -> bool {
        self.stnet.mean_corrupted_accuracy() >= self.base.mean_corrupted_accuracy()
    }
}

#[derive(Debug, Clone)]
pub struct DeskReport {
    pub per_seed: Vec<DeskSeedResult>,
    pub wins: usize,
    pub mean_clean_gap: f64,
    /// Multi-stream model matched the base on corrupted data in a majority
    /// of seeds while staying within 5 clean-accuracy points.
    pub trend_holds: bool,
}

impl DeskReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.per_seed {
            out.push_str(&format!(
                "seed {}: base clean {:.3} corrupted {:.3} | {} clean {:.3} corrupted {:.3}\n",
                r.seed,
                r.base.clean_accuracy,
                r.base.mean_corrupted_accuracy(),
                r.stnet.model,
                r.stnet.clean_accuracy,
                r.stnet.mean_corrupted_accuracy(),
            ));
        }
        out.push_str(&format!(
            "multi-stream wins: {}/{} seeds; mean clean gap {:.3}; trend {}\n",
            self.wins,
            self.per_seed.len(),
            self.mean_clean_gap,
            if self.trend_holds {
                "HOLDS"
            } else {
                "DEVIATES (flagged, see per-seed rows)"
            }
        ));
        out
    }
}

/// Runs the full experiment on the given train/test sets.
pub fn desk_experiment(
    train_set: &LabeledImageSet,
    test_set: &LabeledImageSet,
    config: &DeskExperimentConfig,
) -> Result<DeskReport> {
    let classes = train_set.num_classes();
    let input = (
        train_set.images[0].height(),
        train_set.images[0].width(),
        3,
    );
    let base_desc = minivgg_desc(&MINIVGG_DEFAULT_FILTERS, input, classes)?;
    let stnet = stnet_desc(&base_desc, config.num_streams, config.scale, classes)?;
    let spec = make_spec(config.num_streams, SliceMode::PixelLuminance)?;
    let severities = [config.severity];

    let mut per_seed = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut base_graph: Graph<f32> = compile(&base_desc, seed)?;
        let base_cfg = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            momentum: config.momentum,
            optimizer: OptimizerKind::Sgd,
            seed,
            slice_spec: None,
        };
        train(&mut base_graph, train_set, &base_cfg)?;
        let base_report = eval_corruption_suite(
            &mut base_graph,
            &base_desc.name,
            Protocol::NoAug,
            test_set,
            &config.kinds,
            &severities,
            None,
            config.suite_seed,
        )?;

        let mut stnet_graph: Graph<f32> = compile(&stnet, seed)?;
        let stnet_cfg = TrainConfig {
            slice_spec: Some(spec.clone()),
            ..base_cfg
        };
        train(&mut stnet_graph, train_set, &stnet_cfg)?;
        let stnet_report = eval_corruption_suite(
            &mut stnet_graph,
            &stnet.name,
            Protocol::NoAug,
            test_set,
            &config.kinds,
            &severities,
            Some(&spec),
            config.suite_seed,
        )?;

        per_seed.push(DeskSeedResult {
            seed,
            base: base_report,
            stnet: stnet_report,
        });
    }

    let wins = per_seed.iter().filter(|r| r.stnet_wins()).count();
    let mean = |f: &dyn Fn(&DeskSeedResult) -> f64| {
        per_seed.iter().map(|r| f(r)).sum::<f64>() / per_seed.len() as f64
    };
    let mean_clean_gap =
        (mean(&|r| r.stnet.clean_accuracy) - mean(&|r| r.base.clean_accuracy)).abs();
    let trend_holds = wins * 2 > per_seed.len() && mean_clean_gap < 0.05;
    Ok(DeskReport {
        per_seed,
        wins,
        mean_clean_gap,
        trend_holds,
    })
}
