//! Training loop, per-corruption evaluation, augmentation-boost
//! arithmetic, and the scale-factor model search.

mod experiment;
mod search;

pub use experiment::{desk_experiment, DeskExperimentConfig, DeskReport, DeskSeedResult};
pub use search::{
    scale_search, Admissibility, ScaleCandidate, ScaleSearchConfig, ScaleSearchOutcome,
    SearchCriterion,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corruptions::{corrupt_set, Corruption, CorruptionKind, ALL_KINDS};
use crate::datasets::{seeded_shuffle, LabeledImageSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::loss::cross_entropy;
use crate::optim::{Optimizer, OptimizerKind};
use crate::slicer::{slice_image, SliceSpec};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// One stream per slice; `None` feeds the whole image to a
    /// single-input graph.
    pub slice_spec: Option<SliceSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            slice_spec: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        Ok(())
    }

    fn streams(&self) -> usize {
        self.slice_spec.as_ref().map_or(1, |s| s.num_slices)
    }
}

/// Converts a batch of images into per-stream tensors: slice k of each
/// image feeds stream k, pixel values scaled to [0, 1].
pub fn assemble_batch<T: Scalar>(
    set: &LabeledImageSet,
    indices: &[usize],
    slice_spec: Option<&SliceSpec>,
) -> (Vec<Tensor<T>>, Vec<usize>) {
    let streams = slice_spec.map_or(1, |s| s.num_slices);
    let (h, w) = (set.images[indices[0]].height(), set.images[indices[0]].width());
    let frame = h * w * 3;
    let mut buffers: Vec<Vec<T>> = vec![Vec::with_capacity(indices.len() * frame); streams];
    let scale = T::from_f64(1.0 / 255.0);
    for &i in indices {
        let img = &set.images[i];
        match slice_spec {
            None => buffers[0].extend(img.data().iter().map(|&v| T::from_f64(v as f64) * scale)),
            Some(spec) => {
                for (k, slice) in slice_image(img, spec).into_iter().enumerate() {
                    buffers[k]
                        .extend(slice.data().iter().map(|&v| T::from_f64(v as f64) * scale));
                }
            }
        }
    }
    let tensors = buffers
        .into_iter()
        .map(|b| Tensor::from_vec(&[indices.len(), h, w, 3], b).expect("sized by construction"))
        .collect();
    let labels = indices.iter().map(|&i| set.labels[i] as usize).collect();
    (tensors, labels)
}

/// Trains in place; returns the per-epoch mean training loss.
///
/// Deterministic under (seed, data, config): fixed initialization is the
/// caller's job (compile with a seed), shuffle order comes from the config
/// seed, and every kernel is order-stable.
pub fn train<T: Scalar>(
    graph: &mut Graph<T>,
    data: &LabeledImageSet,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if config.streams() != graph.num_inputs() {
        return Err(Error::arg(format!(
            "slice spec provides {} stream(s) but the graph has {} entry point(s)",
            config.streams(),
            graph.num_inputs()
        )));
    }
    let mut optimizer: Optimizer<T> = Optimizer::new(
        config.optimizer,
        config.learning_rate,
        config.momentum,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        seeded_shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let (inputs, labels) = assemble_batch::<T>(data, chunk, config.slice_spec.as_ref());
            let probs = graph.forward(&inputs, true)?;
            epoch_loss += cross_entropy(&probs, &labels)?.to_f64();
            batches += 1;
            graph.backward(&labels)?;
            optimizer.step(graph)?;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok(history)
}

/// Fraction of argmax matches; slicing must mirror training.
pub fn evaluate<T: Scalar>(
    graph: &mut Graph<T>,
    data: &LabeledImageSet,
    slice_spec: Option<&SliceSpec>,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Dataset("evaluation set is empty".into()));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in indices.chunks(256) {
        let (inputs, labels) = assemble_batch::<T>(data, chunk, slice_spec);
        let probs = graph.forward(&inputs, false)?;
        let classes = graph.num_classes();
        for (row, &label) in probs.data().chunks(classes).zip(&labels) {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if argmax == label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    NoAug,
    Aug,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::NoAug => "no-aug",
            Protocol::Aug => "aug",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-aug" => Ok(Protocol::NoAug),
            "aug" => Ok(Protocol::Aug),
            other => Err(Error::arg(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub accuracy: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub protocol: Protocol,
    pub clean_accuracy: f64,
    pub clean_n: usize,
    pub rows: Vec<EvalRow>,
}

/// Stable per-(kind, severity) corruption seed derived from a suite seed.
pub fn derive_corruption_seed(suite_seed: u64, kind: CorruptionKind, severity: u8) -> u64 {
    let kind_index = ALL_KINDS.iter().position(|k| *k == kind).unwrap() as u64;
    let mut x = suite_seed
        ^ (kind_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        ^ ((severity as u64) << 48);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// One row per (kind, severity), plus the clean accuracy; corruption seeds
/// derive from `suite_seed` so reruns are identical.
#[allow(clippy::too_many_arguments)]
pub fn eval_corruption_suite<T: Scalar>(
    graph: &mut Graph<T>,
    model: &str,
    protocol: Protocol,
    clean_test: &LabeledImageSet,
    kinds: &[CorruptionKind],
    severities: &[u8],
    slice_spec: Option<&SliceSpec>,
    suite_seed: u64,
) -> Result<EvalReport> {
    let clean_accuracy = evaluate(graph, clean_test, slice_spec)?;
    let mut rows = Vec::new();
    for &kind in kinds {
        for &severity in severities {
            let corruption =
                Corruption::new(kind, severity, derive_corruption_seed(suite_seed, kind, severity))?;
            let corrupted = corrupt_set(clean_test, &corruption)?;
            let accuracy = evaluate(graph, &corrupted, slice_spec)?;
            rows.push(EvalRow {
                kind,
                severity,
                accuracy,
                n: corrupted.len(),
            });
        }
    }
    Ok(EvalReport {
        model: model.to_string(),
        protocol,
        clean_accuracy,
        clean_n: clean_test.len(),
        rows,
    })
}

impl EvalReport {
    /// Unweighted mean accuracy over the corruption rows.
    pub fn mean_corrupted_accuracy(&self) -> f64 {
        if self.rows.is_empty() {
            return self.clean_accuracy;
        }
        self.rows.iter().map(|r| r.accuracy).sum::<f64>() / self.rows.len() as f64
    }

    /// CSV columns: model,protocol,kind,severity,n,accuracy (clean row first).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,protocol,kind,severity,n,accuracy\n");
        out.push_str(&format!(
            "{},{},clean,0,{},{}\n",
            self.model,
            self.protocol.as_str(),
            self.clean_n,
            self.clean_accuracy
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.model,
                self.protocol.as_str(),
                r.kind,
                r.severity,
                r.n,
                r.accuracy
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<EvalReport> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::arg("empty report"))?;
        if header != "model,protocol,kind,severity,n,accuracy" {
            return Err(Error::arg(format!("unexpected report header `{header}`")));
        }
        let mut model = None;
        let mut protocol = None;
        let mut clean = None;
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::parse(lineno + 2, "expected 6 columns"));
            }
            let this_model = fields[0].to_string();
            let this_protocol: Protocol = fields[1].parse()?;
            if *model.get_or_insert_with(|| this_model.clone()) != this_model {
                return Err(Error::parse(lineno + 2, "mixed model names in one report"));
            }
            if *protocol.get_or_insert(this_protocol) != this_protocol {
                return Err(Error::parse(lineno + 2, "mixed protocols in one report"));
            }
            let severity: u8 = fields[3]
                .parse()
                .map_err(|_| Error::parse(lineno + 2, "bad severity"))?;
            let n: usize = fields[4]
                .parse()
                .map_err(|_| Error::parse(lineno + 2, "bad sample count"))?;
            let accuracy: f64 = fields[5]
                .parse()
                .map_err(|_| Error::parse(lineno + 2, "bad accuracy"))?;
            if fields[2] == "clean" {
                clean = Some((accuracy, n));
            } else {
                rows.push(EvalRow {
                    kind: fields[2].parse()?,
                    severity,
                    accuracy,
                    n,
                });
            }
        }
        let (clean_accuracy, clean_n) =
            clean.ok_or_else(|| Error::arg("report is missing its clean row"))?;
        Ok(EvalReport {
            model: model.ok_or_else(|| Error::arg("report has no rows"))?,
            protocol: protocol.unwrap(),
            clean_accuracy,
            clean_n,
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostRow {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub boost: f64,
}

/// Per-row accuracy delta (with-augmentation minus without); both reports
/// must cover the same model and the same (kind, severity) rows.
pub fn augmentation_boost(aug: &EvalReport, noaug: &EvalReport) -> Result<Vec<BoostRow>> {
    if aug.model != noaug.model {
        return Err(Error::arg(format!(
            "model mismatch: `{}` vs `{}`",
            aug.model, noaug.model
        )));
    }
    if aug.protocol != Protocol::Aug || noaug.protocol != Protocol::NoAug {
        return Err(Error::arg("reports must be one aug and one no-aug"));
    }
    if aug.rows.len() != noaug.rows.len()
        || aug
            .rows
            .iter()
            .zip(&noaug.rows)
            .any(|(a, b)| a.kind != b.kind || a.severity != b.severity)
    {
        return Err(Error::arg(
            "reports cover different (kind, severity) rows",
        ));
    }
    Ok(aug
        .rows
        .iter()
        .zip(&noaug.rows)
        .map(|(a, b)| BoostRow {
            kind: a.kind,
            severity: a.severity,
            boost: a.accuracy - b.accuracy,
        })
        .collect())
}

/// CSV columns: model,kind,severity,boost
pub fn boost_csv(model: &str, rows: &[BoostRow]) -> String {
    let mut out = String::from("model,kind,severity,boost\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", model, r.kind, r.severity, r.boost));
    }
    out
}

/// Markdown table shaped like the per-corruption accuracy tables: one row
/// per (kind, severity), one column per report.
pub fn reports_markdown(reports: &[&EvalReport]) -> String {
    let mut out = String::from("| Noise Type |");
    for r in reports {
        out.push_str(&format!(" {} ({}) |", r.model, r.protocol.as_str()));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(reports.len()));
    out.push('\n');
    out.push_str("| clean |");
    for r in reports {
        out.push_str(&format!(" {:.3} |", r.clean_accuracy));
    }
    out.push('\n');
    if let Some(first) = reports.first() {
        for (i, row) in first.rows.iter().enumerate() {
            out.push_str(&format!("| {} (s{}) |", row.kind, row.severity));
            for r in reports {
                match r.rows.get(i) {
                    Some(cell) if cell.kind == row.kind && cell.severity == row.severity => {
                        out.push_str(&format!(" {:.3} |", cell.accuracy))
                    }
                    _ => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests;
