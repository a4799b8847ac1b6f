//! Scale-factor model search: walk a descending ladder of scale factors,
//! admit only candidates that cost fewer FLOPs than the base (the gate runs
//! before any training), and stop at the first candidate whose accuracy
//! meets the criterion.

use crate::analyzer::{count_flops, FlopsConvention};
use crate::error::{Error, Result};
use crate::zoo::{stnet_desc, ArchDescription, StnetName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchCriterion {
    /// Candidate mean suite accuracy >= the base's.
    AtLeastBase,
    /// Strictly greater.
    StrictlyAboveBase,
}

impl SearchCriterion {
    fn passes(&self, candidate: f64, base: f64) -> bool {
        match self {
            SearchCriterion::AtLeastBase => candidate >= base,
            SearchCriterion::StrictlyAboveBase => candidate > base,
        }
    }
}

/// The FLOPs admissibility gate. `Always` disables the gate; it exists for
/// structural tests that mock the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissibility {
    FlopsUnderConvention(FlopsConvention),
    Always,
}

#[derive(Debug, Clone)]
pub struct ScaleSearchConfig {
    pub num_streams: usize,
    pub classes: usize,
    pub criterion: SearchCriterion,
    pub admissibility: Admissibility,
}

impl Default for ScaleSearchConfig {
    fn default() -> Self {
        ScaleSearchConfig {
            num_streams: 5,
            classes: 10,
            criterion: SearchCriterion::AtLeastBase,
            admissibility: Admissibility::FlopsUnderConvention(FlopsConvention::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaleCandidate {
    pub name: StnetName,
    pub admissible: bool,
    /// Mean suite accuracy; `None` when the FLOPs gate rejected the
    /// candidate before evaluation.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScaleSearchOutcome {
    pub chosen: Option<StnetName>,
    pub candidates: Vec<ScaleCandidate>,
}

/// `evaluate` trains/evaluates one candidate and returns its mean suite
/// accuracy; it is never called for FLOPs-inadmissible candidates, and the
/// search stops at the first acceptance.
pub fn scale_search<F>(
    base: &ArchDescription,
    scales: &[f64],
    config: &ScaleSearchConfig,
    base_accuracy: f64,
    mut evaluate: F,
) -> Result<ScaleSearchOutcome>
where
    F: FnMut(&ArchDescription, &StnetName) -> Result<f64>,
{
    if scales.is_empty() {
        return Err(Error::arg("scale ladder is empty"));
    }
    if let Some(&bad) = scales.iter().find(|&&s| !(s.is_finite() && s >= 1.0)) {
        return Err(Error::arg(format!("scale {bad} is below 1")));
    }
    let base_flops = match config.admissibility {
        Admissibility::FlopsUnderConvention(conv) => Some(count_flops(base, conv)?),
        Admissibility::Always => None,
    };
    let mut candidates = Vec::with_capacity(scales.len());
    let mut chosen = None;
    for &scale in scales {
        let desc = stnet_desc(base, config.num_streams, scale, config.classes)?;
        let name = StnetName {
            num_streams: config.num_streams,
            scale,
            base: base.family,
        };
        let admissible = match (config.admissibility, base_flops) {
            (Admissibility::Always, _) => true,
            (Admissibility::FlopsUnderConvention(conv), Some(limit)) => {
                count_flops(&desc, conv)? < limit
            }
            _ => unreachable!("base_flops follows the admissibility mode"),
        };
        if !admissible {
            candidates.push(ScaleCandidate {
                name,
                admissible: false,
                accuracy: None,
            });
            continue;
        }
        let accuracy = evaluate(&desc, &name)?;
        candidates.push(ScaleCandidate {
            name,
            admissible: true,
            accuracy: Some(accuracy),
        });
        if config.criterion.passes(accuracy, base_accuracy) {
            chosen = Some(name);
            break;
        }
    }
    Ok(ScaleSearchOutcome { chosen, candidates })
}
