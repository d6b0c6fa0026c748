//! Metrics, baselines, ontology ablation and the feedback-threshold study.

mod baselines;
mod heatmap;
mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EvalSet, KnowledgeGraph, Ontology, Triple};

pub use baselines::{
    alpha_model, embedding_baseline, psl_baseline, two_stage_ensemble, two_stage_with_threshold,
};
pub use heatmap::{heatmap_csv, threshold_heatmap, HeatmapCell, DEFAULT_HEATMAP_GRID};
pub use metrics::{report_at, tune_threshold, weighted_f1, EvalReport, THRESHOLD_STEPS};

/// Scores paired with gold labels, in evaluation-set order. Items without
/// a score get 0.
pub fn score_pairs(set: &EvalSet, scores: impl Fn(&Triple) -> Option<f64>) -> Vec<(f64, bool)> {
    set.items
        .iter()
        .map(|(t, g)| (scores(t).unwrap_or(0.0), *g))
        .collect()
}

/// Threshold tuned on validation and the resulting metrics on both sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub threshold: f64,
    pub valid: EvalReport,
    pub test: EvalReport,
}

impl StageMetrics {
    pub fn tune(valid: &[(f64, bool)], test: &[(f64, bool)]) -> Result<Self> {
        let (threshold, valid) = tune_threshold(valid)?;
        Ok(StageMetrics {
            threshold,
            valid,
            test: report_at(test, threshold)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    pub alpha: f64,
}

impl AlphaConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(AlphaConfig { alpha })
    }
}

/// `α · psl + (1 − α) · model`.
pub fn alpha_combine(psl_score: f64, model_score: f64, cfg: AlphaConfig) -> f64 {
    cfg.alpha * psl_score + (1.0 - cfg.alpha) * model_score
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaTuning {
    pub alpha: f64,
    pub threshold: f64,
    pub valid: EvalReport,
}

pub const ALPHA_STEPS: usize = 10;

/// Picks α from {0, 0.1, …, 1} maximising the threshold-tuned validation
/// wF1 of the combined score (smallest α on ties).
pub fn tune_alpha(
    psl_scores: &HashMap<Triple, f64>,
    model_scores: &HashMap<Triple, f64>,
    valid: &EvalSet,
) -> Result<AlphaTuning> {
    let lookup = |m: &HashMap<Triple, f64>, t: &Triple, what: &str| {
        m.get(t)
            .copied()
            .ok_or_else(|| Error::Data(format!("no {what} score for validation item {t:?}")))
    };
    let scored: Vec<(f64, f64, bool)> = valid
        .items
        .iter()
        .map(|(t, g)| {
            Ok((
                lookup(psl_scores, t, "psl")?,
                lookup(model_scores, t, "model")?,
                *g,
            ))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<AlphaTuning> = None;
    for step in 0..=ALPHA_STEPS {
        let cfg = AlphaConfig {
            alpha: step as f64 / ALPHA_STEPS as f64,
        };
        let pairs: Vec<(f64, bool)> = scored
            .iter()
            .map(|&(p, m, g)| (alpha_combine(p, m, cfg), g))
            .collect();
        let (threshold, report) = tune_threshold(&pairs)?;
        if best.as_ref().is_none_or(|b| report.wf1 > b.valid.wf1) {
            best = Some(AlphaTuning {
                alpha: cfg.alpha,
                threshold,
                valid: report,
            });
        }
    }
    Ok(best.expect("alpha grid is non-empty"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OntologyComponent {
    Dom,
    Rng,
    Sub,
    Rsub,
    Mut,
    Rmut,
    Inv,
    Sameent,
}

impl OntologyComponent {
    pub const ALL: [OntologyComponent; 8] = [
        OntologyComponent::Dom,
        OntologyComponent::Rng,
        OntologyComponent::Sub,
        OntologyComponent::Rsub,
        OntologyComponent::Mut,
        OntologyComponent::Rmut,
        OntologyComponent::Inv,
        OntologyComponent::Sameent,
    ];

    fn clear(self, o: &mut Ontology) {
        match self {
            OntologyComponent::Dom => o.dom.clear(),
            OntologyComponent::Rng => o.rng.clear(),
            OntologyComponent::Sub => o.sub.clear(),
            OntologyComponent::Rsub => o.rsub.clear(),
            OntologyComponent::Mut => o.mutex.clear(),
            OntologyComponent::Rmut => o.rmutex.clear(),
            OntologyComponent::Inv => o.inv.clear(),
            OntologyComponent::Sameent => o.sameent.clear(),
        }
    }
}

impl fmt::Display for OntologyComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OntologyComponent::Dom => "DOM",
            OntologyComponent::Rng => "RNG",
            OntologyComponent::Sub => "SUB",
            OntologyComponent::Rsub => "RSUB",
            OntologyComponent::Mut => "MUT",
            OntologyComponent::Rmut => "RMUT",
            OntologyComponent::Inv => "INV",
            OntologyComponent::Sameent => "SAMEENT",
        };
        f.write_str(s)
    }
}

impl FromStr for OntologyComponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OntologyComponent::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown ontology component {s:?}")))
    }
}

/// Which ontology components an ablation keeps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AblationMode {
    All,
    None,
    Without(Vec<OntologyComponent>),
    Only(Vec<OntologyComponent>),
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |cs: &[OntologyComponent]| {
            cs.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("+")
        };
        match self {
            AblationMode::All => f.write_str("all"),
            AblationMode::None => f.write_str("none"),
            AblationMode::Without(cs) => write!(f, "without:{}", join(cs)),
            AblationMode::Only(cs) => write!(f, "only:{}", join(cs)),
        }
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    /// `all`, `none`, `without:RNG` or `only:DOM+RNG`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parts = |rest: &str| -> Result<Vec<OntologyComponent>> {
            rest.split(['+', ',']).map(str::parse).collect()
        };
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("all") => Ok(AblationMode::All),
            None if s.eq_ignore_ascii_case("none") => Ok(AblationMode::None),
            Some((m, rest)) if m.eq_ignore_ascii_case("without") => {
                Ok(AblationMode::Without(parts(rest)?))
            }
            Some((m, rest)) if m.eq_ignore_ascii_case("only") => {
                Ok(AblationMode::Only(parts(rest)?))
            }
            _ => Err(Error::Config(format!("unknown ablation mode {s:?}"))),
        }
    }
}

/// Copy of `ontology` with components removed according to `mode`.
pub fn ablate_ontology(ontology: &Ontology, mode: &AblationMode) -> Ontology {
    let mut out = ontology.clone();
    let drop: Vec<OntologyComponent> = match mode {
        AblationMode::All => vec![],
        AblationMode::None => OntologyComponent::ALL.to_vec(),
        AblationMode::Without(cs) => cs.clone(),
        AblationMode::Only(cs) => OntologyComponent::ALL
            .into_iter()
            .filter(|c| !cs.contains(c))
            .collect(),
    };
    for c in drop {
        c.clear(&mut out);
    }
    out
}

/// Negative-class recall split by whether each noise item is type
/// compatible: `(recall_compatible, recall_incompatible)`. An empty
/// partition has recall 0.
pub fn noise_recall(
    predictions: &HashMap<Triple, bool>,
    gold: &EvalSet,
    compat: &BTreeMap<Triple, bool>,
) -> Result<(f64, f64)> {
    let mut counts = [[0usize; 2]; 2];
    for (t, g) in &gold.items {
        if *g {
            continue;
        }
        let flag = *compat
            .get(t)
            .ok_or_else(|| Error::Data(format!("noise item {t:?} has no compatibility flag")))?;
        let kept = *predictions
            .get(t)
            .ok_or_else(|| Error::Data(format!("noise item {t:?} has no prediction")))?;
        counts[usize::from(flag)][0] += 1;
        counts[usize::from(flag)][1] += usize::from(!kept);
    }
    let recall = |[n, rejected]: [usize; 2]| {
        if n == 0 {
            0.0
        } else {
            rejected as f64 / n as f64
        }
    };
    Ok((recall(counts[1]), recall(counts[0])))
}

/// `(now − original) / original`.
pub fn normalized_size(now: usize, original: usize) -> Result<f64> {
    if original == 0 {
        return Err(Error::Data(
            "size normalisation needs a non-empty original graph".into(),
        ));
    }
    Ok((now as f64 - original as f64) / original as f64)
}

pub fn size_normalized(kg_now: &KnowledgeGraph, kg_original: &KnowledgeGraph) -> Result<f64> {
    normalized_size(kg_now.num_facts(), kg_original.num_facts())
}
