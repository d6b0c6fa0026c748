//! The refinement loop: soft-logic inference, threshold tuning, filtering,
//! type generation, type-gated embedding training and feedback selection.

mod iterate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Confidence, EntityId, KnowledgeGraph, LabelId, Ontology, Triple};
use crate::psl::InferenceResult;
use crate::util::mean;

pub use iterate::{iterefine, IterationArtifacts, IterationReport, IterefineRun, RefineConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    pub phi1: f64,
    pub phi2: f64,
    pub feedback_weight: f64,
    pub max_iter: usize,
    /// Largest tolerated normalized growth of the graph before halting.
    pub size_cap: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            phi1: 0.5,
            phi2: 0.75,
            feedback_weight: 1.0,
            max_iter: 6,
            size_cap: 3.0,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi1 >= 0.0 && self.phi2 >= 0.0) {
            return Err(Error::Config("phi1 and phi2 must be >= 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if self.feedback_weight.is_nan() || self.feedback_weight <= 0.0 {
            return Err(Error::Config("feedback_weight must be > 0".into()));
        }
        Ok(())
    }
}

/// Scored triples split at the classification threshold `t1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionPartition {
    pub t1: f64,
    pub positive: Vec<(Triple, f64)>,
    pub negative: Vec<(Triple, f64)>,
    pub mean_p: f64,
    pub mean_n: f64,
}

impl PredictionPartition {
    pub fn new(scored: &[(Triple, f64)], t1: f64) -> Self {
        let (positive, negative): (Vec<_>, Vec<_>) =
            scored.iter().copied().partition(|&(_, s)| s >= t1);
        PredictionPartition {
            t1,
            mean_p: mean(positive.iter().map(|p| p.1)),
            mean_n: mean(negative.iter().map(|p| p.1)),
            positive,
            negative,
        }
    }
}

/// High-confidence embedding predictions handed back to the soft-logic
/// stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvidence {
    pub positive: Vec<(Triple, f64)>,
    pub negative: Vec<(Triple, f64)>,
    pub iteration: usize,
}

impl FeedbackEvidence {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len()
    }
}

/// `t2 = t1 + φ1·mean(P1)`, `t3 = t1 − φ2·mean(N1)`. Not clamped.
pub fn feedback_thresholds(partition: &PredictionPartition, config: &FeedbackConfig) -> (f64, f64) {
    (
        partition.t1 + config.phi1 * partition.mean_p,
        partition.t1 - config.phi2 * partition.mean_n,
    )
}

/// Positive feedback is every score strictly above `t2`, negative every
/// score strictly below `t3`; the band in between is withheld.
pub fn select_feedback(
    scored: &[(Triple, f64)],
    t2: f64,
    t3: f64,
    iteration: usize,
) -> FeedbackEvidence {
    let mut ev = FeedbackEvidence {
        iteration,
        ..Default::default()
    };
    for &(t, s) in scored {
        if s > t2 {
            ev.positive.push((t, s));
        } else if s < t3 {
            ev.negative.push((t, s));
        }
    }
    ev
}

/// Source name attached to facts inferred in refinement round `iteration`.
pub fn inferred_source(iteration: usize) -> String {
    format!("psl-iter-{iteration}")
}

/// Keeps every scored REL atom (existing or newly inferred) whose score
/// reaches `t_best`. Inferred facts carry their score as confidence.
pub fn filter_kg(
    kg: &KnowledgeGraph,
    result: &InferenceResult,
    t_best: f64,
    iteration: usize,
) -> Result<KnowledgeGraph> {
    let mut out = kg.filter_facts(|f| result.rel_score(&f.triple).unwrap_or(0.0) >= t_best);
    let source = out.vocab.source(&inferred_source(iteration));
    for (t, &s) in &result.rel_scores {
        if s >= t_best && !kg.contains(t) {
            out.add_fact(
                *t,
                Confidence {
                    source,
                    value: s.clamp(0.0, 1.0),
                },
            )?;
        }
    }
    Ok(out)
}

/// Entity → most specific confident type label.
///
/// Labels scoring below `t_best` are dropped, then any label that is a
/// strict SUB-ancestor of another surviving label of the same entity. The
/// highest-scoring remaining label wins (smallest id on ties). Entities
/// without a surviving label are absent (UNK).
pub fn generate_types(
    lbl_scores: &BTreeMap<(EntityId, LabelId), f64>,
    ontology: &Ontology,
    t_best: f64,
) -> Result<BTreeMap<EntityId, LabelId>> {
    let mut surviving: BTreeMap<EntityId, Vec<(LabelId, f64)>> = BTreeMap::new();
    for (&(e, l), &s) in lbl_scores {
        if s >= t_best {
            surviving.entry(e).or_default().push((l, s));
        }
    }
    let mut ancestors: BTreeMap<LabelId, BTreeSet<LabelId>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (e, labels) in surviving {
        let mut dominated = BTreeSet::new();
        for &(l, _) in &labels {
            if let std::collections::btree_map::Entry::Vacant(slot) = ancestors.entry(l) {
                slot.insert(ontology.ancestors(l)?);
            }
            dominated.extend(ancestors[&l].iter().copied());
        }
        let best = labels.iter().filter(|(l, _)| !dominated.contains(l)).fold(
            None::<(LabelId, f64)>,
            |acc, &(l, s)| match acc {
                Some((bl, bs)) if bs > s || (bs == s && bl < l) => Some((bl, bs)),
                _ => Some((l, s)),
            },
        );
        if let Some((l, _)) = best {
            out.insert(e, l);
        }
    }
    Ok(out)
}

/// Every REL atom of an inference result with its score, in key order.
pub fn scored_relations(result: &InferenceResult) -> Vec<(Triple, f64)> {
    result.rel_scores.iter().map(|(t, s)| (*t, *s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RelationId;

    fn t(i: u32) -> Triple {
        Triple::new(EntityId(i), RelationId(0), EntityId(i + 1))
    }

    #[test]
    fn threshold_arithmetic() {
        let p = PredictionPartition {
            t1: 0.5,
            mean_p: 0.8,
            mean_n: 0.2,
            ..Default::default()
        };
        let (t2, t3) = feedback_thresholds(&p, &FeedbackConfig::default());
        assert_eq!(t2, 0.9);
        assert_eq!(t3, 0.35);
    }

    #[test]
    fn empty_positive_side_means_zero() {
        let scored = [(t(0), 0.1), (t(1), 0.2)];
        let p = PredictionPartition::new(&scored, 0.5);
        assert!(p.positive.is_empty());
        assert_eq!(p.mean_p, 0.0);
        let (t2, _) = feedback_thresholds(&p, &FeedbackConfig::default());
        assert_eq!(t2, 0.5);
    }

    #[test]
    fn defaults() {
        let c = FeedbackConfig::default();
        assert_eq!((c.phi1, c.phi2), (0.5, 0.75));
        let c: FeedbackConfig = toml::from_str("max_iter = 2").unwrap();
        assert_eq!((c.phi1, c.phi2, c.max_iter), (0.5, 0.75, 2));
    }

    #[test]
    fn feedback_selection() {
        let scored = [(t(0), 0.95), (t(1), 0.6), (t(2), 0.1)];
        let ev = select_feedback(&scored, 0.9, 0.35, 1);
        assert_eq!(ev.positive, vec![(t(0), 0.95)]);
        assert_eq!(ev.negative, vec![(t(2), 0.1)]);
        let ev = select_feedback(&scored, 1.2, 0.35, 1);
        assert!(ev.positive.is_empty());
    }

    #[test]
    fn types_single_label() {
        let mut scores = BTreeMap::new();
        scores.insert((EntityId(0), LabelId(3)), 0.9);
        let types = generate_types(&scores, &Ontology::default(), 0.5).unwrap();
        assert_eq!(types[&EntityId(0)], LabelId(3));
    }

    #[test]
    fn types_most_specific_wins() {
        let mut o = Ontology::default();
        let (child, parent) = (LabelId(0), LabelId(1));
        o.add_sub(child, parent).unwrap();
        let mut scores = BTreeMap::new();
        scores.insert((EntityId(0), child), 0.8);
        scores.insert((EntityId(0), parent), 0.9);
        let types = generate_types(&scores, &o, 0.5).unwrap();
        assert_eq!(types[&EntityId(0)], child);
    }

    #[test]
    fn types_below_threshold_are_unk() {
        let mut scores = BTreeMap::new();
        scores.insert((EntityId(0), LabelId(0)), 0.3);
        assert!(generate_types(&scores, &Ontology::default(), 0.5)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn types_cycle_is_error() {
        let mut o = Ontology::default();
        o.add_sub(LabelId(0), LabelId(1)).unwrap();
        o.add_sub(LabelId(1), LabelId(0)).unwrap();
        let mut scores = BTreeMap::new();
        scores.insert((EntityId(0), LabelId(0)), 0.9);
        assert!(matches!(
            generate_types(&scores, &o, 0.5),
            Err(Error::Ontology(_))
        ));
    }
}
