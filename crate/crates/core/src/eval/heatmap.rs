use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{normalized_size, score_pairs, StageMetrics};
use crate::error::{Error, Result};
use crate::kg::{EvalSet, KnowledgeGraph, Triple};
use crate::pipeline::FeedbackEvidence;
use crate::psl::{infer, RuleWeights, SolverConfig};

pub const DEFAULT_HEATMAP_GRID: [f64; 8] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub pos_pct: f64,
    pub neg_pct: f64,
    pub threshold: f64,
    pub wf1: f64,
    pub normalized_size: f64,
    pub feedback_positive: usize,
    pub feedback_negative: usize,
}

/// Feedback made of the top `pos_pct`% and the bottom `neg_pct`% of
/// `scored` (by score, ties in input order). A triple is never both.
pub fn percentile_feedback(
    scored: &[(Triple, f64)],
    pos_pct: f64,
    neg_pct: f64,
) -> FeedbackEvidence {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1).then(a.cmp(&b)));
    let n = scored.len() as f64;
    let n_pos = ((pos_pct / 100.0 * n).floor() as usize).min(scored.len());
    let n_neg = ((neg_pct / 100.0 * n).floor() as usize).min(scored.len() - n_pos);
    FeedbackEvidence {
        positive: order[..n_pos].iter().map(|&i| scored[i]).collect(),
        negative: order[order.len() - n_neg..]
            .iter()
            .rev()
            .map(|&i| scored[i])
            .collect(),
        iteration: 0,
    }
}

/// For every `(pos%, neg%)` pair, feeds the corresponding slices of
/// `scored` back into one soft-logic round and records the tuned test wF1
/// and the normalised size of the candidate graph extended by the feedback.
#[allow(clippy::too_many_arguments)]
pub fn threshold_heatmap(
    kg: &KnowledgeGraph,
    weights: &RuleWeights,
    solver: &SolverConfig,
    scored: &[(Triple, f64)],
    valid: &EvalSet,
    test: &EvalSet,
    grid: &[(f64, f64)],
) -> Result<Vec<HeatmapCell>> {
    let base: BTreeSet<Triple> = kg.facts().iter().map(|f| f.triple).collect();
    let mut cells = Vec::with_capacity(grid.len());
    for &(p, n) in grid {
        if !(0.0..=100.0).contains(&p) || !(0.0..=100.0).contains(&n) {
            return Err(Error::Config(format!(
                "heatmap percentages must lie in [0, 100], got ({p}, {n})"
            )));
        }
        let fb = percentile_feedback(scored, p, n);
        let result = infer(kg, weights, (!fb.is_empty()).then_some(&fb), solver)?;
        let metrics = StageMetrics::tune(
            &score_pairs(valid, |t| result.rel_score(t)),
            &score_pairs(test, |t| result.rel_score(t)),
        )?;
        let mut universe = base.clone();
        universe.extend(fb.positive.iter().chain(&fb.negative).map(|(t, _)| *t));
        cells.push(HeatmapCell {
            pos_pct: p,
            neg_pct: n,
            threshold: metrics.threshold,
            wf1: metrics.test.wf1,
            normalized_size: normalized_size(universe.len(), base.len())?,
            feedback_positive: fb.positive.len(),
            feedback_negative: fb.negative.len(),
        });
    }
    Ok(cells)
}

pub fn heatmap_csv(cells: &[HeatmapCell]) -> String {
    let mut out = String::from(
        "pos_pct,neg_pct,threshold,wf1,normalized_size,feedback_positive,feedback_negative\n",
    );
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.pos_pct,
            c.neg_pct,
            c.threshold,
            c.wf1,
            c.normalized_size,
            c.feedback_positive,
            c.feedback_negative
        );
    }
    out
}
