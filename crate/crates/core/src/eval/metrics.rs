use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EvalSet, Triple};

/// Per-class and class-weighted F1 for a binary refinement decision.
///
/// Class 1 is "correct fact", class 0 is "noise". Class weights are the gold
/// class fractions and `wf1 = w1 * pos_f1 + w0 * neg_f1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pos_f1: f64,
    pub neg_f1: f64,
    pub wf1: f64,
    pub w1: f64,
    pub w0: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn f1(hit: usize, false_pos: usize, false_neg: usize) -> f64 {
    let denom = 2 * hit + false_pos + false_neg;
    if hit == 0 || denom == 0 {
        0.0
    } else {
        2.0 * hit as f64 / denom as f64
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self> {
        let n = tp + fp + tn + fn_;
        if n == 0 {
            return Err(Error::Data("cannot score an empty evaluation set".into()));
        }
        let w1 = (tp + fn_) as f64 / n as f64;
        let w0 = (tn + fp) as f64 / n as f64;
        let pos_f1 = f1(tp, fp, fn_);
        let neg_f1 = f1(tn, fn_, fp);
        Ok(EvalReport {
            pos_f1,
            neg_f1,
            wf1: w1 * pos_f1 + w0 * neg_f1,
            w1,
            w0,
            tp,
            fp,
            tn,
            fn_,
        })
    }

    /// Recall of the noise class: rejected noise / all noise.
    pub fn neg_recall(&self) -> f64 {
        let noise = self.tn + self.fp;
        if noise == 0 {
            0.0
        } else {
            self.tn as f64 / noise as f64
        }
    }
}

/// Scores `predictions` (true = kept as correct) against `gold`.
pub fn weighted_f1(predictions: &HashMap<Triple, bool>, gold: &EvalSet) -> Result<EvalReport> {
    let mut missing = Vec::new();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (t, g) in &gold.items {
        match (predictions.get(t), g) {
            (None, _) => missing.push(*t),
            (Some(true), true) => tp += 1,
            (Some(true), false) => fp += 1,
            (Some(false), false) => tn += 1,
            (Some(false), true) => fn_ += 1,
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{} gold items have no prediction, e.g. {:?}",
            missing.len(),
            &missing[..missing.len().min(5)]
        )));
    }
    EvalReport::from_counts(tp, fp, tn, fn_)
}

/// Classifies `(score, gold)` pairs with `score >= threshold` as correct.
pub fn report_at(pairs: &[(f64, bool)], threshold: f64) -> Result<EvalReport> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for &(s, g) in pairs {
        match (s >= threshold, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    EvalReport::from_counts(tp, fp, tn, fn_)
}

pub const THRESHOLD_STEPS: usize = 1000;

/// Threshold on the grid {0, 0.001, …, 1} maximising wF1 of
/// `score >= t`; ties go to the smallest threshold.
pub fn tune_threshold(pairs: &[(f64, bool)]) -> Result<(f64, EvalReport)> {
    if pairs.is_empty() {
        return Err(Error::Data(
            "threshold tuning needs at least one scored item".into(),
        ));
    }
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_pos = sorted.iter().filter(|p| p.1).count();
    let total_neg = sorted.len() - total_pos;

    let (mut below, mut pos_below, mut neg_below) = (0, 0, 0);
    let mut best: Option<(f64, EvalReport)> = None;
    for step in 0..=THRESHOLD_STEPS {
        let t = step as f64 / THRESHOLD_STEPS as f64;
        while below < sorted.len() && sorted[below].0 < t {
            if sorted[below].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            below += 1;
        }
        let r = EvalReport::from_counts(
            total_pos - pos_below,
            total_neg - neg_below,
            neg_below,
            pos_below,
        )?;
        if best.as_ref().is_none_or(|(_, b)| r.wf1 > b.wf1) {
            best = Some((t, r));
        }
    }
    Ok(best.expect("grid is non-empty"))
}
