use std::collections::{BTreeMap, HashMap};

use super::{
    alpha_combine, report_at, score_pairs, tune_alpha, AlphaConfig, AlphaTuning, EvalReport,
    StageMetrics,
};
use crate::embed::{train, EmbeddingModel, ModelConfig, TrainingSet};
use crate::error::Result;
use crate::kg::{EvalSet, KnowledgeGraph, Triple};
use crate::psl::{infer, InferenceResult, RuleWeights, SolverConfig};

/// One round of soft-logic inference without feedback.
pub fn psl_baseline(
    kg: &KnowledgeGraph,
    weights: &RuleWeights,
    solver: &SolverConfig,
    valid: &EvalSet,
    test: &EvalSet,
) -> Result<(StageMetrics, InferenceResult)> {
    let result = infer(kg, weights, None, solver)?;
    let metrics = StageMetrics::tune(
        &score_pairs(valid, |t| result.rel_score(t)),
        &score_pairs(test, |t| result.rel_score(t)),
    )?;
    Ok((metrics, result))
}

fn model_pairs(model: &EmbeddingModel, set: &EvalSet) -> Result<Vec<(f64, bool)>> {
    let triples: Vec<Triple> = set.triples().collect();
    let scores = model.predict(&triples)?;
    Ok(scores
        .into_iter()
        .zip(set.items.iter().map(|(_, g)| *g))
        .collect())
}

/// An embedding model trained on every candidate fact outside the
/// evaluation sets, with no type information.
pub fn embedding_baseline(
    kg: &KnowledgeGraph,
    config: &ModelConfig,
    valid: &EvalSet,
    test: &EvalSet,
) -> Result<(StageMetrics, EmbeddingModel)> {
    let (model, _) = train(
        &TrainingSet::from_kg_excluding(kg, &[valid, test])?,
        &BTreeMap::new(),
        config,
    )?;
    let metrics = StageMetrics::tune(&model_pairs(&model, valid)?, &model_pairs(&model, test)?)?;
    Ok((metrics, model))
}

/// Two chained embedding models: `base1` filters the graph at its
/// validation-tuned threshold and `base2` is trained on what survives.
pub fn two_stage_ensemble(
    kg: &KnowledgeGraph,
    base1: &ModelConfig,
    base2: &ModelConfig,
    valid: &EvalSet,
    test: &EvalSet,
) -> Result<StageMetrics> {
    two_stage_with_threshold(kg, base1, base2, valid, test, None)
}

/// [`two_stage_ensemble`] with an optional fixed stage-1 threshold.
pub fn two_stage_with_threshold(
    kg: &KnowledgeGraph,
    base1: &ModelConfig,
    base2: &ModelConfig,
    valid: &EvalSet,
    test: &EvalSet,
    stage1_threshold: Option<f64>,
) -> Result<StageMetrics> {
    let (first, _) = train(
        &TrainingSet::from_kg_excluding(kg, &[valid, test])?,
        &BTreeMap::new(),
        base1,
    )?;
    let threshold = match stage1_threshold {
        Some(t) => t,
        None => super::tune_threshold(&model_pairs(&first, valid)?)?.0,
    };
    let triples: Vec<Triple> = kg.facts().iter().map(|f| f.triple).collect();
    let scores = first.predict(&triples)?;
    let keep: HashMap<Triple, bool> = triples
        .into_iter()
        .zip(scores)
        .map(|(t, s)| (t, s >= threshold))
        .collect();
    let filtered = kg.filter_facts(|f| keep[&f.triple]);
    Ok(embedding_baseline(&filtered, base2, valid, test)?.0)
}

/// Convex combination of soft-logic and embedding scores with α and the
/// threshold tuned on validation; returns the tuning and test metrics.
pub fn alpha_model(
    psl: &InferenceResult,
    model: &EmbeddingModel,
    valid: &EvalSet,
    test: &EvalSet,
) -> Result<(AlphaTuning, EvalReport)> {
    let table = |set: &EvalSet| -> Result<(HashMap<Triple, f64>, HashMap<Triple, f64>)> {
        let triples: Vec<Triple> = set.triples().collect();
        let m = model.predict(&triples)?;
        let p = triples
            .iter()
            .map(|t| (*t, psl.rel_score(t).unwrap_or(0.0)))
            .collect();
        Ok((p, triples.into_iter().zip(m).collect()))
    };
    let (vp, vm) = table(valid)?;
    let tuning = tune_alpha(&vp, &vm, valid)?;
    let (tp, tm) = table(test)?;
    let cfg = AlphaConfig {
        alpha: tuning.alpha,
    };
    let pairs: Vec<(f64, bool)> = test
        .items
        .iter()
        .map(|(t, g)| (alpha_combine(tp[t], tm[t], cfg), *g))
        .collect();
    let report = report_at(&pairs, tuning.threshold)?;
    Ok((tuning, report))
}
