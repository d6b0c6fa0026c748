use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{
    feedback_thresholds, filter_kg, generate_types, scored_relations, select_feedback,
    FeedbackConfig, FeedbackEvidence, PredictionPartition,
};
use crate::embed::{train, EmbeddingModel, ModelConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::{
    noise_recall, normalized_size, report_at, score_pairs, tune_threshold, EvalReport,
};
use crate::kg::{EvalSet, KnowledgeGraph, Triple};
use crate::psl::{infer, InferenceResult, RuleWeights, SolverConfig};
use crate::util::sub_seed;

/// Everything one refinement run needs besides the data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub psl: RuleWeights,
    pub solver: SolverConfig,
    pub model: ModelConfig,
    pub feedback: FeedbackConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub t_best: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub psl_valid: EvalReport,
    pub psl_test: EvalReport,
    pub model_valid: EvalReport,
    pub model_test: EvalReport,
    pub kg_size: usize,
    pub normalized_size: f64,
    pub noise_recall_compatible: f64,
    pub noise_recall_incompatible: f64,
    pub psl_noise_recall_compatible: f64,
    pub psl_noise_recall_incompatible: f64,
    pub facts_kept: usize,
    pub facts_inferred: usize,
    pub typed_entities: usize,
    pub feedback_positive: usize,
    pub feedback_negative: usize,
    pub psl_objective: f64,
    pub psl_iterations: usize,
    pub final_train_loss: f64,
}

/// Per-iteration intermediate results kept for inspection and output.
#[derive(Clone, Debug)]
pub struct IterationArtifacts {
    pub inference: InferenceResult,
    pub feedback: FeedbackEvidence,
}

#[derive(Clone, Debug)]
pub struct IterefineRun {
    pub reports: Vec<IterationReport>,
    pub artifacts: Vec<IterationArtifacts>,
    pub model: EmbeddingModel,
    /// Kept facts of the last iteration.
    pub refined: KnowledgeGraph,
    pub halted_on_size: bool,
}

fn in_iteration(k: usize) -> impl Fn(Error) -> Error {
    move |e| e.with_context(&format!("iteration {k}"))
}

fn decisions(pairs: &[(Triple, f64)], threshold: f64) -> HashMap<Triple, bool> {
    pairs.iter().map(|&(t, s)| (t, s >= threshold)).collect()
}

/// Alternates soft-logic inference and type-gated embedding training.
///
/// Every soft-logic round grounds the candidate evidence of `kg` together
/// with the accumulated embedding feedback (latest score per triple wins).
/// The round's scores, filtered at the validation-tuned threshold, give the
/// training facts (evaluation triples held out) and entity types of the
/// embedding model, whose confident predictions become the next round's
/// feedback. The reported graph size
/// counts kept facts plus fed-back triples.
pub fn iterefine(
    kg: &KnowledgeGraph,
    config: &RefineConfig,
    valid: &EvalSet,
    test: &EvalSet,
) -> Result<IterefineRun> {
    config.feedback.validate()?;
    config.model.validate()?;
    if valid.is_empty() || test.is_empty() {
        return Err(Error::Data(
            "refinement needs non-empty validation and test sets".into(),
        ));
    }
    let original = kg.num_facts();
    let mut weights = config.psl.clone();
    weights.feedback = config.feedback.feedback_weight;

    let mut accumulated: BTreeMap<Triple, (f64, bool)> = BTreeMap::new();
    let mut reports = Vec::new();
    let mut artifacts = Vec::new();
    let mut last = None;
    let mut halted_on_size = false;

    for k in 1..=config.feedback.max_iter {
        let ctx = in_iteration(k);
        let mut evidence = FeedbackEvidence {
            iteration: k - 1,
            ..Default::default()
        };
        for (&t, &(s, positive)) in &accumulated {
            if positive {
                evidence.positive.push((t, s));
            } else {
                evidence.negative.push((t, s));
            }
        }
        let result = infer(
            kg,
            &weights,
            (!evidence.is_empty()).then_some(&evidence),
            &config.solver,
        )
        .map_err(&ctx)?;

        let psl_valid_pairs = score_pairs(valid, |t| result.rel_score(t));
        let (t_best, psl_valid) = tune_threshold(&psl_valid_pairs).map_err(&ctx)?;
        let psl_test_scores: Vec<(Triple, f64)> = test
            .triples()
            .map(|t| (t, result.rel_score(&t).unwrap_or(0.0)))
            .collect();
        let psl_test =
            report_at(&score_pairs(test, |t| result.rel_score(t)), t_best).map_err(&ctx)?;

        let kept = filter_kg(kg, &result, t_best, k).map_err(&ctx)?;
        let types = generate_types(&result.lbl_scores, &kg.ontology, t_best).map_err(&ctx)?;
        let model_config = ModelConfig {
            seed: sub_seed(config.model.seed, &format!("iter-{k}")),
            ..config.model.clone()
        };
        let (model, trace) = train(
            &TrainingSet::from_kg_excluding(&kept, &[valid, test]).map_err(&ctx)?,
            &types,
            &model_config,
        )
        .map_err(&ctx)?;

        let predict = |set: &EvalSet| -> Result<Vec<(Triple, f64)>> {
            let ts: Vec<Triple> = set.triples().collect();
            let scores = model.predict(&ts)?;
            Ok(ts.into_iter().zip(scores).collect())
        };
        let with_gold = |scored: &[(Triple, f64)], set: &EvalSet| -> Vec<(f64, bool)> {
            scored
                .iter()
                .zip(&set.items)
                .map(|((_, s), (_, g))| (*s, *g))
                .collect()
        };
        let model_valid_scores = predict(valid).map_err(&ctx)?;
        let model_test_scores = predict(test).map_err(&ctx)?;
        let (t1, model_valid) =
            tune_threshold(&with_gold(&model_valid_scores, valid)).map_err(&ctx)?;
        let model_test = report_at(&with_gold(&model_test_scores, test), t1).map_err(&ctx)?;

        let universe = scored_relations(&result);
        let triples: Vec<Triple> = universe.iter().map(|(t, _)| *t).collect();
        let scored: Vec<(Triple, f64)> = triples
            .iter()
            .copied()
            .zip(model.predict(&triples).map_err(&ctx)?)
            .collect();
        let partition = PredictionPartition::new(&scored, t1);
        let (t2, t3) = feedback_thresholds(&partition, &config.feedback);
        let fresh = select_feedback(&scored, t2, t3, k);
        for &(t, s) in &fresh.positive {
            accumulated.insert(t, (s, true));
        }
        for &(t, s) in &fresh.negative {
            accumulated.insert(t, (s, false));
        }

        let mut refined: BTreeSet<Triple> = kept.facts().iter().map(|f| f.triple).collect();
        refined.extend(accumulated.keys().copied());
        let size = normalized_size(refined.len(), original).map_err(&ctx)?;

        let compat = kg.noise_compat();
        let (model_rec, psl_rec) = if test.items.iter().any(|(t, g)| !g && compat.contains_key(t)) {
            let covered = EvalSet {
                items: test
                    .items
                    .iter()
                    .filter(|(t, g)| *g || compat.contains_key(t))
                    .copied()
                    .collect(),
            };
            let model_rec =
                noise_recall(&decisions(&model_test_scores, t1), &covered, compat).map_err(&ctx)?;
            let psl_rec = noise_recall(&decisions(&psl_test_scores, t_best), &covered, compat)
                .map_err(&ctx)?;
            (model_rec, psl_rec)
        } else {
            ((0.0, 0.0), (0.0, 0.0))
        };

        let report = IterationReport {
            iteration: k,
            t_best,
            t1,
            t2,
            t3,
            psl_valid,
            psl_test,
            model_valid,
            model_test,
            kg_size: refined.len(),
            normalized_size: size,
            noise_recall_compatible: model_rec.0,
            noise_recall_incompatible: model_rec.1,
            psl_noise_recall_compatible: psl_rec.0,
            psl_noise_recall_incompatible: psl_rec.1,
            facts_kept: kept.num_facts(),
            facts_inferred: kept
                .facts()
                .iter()
                .filter(|f| !kg.contains(&f.triple))
                .count(),
            typed_entities: types.len(),
            feedback_positive: fresh.positive.len(),
            feedback_negative: fresh.negative.len(),
            psl_objective: result.objective,
            psl_iterations: result.iterations,
            final_train_loss: trace.last().copied().unwrap_or(0.0),
        };
        info!(
            "iteration {k}: psl wF1 {:.4}, model wF1 {:.4}, size {:.3}, feedback +{} -{}",
            report.psl_test.wf1,
            report.model_test.wf1,
            size,
            report.feedback_positive,
            report.feedback_negative
        );
        reports.push(report);
        artifacts.push(IterationArtifacts {
            inference: result,
            feedback: fresh,
        });
        last = Some((model, kept));
        if size > config.feedback.size_cap {
            warn!(
                "normalized size {size:.3} exceeds the cap {}; halting after iteration {k}",
                config.feedback.size_cap
            );
            halted_on_size = true;
            break;
        }
    }
    let (model, refined) = last.expect("max_iter >= 1");
    Ok(IterefineRun {
        reports,
        artifacts,
        model,
        refined,
        halted_on_size,
    })
}
