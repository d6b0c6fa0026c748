mod common;

use std::collections::HashMap;

use common::{energy, eval_set, random_model, random_program, reference_wf1, t};
use kgrefine::embed::{Base, Block, Mode};
use kgrefine::eval::{alpha_combine, report_at, tune_threshold, weighted_f1, AlphaConfig};
use kgrefine::kg::Triple;
use kgrefine::pipeline::{select_feedback, PredictionPartition};
use kgrefine::psl::{lukasiewicz_body, map_inference, AtomKey};
use proptest::prelude::*;

proptest! {
    #[test]
    fn lukasiewicz_body_is_a_truth_value(values in prop::collection::vec(0.0..=1.0f64, 1..6)) {
        let b = lukasiewicz_body(&values);
        prop_assert!((0.0..=1.0).contains(&b));
        // Never more true than its least true conjunct.
        prop_assert!(b <= values.iter().cloned().fold(1.0, f64::min) + 1e-12);
    }

    #[test]
    fn map_state_is_feasible_and_no_worse_than_all_false(seed in 0u64..10_000, p in 1u8..=2) {
        let program = random_program(seed, p);
        let result = map_inference(&program).unwrap();
        let x: Vec<f64> = program.atoms.keys().iter().map(|k| match k {
            AtomKey::Rel(t) => result.rel_scores[t],
            AtomKey::Lbl(e, l) => result.lbl_scores[&(*e, *l)],
        }).collect();
        prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        let zeros = vec![0.0; x.len()];
        prop_assert!(energy(&program, &x) <= energy(&program, &zeros) + 1e-9);
        prop_assert!(result.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn weighted_f1_is_bounded_and_class_symmetric(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..50)
    ) {
        let build = |pairs: &[(bool, bool)]| {
            let preds: HashMap<Triple, bool> =
                pairs.iter().enumerate().map(|(i, &(p, _))| (t(i as u32, 0, 0), p)).collect();
            let gold = eval_set(pairs.iter().enumerate().map(|(i, &(_, g))| (t(i as u32, 0, 0), g)));
            weighted_f1(&preds, &gold).unwrap()
        };
        let r = build(&pairs);
        prop_assert!((0.0..=1.0).contains(&r.wf1));
        prop_assert!((r.wf1 - reference_wf1(&pairs).2).abs() < 1e-12);
        let flipped: Vec<(bool, bool)> = pairs.iter().map(|&(p, g)| (!p, !g)).collect();
        prop_assert!((build(&flipped).wf1 - r.wf1).abs() < 1e-12);
    }

    #[test]
    fn tuned_threshold_dominates_every_grid_point(
        pairs in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..40),
        probe in 0usize..=1000,
    ) {
        let (_, best) = tune_threshold(&pairs).unwrap();
        let other = report_at(&pairs, probe as f64 / 1000.0).unwrap();
        prop_assert!(best.wf1 >= other.wf1);
    }

    #[test]
    fn alpha_combination_lies_between_its_inputs(a in 0.0..=1.0f64, p in 0.0..=1.0f64, m in 0.0..=1.0f64) {
        let c = alpha_combine(p, m, AlphaConfig::new(a).unwrap());
        prop_assert!(c >= p.min(m) - 1e-12 && c <= p.max(m) + 1e-12);
    }

    #[test]
    fn feedback_never_overlaps_and_respects_thresholds(
        scores in prop::collection::vec(0.0..=1.0f64, 0..40),
        t2 in 0.0..=1.0f64,
        t3 in 0.0..=1.0f64,
    ) {
        prop_assume!(t3 <= t2);
        let scored: Vec<(Triple, f64)> =
            scores.iter().enumerate().map(|(i, &s)| (t(i as u32, 0, 0), s)).collect();
        let fb = select_feedback(&scored, t2, t3, 1);
        prop_assert!(fb.positive.iter().all(|&(_, s)| s > t2));
        prop_assert!(fb.negative.iter().all(|&(_, s)| s < t3));
        prop_assert!(fb.len() <= scored.len());
        let partition = PredictionPartition::new(&scored, t2);
        prop_assert_eq!(partition.positive.len() + partition.negative.len(), scored.len());
    }

    #[test]
    fn predictions_stay_probabilities_for_any_parameters(
        seed in 0u64..1000,
        scale in 0.1..20.0f64,
        mode in prop::sample::select(vec![Mode::Plain, Mode::ImplicitTyped, Mode::Typee]),
        base in prop::sample::select(vec![Base::Complex, Base::Distmult]),
    ) {
        let m = random_model(base, mode, seed, scale);
        let triples: Vec<Triple> = (0..4).flat_map(|s| (0..2).map(move |r| t(s, r, (s + r) % 4))).collect();
        for p in m.predict(&triples).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p) && p.is_finite());
        }
        prop_assert!(m.block(Block::EntityRe).iter().all(|v| v.is_finite()));
    }
}
