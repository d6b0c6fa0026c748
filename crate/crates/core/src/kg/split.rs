use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::util::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train", self.train),
            ("valid", self.valid),
            ("test", self.test),
        ] {
            if f.is_nan() || f <= 0.0 {
                return Err(Error::Config(format!(
                    "{name} fraction must be > 0, got {f}"
                )));
            }
        }
        let sum = self.train + self.valid + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Gold-labelled facts held out for threshold tuning or testing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub items: Vec<(Triple, bool)>,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.items.iter().map(|(t, _)| *t)
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|(_, g)| *g).count()
    }

    /// Splits into two halves with the same class balance (within one item
    /// per class).
    pub fn balanced_halves(&self, seed: u64) -> (EvalSet, EvalSet) {
        let mut rng = rng_for(seed, "halves");
        let mut pos: Vec<_> = self.items.iter().copied().filter(|(_, g)| *g).collect();
        let mut neg: Vec<_> = self.items.iter().copied().filter(|(_, g)| !*g).collect();
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let (mut a, mut b) = (EvalSet::default(), EvalSet::default());
        for class in [pos, neg] {
            let half = class.len().div_ceil(2);
            a.items.extend_from_slice(&class[..half]);
            b.items.extend_from_slice(&class[half..]);
        }
        (a, b)
    }
}

/// Seeded, fact-level partition into a training graph and gold-labelled
/// validation and test sets.
pub fn split_kg(
    kg: &KnowledgeGraph,
    spec: &SplitSpec,
) -> Result<(KnowledgeGraph, EvalSet, EvalSet)> {
    spec.validate()?;
    let truth = kg
        .truth()
        .ok_or_else(|| Error::Data("splitting requires gold truth labels".into()))?;

    let mut order: Vec<Triple> = kg.facts().iter().map(|f| f.triple).collect();
    order.shuffle(&mut rng_for(spec.seed, "split"));

    let n = order.len();
    let n_train = ((spec.train * n as f64).round() as usize).min(n);
    let n_valid = ((spec.valid * n as f64).round() as usize).min(n - n_train);

    let gold = |t: &Triple| {
        truth
            .get(t)
            .copied()
            .ok_or_else(|| Error::Data(format!("no gold label for fact {t:?}")))
    };
    let to_eval = |ts: &[Triple]| -> Result<EvalSet> {
        Ok(EvalSet {
            items: ts
                .iter()
                .map(|t| Ok((*t, gold(t)?)))
                .collect::<Result<_>>()?,
        })
    };
    let valid = to_eval(&order[n_train..n_train + n_valid])?;
    let test = to_eval(&order[n_train + n_valid..])?;

    let train_set: HashSet<Triple> = order[..n_train].iter().copied().collect();
    let train = kg.filter_facts(|f| train_set.contains(&f.triple));
    Ok((train, valid, test))
}
