//! Turns a clean graph into a refinement benchmark: corrupted facts, gold
//! noise labels and synthetic extraction scores.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{
    Confidence, EntityId, KnowledgeGraph, LabelId, Ontology, RelationId, Triple, Truth,
};
use crate::util::{mean, rng_for};

const MAX_ATTEMPTS: usize = 100;
pub const SCORE_FLOOR: f64 = 0.01;
pub const SCORE_CEIL: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub corrupt_fraction: f64,
    pub type_compatible_fraction: f64,
    pub clean_mean: f64,
    pub clean_std: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            corrupt_fraction: 0.25,
            type_compatible_fraction: 0.5,
            clean_mean: 0.7,
            clean_std: 0.2,
            noise_mean: 0.3,
            noise_std: 0.2,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("corrupt_fraction", self.corrupt_fraction),
            ("type_compatible_fraction", self.type_compatible_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {f}")));
            }
        }
        if !(self.clean_std >= 0.0 && self.noise_std >= 0.0) {
            return Err(Error::Config(
                "score standard deviations must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    /// Relation facts plus label facts in the input.
    pub items: usize,
    pub corrupted: usize,
    pub corrupted_facts: usize,
    pub corrupted_labels: usize,
    /// Corrupted relation facts that pass the DOM/RNG check.
    pub type_compatible: usize,
    /// Corruptions that fell back to unconstrained sampling.
    pub fallbacks: usize,
    pub empty_input: bool,
}

/// DOM/RNG compatibility of triples against the entity types of a graph.
pub struct TypeChecker<'a> {
    ontology: &'a Ontology,
    types: HashMap<EntityId, BTreeSet<LabelId>>,
}

impl<'a> TypeChecker<'a> {
    pub fn new(kg: &'a KnowledgeGraph) -> Result<Self> {
        Ok(TypeChecker {
            ontology: &kg.ontology,
            types: kg.entity_types()?,
        })
    }

    fn has(&self, e: EntityId, required: Option<&LabelId>) -> bool {
        match required {
            None => true,
            Some(l) => self.types.get(&e).is_some_and(|s| s.contains(l)),
        }
    }

    pub fn subject_ok(&self, e: EntityId, r: RelationId) -> bool {
        self.has(e, self.ontology.dom.get(&r))
    }

    pub fn object_ok(&self, e: EntityId, r: RelationId) -> bool {
        self.has(e, self.ontology.rng.get(&r))
    }

    pub fn compatible(&self, t: &Triple) -> bool {
        self.subject_ok(t.subject, t.relation) && self.object_ok(t.object, t.relation)
    }
}

enum Item {
    Fact(usize),
    Label(usize),
}

struct Corrupter<'a> {
    check: TypeChecker<'a>,
    taken: HashSet<Triple>,
    n_entities: u32,
    n_relations: u32,
}

impl Corrupter<'_> {
    fn random_entity(&self, rng: &mut ChaCha8Rng) -> EntityId {
        EntityId(rng.random_range(0..self.n_entities))
    }

    fn unconstrained(&self, t: Triple, rng: &mut ChaCha8Rng) -> Option<Triple> {
        for _ in 0..MAX_ATTEMPTS {
            let mut c = t;
            match rng.random_range(0..3) {
                0 => c.subject = self.random_entity(rng),
                1 => c.relation = RelationId(rng.random_range(0..self.n_relations)),
                _ => c.object = self.random_entity(rng),
            }
            if c != t && !self.taken.contains(&c) {
                return Some(c);
            }
        }
        None
    }

    fn compatible(&self, t: Triple, rng: &mut ChaCha8Rng) -> Option<Triple> {
        for _ in 0..MAX_ATTEMPTS {
            let mut c = t;
            if rng.random_bool(0.5) {
                c.subject = self.random_entity(rng);
            } else {
                c.object = self.random_entity(rng);
            }
            if c != t && !self.taken.contains(&c) && self.check.compatible(&c) {
                return Some(c);
            }
        }
        None
    }

    fn incompatible(&self, t: Triple, rng: &mut ChaCha8Rng) -> Option<Triple> {
        for _ in 0..MAX_ATTEMPTS {
            let mut c = t;
            match rng.random_range(0..3) {
                0 => c.subject = self.random_entity(rng),
                1 => c.relation = RelationId(rng.random_range(0..self.n_relations)),
                _ => c.object = self.random_entity(rng),
            }
            if c != t && !self.taken.contains(&c) && !self.check.compatible(&c) {
                return Some(c);
            }
        }
        None
    }
}

/// Replaces `round(corrupt_fraction * (facts + labels))` randomly chosen
/// relation and label facts by corrupted versions and records gold labels.
///
/// `round(type_compatible_fraction * corrupted)` of the corruptions are
/// entity swaps that keep the triple DOM/RNG compatible; the remaining
/// relation-fact corruptions are made incompatible. Each corruption tries
/// up to 100 draws before falling back to an unconstrained one.
pub fn corrupt_kg(kg: &KnowledgeGraph, spec: &NoiseSpec) -> Result<(KnowledgeGraph, NoiseStats)> {
    spec.validate()?;
    let mut stats = NoiseStats {
        items: kg.num_facts() + kg.labels().len(),
        ..Default::default()
    };

    let mut out = kg.empty_like();
    if stats.items == 0 {
        if spec.corrupt_fraction > 0.0 {
            warn!("corruption requested on an empty graph; nothing to do");
        }
        stats.empty_input = true;
        out.set_truth(Truth::new());
        return Ok((out, stats));
    }

    let mut rng = rng_for(spec.seed, "noise");
    let mut items: Vec<Item> = (0..kg.num_facts())
        .map(Item::Fact)
        .chain((0..kg.labels().len()).map(Item::Label))
        .collect();
    items.shuffle(&mut rng);
    let n_corrupt = (spec.corrupt_fraction * stats.items as f64).round() as usize;
    let n_compat = (spec.type_compatible_fraction * n_corrupt as f64).round() as usize;
    items.truncate(n_corrupt);

    if spec.type_compatible_fraction > 0.0
        && kg.ontology.dom.is_empty()
        && kg.ontology.rng.is_empty()
    {
        warn!("type-compatible corruption requested without DOM/RNG; every triple counts as compatible");
    }

    let mut corrupter = Corrupter {
        check: TypeChecker::new(kg)?,
        taken: kg.facts().iter().map(|f| f.triple).collect(),
        n_entities: kg.num_entities() as u32,
        n_relations: kg.num_relations() as u32,
    };
    let mut taken_labels: HashSet<(EntityId, LabelId)> =
        kg.labels().iter().map(|l| (l.entity, l.label)).collect();

    let mut fact_swap: HashMap<usize, Triple> = HashMap::new();
    let mut label_swap: HashMap<usize, (EntityId, LabelId)> = HashMap::new();
    let mut compat_flags = BTreeMap::new();
    let mut compat_assigned = 0;

    for item in &items {
        match *item {
            Item::Fact(i) => {
                let t = kg.facts()[i].triple;
                let want_compat = compat_assigned < n_compat;
                if want_compat {
                    compat_assigned += 1;
                }
                let drawn = if want_compat {
                    corrupter.compatible(t, &mut rng)
                } else {
                    corrupter.incompatible(t, &mut rng)
                };
                let c = match drawn {
                    Some(c) => c,
                    None => {
                        stats.fallbacks += 1;
                        debug!("corruption of fact #{i} fell back to unconstrained sampling");
                        corrupter.unconstrained(t, &mut rng).ok_or_else(|| {
                            Error::Data(format!("could not corrupt fact #{i} without collision"))
                        })?
                    }
                };
                corrupter.taken.insert(c);
                let ok = corrupter.check.compatible(&c);
                stats.type_compatible += usize::from(ok);
                compat_flags.insert(c, ok);
                fact_swap.insert(i, c);
                stats.corrupted_facts += 1;
            }
            Item::Label(i) => {
                let l = &kg.labels()[i];
                let n_labels = kg.num_labels() as u32;
                let mut done = None;
                for _ in 0..MAX_ATTEMPTS {
                    let c = if rng.random_bool(0.5) || n_labels < 2 {
                        (corrupter.random_entity(&mut rng), l.label)
                    } else {
                        (l.entity, LabelId(rng.random_range(0..n_labels)))
                    };
                    if !taken_labels.contains(&c) {
                        done = Some(c);
                        break;
                    }
                }
                let c = done.ok_or_else(|| {
                    Error::Data(format!("could not corrupt label #{i} without collision"))
                })?;
                taken_labels.insert(c);
                label_swap.insert(i, c);
                stats.corrupted_labels += 1;
            }
        }
    }
    stats.corrupted = stats.corrupted_facts + stats.corrupted_labels;
    if stats.fallbacks > 0 {
        warn!(
            "{} of {} corrupted facts fell back to unconstrained sampling",
            stats.fallbacks, stats.corrupted_facts
        );
    }

    let mut truth = Truth::new();
    for (i, f) in kg.facts().iter().enumerate() {
        let (t, gold) = match fact_swap.get(&i) {
            Some(c) => (*c, false),
            None => (f.triple, true),
        };
        for c in &f.confidences {
            out.add_fact(t, *c)?;
        }
        truth.insert(t, gold);
    }
    let mut label_truth = BTreeMap::new();
    for (i, l) in kg.labels().iter().enumerate() {
        let ((e, lab), gold) = match label_swap.get(&i) {
            Some(c) => (*c, false),
            None => ((l.entity, l.label), true),
        };
        for c in &l.confidences {
            out.add_label(e, lab, *c)?;
        }
        label_truth.insert((e, lab), gold);
    }
    out.set_truth(truth);
    out.set_label_truth(label_truth);
    out.set_noise_compat(compat_flags);
    Ok((out, stats))
}

fn clamped_draw(dist: &Normal<f64>, rng: &mut ChaCha8Rng) -> f64 {
    dist.sample(rng).clamp(SCORE_FLOOR, SCORE_CEIL)
}

/// Replaces every confidence by one Gaussian draw chosen by the gold
/// label, clamped to [0.01, 0.99].
pub fn assign_extraction_scores(kg: &KnowledgeGraph, spec: &NoiseSpec) -> Result<KnowledgeGraph> {
    spec.validate()?;
    let truth = kg
        .truth()
        .ok_or_else(|| Error::Data("extraction scores require gold truth labels".into()))?;
    let clean = Normal::new(spec.clean_mean, spec.clean_std)
        .map_err(|e| Error::Config(format!("clean score distribution: {e}")))?;
    let noisy = Normal::new(spec.noise_mean, spec.noise_std)
        .map_err(|e| Error::Config(format!("noise score distribution: {e}")))?;
    let mut rng = rng_for(spec.seed, "scores");

    let mut out = kg.empty_like();
    for f in kg.facts() {
        let gold = *truth.get(&f.triple).ok_or_else(|| {
            let v = &kg.vocab;
            Error::Data(format!(
                "no gold label for fact ({}, {}, {})",
                v.entity_name(f.triple.subject),
                v.relation_name(f.triple.relation),
                v.entity_name(f.triple.object)
            ))
        })?;
        let value = clamped_draw(if gold { &clean } else { &noisy }, &mut rng);
        out.add_fact(
            f.triple,
            Confidence {
                source: f.confidences[0].source,
                value,
            },
        )?;
    }
    for l in kg.labels() {
        let gold = match kg.label_truth() {
            Some(t) => *t.get(&(l.entity, l.label)).ok_or_else(|| {
                Error::Data(format!(
                    "no gold label for type assertion ({}, {})",
                    kg.vocab.entity_name(l.entity),
                    kg.vocab.label_name(l.label)
                ))
            })?,
            None => true,
        };
        let value = clamped_draw(if gold { &clean } else { &noisy }, &mut rng);
        out.add_label(
            l.entity,
            l.label,
            Confidence {
                source: l.confidences[0].source,
                value,
            },
        )?;
    }
    out.set_truth(truth.clone());
    if let Some(t) = kg.label_truth() {
        out.set_label_truth(t.clone());
    }
    out.set_noise_compat(kg.noise_compat().clone());
    Ok(out)
}

/// Mean extraction score of clean and noisy facts.
pub fn score_means(kg: &KnowledgeGraph) -> (f64, f64) {
    let truth = kg.truth();
    let gold = |t: &Triple| truth.and_then(|m| m.get(t)).copied().unwrap_or(true);
    let clean = mean(
        kg.facts()
            .iter()
            .filter(|f| gold(&f.triple))
            .map(|f| f.max_confidence()),
    );
    let noisy = mean(
        kg.facts()
            .iter()
            .filter(|f| !gold(&f.triple))
            .map(|f| f.max_confidence()),
    );
    (clean, noisy)
}
