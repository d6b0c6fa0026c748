//! Graded knowledge-graph data model.
//!
//! A [`KnowledgeGraph`] holds candidate relation facts and candidate type
//! labels, each carrying one confidence per extraction source, together with
//! the ontology used by the soft-logic engine and (optionally) gold noise
//! labels used for evaluation.

mod io;
mod sameent;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_kg, read_noise_flags, read_truth, write_kg, write_labels, write_noise_flags,
    write_ontology, write_triples, write_truth, LoadOptions, DEFAULT_TYPEOF, INPUT_SOURCE,
};
pub use sameent::{generate_sameent, jaccard_sameent};
pub use split::{split_kg, EvalSet, SplitSpec};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(EntityId);
id_type!(RelationId);
id_type!(LabelId);
id_type!(SourceId);

/// Bijection between strings and dense ids starting at 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// String tables for every id space of a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    pub entities: Interner,
    pub relations: Interner,
    pub labels: Interner,
    pub sources: Interner,
}

impl Vocab {
    pub fn entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.intern(name))
    }

    pub fn relation(&mut self, name: &str) -> RelationId {
        RelationId(self.relations.intern(name))
    }

    pub fn label(&mut self, name: &str) -> LabelId {
        LabelId(self.labels.intern(name))
    }

    pub fn source(&mut self, name: &str) -> SourceId {
        SourceId(self.sources.intern(name))
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0)
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        self.labels.name(id.0)
    }

    pub fn source_name(&self, id: SourceId) -> &str {
        self.sources.name(id.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: EntityId, relation: RelationId, object: EntityId) -> Self {
        Triple {
            subject,
            relation,
            object,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub source: SourceId,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateFact {
    pub triple: Triple,
    pub confidences: Vec<Confidence>,
}

impl CandidateFact {
    /// Highest confidence over all sources.
    pub fn max_confidence(&self) -> f64 {
        self.confidences.iter().map(|c| c.value).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateLabel {
    pub entity: EntityId,
    pub label: LabelId,
    pub confidences: Vec<Confidence>,
}

/// Ontology components consumed by the rule templates.
///
/// Symmetric components (`mutex`, `rmutex`, `sameent`) are stored with the
/// smaller id first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ontology {
    pub dom: BTreeMap<RelationId, LabelId>,
    pub rng: BTreeMap<RelationId, LabelId>,
    /// (child, parent)
    pub sub: BTreeSet<(LabelId, LabelId)>,
    /// (relation, super-relation)
    pub rsub: BTreeSet<(RelationId, RelationId)>,
    pub mutex: BTreeSet<(LabelId, LabelId)>,
    pub rmutex: BTreeSet<(RelationId, RelationId)>,
    /// (relation, inverse)
    pub inv: BTreeSet<(RelationId, RelationId)>,
    pub sameent: BTreeMap<(EntityId, EntityId), f64>,
}

fn ordered<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Ontology {
    pub fn add_sub(&mut self, child: LabelId, parent: LabelId) -> Result<()> {
        if child == parent {
            return Err(Error::Ontology(format!(
                "label {} cannot subsume itself",
                child.0
            )));
        }
        self.sub.insert((child, parent));
        Ok(())
    }

    pub fn add_mutex(&mut self, a: LabelId, b: LabelId) -> Result<()> {
        if a == b {
            return Err(Error::Ontology(format!(
                "label {} cannot exclude itself",
                a.0
            )));
        }
        self.mutex.insert(ordered(a, b));
        Ok(())
    }

    pub fn add_rmutex(&mut self, a: RelationId, b: RelationId) -> Result<()> {
        if a == b {
            return Err(Error::Ontology(format!(
                "relation {} cannot exclude itself",
                a.0
            )));
        }
        self.rmutex.insert(ordered(a, b));
        Ok(())
    }

    pub fn add_sameent(&mut self, a: EntityId, b: EntityId, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Data(format!("SAMEENT score {score} outside [0,1]")));
        }
        if a != b {
            self.sameent.insert(ordered(a, b), score);
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.dom.is_empty()
            && self.rng.is_empty()
            && self.sub.is_empty()
            && self.rsub.is_empty()
            && self.mutex.is_empty()
            && self.rmutex.is_empty()
            && self.inv.is_empty()
            && self.sameent.is_empty()
    }

    /// Direct SUB parents of `label`.
    pub fn parents(&self, label: LabelId) -> impl Iterator<Item = LabelId> + '_ {
        self.sub
            .range((label, LabelId(0))..=(label, LabelId(u32::MAX)))
            .map(|&(_, p)| p)
    }

    /// All strict SUB-ancestors of `label`. Fails on a cycle through `label`.
    pub fn ancestors(&self, label: LabelId) -> Result<BTreeSet<LabelId>> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<LabelId> = self.parents(label).collect();
        while let Some(l) = stack.pop() {
            if l == label {
                return Err(Error::Ontology(format!(
                    "SUB cycle through label {}",
                    label.0
                )));
            }
            if seen.insert(l) {
                stack.extend(self.parents(l));
            }
        }
        Ok(seen)
    }
}

/// Gold label of a candidate: `true` for a correct fact, `false` for noise.
pub type Truth = BTreeMap<Triple, bool>;

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    pub vocab: Vocab,
    pub ontology: Ontology,
    facts: Vec<CandidateFact>,
    fact_index: HashMap<Triple, usize>,
    labels: Vec<CandidateLabel>,
    label_index: HashMap<(EntityId, LabelId), usize>,
    truth: Option<Truth>,
    label_truth: Option<BTreeMap<(EntityId, LabelId), bool>>,
    /// For injected noise: whether the corrupted fact is type compatible.
    noise_compat: BTreeMap<Triple, bool>,
}

impl KnowledgeGraph {
    pub fn new(vocab: Vocab) -> Self {
        KnowledgeGraph {
            vocab,
            ..Default::default()
        }
    }

    /// Same vocabulary and ontology, no facts, labels or truth.
    pub fn empty_like(&self) -> Self {
        KnowledgeGraph {
            vocab: self.vocab.clone(),
            ontology: self.ontology.clone(),
            ..Default::default()
        }
    }

    fn check_confidence(value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(Error::Data(format!("confidence {value} outside [0,1]")));
        }
        Ok(())
    }

    /// Adds a candidate fact, appending to the confidence list of an
    /// existing fact with the same key.
    pub fn add_fact(&mut self, triple: Triple, confidence: Confidence) -> Result<()> {
        Self::check_confidence(confidence.value)?;
        match self.fact_index.get(&triple) {
            Some(&i) => self.facts[i].confidences.push(confidence),
            None => {
                self.fact_index.insert(triple, self.facts.len());
                self.facts.push(CandidateFact {
                    triple,
                    confidences: vec![confidence],
                });
            }
        }
        Ok(())
    }

    pub fn add_label(
        &mut self,
        entity: EntityId,
        label: LabelId,
        confidence: Confidence,
    ) -> Result<()> {
        Self::check_confidence(confidence.value)?;
        match self.label_index.get(&(entity, label)) {
            Some(&i) => self.labels[i].confidences.push(confidence),
            None => {
                self.label_index.insert((entity, label), self.labels.len());
                self.labels.push(CandidateLabel {
                    entity,
                    label,
                    confidences: vec![confidence],
                });
            }
        }
        Ok(())
    }

    pub fn facts(&self) -> &[CandidateFact] {
        &self.facts
    }

    pub fn labels(&self) -> &[CandidateLabel] {
        &self.labels
    }

    pub fn fact(&self, triple: &Triple) -> Option<&CandidateFact> {
        self.fact_index.get(triple).map(|&i| &self.facts[i])
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.fact_index.contains_key(triple)
    }

    pub fn label(&self, entity: EntityId, label: LabelId) -> Option<&CandidateLabel> {
        self.label_index
            .get(&(entity, label))
            .map(|&i| &self.labels[i])
    }

    pub fn contains_label(&self, entity: EntityId, label: LabelId) -> bool {
        self.label_index.contains_key(&(entity, label))
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.vocab.relations.len()
    }

    pub fn num_labels(&self) -> usize {
        self.vocab.labels.len()
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.truth.as_ref()
    }

    pub fn set_truth(&mut self, truth: Truth) {
        self.truth = Some(truth);
    }

    pub fn label_truth(&self) -> Option<&BTreeMap<(EntityId, LabelId), bool>> {
        self.label_truth.as_ref()
    }

    pub fn set_label_truth(&mut self, truth: BTreeMap<(EntityId, LabelId), bool>) {
        self.label_truth = Some(truth);
    }

    pub fn noise_compat(&self) -> &BTreeMap<Triple, bool> {
        &self.noise_compat
    }

    pub fn set_noise_compat(&mut self, flags: BTreeMap<Triple, bool>) {
        self.noise_compat = flags;
    }

    /// Entity labels, closed upward under SUB.
    pub fn entity_types(&self) -> Result<HashMap<EntityId, BTreeSet<LabelId>>> {
        let mut out: HashMap<EntityId, BTreeSet<LabelId>> = HashMap::new();
        let mut ancestors: HashMap<LabelId, BTreeSet<LabelId>> = HashMap::new();
        for l in &self.labels {
            if let std::collections::hash_map::Entry::Vacant(slot) = ancestors.entry(l.label) {
                slot.insert(self.ontology.ancestors(l.label)?);
            }
            let set = out.entry(l.entity).or_default();
            set.insert(l.label);
            set.extend(ancestors[&l.label].iter().copied());
        }
        Ok(out)
    }

    /// Copy containing only the facts accepted by `keep`. Labels, ontology,
    /// and the matching truth entries are preserved.
    pub fn filter_facts(&self, mut keep: impl FnMut(&CandidateFact) -> bool) -> KnowledgeGraph {
        let mut out = self.empty_like();
        out.labels = self.labels.clone();
        out.label_index = self.label_index.clone();
        out.label_truth = self.label_truth.clone();
        for f in self.facts.iter().filter(|f| keep(f)) {
            out.fact_index.insert(f.triple, out.facts.len());
            out.facts.push(f.clone());
        }
        if let Some(t) = &self.truth {
            out.truth = Some(
                t.iter()
                    .filter(|(k, _)| out.fact_index.contains_key(k))
                    .map(|(k, v)| (*k, *v))
                    .collect(),
            );
        }
        out.noise_compat = self
            .noise_compat
            .iter()
            .filter(|(k, _)| out.fact_index.contains_key(k))
            .map(|(k, v)| (*k, *v))
            .collect();
        out
    }

    /// Checks that every id referenced by facts, labels and ontology is
    /// resolvable in the vocabulary.
    pub fn validate(&self) -> Result<()> {
        let ne = self.num_entities() as u32;
        let nr = self.num_relations() as u32;
        let nl = self.num_labels() as u32;
        let ent = |e: EntityId| {
            if e.0 < ne {
                Ok(())
            } else {
                Err(Error::Reference(format!("entity id {}", e.0)))
            }
        };
        let rel = |r: RelationId| {
            if r.0 < nr {
                Ok(())
            } else {
                Err(Error::Reference(format!("relation id {}", r.0)))
            }
        };
        let lab = |l: LabelId| {
            if l.0 < nl {
                Ok(())
            } else {
                Err(Error::Reference(format!("label id {}", l.0)))
            }
        };
        for f in &self.facts {
            ent(f.triple.subject)?;
            rel(f.triple.relation)?;
            ent(f.triple.object)?;
        }
        for l in &self.labels {
            ent(l.entity)?;
            lab(l.label)?;
        }
        let o = &self.ontology;
        for (r, l) in o.dom.iter().chain(o.rng.iter()) {
            rel(*r)?;
            lab(*l)?;
        }
        for (a, b) in o.sub.iter().chain(o.mutex.iter()) {
            lab(*a)?;
            lab(*b)?;
        }
        for (a, b) in o.rsub.iter().chain(o.rmutex.iter()).chain(o.inv.iter()) {
            rel(*a)?;
            rel(*b)?;
        }
        for (a, b) in o.sameent.keys() {
            ent(*a)?;
            ent(*b)?;
        }
        Ok(())
    }
}
