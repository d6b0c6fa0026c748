//! Hinge-loss soft-logic engine over the fixed ontology rule templates.
//!
//! Ground rules use Łukasiewicz semantics: a body of values v₁…vₙ has truth
//! `max(0, Σvᵢ − (n−1))` and a rule `body ⇒ head` is violated by
//! `max(0, body − head)`, where a negated head contributes `1 − value`.
//! MAP inference minimises the weighted sum of violations (optionally
//! squared) over free atom values in [0,1].

mod ground;
mod solver;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, LabelId, Triple};
use crate::pipeline::FeedbackEvidence;

pub use ground::ground;
pub use solver::{map_inference, SolverConfig, SolverMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomKey {
    Rel(Triple),
    Lbl(EntityId, LabelId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

/// Free REL/LBL atoms referenced by a program; each key appears once.
#[derive(Clone, Debug, Default)]
pub struct AtomStore {
    keys: Vec<AtomKey>,
    index: HashMap<AtomKey, AtomId>,
}

impl AtomStore {
    /// Returns the atom id and whether it was newly created.
    pub fn intern(&mut self, key: AtomKey) -> (AtomId, bool) {
        if let Some(&id) = self.index.get(&key) {
            return (id, false);
        }
        let id = AtomId(self.keys.len() as u32);
        self.keys.push(key);
        self.index.insert(key, id);
        (id, true)
    }

    pub fn get(&self, key: &AtomKey) -> Option<AtomId> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: AtomId) -> AtomKey {
        self.keys[id.0 as usize]
    }

    pub fn keys(&self) -> &[AtomKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Rule template a ground rule was instantiated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    /// CANDREL_T(E1,E2,R) ⇒ REL(E1,E2,R)
    CandidateRel,
    /// CANDLBL_T(E,L) ⇒ LBL(E,L)
    CandidateLbl,
    /// SAMEENT(E1,E2) ∧ LBL(E1,L) ⇒ LBL(E2,L)
    SameEntityLbl,
    /// SAMEENT(E1,E2) ∧ REL(E1,E,R) ⇒ REL(E2,E,R)
    SameEntitySubject,
    /// SAMEENT(E1,E2) ∧ REL(E,E1,R) ⇒ REL(E,E2,R)
    SameEntityObject,
    /// INV(R,S) ∧ REL(E1,E2,R) ⇒ REL(E2,E1,S)
    Inverse,
    /// DOM(R,L) ∧ REL(E1,E2,R) ⇒ LBL(E1,L)
    Domain,
    /// RNG(R,L) ∧ REL(E1,E2,R) ⇒ LBL(E2,L)
    Range,
    /// SUB(L,P) ∧ LBL(E,L) ⇒ LBL(E,P)
    Subclass,
    /// RSUB(R,S) ∧ REL(E1,E2,R) ⇒ REL(E1,E2,S)
    Subproperty,
    /// MUT(L1,L2) ∧ LBL(E,L1) ⇒ ¬LBL(E,L2)
    MutualExclusion,
    /// RMUT(R,S) ∧ REL(E1,E2,R) ⇒ ¬REL(E1,E2,S)
    RelationExclusion,
    /// Feedback evidence, grounded like an extra candidate source.
    Feedback,
    /// 1 ⇒ ¬atom
    NegativePrior,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodyTerm {
    Observed(f64),
    Free(AtomId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundRule {
    pub template: Template,
    pub body: Vec<BodyTerm>,
    pub head: AtomId,
    pub negated_head: bool,
    pub weight: f64,
}

/// Łukasiewicz conjunction `max(0, Σv − (n−1))`.
///
/// Panics on an empty body.
pub fn lukasiewicz_body(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "rule body must be non-empty");
    let sum: f64 = values.iter().sum();
    (sum - (values.len() as f64 - 1.0)).max(0.0)
}

impl GroundRule {
    fn body_values(&self, assignment: &[f64]) -> Vec<f64> {
        self.body
            .iter()
            .map(|t| match *t {
                BodyTerm::Observed(v) => v,
                BodyTerm::Free(a) => assignment[a.0 as usize],
            })
            .collect()
    }

    /// Distance to satisfaction under `assignment` (indexed by atom id).
    pub fn hinge_distance(&self, assignment: &[f64]) -> f64 {
        let body = lukasiewicz_body(&self.body_values(assignment));
        let v = assignment[self.head.0 as usize];
        let head = if self.negated_head { 1.0 - v } else { v };
        (body - head).max(0.0)
    }

    /// `Σ cᵢ xᵢ + constant` such that the distance equals `max(0, ·)` for
    /// every assignment in [0,1]ⁿ. Repeated atoms are merged and zero
    /// coefficients dropped.
    pub(crate) fn linear_form(&self) -> (Vec<(u32, f64)>, f64) {
        let mut coef: BTreeMap<u32, f64> = BTreeMap::new();
        let mut constant = -(self.body.len() as f64 - 1.0);
        for t in &self.body {
            match *t {
                BodyTerm::Observed(v) => constant += v,
                BodyTerm::Free(a) => *coef.entry(a.0).or_default() += 1.0,
            }
        }
        if self.negated_head {
            *coef.entry(self.head.0).or_default() += 1.0;
            constant -= 1.0;
        } else {
            *coef.entry(self.head.0).or_default() -= 1.0;
        }
        (
            coef.into_iter().filter(|&(_, c)| c != 0.0).collect(),
            constant,
        )
    }
}

/// Rule weights. Candidate weights can be set per source name; anything not
/// listed uses the default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleWeights {
    pub candidate_rel: f64,
    pub candidate_lbl: f64,
    pub candidate_rel_sources: BTreeMap<String, f64>,
    pub candidate_lbl_sources: BTreeMap<String, f64>,
    pub entity_resolution: f64,
    pub inverse: f64,
    pub selectional_preference: f64,
    pub subsumption: f64,
    pub mutual_exclusion: f64,
    pub feedback: f64,
    pub negative_prior: f64,
    pub hinge_power: u8,
}

impl Default for RuleWeights {
    fn default() -> Self {
        RuleWeights {
            candidate_rel: 1.0,
            candidate_lbl: 1.0,
            candidate_rel_sources: BTreeMap::new(),
            candidate_lbl_sources: BTreeMap::new(),
            entity_resolution: 1.0,
            inverse: 1.0,
            selectional_preference: 1.0,
            subsumption: 1.0,
            mutual_exclusion: 1.0,
            feedback: 1.0,
            negative_prior: 0.05,
            hinge_power: 1,
        }
    }
}

impl RuleWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("candidate_rel", self.candidate_rel),
            ("candidate_lbl", self.candidate_lbl),
            ("entity_resolution", self.entity_resolution),
            ("inverse", self.inverse),
            ("selectional_preference", self.selectional_preference),
            ("subsumption", self.subsumption),
            ("mutual_exclusion", self.mutual_exclusion),
            ("feedback", self.feedback),
            ("negative_prior", self.negative_prior),
        ];
        let per_source = self
            .candidate_rel_sources
            .iter()
            .chain(self.candidate_lbl_sources.iter())
            .map(|(k, v)| (k.as_str(), *v));
        for (name, w) in named.into_iter().chain(per_source) {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!(
                    "weight {name} must be finite and >= 0, got {w}"
                )));
            }
        }
        if !matches!(self.hinge_power, 1 | 2) {
            return Err(Error::Config(format!(
                "hinge_power must be 1 or 2, got {}",
                self.hinge_power
            )));
        }
        Ok(())
    }

    pub fn rel_source_weight(&self, source: &str) -> f64 {
        self.candidate_rel_sources
            .get(source)
            .copied()
            .unwrap_or(self.candidate_rel)
    }

    pub fn lbl_source_weight(&self, source: &str) -> f64 {
        self.candidate_lbl_sources
            .get(source)
            .copied()
            .unwrap_or(self.candidate_lbl)
    }
}

#[derive(Clone, Debug)]
pub struct GroundProgram {
    pub atoms: AtomStore,
    pub rules: Vec<GroundRule>,
    pub hinge_power: u8,
    pub solver: SolverConfig,
}

impl GroundProgram {
    pub fn new(hinge_power: u8) -> Self {
        GroundProgram {
            atoms: AtomStore::default(),
            rules: Vec::new(),
            hinge_power,
            solver: SolverConfig::default(),
        }
    }

    /// Weighted sum of (powered) distances at `assignment`.
    pub fn objective(&self, assignment: &[f64]) -> f64 {
        let p = i32::from(self.hinge_power);
        self.rules
            .iter()
            .map(|r| r.weight * r.hinge_distance(assignment).powi(p))
            .sum()
    }

    /// A subgradient of the objective at `assignment` (the gradient when the
    /// hinge power is 2).
    pub fn subgradient(&self, assignment: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; assignment.len()];
        for r in &self.rules {
            let (vars, c) = r.linear_form();
            let lin: f64 = c + vars
                .iter()
                .map(|&(i, a)| a * assignment[i as usize])
                .sum::<f64>();
            if lin <= 0.0 {
                continue;
            }
            let scale = if self.hinge_power == 2 {
                2.0 * r.weight * lin
            } else {
                r.weight
            };
            for (i, a) in vars {
                g[i as usize] += scale * a;
            }
        }
        g
    }

    /// Canonical, order-independent description of every ground rule.
    pub fn rule_keys(&self) -> Vec<RuleKey> {
        let mut keys: Vec<RuleKey> = self
            .rules
            .iter()
            .map(|r| RuleKey {
                template: r.template,
                body: r
                    .body
                    .iter()
                    .map(|t| match *t {
                        BodyTerm::Observed(v) => BodyKey::Observed(v.to_bits()),
                        BodyTerm::Free(a) => BodyKey::Atom(self.atoms.key(a)),
                    })
                    .collect(),
                head: self.atoms.key(r.head),
                negated_head: r.negated_head,
                weight_bits: r.weight.to_bits(),
            })
            .collect();
        keys.sort();
        keys
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BodyKey {
    Observed(u64),
    Atom(AtomKey),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleKey {
    pub template: Template,
    pub body: Vec<BodyKey>,
    pub head: AtomKey,
    pub negated_head: bool,
    pub weight_bits: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InferenceResult {
    pub rel_scores: BTreeMap<Triple, f64>,
    pub lbl_scores: BTreeMap<(EntityId, LabelId), f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Best objective seen after each solver iteration.
    pub trace: Vec<f64>,
}

impl InferenceResult {
    pub fn rel_score(&self, t: &Triple) -> Option<f64> {
        self.rel_scores.get(t).copied()
    }
}

/// Grounds the program for `kg` and solves for its MAP state.
pub fn infer(
    kg: &KnowledgeGraph,
    weights: &RuleWeights,
    feedback: Option<&FeedbackEvidence>,
    solver: &SolverConfig,
) -> Result<InferenceResult> {
    let mut program = ground(kg, weights, feedback)?;
    program.solver = solver.clone();
    map_inference(&program)
}
