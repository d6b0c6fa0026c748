//! Lazy grounding of the rule templates.
//!
//! Grounding starts from the candidate and feedback atoms and follows the
//! positive-head templates to a fixpoint, so a rule is only instantiated when
//! its body touches an atom that is already part of the program. Rules with
//! negated heads (MUT, RMUT) never introduce atoms; they are grounded once
//! the atom set is closed, between existing atoms only. Every free atom then
//! receives a negative prior.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{AtomId, AtomKey, BodyTerm, GroundProgram, GroundRule, RuleWeights, Template};
use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph, LabelId, Ontology, RelationId, Triple};
use crate::pipeline::FeedbackEvidence;

fn symmetric<T: Ord + Copy + std::hash::Hash>(
    pairs: impl Iterator<Item = (T, T)>,
    both_ways: bool,
) -> HashMap<T, Vec<T>> {
    let mut set = BTreeSet::new();
    for (a, b) in pairs {
        set.insert((a, b));
        if both_ways {
            set.insert((b, a));
        }
    }
    let mut out: HashMap<T, Vec<T>> = HashMap::new();
    for (a, b) in set {
        out.entry(a).or_default().push(b);
    }
    out
}

struct Index<'a> {
    ontology: &'a Ontology,
    sameent: HashMap<EntityId, Vec<(EntityId, f64)>>,
    inv: HashMap<RelationId, Vec<RelationId>>,
    rsub: HashMap<RelationId, Vec<RelationId>>,
    rmut: HashMap<RelationId, Vec<RelationId>>,
    mutex: HashMap<LabelId, Vec<LabelId>>,
}

impl<'a> Index<'a> {
    fn new(o: &'a Ontology) -> Self {
        let mut sameent: HashMap<EntityId, Vec<(EntityId, f64)>> = HashMap::new();
        for (&(a, b), &s) in &o.sameent {
            sameent.entry(a).or_default().push((b, s));
            sameent.entry(b).or_default().push((a, s));
        }
        for v in sameent.values_mut() {
            v.sort_by_key(|&(e, _)| e);
        }
        Index {
            ontology: o,
            sameent,
            inv: symmetric(o.inv.iter().copied(), true),
            rsub: symmetric(o.rsub.iter().copied(), false),
            rmut: symmetric(o.rmutex.iter().copied(), true),
            mutex: symmetric(o.mutex.iter().copied(), true),
        }
    }
}

struct Grounder<'a> {
    program: GroundProgram,
    queue: VecDeque<AtomId>,
    weights: &'a RuleWeights,
}

impl Grounder<'_> {
    fn atom(&mut self, key: AtomKey) -> AtomId {
        let (id, fresh) = self.program.atoms.intern(key);
        if fresh {
            self.queue.push_back(id);
        }
        id
    }

    fn emit(
        &mut self,
        template: Template,
        body: Vec<BodyTerm>,
        head: AtomId,
        negated_head: bool,
        weight: f64,
    ) {
        if weight > 0.0 {
            self.program.rules.push(GroundRule {
                template,
                body,
                head,
                negated_head,
                weight,
            });
        }
    }

    /// `observed ∧ body ⇒ head`, creating the head atom.
    fn implication(
        &mut self,
        template: Template,
        observed: f64,
        body: AtomId,
        head: AtomKey,
        weight: f64,
    ) {
        if weight <= 0.0 {
            return;
        }
        let head = self.atom(head);
        self.emit(
            template,
            vec![BodyTerm::Observed(observed), BodyTerm::Free(body)],
            head,
            false,
            weight,
        );
    }

    fn expand(&mut self, id: AtomId, idx: &Index<'_>) {
        let w = self.weights;
        match self.program.atoms.key(id) {
            AtomKey::Rel(t) => {
                let Triple {
                    subject: e1,
                    relation: r,
                    object: e2,
                } = t;
                if let Some(peers) = idx.sameent.get(&e1) {
                    for &(x, s) in peers {
                        self.implication(
                            Template::SameEntitySubject,
                            s,
                            id,
                            AtomKey::Rel(Triple::new(x, r, e2)),
                            w.entity_resolution,
                        );
                    }
                }
                if let Some(peers) = idx.sameent.get(&e2) {
                    for &(x, s) in peers {
                        self.implication(
                            Template::SameEntityObject,
                            s,
                            id,
                            AtomKey::Rel(Triple::new(e1, r, x)),
                            w.entity_resolution,
                        );
                    }
                }
                if let Some(inverses) = idx.inv.get(&r) {
                    for &s in inverses {
                        self.implication(
                            Template::Inverse,
                            1.0,
                            id,
                            AtomKey::Rel(Triple::new(e2, s, e1)),
                            w.inverse,
                        );
                    }
                }
                if let Some(&l) = idx.ontology.dom.get(&r) {
                    self.implication(
                        Template::Domain,
                        1.0,
                        id,
                        AtomKey::Lbl(e1, l),
                        w.selectional_preference,
                    );
                }
                if let Some(&l) = idx.ontology.rng.get(&r) {
                    self.implication(
                        Template::Range,
                        1.0,
                        id,
                        AtomKey::Lbl(e2, l),
                        w.selectional_preference,
                    );
                }
                if let Some(supers) = idx.rsub.get(&r) {
                    for &s in supers {
                        self.implication(
                            Template::Subproperty,
                            1.0,
                            id,
                            AtomKey::Rel(Triple::new(e1, s, e2)),
                            w.subsumption,
                        );
                    }
                }
            }
            AtomKey::Lbl(e, l) => {
                if let Some(peers) = idx.sameent.get(&e) {
                    for &(x, s) in peers {
                        self.implication(
                            Template::SameEntityLbl,
                            s,
                            id,
                            AtomKey::Lbl(x, l),
                            w.entity_resolution,
                        );
                    }
                }
                let parents: Vec<LabelId> = idx.ontology.parents(l).collect();
                for p in parents {
                    self.implication(
                        Template::Subclass,
                        1.0,
                        id,
                        AtomKey::Lbl(e, p),
                        w.subsumption,
                    );
                }
            }
        }
    }

    fn exclusions(&mut self, idx: &Index<'_>) {
        let w = self.weights.mutual_exclusion;
        if w <= 0.0 {
            return;
        }
        for i in 0..self.program.atoms.len() {
            let id = AtomId(i as u32);
            let (template, partners): (Template, Vec<AtomKey>) = match self.program.atoms.key(id) {
                AtomKey::Rel(t) => (
                    Template::RelationExclusion,
                    idx.rmut
                        .get(&t.relation)
                        .into_iter()
                        .flatten()
                        .map(|&s| AtomKey::Rel(Triple::new(t.subject, s, t.object)))
                        .collect(),
                ),
                AtomKey::Lbl(e, l) => (
                    Template::MutualExclusion,
                    idx.mutex
                        .get(&l)
                        .into_iter()
                        .flatten()
                        .map(|&l2| AtomKey::Lbl(e, l2))
                        .collect(),
                ),
            };
            for key in partners {
                if let Some(head) = self.program.atoms.get(&key) {
                    self.emit(
                        template,
                        vec![BodyTerm::Observed(1.0), BodyTerm::Free(id)],
                        head,
                        true,
                        w,
                    );
                }
            }
        }
    }
}

/// Instantiates every rule template for `kg` (plus optional feedback
/// evidence, grounded as one more candidate source).
pub fn ground(
    kg: &KnowledgeGraph,
    weights: &RuleWeights,
    feedback: Option<&FeedbackEvidence>,
) -> Result<GroundProgram> {
    weights.validate()?;
    kg.validate()?;
    let idx = Index::new(&kg.ontology);
    let mut g = Grounder {
        program: GroundProgram::new(weights.hinge_power),
        queue: VecDeque::new(),
        weights,
    };

    for f in kg.facts() {
        let head = g.atom(AtomKey::Rel(f.triple));
        for c in &f.confidences {
            let w = weights.rel_source_weight(kg.vocab.source_name(c.source));
            g.emit(
                Template::CandidateRel,
                vec![BodyTerm::Observed(c.value)],
                head,
                false,
                w,
            );
        }
    }
    for l in kg.labels() {
        let head = g.atom(AtomKey::Lbl(l.entity, l.label));
        for c in &l.confidences {
            let w = weights.lbl_source_weight(kg.vocab.source_name(c.source));
            g.emit(
                Template::CandidateLbl,
                vec![BodyTerm::Observed(c.value)],
                head,
                false,
                w,
            );
        }
    }
    if let Some(fb) = feedback {
        for &(t, score) in fb.positive.iter().chain(fb.negative.iter()) {
            let head = g.atom(AtomKey::Rel(t));
            g.emit(
                Template::Feedback,
                vec![BodyTerm::Observed(score)],
                head,
                false,
                weights.feedback,
            );
        }
    }

    while let Some(id) = g.queue.pop_front() {
        g.expand(id, &idx);
    }
    g.exclusions(&idx);

    if weights.negative_prior > 0.0 {
        for i in 0..g.program.atoms.len() {
            g.program.rules.push(GroundRule {
                template: Template::NegativePrior,
                body: vec![BodyTerm::Observed(1.0)],
                head: AtomId(i as u32),
                negated_head: true,
                weight: weights.negative_prior,
            });
        }
    }
    Ok(g.program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Confidence, Vocab};

    #[test]
    fn minimal_grounding() {
        let mut v = Vocab::default();
        let t = Triple::new(v.entity("a"), v.relation("r"), v.entity("b"));
        let src = v.source("x");
        let mut kg = KnowledgeGraph::new(v);
        kg.add_fact(
            t,
            Confidence {
                source: src,
                value: 0.9,
            },
        )
        .unwrap();
        let p = ground(&kg, &RuleWeights::default(), None).unwrap();
        assert_eq!(p.atoms.len(), 1);
        assert_eq!(p.rules.len(), 2);
        assert_eq!(p.rules[0].template, Template::CandidateRel);
        assert_eq!(p.rules[1].template, Template::NegativePrior);
    }

    #[test]
    fn inverse_creates_reverse_atom() {
        let mut v = Vocab::default();
        let (a, b) = (v.entity("a"), v.entity("b"));
        let (r, s) = (v.relation("r"), v.relation("s"));
        let src = v.source("x");
        let mut kg = KnowledgeGraph::new(v);
        kg.add_fact(
            Triple::new(a, r, b),
            Confidence {
                source: src,
                value: 0.9,
            },
        )
        .unwrap();
        kg.ontology.inv.insert((r, s));
        let p = ground(&kg, &RuleWeights::default(), None).unwrap();
        let rev = p
            .atoms
            .get(&AtomKey::Rel(Triple::new(b, s, a)))
            .expect("inverse atom");
        assert!(p
            .rules
            .iter()
            .any(|rule| rule.template == Template::Inverse && rule.head == rev));
    }

    #[test]
    fn per_source_candidate_rules() {
        let mut v = Vocab::default();
        let t = Triple::new(v.entity("a"), v.relation("r"), v.entity("b"));
        let (x, y) = (v.source("x"), v.source("y"));
        let mut kg = KnowledgeGraph::new(v);
        kg.add_fact(
            t,
            Confidence {
                source: x,
                value: 0.9,
            },
        )
        .unwrap();
        kg.add_fact(
            t,
            Confidence {
                source: y,
                value: 0.2,
            },
        )
        .unwrap();
        let mut w = RuleWeights::default();
        w.candidate_rel_sources.insert("y".into(), 3.0);
        let p = ground(&kg, &w, None).unwrap();
        let cands: Vec<f64> = p
            .rules
            .iter()
            .filter(|r| r.template == Template::CandidateRel)
            .map(|r| r.weight)
            .collect();
        assert_eq!(cands, vec![1.0, 3.0]);
    }

    #[test]
    fn unknown_ontology_ids_are_reference_errors() {
        let mut v = Vocab::default();
        let t = Triple::new(v.entity("a"), v.relation("r"), v.entity("b"));
        let src = v.source("x");
        let mut kg = KnowledgeGraph::new(v);
        kg.add_fact(
            t,
            Confidence {
                source: src,
                value: 0.9,
            },
        )
        .unwrap();
        kg.ontology.dom.insert(RelationId(7), LabelId(0));
        assert!(matches!(
            ground(&kg, &RuleWeights::default(), None),
            Err(crate::Error::Reference(_))
        ));
    }
}
