//! Independent reference implementations shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kgrefine::embed::{Base, Block, EmbeddingModel, Mode, ModelConfig};
use kgrefine::kg::{
    Confidence, EntityId, EvalSet, KnowledgeGraph, LabelId, RelationId, Triple, Vocab,
};
use kgrefine::pipeline::FeedbackEvidence;
use kgrefine::psl::{
    AtomId, AtomKey, BodyKey, BodyTerm, GroundProgram, GroundRule, RuleKey, RuleWeights,
    SolverConfig, Template,
};
use kgrefine::util::rng_for;
use rand::Rng;

// ---------------------------------------------------------------------------
// Grid-search oracle for MAP inference
// ---------------------------------------------------------------------------

pub const GRID: usize = 101;

/// Weighted hinge energy of one rule, written out from the logic directly.
pub fn rule_energy(rule: &GroundRule, x: &dyn Fn(AtomId) -> f64, power: u8) -> f64 {
    let mut sum = 0.0;
    for t in &rule.body {
        sum += match *t {
            BodyTerm::Observed(v) => v,
            BodyTerm::Free(a) => x(a),
        };
    }
    let body = (sum - (rule.body.len() as f64 - 1.0)).max(0.0);
    let h = x(rule.head);
    let head = if rule.negated_head { 1.0 - h } else { h };
    let d = (body - head).max(0.0);
    rule.weight * if power == 2 { d * d } else { d }
}

pub fn energy(program: &GroundProgram, x: &[f64]) -> f64 {
    let get = |a: AtomId| x[a.0 as usize];
    program
        .rules
        .iter()
        .map(|r| rule_energy(r, &get, program.hinge_power))
        .sum()
}

fn rule_atoms(rule: &GroundRule) -> Vec<usize> {
    let mut s: BTreeSet<usize> = BTreeSet::new();
    s.insert(rule.head.0 as usize);
    for t in &rule.body {
        if let BodyTerm::Free(a) = t {
            s.insert(a.0 as usize);
        }
    }
    s.into_iter().collect()
}

struct Factor {
    scope: Vec<usize>,
    table: Vec<f64>,
}

fn grid_value(i: usize) -> f64 {
    i as f64 / (GRID - 1) as f64
}

fn decode(mut idx: usize, k: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(k) {
        *slot = idx % GRID;
        idx /= GRID;
    }
}

fn encode(digits: impl Iterator<Item = usize>) -> usize {
    let mut idx = 0;
    let mut mul = 1;
    for d in digits {
        idx += d * mul;
        mul *= GRID;
    }
    idx
}

/// Exact minimum of the program objective over the grid {0, 0.01, …, 1}ⁿ,
/// by min-sum bucket elimination. Panics if an intermediate factor would
/// span more than three atoms.
pub fn grid_optimum(program: &GroundProgram) -> f64 {
    let mut factors: Vec<Factor> = Vec::new();
    for rule in &program.rules {
        let scope = rule_atoms(rule);
        let k = scope.len();
        let mut table = vec![0.0; GRID.pow(k as u32)];
        let mut digits = vec![0; k];
        for (idx, cell) in table.iter_mut().enumerate() {
            decode(idx, k, &mut digits);
            let val = |a: AtomId| {
                let pos = scope.iter().position(|&s| s == a.0 as usize).unwrap();
                grid_value(digits[pos])
            };
            *cell = rule_energy(rule, &val, program.hinge_power);
        }
        factors.push(Factor { scope, table });
    }
    let mut remaining: BTreeSet<usize> = (0..program.atoms.len()).collect();
    while !remaining.is_empty() {
        // Eliminate the atom whose bucket spans the fewest atoms.
        let var = *remaining
            .iter()
            .min_by_key(|&&v| {
                let u: BTreeSet<usize> = factors
                    .iter()
                    .filter(|f| f.scope.contains(&v))
                    .flat_map(|f| f.scope.iter().copied())
                    .collect();
                (u.len(), v)
            })
            .unwrap();
        remaining.remove(&var);
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.scope.contains(&var));
        factors = rest;
        let union: Vec<usize> = bucket
            .iter()
            .flat_map(|f| f.scope.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if union.is_empty() {
            continue;
        }
        assert!(union.len() <= 3, "bucket spans {} atoms", union.len());
        let new_scope: Vec<usize> = union.iter().copied().filter(|&v| v != var).collect();
        let mut table = vec![f64::INFINITY; GRID.pow(new_scope.len() as u32)];
        let positions: Vec<Vec<usize>> = bucket
            .iter()
            .map(|f| {
                f.scope
                    .iter()
                    .map(|v| union.iter().position(|u| u == v).unwrap())
                    .collect()
            })
            .collect();
        let new_pos: Vec<usize> = new_scope
            .iter()
            .map(|v| union.iter().position(|u| u == v).unwrap())
            .collect();
        let mut digits = vec![0; union.len()];
        for idx in 0..GRID.pow(union.len() as u32) {
            decode(idx, union.len(), &mut digits);
            let mut total = 0.0;
            for (f, pos) in bucket.iter().zip(&positions) {
                total += f.table[encode(pos.iter().map(|&p| digits[p]))];
            }
            let target = encode(new_pos.iter().map(|&p| digits[p]));
            if total < table[target] {
                table[target] = total;
            }
        }
        factors.push(Factor {
            scope: new_scope,
            table,
        });
    }
    factors.iter().map(|f| f.table[0]).sum()
}

const UNARY: [Template; 4] = [
    Template::CandidateRel,
    Template::CandidateLbl,
    Template::Feedback,
    Template::NegativePrior,
];
const BINARY: [Template; 10] = [
    Template::SameEntityLbl,
    Template::SameEntitySubject,
    Template::SameEntityObject,
    Template::Inverse,
    Template::Domain,
    Template::Range,
    Template::Subclass,
    Template::Subproperty,
    Template::MutualExclusion,
    Template::RelationExclusion,
];

/// A random program over at most six atoms whose interaction graph is a
/// tree plus at most one extra edge, using every template shape.
pub fn random_program(seed: u64, hinge_power: u8) -> GroundProgram {
    let mut rng = rng_for(seed, "program");
    let n = rng.random_range(1..=6usize);
    let mut program = GroundProgram::new(hinge_power);
    for i in 0..n {
        program.atoms.intern(AtomKey::Rel(Triple::new(
            EntityId(i as u32),
            RelationId(0),
            EntityId(0),
        )));
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i, rng.random_range(0..i))).collect();
    if n >= 3 && rng.random_bool(0.5) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
            edges.push((a, b));
        }
    }
    for a in 0..n {
        for _ in 0..rng.random_range(1..=2) {
            let template = UNARY[rng.random_range(0..UNARY.len())];
            let negated = template == Template::NegativePrior;
            let body = if negated {
                1.0
            } else {
                rng.random_range(0.0..1.0)
            };
            let w = rng.random_range(0.1..2.0);
            program.rules.push(GroundRule {
                template,
                body: vec![BodyTerm::Observed(body)],
                head: AtomId(a as u32),
                negated_head: negated,
                weight: w,
            });
        }
    }
    for &(a, b) in &edges {
        for _ in 0..rng.random_range(1..=2) {
            let template = BINARY[rng.random_range(0..BINARY.len())];
            let negated = matches!(
                template,
                Template::MutualExclusion | Template::RelationExclusion
            );
            let (body, head) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let observed = if rng.random_bool(0.7) {
                1.0
            } else {
                rng.random_range(0.0..1.0)
            };
            let w = rng.random_range(0.1..2.0);
            program.rules.push(GroundRule {
                template,
                body: vec![
                    BodyTerm::Observed(observed),
                    BodyTerm::Free(AtomId(body as u32)),
                ],
                head: AtomId(head as u32),
                negated_head: negated,
                weight: w,
            });
        }
    }
    program.solver = SolverConfig::default();
    program
}

// ---------------------------------------------------------------------------
// Naive grounder
// ---------------------------------------------------------------------------

/// A toy graph of five facts whose ontology triggers all twelve templates.
pub fn toy_kg() -> KnowledgeGraph {
    let mut v = Vocab::default();
    let (a, b, c, d) = (v.entity("a"), v.entity("b"), v.entity("c"), v.entity("d"));
    let (r, s, t, u) = (
        v.relation("r"),
        v.relation("s"),
        v.relation("t"),
        v.relation("u"),
    );
    let (l1, l2, p) = (v.label("L1"), v.label("L2"), v.label("P"));
    let (x, y) = (v.source("X"), v.source("Y"));
    let mut kg = KnowledgeGraph::new(v);
    let conf = |source, value| Confidence { source, value };
    kg.add_fact(Triple::new(a, r, b), conf(x, 0.9)).unwrap();
    kg.add_fact(Triple::new(a, r, b), conf(y, 0.6)).unwrap();
    kg.add_fact(Triple::new(b, s, c), conf(x, 0.7)).unwrap();
    kg.add_fact(Triple::new(a, u, b), conf(x, 0.4)).unwrap();
    kg.add_fact(Triple::new(c, r, d), conf(y, 0.8)).unwrap();
    kg.add_fact(Triple::new(d, t, a), conf(x, 0.5)).unwrap();
    kg.add_label(a, l1, conf(x, 0.9)).unwrap();
    kg.add_label(c, l2, conf(y, 0.3)).unwrap();
    let o = &mut kg.ontology;
    o.dom.insert(r, l1);
    o.rng.insert(r, l2);
    o.add_sub(l1, p).unwrap();
    o.add_sub(l2, p).unwrap();
    o.add_mutex(l1, l2).unwrap();
    o.inv.insert((r, s));
    o.rsub.insert((r, t));
    o.add_rmutex(t, u).unwrap();
    o.add_sameent(a, c, 0.8).unwrap();
    kg
}

/// Distinct positive weights so a rule filed under the wrong template
/// cannot match.
pub fn distinct_weights() -> RuleWeights {
    RuleWeights {
        candidate_rel: 1.1,
        candidate_lbl: 1.2,
        entity_resolution: 1.3,
        inverse: 1.4,
        selectional_preference: 1.5,
        subsumption: 1.6,
        mutual_exclusion: 1.7,
        feedback: 1.8,
        negative_prior: 0.05,
        candidate_rel_sources: [("Y".to_owned(), 0.9)].into_iter().collect(),
        ..Default::default()
    }
}

/// One rule instance over atom keys: (template, observed, body atom, head,
/// negated, weight).
type Instance = (Template, f64, AtomKey, AtomKey, bool, f64);

/// Every instance of the ten ontology templates over the full Herbrand base
/// of `kg`, without regard to which atoms exist.
fn herbrand_instances(kg: &KnowledgeGraph, w: &RuleWeights) -> Vec<Instance> {
    let ents: Vec<EntityId> = (0..kg.num_entities() as u32).map(EntityId).collect();
    let rels: Vec<RelationId> = (0..kg.num_relations() as u32).map(RelationId).collect();
    let lbls: Vec<LabelId> = (0..kg.num_labels() as u32).map(LabelId).collect();
    let o = &kg.ontology;
    let same = |x: EntityId, y: EntityId| -> Option<f64> {
        if x == y {
            return None;
        }
        o.sameent
            .get(&(x, y))
            .or_else(|| o.sameent.get(&(y, x)))
            .copied()
    };
    let sym = |set: &BTreeSet<(RelationId, RelationId)>, r1: RelationId, r2: RelationId| {
        set.contains(&(r1, r2)) || set.contains(&(r2, r1))
    };
    let lsym = |set: &BTreeSet<(LabelId, LabelId)>, l1: LabelId, l2: LabelId| {
        set.contains(&(l1, l2)) || set.contains(&(l2, l1))
    };
    let rel = |e1, r, e2| AtomKey::Rel(Triple::new(e1, r, e2));
    let mut out = Vec::new();
    for &e1 in &ents {
        for &e2 in &ents {
            for &r in &rels {
                for &x in &ents {
                    if let Some(s) = same(e1, x) {
                        out.push((
                            Template::SameEntitySubject,
                            s,
                            rel(e1, r, e2),
                            rel(x, r, e2),
                            false,
                            w.entity_resolution,
                        ));
                    }
                    if let Some(s) = same(e2, x) {
                        out.push((
                            Template::SameEntityObject,
                            s,
                            rel(e1, r, e2),
                            rel(e1, r, x),
                            false,
                            w.entity_resolution,
                        ));
                    }
                }
                for &s in &rels {
                    if sym(&o.inv, r, s) {
                        out.push((
                            Template::Inverse,
                            1.0,
                            rel(e1, r, e2),
                            rel(e2, s, e1),
                            false,
                            w.inverse,
                        ));
                    }
                    if o.rsub.contains(&(r, s)) {
                        out.push((
                            Template::Subproperty,
                            1.0,
                            rel(e1, r, e2),
                            rel(e1, s, e2),
                            false,
                            w.subsumption,
                        ));
                    }
                    if sym(&o.rmutex, r, s) && r != s {
                        out.push((
                            Template::RelationExclusion,
                            1.0,
                            rel(e1, r, e2),
                            rel(e1, s, e2),
                            true,
                            w.mutual_exclusion,
                        ));
                    }
                }
                for &l in &lbls {
                    if o.dom.get(&r) == Some(&l) {
                        out.push((
                            Template::Domain,
                            1.0,
                            rel(e1, r, e2),
                            AtomKey::Lbl(e1, l),
                            false,
                            w.selectional_preference,
                        ));
                    }
                    if o.rng.get(&r) == Some(&l) {
                        out.push((
                            Template::Range,
                            1.0,
                            rel(e1, r, e2),
                            AtomKey::Lbl(e2, l),
                            false,
                            w.selectional_preference,
                        ));
                    }
                }
            }
        }
        for &l in &lbls {
            for &x in &ents {
                if let Some(s) = same(e1, x) {
                    out.push((
                        Template::SameEntityLbl,
                        s,
                        AtomKey::Lbl(e1, l),
                        AtomKey::Lbl(x, l),
                        false,
                        w.entity_resolution,
                    ));
                }
            }
            for &l2 in &lbls {
                if o.sub.contains(&(l, l2)) {
                    out.push((
                        Template::Subclass,
                        1.0,
                        AtomKey::Lbl(e1, l),
                        AtomKey::Lbl(e1, l2),
                        false,
                        w.subsumption,
                    ));
                }
                if lsym(&o.mutex, l, l2) && l != l2 {
                    out.push((
                        Template::MutualExclusion,
                        1.0,
                        AtomKey::Lbl(e1, l),
                        AtomKey::Lbl(e1, l2),
                        true,
                        w.mutual_exclusion,
                    ));
                }
            }
        }
    }
    out
}

/// Full enumeration: every Herbrand instance with positive weight, kept
/// when all its atoms are reachable from the evidence through positive-head
/// rules of positive weight.
pub fn naive_ground(
    kg: &KnowledgeGraph,
    w: &RuleWeights,
    feedback: Option<&FeedbackEvidence>,
) -> Vec<RuleKey> {
    let instances = herbrand_instances(kg, w);
    let mut reachable: BTreeSet<AtomKey> = BTreeSet::new();
    for f in kg.facts() {
        reachable.insert(AtomKey::Rel(f.triple));
    }
    for l in kg.labels() {
        reachable.insert(AtomKey::Lbl(l.entity, l.label));
    }
    if let Some(fb) = feedback {
        for (t, _) in fb.positive.iter().chain(&fb.negative) {
            reachable.insert(AtomKey::Rel(*t));
        }
    }
    loop {
        let before = reachable.len();
        for (_, _, body, head, negated, weight) in &instances {
            if !negated && *weight > 0.0 && reachable.contains(body) {
                reachable.insert(*head);
            }
        }
        if reachable.len() == before {
            break;
        }
    }

    let key = |template, body: Vec<BodyKey>, head, negated_head, weight: f64| RuleKey {
        template,
        body,
        head,
        negated_head,
        weight_bits: weight.to_bits(),
    };
    let mut rules = Vec::new();
    for f in kg.facts() {
        for c in &f.confidences {
            let wt = w.rel_source_weight(kg.vocab.source_name(c.source));
            rules.push(key(
                Template::CandidateRel,
                vec![BodyKey::Observed(c.value.to_bits())],
                AtomKey::Rel(f.triple),
                false,
                wt,
            ));
        }
    }
    for l in kg.labels() {
        for c in &l.confidences {
            let wt = w.lbl_source_weight(kg.vocab.source_name(c.source));
            rules.push(key(
                Template::CandidateLbl,
                vec![BodyKey::Observed(c.value.to_bits())],
                AtomKey::Lbl(l.entity, l.label),
                false,
                wt,
            ));
        }
    }
    if let Some(fb) = feedback {
        for (t, s) in fb.positive.iter().chain(&fb.negative) {
            rules.push(key(
                Template::Feedback,
                vec![BodyKey::Observed(s.to_bits())],
                AtomKey::Rel(*t),
                false,
                w.feedback,
            ));
        }
    }
    for (template, observed, body, head, negated, weight) in instances {
        if reachable.contains(&body) && reachable.contains(&head) {
            rules.push(key(
                template,
                vec![BodyKey::Observed(observed.to_bits()), BodyKey::Atom(body)],
                head,
                negated,
                weight,
            ));
        }
    }
    for a in &reachable {
        rules.push(key(
            Template::NegativePrior,
            vec![BodyKey::Observed(1.0f64.to_bits())],
            *a,
            true,
            w.negative_prior,
        ));
    }
    rules.retain(|k| f64::from_bits(k.weight_bits) > 0.0);
    rules.sort();
    rules
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Weighted F1 from a confusion matrix assembled item by item.
pub fn reference_wf1(pairs: &[(bool, bool)]) -> (f64, f64, f64) {
    let mut m = [[0usize; 2]; 2]; // m[gold][pred]
    for &(pred, gold) in pairs {
        m[gold as usize][pred as usize] += 1;
    }
    let f1 = |class: usize| {
        let tp = m[class][class] as f64;
        let predicted = (m[0][class] + m[1][class]) as f64;
        let actual = (m[class][0] + m[class][1]) as f64;
        if tp == 0.0 {
            return 0.0;
        }
        let (p, r) = (tp / predicted, tp / actual);
        2.0 * p * r / (p + r)
    };
    let n = pairs.len() as f64;
    let w1 = (m[1][0] + m[1][1]) as f64 / n;
    let (pos, neg) = (f1(1), f1(0));
    (pos, neg, w1 * pos + (1.0 - w1) * neg)
}

// ---------------------------------------------------------------------------
// Embedding models
// ---------------------------------------------------------------------------

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn t(s: u32, r: u32, o: u32) -> Triple {
    Triple::new(EntityId(s), RelationId(r), EntityId(o))
}

/// A small model with every active block filled uniformly in ±`scale`.
/// Entity 3 has no type.
pub fn random_model(base: Base, mode: Mode, seed: u64, scale: f64) -> EmbeddingModel {
    let config = ModelConfig {
        base,
        mode,
        dim: 4,
        type_dim: 3,
        label_dim: 3,
        l2_reg: 0.01,
        ..Default::default()
    };
    let types: BTreeMap<_, _> = [
        (EntityId(0), LabelId(0)),
        (EntityId(1), LabelId(1)),
        (EntityId(2), LabelId(0)),
    ]
    .into_iter()
    .collect();
    let mut m =
        EmbeddingModel::new(config, names("e", 4), names("r", 2), names("l", 2), &types).unwrap();
    let mut rng = rng_for(seed, "fd");
    for b in Block::ALL {
        for v in m.block_mut(b) {
            *v = rng.random_range(-scale..scale);
        }
    }
    m
}

/// Five labelled triples, including a self-loop and a subject/object pair
/// sharing a type row.
pub fn five_samples() -> Vec<(Triple, f64)> {
    vec![
        (t(0, 0, 1), 1.0),
        (t(1, 1, 2), 1.0),
        (t(2, 0, 3), 0.0),
        (t(3, 1, 3), 1.0),
        (t(0, 1, 2), 0.0),
    ]
}

pub const FD_EPS: f64 = 1e-4;

/// Per active block: ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖),
/// with central differences of the full loss.
pub fn block_gradient_errors(m: &EmbeddingModel, data: &[(Triple, f64)]) -> Vec<(Block, f64)> {
    let (_, grad) = m.loss_and_gradient(data);
    let mut out = Vec::new();
    for b in Block::ALL {
        let (rows, cols) = m.shape(b);
        if cols == 0 {
            continue;
        }
        let (mut diff, mut norm_a, mut norm_n) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..rows {
            for j in 0..cols {
                let mut plus = m.clone();
                plus.row_mut(b, i as u32)[j] += FD_EPS;
                let mut minus = m.clone();
                minus.row_mut(b, i as u32)[j] -= FD_EPS;
                let numeric = (plus.loss(data) - minus.loss(data)) / (2.0 * FD_EPS);
                let analytic = grad.get(b, i as u32, j);
                diff += (analytic - numeric).powi(2);
                norm_a += analytic * analytic;
                norm_n += numeric * numeric;
            }
        }
        out.push((b, diff.sqrt() / norm_a.sqrt().max(norm_n.sqrt()).max(1e-12)));
    }
    out
}

/// Base score from complex arithmetic: Re(Σ s · r · conj(o)).
pub fn reference_complex(m: &EmbeddingModel, tr: &Triple) -> f64 {
    let (s, r, o) = (tr.subject.0, tr.relation.0, tr.object.0);
    let (sr, si) = (m.row(Block::EntityRe, s), m.row(Block::EntityIm, s));
    let (rr, ri) = (m.row(Block::RelationRe, r), m.row(Block::RelationIm, r));
    let (or, oi) = (m.row(Block::EntityRe, o), m.row(Block::EntityIm, o));
    let mut total = 0.0;
    for k in 0..sr.len() {
        // (s·r) then times conj(o)
        let (pr, pi) = (sr[k] * rr[k] - si[k] * ri[k], sr[k] * ri[k] + si[k] * rr[k]);
        total += pr * or[k] + pi * oi[k];
    }
    total
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// E[clamp(X, lo, hi)] for X ~ N(mean, std), by composite Simpson
/// integration of the clamped value against the normal density.
pub fn clamped_gaussian_mean(mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = (mean - 12.0 * std, mean + 12.0 * std);
    let n = 200_000;
    let h = (b - a) / n as f64;
    let pdf = |x: f64| {
        (-(x - mean).powi(2) / (2.0 * std * std)).exp()
            / (std * (2.0 * std::f64::consts::PI).sqrt())
    };
    let f = |x: f64| x.clamp(lo, hi) * pdf(x);
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// A clean graph of `n` relation facts plus 400 type labels over two
/// disjoint typed entity pools, with DOM/RNG on every relation so both
/// compatible and incompatible corruptions are available.
pub fn typed_graph(n: usize) -> KnowledgeGraph {
    let mut v = Vocab::default();
    let (person, city) = (v.label("Person"), v.label("City"));
    let src = v.source("input");
    let people: Vec<EntityId> = (0..200).map(|i| v.entity(&format!("p{i}"))).collect();
    let cities: Vec<EntityId> = (0..200).map(|i| v.entity(&format!("c{i}"))).collect();
    let rels: Vec<RelationId> = (0..5).map(|i| v.relation(&format!("livesIn{i}"))).collect();
    let mut kg = KnowledgeGraph::new(v);
    for &r in &rels {
        kg.ontology.dom.insert(r, person);
        kg.ontology.rng.insert(r, city);
    }
    let one = Confidence {
        source: src,
        value: 1.0,
    };
    for &p in &people {
        kg.add_label(p, person, one).unwrap();
    }
    for &c in &cities {
        kg.add_label(c, city, one).unwrap();
    }
    assert!(n <= 5 * 200 * 200);
    for i in 0..n {
        let t = Triple::new(people[(i / 5) % 200], rels[i % 5], cities[(i / 1000) % 200]);
        kg.add_fact(t, one).unwrap();
    }
    kg
}

pub fn eval_set(pairs: impl IntoIterator<Item = (Triple, bool)>) -> EvalSet {
    EvalSet {
        items: pairs.into_iter().collect(),
    }
}
