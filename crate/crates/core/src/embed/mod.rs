//! Embedding models for triple classification.
//!
//! A ComplEx or DistMult base score `Y(s, r, o)` is squashed with a sigmoid
//! and, in the gated modes, multiplied by a subject gate and an object gate.
//! Implicit gates use learned per-entity type vectors against per-relation
//! head/tail vectors; explicit (TypeE) gates add a type-label row against
//! per-relation domain/range vectors.

mod checkpoint;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, EvalSet, KnowledgeGraph, LabelId, Triple, Vocab};
use crate::util::{rng_for, sigmoid};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub const BCE_EPS: f64 = 1e-7;
const ADAGRAD_EPS: f64 = 1e-8;
const INIT_SCALE: f64 = 0.05;
const MAX_RESAMPLE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    Complex,
    Distmult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Plain,
    ImplicitTyped,
    Typee,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub base: Base,
    pub mode: Mode,
    pub dim: usize,
    pub type_dim: usize,
    pub label_dim: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            base: Base::Complex,
            mode: Mode::Typee,
            dim: 100,
            type_dim: 20,
            label_dim: 20,
            negatives: 5,
            learning_rate: 0.05,
            l2_reg: 1e-4,
            epochs: 100,
            batch_size: 512,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.mode != Mode::Plain && self.type_dim == 0 {
            return bad("type_dim must be >= 1 for gated modes");
        }
        if self.mode == Mode::Typee && self.label_dim == 0 {
            return bad("label_dim must be >= 1 for typee mode");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad("l2_reg must be finite and >= 0");
        }
        Ok(())
    }
}

/// Parameter blocks of a model. Blocks a configuration does not use have
/// zero columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    EntityRe,
    EntityIm,
    RelationRe,
    RelationIm,
    EntityType,
    RelationHead,
    RelationTail,
    Label,
    RelationDomain,
    RelationRange,
}

impl Block {
    pub const ALL: [Block; 10] = [
        Block::EntityRe,
        Block::EntityIm,
        Block::RelationRe,
        Block::RelationIm,
        Block::EntityType,
        Block::RelationHead,
        Block::RelationTail,
        Block::Label,
        Block::RelationDomain,
        Block::RelationRange,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Block> {
        Block::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::EntityRe => "entity_re",
            Block::EntityIm => "entity_im",
            Block::RelationRe => "relation_re",
            Block::RelationIm => "relation_im",
            Block::EntityType => "entity_type",
            Block::RelationHead => "relation_head",
            Block::RelationTail => "relation_tail",
            Block::Label => "label",
            Block::RelationDomain => "relation_domain",
            Block::RelationRange => "relation_range",
        }
    }
}

/// Sparse gradient: one dense row per touched `(block, row)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradient {
    pub rows: BTreeMap<(Block, u32), Vec<f64>>,
}

impl Gradient {
    fn add(
        &mut self,
        block: Block,
        row: u32,
        scale: f64,
        v: impl Iterator<Item = f64>,
        cols: usize,
    ) {
        let g = self
            .rows
            .entry((block, row))
            .or_insert_with(|| vec![0.0; cols]);
        for (gi, vi) in g.iter_mut().zip(v) {
            *gi += scale * vi;
        }
    }

    pub fn get(&self, block: Block, row: u32, col: usize) -> f64 {
        self.rows.get(&(block, row)).map_or(0.0, |r| r[col])
    }
}

/// Positive training triples and the index used to filter negatives.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub positives: Vec<Triple>,
    pub known: HashSet<Triple>,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub labels: Vec<String>,
}

impl TrainingSet {
    pub fn new(vocab: &Vocab, positives: impl IntoIterator<Item = Triple>) -> Result<Self> {
        let mut set = TrainingSet {
            entities: vocab.entities.names().to_vec(),
            relations: vocab.relations.names().to_vec(),
            labels: vocab.labels.names().to_vec(),
            ..Default::default()
        };
        for t in positives {
            if t.subject.index() >= set.entities.len()
                || t.object.index() >= set.entities.len()
                || t.relation.index() >= set.relations.len()
            {
                return Err(Error::Reference(format!(
                    "training triple {t:?} outside the vocabulary"
                )));
            }
            if set.known.insert(t) {
                set.positives.push(t);
            }
        }
        Ok(set)
    }

    pub fn from_kg(kg: &KnowledgeGraph) -> Result<Self> {
        TrainingSet::new(&kg.vocab, kg.facts().iter().map(|f| f.triple))
    }

    /// Facts of `kg` except the held-out evaluation triples.
    pub fn from_kg_excluding(kg: &KnowledgeGraph, held_out: &[&EvalSet]) -> Result<Self> {
        let skip: HashSet<Triple> = held_out.iter().flat_map(|s| s.triples()).collect();
        TrainingSet::new(
            &kg.vocab,
            kg.facts()
                .iter()
                .map(|f| f.triple)
                .filter(|t| !skip.contains(t)),
        )
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Copy, Debug)]
struct Forward {
    sy: f64,
    gs: f64,
    go: f64,
    f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub config: ModelConfig,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub labels: Vec<String>,
    /// Row of the label table used by each entity; `labels.len()` is UNK.
    types: Vec<u32>,
    blocks: Vec<Vec<f64>>,
}

fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl EmbeddingModel {
    /// A zero-initialised model.
    pub fn new(
        config: ModelConfig,
        entities: Vec<String>,
        relations: Vec<String>,
        labels: Vec<String>,
        types: &BTreeMap<EntityId, LabelId>,
    ) -> Result<Self> {
        config.validate()?;
        let mut m = EmbeddingModel {
            config,
            entities,
            relations,
            labels,
            types: Vec::new(),
            blocks: Vec::new(),
        };
        m.types = vec![m.unk(); m.entities.len()];
        m.set_types(types)?;
        m.blocks = Block::ALL
            .iter()
            .map(|&b| {
                let (r, c) = m.shape(b);
                vec![0.0; r * c]
            })
            .collect();
        Ok(m)
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        entities: Vec<String>,
        relations: Vec<String>,
        labels: Vec<String>,
        types: Vec<u32>,
        blocks: Vec<Vec<f64>>,
    ) -> Result<Self> {
        config.validate()?;
        let m = EmbeddingModel {
            config,
            entities,
            relations,
            labels,
            types,
            blocks,
        };
        if m.types.len() != m.entities.len() || m.types.iter().any(|&t| t > m.unk()) {
            return Err(Error::Data(
                "type assignment does not match the entity table".into(),
            ));
        }
        for &b in &Block::ALL {
            let (r, c) = m.shape(b);
            if m.blocks[b as usize].len() != r * c {
                return Err(Error::Data(format!(
                    "parameter block {} has the wrong size",
                    b.name()
                )));
            }
        }
        if m.blocks.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "model contains non-finite parameters".into(),
            ));
        }
        Ok(m)
    }

    fn unk(&self) -> u32 {
        self.labels.len() as u32
    }

    /// `(rows, cols)` of a block under this model's configuration.
    pub fn shape(&self, block: Block) -> (usize, usize) {
        let c = &self.config;
        let (ne, nr) = (self.entities.len(), self.relations.len());
        let complex = c.base == Base::Complex;
        let gated = c.mode != Mode::Plain;
        let typee = c.mode == Mode::Typee;
        let on = |active: bool, d: usize| if active { d } else { 0 };
        match block {
            Block::EntityRe => (ne, c.dim),
            Block::EntityIm => (ne, on(complex, c.dim)),
            Block::RelationRe => (nr, c.dim),
            Block::RelationIm => (nr, on(complex, c.dim)),
            Block::EntityType => (ne, on(gated, c.type_dim)),
            Block::RelationHead | Block::RelationTail => (nr, on(gated, c.type_dim)),
            Block::Label => (self.labels.len() + 1, on(typee, c.label_dim)),
            Block::RelationDomain | Block::RelationRange => (nr, on(typee, c.label_dim)),
        }
    }

    pub fn block(&self, block: Block) -> &[f64] {
        &self.blocks[block as usize]
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [f64] {
        &mut self.blocks[block as usize]
    }

    pub fn row(&self, block: Block, row: u32) -> &[f64] {
        let c = self.shape(block).1;
        let i = row as usize * c;
        &self.blocks[block as usize][i..i + c]
    }

    pub fn row_mut(&mut self, block: Block, row: u32) -> &mut [f64] {
        let c = self.shape(block).1;
        let i = row as usize * c;
        &mut self.blocks[block as usize][i..i + c]
    }

    /// Label-table row of an entity (`None` = UNK).
    pub fn entity_type(&self, e: EntityId) -> Option<LabelId> {
        let t = self.types[e.index()];
        (t != self.unk()).then_some(LabelId(t))
    }

    pub fn type_rows(&self) -> &[u32] {
        &self.types
    }

    /// Replaces the type assignment; entities not in `types` become UNK.
    pub fn set_types(&mut self, types: &BTreeMap<EntityId, LabelId>) -> Result<()> {
        let unk = self.unk();
        self.types.iter_mut().for_each(|t| *t = unk);
        for (&e, &l) in types {
            if e.index() >= self.entities.len() || l.index() >= self.labels.len() {
                return Err(Error::Reference(format!(
                    "type assignment {e:?} -> {l:?} outside the vocabulary"
                )));
            }
            self.types[e.index()] = l.0;
        }
        Ok(())
    }

    /// Fills every active block uniformly in [-0.05, 0.05].
    pub fn init_uniform(&mut self, rng: &mut ChaCha8Rng) {
        for block in &mut self.blocks {
            for v in block.iter_mut() {
                *v = rng.random_range(-INIT_SCALE..=INIT_SCALE);
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn check_ids(&self, t: &Triple) -> Result<()> {
        for e in [t.subject, t.object] {
            if e.index() >= self.entities.len() {
                return Err(Error::Reference(format!(
                    "entity id {} unseen by the model",
                    e.0
                )));
            }
        }
        if t.relation.index() >= self.relations.len() {
            return Err(Error::Reference(format!(
                "relation id {} unseen by the model",
                t.relation.0
            )));
        }
        Ok(())
    }

    /// Unbounded base score `Y(s, r, o)`.
    pub fn base_score(&self, t: &Triple) -> f64 {
        let (s, r, o) = (t.subject.0, t.relation.0, t.object.0);
        let (a, c, e) = (
            self.row(Block::EntityRe, s),
            self.row(Block::RelationRe, r),
            self.row(Block::EntityRe, o),
        );
        match self.config.base {
            Base::Distmult => (0..a.len()).map(|k| a[k] * c[k] * e[k]).sum(),
            Base::Complex => {
                let (b, d, f) = (
                    self.row(Block::EntityIm, s),
                    self.row(Block::RelationIm, r),
                    self.row(Block::EntityIm, o),
                );
                (0..a.len())
                    .map(|k| {
                        a[k] * c[k] * e[k] + b[k] * c[k] * f[k] + a[k] * d[k] * f[k]
                            - b[k] * d[k] * e[k]
                    })
                    .sum()
            }
        }
    }

    fn implicit_inputs(&self, t: &Triple) -> (f64, f64) {
        let r = t.relation.0;
        (
            dot(
                self.row(Block::EntityType, t.subject.0),
                self.row(Block::RelationHead, r),
            ),
            dot(
                self.row(Block::EntityType, t.object.0),
                self.row(Block::RelationTail, r),
            ),
        )
    }

    fn explicit_inputs(&self, t: &Triple) -> (f64, f64) {
        let r = t.relation.0;
        let (ls, lo) = (self.types[t.subject.index()], self.types[t.object.index()]);
        (
            dot(
                self.row(Block::Label, ls),
                self.row(Block::RelationDomain, r),
            ),
            dot(
                self.row(Block::Label, lo),
                self.row(Block::RelationRange, r),
            ),
        )
    }

    /// `σ(s_t·r_h) · Y · σ(o_t·r_t)`.
    pub fn implicit_typed_score(&self, t: &Triple) -> f64 {
        let (zs, zo) = self.implicit_inputs(t);
        sigmoid(zs) * self.base_score(t) * sigmoid(zo)
    }

    /// `σ(s_t·r_h + s_l·r_dom) · Y · σ(o_t·r_t + o_l·r_range)`.
    pub fn typee_score(&self, t: &Triple) -> f64 {
        let (is, io) = self.implicit_inputs(t);
        let (es, eo) = self.explicit_inputs(t);
        sigmoid(is + es) * self.base_score(t) * sigmoid(io + eo)
    }

    fn forward(&self, t: &Triple) -> Forward {
        let sy = sigmoid(self.base_score(t));
        if self.config.mode == Mode::Plain {
            return Forward {
                sy,
                gs: 1.0,
                go: 1.0,
                f: sy,
            };
        }
        let (mut zs, mut zo) = self.implicit_inputs(t);
        if self.config.mode == Mode::Typee {
            let (es, eo) = self.explicit_inputs(t);
            zs += es;
            zo += eo;
        }
        let (gs, go) = (sigmoid(zs), sigmoid(zo));
        Forward {
            sy,
            gs,
            go,
            f: gs * sy * go,
        }
    }

    /// Probability that `t` is correct: `σ(Y)` in plain mode,
    /// `gate_s · σ(Y) · gate_o` otherwise.
    pub fn predict_one(&self, t: &Triple) -> Result<f64> {
        self.check_ids(t)?;
        Ok(self
            .forward(t)
            .f
            .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    pub fn predict(&self, triples: &[Triple]) -> Result<Vec<f64>> {
        triples.iter().map(|t| self.predict_one(t)).collect()
    }

    /// Rows read when scoring `t`, in a fixed order. A row read twice (a
    /// self-loop, or subject and object sharing a type) appears twice.
    fn touched(&self, t: &Triple, out: &mut Vec<(Block, u32)>) {
        let (s, r, o) = (t.subject.0, t.relation.0, t.object.0);
        let candidates = [
            (Block::EntityRe, s),
            (Block::EntityRe, o),
            (Block::EntityIm, s),
            (Block::EntityIm, o),
            (Block::RelationRe, r),
            (Block::RelationIm, r),
            (Block::EntityType, s),
            (Block::EntityType, o),
            (Block::RelationHead, r),
            (Block::RelationTail, r),
            (Block::Label, self.types[s as usize]),
            (Block::Label, self.types[o as usize]),
            (Block::RelationDomain, r),
            (Block::RelationRange, r),
        ];
        for (b, i) in candidates {
            if self.shape(b).1 > 0 {
                out.push((b, i));
            }
        }
    }

    /// Mean over `samples` (label 1.0 or 0.0) of the BCE plus
    /// `l2 · Σ‖row‖²` over the parameter rows the sample reads.
    pub fn loss(&self, samples: &[(Triple, f64)]) -> f64 {
        let n = samples.len().max(1) as f64;
        let mut rows = Vec::new();
        let mut total = 0.0;
        for (t, y) in samples {
            total += bce(self.forward(t).f, *y);
            rows.clear();
            self.touched(t, &mut rows);
            total += self.config.l2_reg
                * rows
                    .iter()
                    .map(|&(b, i)| sq_norm(self.row(b, i)))
                    .sum::<f64>();
        }
        total / n
    }

    /// [`EmbeddingModel::loss`] and its analytic gradient.
    pub fn loss_and_gradient(&self, samples: &[(Triple, f64)]) -> (f64, Gradient) {
        let n = samples.len().max(1) as f64;
        let lambda = self.config.l2_reg;
        let mut grad = Gradient::default();
        let mut rows = Vec::new();
        let mut total = 0.0;
        for (t, y) in samples {
            let fw = self.forward(t);
            total += bce(fw.f, *y);
            let df = bce_grad(fw.f, *y) / n;
            if df != 0.0 {
                self.backward(t, fw, df, &mut grad);
            }
            rows.clear();
            self.touched(t, &mut rows);
            for &(b, i) in &rows {
                let row = self.row(b, i);
                total += lambda * sq_norm(row);
                if lambda > 0.0 {
                    grad.add(b, i, 2.0 * lambda / n, row.iter().copied(), row.len());
                }
            }
        }
        (total / n, grad)
    }

    fn backward(&self, t: &Triple, fw: Forward, df: f64, grad: &mut Gradient) {
        let (s, r, o) = (t.subject.0, t.relation.0, t.object.0);
        let dsy = fw.sy * (1.0 - fw.sy);
        let dy = df * fw.gs * fw.go * dsy;

        let d = self.config.dim;
        let a = self.row(Block::EntityRe, s);
        let c = self.row(Block::RelationRe, r);
        let e = self.row(Block::EntityRe, o);
        match self.config.base {
            Base::Distmult => {
                grad.add(Block::EntityRe, s, dy, (0..d).map(|k| c[k] * e[k]), d);
                grad.add(Block::RelationRe, r, dy, (0..d).map(|k| a[k] * e[k]), d);
                grad.add(Block::EntityRe, o, dy, (0..d).map(|k| a[k] * c[k]), d);
            }
            Base::Complex => {
                let b = self.row(Block::EntityIm, s);
                let dd = self.row(Block::RelationIm, r);
                let f = self.row(Block::EntityIm, o);
                grad.add(
                    Block::EntityRe,
                    s,
                    dy,
                    (0..d).map(|k| c[k] * e[k] + dd[k] * f[k]),
                    d,
                );
                grad.add(
                    Block::EntityIm,
                    s,
                    dy,
                    (0..d).map(|k| c[k] * f[k] - dd[k] * e[k]),
                    d,
                );
                grad.add(
                    Block::RelationRe,
                    r,
                    dy,
                    (0..d).map(|k| a[k] * e[k] + b[k] * f[k]),
                    d,
                );
                grad.add(
                    Block::RelationIm,
                    r,
                    dy,
                    (0..d).map(|k| a[k] * f[k] - b[k] * e[k]),
                    d,
                );
                grad.add(
                    Block::EntityRe,
                    o,
                    dy,
                    (0..d).map(|k| a[k] * c[k] - b[k] * dd[k]),
                    d,
                );
                grad.add(
                    Block::EntityIm,
                    o,
                    dy,
                    (0..d).map(|k| b[k] * c[k] + a[k] * dd[k]),
                    d,
                );
            }
        }
        if self.config.mode == Mode::Plain {
            return;
        }

        let dzs = df * fw.gs * (1.0 - fw.gs) * fw.sy * fw.go;
        let dzo = df * fw.go * (1.0 - fw.go) * fw.sy * fw.gs;
        let dt = self.config.type_dim;
        let pairs = [
            (Block::EntityType, s, Block::RelationHead, r, dzs, dt),
            (Block::EntityType, o, Block::RelationTail, r, dzo, dt),
        ];
        let explicit = [
            (
                Block::Label,
                self.types[s as usize],
                Block::RelationDomain,
                r,
                dzs,
                self.config.label_dim,
            ),
            (
                Block::Label,
                self.types[o as usize],
                Block::RelationRange,
                r,
                dzo,
                self.config.label_dim,
            ),
        ];
        let active = if self.config.mode == Mode::Typee {
            2
        } else {
            0
        };
        for &(b1, i1, b2, i2, dz, cols) in pairs.iter().chain(explicit.iter().take(active)) {
            let (x, w) = (self.row(b1, i1), self.row(b2, i2));
            grad.add(b1, i1, dz, w.iter().copied(), cols);
            grad.add(b2, i2, dz, x.iter().copied(), cols);
        }
    }

    fn apply_adagrad(&mut self, grad: &Gradient, acc: &mut [Vec<f64>]) {
        let lr = self.config.learning_rate;
        for (&(b, i), g) in &grad.rows {
            let c = g.len();
            let start = i as usize * c;
            let params = &mut self.blocks[b as usize][start..start + c];
            let hist = &mut acc[b as usize][start..start + c];
            for ((p, h), gi) in params.iter_mut().zip(hist.iter_mut()).zip(g) {
                *h += gi * gi;
                *p -= lr * gi / (h.sqrt() + ADAGRAD_EPS);
            }
        }
    }
}

fn clip(f: f64) -> f64 {
    f.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// Per-sample binary cross-entropy on a clipped probability.
pub fn bce(f: f64, y: f64) -> f64 {
    let f = clip(f);
    -(y * f.ln() + (1.0 - y) * (1.0 - f).ln())
}

/// `∂bce/∂f`; zero where clipping is active.
pub fn bce_grad(f: f64, y: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&f) {
        return 0.0;
    }
    -y / f + (1.0 - y) / (1.0 - f)
}

/// Summed binary cross-entropy `−Σ [y log f + (1−y) log(1−f)]`.
pub fn bce_loss(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!(
            "bce_loss: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| bce(f, if y { 1.0 } else { 0.0 }))
        .sum())
}

/// `k` corruptions of `positive`, each replacing the subject or the object
/// by a uniform entity and resampling (up to 100 draws) while the result is
/// a known positive.
pub fn negative_sample(
    positive: &Triple,
    k: usize,
    known: &HashSet<Triple>,
    num_entities: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Triple> {
    let mut out = Vec::with_capacity(k);
    if num_entities == 0 {
        return out;
    }
    for _ in 0..k {
        let mut c = *positive;
        for _ in 0..MAX_RESAMPLE {
            let e = EntityId(rng.random_range(0..num_entities as u32));
            c = if rng.random_bool(0.5) {
                Triple::new(e, positive.relation, positive.object)
            } else {
                Triple::new(positive.subject, positive.relation, e)
            };
            if !known.contains(&c) {
                break;
            }
        }
        out.push(c);
    }
    out
}

/// Trains a model on `set` and returns it with the per-epoch mean batch
/// loss.
pub fn train(
    set: &TrainingSet,
    types: &BTreeMap<EntityId, LabelId>,
    config: &ModelConfig,
) -> Result<(EmbeddingModel, Vec<f64>)> {
    config.validate()?;
    if set.positives.is_empty() {
        return Err(Error::Data("cannot train on an empty training set".into()));
    }
    if config.negatives == 0 {
        return Err(Error::Config("negatives must be >= 1 for training".into()));
    }
    let mut model = EmbeddingModel::new(
        config.clone(),
        set.entities.clone(),
        set.relations.clone(),
        set.labels.clone(),
        types,
    )?;
    model.init_uniform(&mut rng_for(config.seed, "init"));
    let mut acc: Vec<Vec<f64>> = model.blocks.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut shuffle = rng_for(config.seed, "shuffle");
    let mut sampling = rng_for(config.seed, "sampling");

    let mut order = set.positives.clone();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut samples = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            samples.clear();
            for pos in chunk {
                samples.push((*pos, 1.0));
                for neg in negative_sample(
                    pos,
                    config.negatives,
                    &set.known,
                    set.entities.len(),
                    &mut sampling,
                ) {
                    samples.push((neg, 0.0));
                }
            }
            let (loss, grad) = model.loss_and_gradient(&samples);
            if !loss.is_finite() || grad.rows.values().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch}, batch {b}"
                )));
            }
            model.apply_adagrad(&grad, &mut acc);
            total += loss;
            batches += 1;
        }
        trace.push(total / batches as f64);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::RelationId;

    fn names(p: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    fn model(base: Base, mode: Mode, d: usize, dt: usize, dl: usize) -> EmbeddingModel {
        let config = ModelConfig {
            base,
            mode,
            dim: d,
            type_dim: dt,
            label_dim: dl,
            ..Default::default()
        };
        EmbeddingModel::new(
            config,
            names("e", 3),
            names("r", 2),
            names("l", 2),
            &BTreeMap::new(),
        )
        .unwrap()
    }

    fn t(s: u32, r: u32, o: u32) -> Triple {
        Triple::new(EntityId(s), RelationId(r), EntityId(o))
    }

    #[test]
    fn zero_embeddings_score_zero() {
        let m = model(Base::Complex, Mode::Plain, 4, 1, 1);
        assert_eq!(m.base_score(&t(0, 0, 1)), 0.0);
        assert_eq!(m.predict_one(&t(0, 0, 1)).unwrap(), 0.5);
    }

    #[test]
    fn unit_complex_scores_one() {
        let mut m = model(Base::Complex, Mode::Plain, 1, 1, 1);
        m.row_mut(Block::EntityRe, 0)[0] = 1.0;
        m.row_mut(Block::EntityRe, 1)[0] = 1.0;
        m.row_mut(Block::RelationRe, 0)[0] = 1.0;
        assert_eq!(m.base_score(&t(0, 0, 1)), 1.0);
    }

    #[test]
    fn implicit_gate_scalars() {
        let mut m = model(Base::Distmult, Mode::ImplicitTyped, 1, 1, 1);
        for (b, i) in [
            (Block::EntityRe, 0),
            (Block::EntityRe, 1),
            (Block::RelationRe, 0),
        ] {
            m.row_mut(b, i)[0] = 1.0;
        }
        m.row_mut(Block::EntityType, 0)[0] = 2.0;
        m.row_mut(Block::RelationHead, 0)[0] = 1.0;
        m.row_mut(Block::EntityType, 1)[0] = -2.0;
        m.row_mut(Block::RelationTail, 0)[0] = 1.0;
        let v = m.implicit_typed_score(&t(0, 0, 1));
        assert!((v - 0.8807970779778823 * 0.11920292202211755).abs() < 1e-15);
        assert!((v - 0.1050).abs() < 1e-4);
    }

    #[test]
    fn zero_gates_quarter_base() {
        let mut m = model(Base::Distmult, Mode::Typee, 1, 1, 1);
        for (b, i) in [
            (Block::EntityRe, 0),
            (Block::EntityRe, 1),
            (Block::RelationRe, 0),
        ] {
            m.row_mut(b, i)[0] = 2.0;
        }
        assert_eq!(m.typee_score(&t(0, 0, 1)), 0.25 * 8.0);
        assert_eq!(m.implicit_typed_score(&t(0, 0, 1)), 0.25 * 8.0);
    }

    #[test]
    fn cancelling_explicit_gate_is_half() {
        let mut m = model(Base::Distmult, Mode::Typee, 1, 1, 1);
        m.row_mut(Block::EntityType, 0)[0] = 1.5;
        m.row_mut(Block::RelationHead, 0)[0] = 1.0;
        m.row_mut(Block::Label, 2)[0] = -1.5;
        m.row_mut(Block::RelationDomain, 0)[0] = 1.0;
        let (is, _) = m.implicit_inputs(&t(0, 0, 1));
        let (es, _) = m.explicit_inputs(&t(0, 0, 1));
        assert_eq!(sigmoid(is + es), 0.5);
    }

    #[test]
    fn gated_prediction_at_zero() {
        let m = model(Base::Complex, Mode::Typee, 2, 2, 2);
        assert_eq!(m.predict_one(&t(0, 1, 2)).unwrap(), 0.125);
    }

    #[test]
    fn unseen_ids_are_errors() {
        let m = model(Base::Complex, Mode::Plain, 2, 1, 1);
        let err = m.predict(&[t(0, 0, 9)]).unwrap_err();
        assert!(err.to_string().contains('9'));
        assert!(m.predict(&[t(0, 5, 1)]).is_err());
    }

    #[test]
    fn batch_equals_single_calls() {
        let mut m = model(Base::Complex, Mode::Typee, 3, 2, 2);
        m.init_uniform(&mut rng_for(1, "x"));
        let ts = [t(0, 0, 1), t(1, 1, 2), t(2, 0, 0)];
        let batch = m.predict(&ts).unwrap();
        for (tr, p) in ts.iter().zip(batch) {
            assert_eq!(m.predict_one(tr).unwrap(), p);
        }
    }

    #[test]
    fn bce_values() {
        assert!((bce(1.0, 1.0) - 1e-7).abs() < 1e-12);
        assert!((bce(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(bce_grad(0.5, 1.0), -2.0);
        assert!(bce_loss(&[0.5], &[true, false]).is_err());
    }

    #[test]
    fn negative_sampling_replays_and_filters() {
        let known: HashSet<Triple> = [t(0, 0, 1), t(1, 0, 2)].into_iter().collect();
        assert!(negative_sample(&t(0, 0, 1), 0, &known, 3, &mut rng_for(3, "s")).is_empty());
        let a = negative_sample(&t(0, 0, 1), 4, &known, 3, &mut rng_for(3, "s"));
        let b = negative_sample(&t(0, 0, 1), 4, &known, 3, &mut rng_for(3, "s"));
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|x| !known.contains(x)));
    }

    fn tiny_set() -> TrainingSet {
        let mut v = Vocab::default();
        let ts: Vec<Triple> = vec![Triple::new(v.entity("a"), v.relation("r"), v.entity("b"))];
        v.entity("c");
        TrainingSet::new(&v, ts).unwrap()
    }

    #[test]
    fn training_reduces_loss() {
        let set = tiny_set();
        let config = ModelConfig {
            dim: 4,
            type_dim: 2,
            label_dim: 2,
            negatives: 1,
            epochs: 2,
            seed: 5,
            ..Default::default()
        };
        let (m, trace) = train(&set, &BTreeMap::new(), &config).unwrap();
        assert_eq!(trace.len(), 2);
        let mut init = m.clone();
        init.init_uniform(&mut rng_for(5, "init"));
        let pos = [(set.positives[0], 1.0)];
        assert!(m.loss(&pos) < init.loss(&pos));
    }

    #[test]
    fn zero_learning_rate_keeps_initialisation() {
        let set = tiny_set();
        let config = ModelConfig {
            dim: 4,
            type_dim: 2,
            label_dim: 2,
            learning_rate: 0.0,
            epochs: 3,
            seed: 9,
            ..Default::default()
        };
        let (m, _) = train(&set, &BTreeMap::new(), &config).unwrap();
        let mut init = m.clone();
        init.init_uniform(&mut rng_for(9, "init"));
        assert_eq!(m, init);
    }

    #[test]
    fn empty_training_set_is_error() {
        let set = TrainingSet::default();
        assert!(train(&set, &BTreeMap::new(), &ModelConfig::default()).is_err());
    }
}
