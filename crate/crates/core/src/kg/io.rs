//! TSV readers and writers for graphs, gold labels and ontology components.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Confidence, EntityId, KnowledgeGraph, LabelId, RelationId, Triple, Truth, Vocab};
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub const DEFAULT_TYPEOF: &str = "typeOf";
/// Source name given to rows of a three-column triples file.
pub const INPUT_SOURCE: &str = "input";

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub triples: PathBuf,
    pub labels: Option<PathBuf>,
    pub ontology_dir: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Per-triple type-compatibility flags of injected noise.
    pub noise: Option<PathBuf>,
    /// Relation name whose rows are read as type labels instead of facts.
    pub typeof_relation: String,
}

impl LoadOptions {
    pub fn new(triples: impl Into<PathBuf>) -> Self {
        LoadOptions {
            triples: triples.into(),
            labels: None,
            ontology_dir: None,
            truth: None,
            noise: None,
            typeof_relation: DEFAULT_TYPEOF.to_owned(),
        }
    }

    /// Looks for `triples.tsv`, `labels.tsv`, `truth.tsv`, `noise.tsv` and `ontology/`
    /// inside `dir`, picking up whichever exist.
    pub fn from_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        LoadOptions {
            triples: dir.join("triples.tsv"),
            labels: opt("labels.tsv"),
            ontology_dir: opt("ontology"),
            truth: opt("truth.tsv"),
            noise: opt("noise.tsv"),
            typeof_relation: DEFAULT_TYPEOF.to_owned(),
        }
    }
}

struct Rows {
    path: PathBuf,
    text: String,
}

impl Rows {
    fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(Rows {
            path: path.to_owned(),
            text,
        })
    }

    /// Non-comment rows as (1-based line number, fields), checking the
    /// column count.
    fn iter(&self, columns: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>)>> + '_ {
        self.iter_any(vec![columns])
    }

    fn iter_any(
        &self,
        allowed: Vec<usize>,
    ) -> impl Iterator<Item = Result<(usize, Vec<&str>)>> + '_ {
        self.text.lines().enumerate().filter_map(move |(i, line)| {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                return None;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !allowed.contains(&fields.len()) {
                let expected: Vec<String> = allowed.iter().map(|c| c.to_string()).collect();
                return Some(Err(self.err(
                    i + 1,
                    format!(
                        "expected {} columns, found {}",
                        expected.join(" or "),
                        fields.len()
                    ),
                )));
            }
            Some(Ok((i + 1, fields)))
        })
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }

    fn unit(&self, line: usize, field: &str) -> Result<f64> {
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("not a number: {field:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.err(line, format!("value {v} outside [0,1]")));
        }
        Ok(v)
    }
}

pub fn load_kg(opts: &LoadOptions) -> Result<KnowledgeGraph> {
    let mut kg = KnowledgeGraph::new(Vocab::default());

    let rows = Rows::read(&opts.triples)?;
    for row in rows.iter_any(vec![3, 5]) {
        let (line, f) = row?;
        let (value, source) = match f.len() {
            5 => (rows.unit(line, f[3])?, kg.vocab.source(f[4])),
            _ => (1.0, kg.vocab.source(INPUT_SOURCE)),
        };
        let conf = Confidence { source, value };
        if f[1] == opts.typeof_relation {
            let e = kg.vocab.entity(f[0]);
            let l = kg.vocab.label(f[2]);
            kg.add_label(e, l, conf)?;
        } else {
            let t = Triple::new(
                kg.vocab.entity(f[0]),
                kg.vocab.relation(f[1]),
                kg.vocab.entity(f[2]),
            );
            kg.add_fact(t, conf)?;
        }
    }

    if let Some(path) = &opts.labels {
        let rows = Rows::read(path)?;
        for row in rows.iter(4) {
            let (line, f) = row?;
            let value = rows.unit(line, f[2])?;
            let e = kg.vocab.entity(f[0]);
            let l = kg.vocab.label(f[1]);
            let source = kg.vocab.source(f[3]);
            kg.add_label(e, l, Confidence { source, value })?;
        }
    }

    if let Some(dir) = &opts.ontology_dir {
        load_ontology(&mut kg, dir)?;
    }

    if let Some(path) = &opts.truth {
        let (truth, label_truth) = read_truth(&kg, path, &opts.typeof_relation)?;
        kg.set_truth(truth);
        if !label_truth.is_empty() {
            kg.set_label_truth(label_truth);
        }
    }

    if let Some(path) = &opts.noise {
        let flags = read_noise_flags(&kg, path)?;
        kg.set_noise_compat(flags);
    }
    Ok(kg)
}

fn known_relation(kg: &KnowledgeGraph, rows: &Rows, line: usize, name: &str) -> Result<RelationId> {
    kg.vocab.relations.get(name).map(RelationId).ok_or_else(|| {
        Error::Reference(format!(
            "{}:{line}: unknown relation {name:?}",
            rows.path.display()
        ))
    })
}

fn known_entity(kg: &KnowledgeGraph, path: &Path, line: usize, name: &str) -> Result<EntityId> {
    kg.vocab.entities.get(name).map(EntityId).ok_or_else(|| {
        Error::Reference(format!(
            "{}:{line}: unknown entity {name:?}",
            path.display()
        ))
    })
}

fn load_ontology(kg: &mut KnowledgeGraph, dir: &Path) -> Result<()> {
    let open = |name: &str| -> Result<Option<Rows>> {
        let p = dir.join(name);
        if p.exists() {
            Rows::read(&p).map(Some)
        } else {
            Ok(None)
        }
    };

    for (file, is_dom) in [("dom.tsv", true), ("rng.tsv", false)] {
        if let Some(rows) = open(file)? {
            for row in rows.iter(2) {
                let (line, f) = row?;
                let r = known_relation(kg, &rows, line, f[0])?;
                let l = kg.vocab.label(f[1]);
                if is_dom {
                    kg.ontology.dom.insert(r, l);
                } else {
                    kg.ontology.rng.insert(r, l);
                }
            }
        }
    }
    if let Some(rows) = open("sub.tsv")? {
        for row in rows.iter(2) {
            let (line, f) = row?;
            let c = kg.vocab.label(f[0]);
            let p = kg.vocab.label(f[1]);
            kg.ontology
                .add_sub(c, p)
                .map_err(|e| rows.err(line, e.to_string()))?;
        }
    }
    if let Some(rows) = open("mut.tsv")? {
        for row in rows.iter(2) {
            let (line, f) = row?;
            let a = kg.vocab.label(f[0]);
            let b = kg.vocab.label(f[1]);
            kg.ontology
                .add_mutex(a, b)
                .map_err(|e| rows.err(line, e.to_string()))?;
        }
    }
    for file in ["rsub.tsv", "rmut.tsv", "inv.tsv"] {
        if let Some(rows) = open(file)? {
            for row in rows.iter(2) {
                let (line, f) = row?;
                let a = known_relation(kg, &rows, line, f[0])?;
                let b = known_relation(kg, &rows, line, f[1])?;
                match file {
                    "rsub.tsv" => {
                        kg.ontology.rsub.insert((a, b));
                    }
                    "rmut.tsv" => kg
                        .ontology
                        .add_rmutex(a, b)
                        .map_err(|e| rows.err(line, e.to_string()))?,
                    _ => {
                        kg.ontology.inv.insert((a, b));
                    }
                }
            }
        }
    }
    if let Some(rows) = open("sameent.tsv")? {
        for row in rows.iter(3) {
            let (line, f) = row?;
            let a = known_entity(kg, &rows.path, line, f[0])?;
            let b = known_entity(kg, &rows.path, line, f[1])?;
            let s = rows.unit(line, f[2])?;
            kg.ontology.add_sameent(a, b, s)?;
        }
    }
    Ok(())
}

/// Reads `truth.tsv`; rows whose relation is `typeof_relation` become label
/// truth entries.
#[allow(clippy::type_complexity)]
pub fn read_truth(
    kg: &KnowledgeGraph,
    path: &Path,
    typeof_relation: &str,
) -> Result<(Truth, BTreeMap<(EntityId, LabelId), bool>)> {
    let rows = Rows::read(path)?;
    let mut truth = Truth::new();
    let mut label_truth = BTreeMap::new();
    for row in rows.iter(4) {
        let (line, f) = row?;
        let gold = match f[3].trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(rows.err(line, format!("gold label must be 0 or 1, got {other:?}")))
            }
        };
        let s = known_entity(kg, path, line, f[0])?;
        if f[1] == typeof_relation {
            let l = kg.vocab.labels.get(f[2]).map(LabelId).ok_or_else(|| {
                Error::Reference(format!(
                    "{}:{line}: unknown label {:?}",
                    path.display(),
                    f[2]
                ))
            })?;
            label_truth.insert((s, l), gold);
        } else {
            let r = known_relation(kg, &rows, line, f[1])?;
            let o = known_entity(kg, path, line, f[2])?;
            truth.insert(Triple::new(s, r, o), gold);
        }
    }
    Ok((truth, label_truth))
}

/// Reads `noise.tsv`: subject, relation, object and a 0/1 flag telling
/// whether the corrupted fact is type-compatible.
pub fn read_noise_flags(kg: &KnowledgeGraph, path: &Path) -> Result<BTreeMap<Triple, bool>> {
    let rows = Rows::read(path)?;
    let mut flags = BTreeMap::new();
    for row in rows.iter(4) {
        let (line, f) = row?;
        let compatible = match f[3].trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(rows.err(
                    line,
                    format!("compatibility flag must be 0 or 1, got {other:?}"),
                ))
            }
        };
        let s = known_entity(kg, path, line, f[0])?;
        let r = known_relation(kg, &rows, line, f[1])?;
        let o = known_entity(kg, path, line, f[2])?;
        flags.insert(Triple::new(s, r, o), compatible);
    }
    Ok(flags)
}

pub fn write_noise_flags(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (t, compatible) in kg.noise_compat() {
        let (s, r, o) = triple_names(&kg.vocab, t);
        let _ = writeln!(out, "{s}\t{r}\t{o}\t{}", u8::from(*compatible));
    }
    write_atomic(path, out.as_bytes())
}

fn triple_names<'a>(v: &'a Vocab, t: &Triple) -> (&'a str, &'a str, &'a str) {
    (
        v.entity_name(t.subject),
        v.relation_name(t.relation),
        v.entity_name(t.object),
    )
}

pub fn write_triples(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let v = &kg.vocab;
    let mut out = String::new();
    for f in kg.facts() {
        let (s, r, o) = triple_names(v, &f.triple);
        for c in &f.confidences {
            let _ = writeln!(
                out,
                "{s}\t{r}\t{o}\t{}\t{}",
                c.value,
                v.source_name(c.source)
            );
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_labels(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    let v = &kg.vocab;
    let mut out = String::new();
    for l in kg.labels() {
        for c in &l.confidences {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                v.entity_name(l.entity),
                v.label_name(l.label),
                c.value,
                v.source_name(c.source)
            );
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_truth(kg: &KnowledgeGraph, path: &Path, typeof_relation: &str) -> Result<()> {
    let v = &kg.vocab;
    let mut out = String::new();
    if let Some(truth) = kg.truth() {
        for (t, gold) in truth {
            let (s, r, o) = triple_names(v, t);
            let _ = writeln!(out, "{s}\t{r}\t{o}\t{}", u8::from(*gold));
        }
    }
    if let Some(truth) = kg.label_truth() {
        for ((e, l), gold) in truth {
            let _ = writeln!(
                out,
                "{}\t{typeof_relation}\t{}\t{}",
                v.entity_name(*e),
                v.label_name(*l),
                u8::from(*gold)
            );
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_ontology(kg: &KnowledgeGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let v = &kg.vocab;
    let o = &kg.ontology;
    let pairs = |it: &mut dyn Iterator<Item = (&str, &str)>| {
        let mut s = String::new();
        for (a, b) in it {
            let _ = writeln!(s, "{a}\t{b}");
        }
        s
    };
    let files = [
        (
            "dom.tsv",
            pairs(
                &mut o
                    .dom
                    .iter()
                    .map(|(r, l)| (v.relation_name(*r), v.label_name(*l))),
            ),
        ),
        (
            "rng.tsv",
            pairs(
                &mut o
                    .rng
                    .iter()
                    .map(|(r, l)| (v.relation_name(*r), v.label_name(*l))),
            ),
        ),
        (
            "sub.tsv",
            pairs(
                &mut o
                    .sub
                    .iter()
                    .map(|(a, b)| (v.label_name(*a), v.label_name(*b))),
            ),
        ),
        (
            "mut.tsv",
            pairs(
                &mut o
                    .mutex
                    .iter()
                    .map(|(a, b)| (v.label_name(*a), v.label_name(*b))),
            ),
        ),
        (
            "rsub.tsv",
            pairs(
                &mut o
                    .rsub
                    .iter()
                    .map(|(a, b)| (v.relation_name(*a), v.relation_name(*b))),
            ),
        ),
        (
            "rmut.tsv",
            pairs(
                &mut o
                    .rmutex
                    .iter()
                    .map(|(a, b)| (v.relation_name(*a), v.relation_name(*b))),
            ),
        ),
        (
            "inv.tsv",
            pairs(
                &mut o
                    .inv
                    .iter()
                    .map(|(a, b)| (v.relation_name(*a), v.relation_name(*b))),
            ),
        ),
    ];
    for (name, body) in files {
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    let mut same = String::new();
    for ((a, b), s) in &o.sameent {
        let _ = writeln!(same, "{}\t{}\t{s}", v.entity_name(*a), v.entity_name(*b));
    }
    write_atomic(&dir.join("sameent.tsv"), same.as_bytes())
}

/// Writes `triples.tsv`, `labels.tsv`, `truth.tsv` (when gold labels are
/// present), `noise.tsv` (when noise flags are present) and `ontology/`
/// under `dir`.
pub fn write_kg(kg: &KnowledgeGraph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_triples(kg, &dir.join("triples.tsv"))?;
    write_labels(kg, &dir.join("labels.tsv"))?;
    if kg.truth().is_some() || kg.label_truth().is_some() {
        write_truth(kg, &dir.join("truth.tsv"), DEFAULT_TYPEOF)?;
    }
    if !kg.noise_compat().is_empty() {
        write_noise_flags(kg, &dir.join("noise.tsv"))?;
    }
    write_ontology(kg, &dir.join("ontology"))
}
