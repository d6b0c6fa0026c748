//! Synthetic noisy knowledge graphs with a rich ontology.
//!
//! Labels form two roots with three leaf children each. Every entity has
//! one leaf type and a latent cluster inside it. Each relation maps a leaf
//! domain to a leaf range and links subject cluster `c` to object cluster
//! `(c + shift) mod clusters`, which gives embedding models structure to
//! learn. Relations come in inverse pairs. Siblings and the two roots are
//! mutually exclusive.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Confidence, KnowledgeGraph, LabelId, Triple, Truth, Vocab};
use crate::noise::{assign_extraction_scores, corrupt_kg, NoiseSpec, NoiseStats};
use crate::util::{rng_for, sub_seed};

pub const ROOTS: usize = 2;
pub const LEAVES_PER_ROOT: usize = 3;
pub const EXTRACTOR: &str = "extractor";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub entities: usize,
    /// Base relations; each also gets an inverse, so the graph has twice
    /// as many relations.
    pub base_relations: usize,
    pub facts_per_relation: usize,
    pub clusters: usize,
    /// Fraction of entities whose leaf type is observed as a candidate
    /// label.
    pub label_coverage: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            entities: 200,
            base_relations: 5,
            facts_per_relation: 200,
            clusters: 3,
            label_coverage: 0.8,
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }
}

pub struct SynthKg {
    /// Noisy graph with extraction scores, gold labels and noise flags.
    pub kg: KnowledgeGraph,
    /// The graph before corruption.
    pub clean: KnowledgeGraph,
    pub noise: NoiseStats,
}

fn leaf_name(root: usize, leaf: usize) -> String {
    format!("{}{}", (b'A' + root as u8) as char, leaf + 1)
}

pub fn generate(spec: &SynthSpec) -> Result<SynthKg> {
    let leaves = ROOTS * LEAVES_PER_ROOT;
    if spec.entities < leaves * spec.clusters.max(1)
        || spec.clusters == 0
        || spec.base_relations == 0
    {
        return Err(Error::Config(format!(
            "synthetic graph needs >= 1 cluster, >= 1 relation and at least {} entities",
            leaves * spec.clusters.max(1)
        )));
    }
    if !(0.0..=1.0).contains(&spec.label_coverage) {
        return Err(Error::Config("label_coverage must lie in [0, 1]".into()));
    }
    let mut rng = rng_for(spec.seed, "synth");
    let mut v = Vocab::default();
    let extractor = v.source(EXTRACTOR);

    let roots: Vec<LabelId> = (0..ROOTS)
        .map(|r| v.label(&((b'A' + r as u8) as char).to_string()))
        .collect();
    let leaf_ids: Vec<LabelId> = (0..ROOTS)
        .flat_map(|r| (0..LEAVES_PER_ROOT).map(move |l| (r, l)))
        .map(|(r, l)| v.label(&leaf_name(r, l)))
        .collect();

    // members[leaf][cluster] = entities
    let mut members = vec![vec![Vec::new(); spec.clusters]; leaves];
    let mut entity_leaf = Vec::with_capacity(spec.entities);
    for i in 0..spec.entities {
        let e = v.entity(&format!("e{i:03}"));
        let leaf = i % leaves;
        members[leaf][(i / leaves) % spec.clusters].push(e);
        entity_leaf.push(leaf);
    }

    // Relation j maps leaf dom(j) to leaf rng(j); its inverse swaps them.
    let mut rels = Vec::new();
    for j in 0..spec.base_relations {
        let dom = j % leaves;
        let rng_leaf = (j * 2 + 3) % leaves;
        let shift = if spec.clusters > 1 {
            1 + j % (spec.clusters - 1)
        } else {
            0
        };
        let r = v.relation(&format!("r{j}"));
        let inv = v.relation(&format!("r{j}_inv"));
        rels.push((r, dom, rng_leaf, shift));
        rels.push((inv, rng_leaf, dom, (spec.clusters - shift) % spec.clusters));
    }

    let mut kg = KnowledgeGraph::new(v);
    for (i, &leaf) in leaf_ids.iter().enumerate() {
        kg.ontology.add_sub(leaf, roots[i / LEAVES_PER_ROOT])?;
    }
    kg.ontology.add_mutex(roots[0], roots[1])?;
    for r in 0..ROOTS {
        for a in 0..LEAVES_PER_ROOT {
            for b in a + 1..LEAVES_PER_ROOT {
                kg.ontology.add_mutex(
                    leaf_ids[r * LEAVES_PER_ROOT + a],
                    leaf_ids[r * LEAVES_PER_ROOT + b],
                )?;
            }
        }
    }
    for pair in rels.chunks(2) {
        kg.ontology.inv.insert((pair[0].0, pair[1].0));
    }
    for &(r, dom, rng_leaf, _) in &rels {
        kg.ontology.dom.insert(r, leaf_ids[dom]);
        kg.ontology.rng.insert(r, leaf_ids[rng_leaf]);
    }

    let full = Confidence {
        source: extractor,
        value: 1.0,
    };
    let mut truth = Truth::new();
    for &(r, dom, rng_leaf, shift) in &rels {
        let mut facts = BTreeSet::new();
        let mut attempts = 0;
        while facts.len() < spec.facts_per_relation && attempts < spec.facts_per_relation * 50 {
            attempts += 1;
            let c = rng.random_range(0..spec.clusters);
            let subjects = &members[dom][c];
            let objects = &members[rng_leaf][(c + shift) % spec.clusters];
            if subjects.is_empty() || objects.is_empty() {
                continue;
            }
            let s = subjects[rng.random_range(0..subjects.len())];
            let o = objects[rng.random_range(0..objects.len())];
            if s != o {
                facts.insert(Triple::new(s, r, o));
            }
        }
        for t in facts {
            kg.add_fact(t, full)?;
            truth.insert(t, true);
        }
    }
    let mut label_truth = std::collections::BTreeMap::new();
    for (i, &leaf) in entity_leaf.iter().enumerate() {
        if rng.random_bool(spec.label_coverage) {
            let e = crate::kg::EntityId(i as u32);
            kg.add_label(e, leaf_ids[leaf], full)?;
            label_truth.insert((e, leaf_ids[leaf]), true);
        }
    }
    kg.set_truth(truth);
    kg.set_label_truth(label_truth);

    let noise = NoiseSpec {
        seed: sub_seed(spec.seed, "noise"),
        ..spec.noise.clone()
    };
    let (noisy, stats) = corrupt_kg(&kg, &noise)?;
    let scored = assign_extraction_scores(&noisy, &noise)?;
    Ok(SynthKg {
        kg: scored,
        clean: kg,
        noise: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let s = generate(&SynthSpec::default()).unwrap();
        let kg = &s.kg;
        assert_eq!(kg.num_entities(), 200);
        assert_eq!(kg.num_relations(), 10);
        assert_eq!(kg.num_labels(), 8);
        assert!(
            (1800..=2000).contains(&s.clean.num_facts()),
            "{}",
            s.clean.num_facts()
        );
        let o = &kg.ontology;
        assert_eq!(
            (o.dom.len(), o.rng.len(), o.sub.len(), o.inv.len()),
            (10, 10, 6, 5)
        );
        assert_eq!(o.mutex.len(), 7);
        let noisy = kg.truth().unwrap().values().filter(|g| !**g).count();
        assert!(noisy > 400, "{noisy}");
        kg.validate().unwrap();
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec {
            seed: 3,
            ..Default::default()
        };
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_eq!(a.kg.facts(), b.kg.facts());
        assert_eq!(a.kg.truth(), b.kg.truth());
    }
}
