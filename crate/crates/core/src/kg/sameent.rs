//! Same-entity evidence from relation-usage overlap.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::{EntityId, KnowledgeGraph, RelationId};

struct RelationProfile {
    head: HashMap<EntityId, BTreeSet<RelationId>>,
    tail: HashMap<EntityId, BTreeSet<RelationId>>,
}

impl RelationProfile {
    fn new(kg: &KnowledgeGraph) -> Self {
        let mut head: HashMap<EntityId, BTreeSet<RelationId>> = HashMap::new();
        let mut tail: HashMap<EntityId, BTreeSet<RelationId>> = HashMap::new();
        for f in kg.facts() {
            head.entry(f.triple.subject)
                .or_default()
                .insert(f.triple.relation);
            tail.entry(f.triple.object)
                .or_default()
                .insert(f.triple.relation);
        }
        RelationProfile { head, tail }
    }

    fn score(&self, a: EntityId, b: EntityId) -> f64 {
        let empty = BTreeSet::new();
        let get =
            |m: &HashMap<EntityId, BTreeSet<RelationId>>, e| m.get(&e).unwrap_or(&empty).clone();
        (jaccard(&get(&self.head, a), &get(&self.head, b))
            + jaccard(&get(&self.tail, a), &get(&self.tail, b)))
            / 2.0
    }
}

fn jaccard(a: &BTreeSet<RelationId>, b: &BTreeSet<RelationId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Mean of the Jaccard similarities of the two entities' subject-position
/// and object-position relation sets. J(∅, ∅) = 0.
pub fn jaccard_sameent(kg: &KnowledgeGraph, e1: EntityId, e2: EntityId) -> f64 {
    RelationProfile::new(kg).score(e1, e2)
}

/// The `k` highest-scoring entity pairs with positive score, as
/// `(smaller id, larger id, score)`. Ties go to the lexicographically
/// smaller pair.
pub fn generate_sameent(kg: &KnowledgeGraph, k: usize) -> Vec<(EntityId, EntityId, f64)> {
    if k == 0 {
        return Vec::new();
    }
    let profile = RelationProfile::new(kg);

    // Only pairs that share a relation in some position can score above 0.
    let mut by_relation: HashMap<(RelationId, bool), BTreeSet<EntityId>> = HashMap::new();
    for f in kg.facts() {
        by_relation
            .entry((f.triple.relation, true))
            .or_default()
            .insert(f.triple.subject);
        by_relation
            .entry((f.triple.relation, false))
            .or_default()
            .insert(f.triple.object);
    }
    let mut candidates = HashSet::new();
    for members in by_relation.values() {
        let members: Vec<EntityId> = members.iter().copied().collect();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                candidates.insert((a, b));
            }
        }
    }

    let mut scored: Vec<(EntityId, EntityId, f64)> = candidates
        .into_iter()
        .map(|(a, b)| (a, b, profile.score(a, b)))
        .filter(|&(_, _, s)| s > 0.0)
        .collect();
    scored.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| (x.0, x.1).cmp(&(y.0, y.1)))
    });
    scored.truncate(k);
    scored
}
