//! KG-based entity retrieval.
//!
//! Unpaired mentions are swapped for a same-category entity from their 2-hop
//! neighbourhood. Related pairs are swapped together for another triple of
//! the same relation type drawn from the pair's 2-hop pool, keeping head and
//! tail in place.

use std::collections::BTreeSet;

use rand::Rng;

use crate::dataset::LabeledText;
use crate::kg::{EntityId, KnowledgeGraph, Triple};
use crate::localize::{MentionMatch, RelatedPair};
use crate::sample::{compose, AugmentedSample, PairSlot, Replacement, Role, Unit, View};

/// Endpoints of the 2-hop candidate triples of `e`, excluding `e`.
pub fn two_hop_entities(kg: &KnowledgeGraph, e: EntityId) -> BTreeSet<EntityId> {
    kg.two_hop_candidates(e)
        .map(|ts| ts.iter().flat_map(|t| [t.head, t.tail]).filter(|&x| x != e).collect())
        .unwrap_or_default()
}

/// Triples that may replace the pair certified by `pair.triple`: same
/// relation, drawn from the union of both endpoints' 2-hop pools, matching
/// categories position-wise, each new endpoint either unchanged or within the
/// 2-hop neighbourhood of the entity it replaces. The certifying triple itself
/// is excluded.
pub fn pair_candidates(kg: &KnowledgeGraph, pair: &RelatedPair) -> Vec<Triple> {
    let (h, t) = (pair.triple.head, pair.triple.tail);
    let mut pool = kg.two_hop_candidates(h).unwrap_or_default();
    pool.extend(kg.two_hop_candidates(t).unwrap_or_default());
    let near_h = two_hop_entities(kg, h);
    let near_t = two_hop_entities(kg, t);
    pool.into_iter()
        .filter(|c| c.relation == pair.relation && *c != pair.triple)
        .filter(|c| kg.category(c.head) == kg.category(h) && kg.category(c.tail) == kg.category(t))
        .filter(|c| (c.head == h || near_h.contains(&c.head)) && (c.tail == t || near_t.contains(&c.tail)))
        .collect()
}

pub fn augment_kger<R: Rng>(
    origin: &LabeledText,
    matches: &[MentionMatch],
    pairs: &[RelatedPair],
    kg: &KnowledgeGraph,
    rng: &mut R,
    count: usize,
) -> Vec<AugmentedSample> {
    let mut paired = vec![false; matches.len()];
    let mut units = Vec::new();

    for (pid, p) in pairs.iter().enumerate() {
        paired[p.head] = true;
        paired[p.tail] = true;
        let (hm, tm) = (&matches[p.head], &matches[p.tail]);
        let options = pair_candidates(kg, p)
            .into_iter()
            .map(|c| {
                vec![
                    Replacement {
                        span: hm.span.clone(),
                        old_entity: hm.entity,
                        new_entity: c.head,
                        pair: Some(PairSlot { pair: pid, role: Role::Head, relation: p.relation }),
                        source: None,
                    },
                    Replacement {
                        span: tm.span.clone(),
                        old_entity: tm.entity,
                        new_entity: c.tail,
                        pair: Some(PairSlot { pair: pid, role: Role::Tail, relation: p.relation }),
                        source: None,
                    },
                ]
            })
            .collect();
        units.push(Unit { options });
    }

    for (m, _) in matches.iter().zip(&paired).filter(|(_, &p)| !p) {
        let options = kg
            .same_category_candidates(m.entity)
            .unwrap_or_default()
            .into_iter()
            .map(|e| {
                vec![Replacement {
                    span: m.span.clone(),
                    old_entity: m.entity,
                    new_entity: e,
                    pair: None,
                    source: None,
                }]
            })
            .collect();
        units.push(Unit { options });
    }

    compose(origin, &units, View::Kger, count, rng, |e| kg.name(e))
}

/// Checks entity relevance and relation consistency of a KGER sample.
pub fn validate_kger(sample: &AugmentedSample, kg: &KnowledgeGraph) -> Result<(), String> {
    for r in &sample.replacements {
        if kg.category(r.old_entity) != kg.category(r.new_entity) {
            return Err(format!(
                "{}: `{}` replaced by `{}` of another category",
                sample.aug_id,
                kg.name(r.old_entity),
                kg.name(r.new_entity)
            ));
        }
        if r.old_entity != r.new_entity && !two_hop_entities(kg, r.old_entity).contains(&r.new_entity) {
            return Err(format!(
                "{}: `{}` is outside the 2-hop neighbourhood of `{}`",
                sample.aug_id,
                kg.name(r.new_entity),
                kg.name(r.old_entity)
            ));
        }
    }
    let slots: BTreeSet<usize> = sample.replacements.iter().filter_map(|r| r.pair.map(|p| p.pair)).collect();
    for pid in slots {
        let member =
            |role: Role| sample.replacements.iter().find(|r| r.pair.is_some_and(|p| p.pair == pid && p.role == role));
        let (Some(h), Some(t)) = (member(Role::Head), member(Role::Tail)) else {
            return Err(format!("{}: pair {pid} is incomplete", sample.aug_id));
        };
        let relation = h.pair.expect("slot").relation;
        let old = Triple::new(h.old_entity, relation, t.old_entity);
        let new = Triple::new(h.new_entity, relation, t.new_entity);
        if !kg.has_triple(&old) || !kg.has_triple(&new) || old == new {
            return Err(format!("{}: pair {pid} breaks relation consistency", sample.aug_id));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingTable;
    use crate::kg::KgBuilder;
    use crate::localize::{find_related_pairs, LocalizeConfig, Localizer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn medical() -> KnowledgeGraph {
        let mut b = KgBuilder::new();
        for (n, c) in [
            ("pneumonia", "disease"),
            ("respiratory syndrome", "disease"),
            ("fever", "symptom"),
            ("diarrhea", "symptom"),
            ("sore throat", "symptom"),
        ] {
            b.add_entity(n, c).unwrap();
        }
        b.add_triple("pneumonia", "hasSymptom", "fever").unwrap();
        b.add_triple("pneumonia", "hasSymptom", "diarrhea").unwrap();
        b.add_triple("respiratory syndrome", "hasSymptom", "diarrhea").unwrap();
        b.add_triple("respiratory syndrome", "hasSymptom", "sore throat").unwrap();
        b.build()
    }

    fn table() -> EmbeddingTable {
        let s = (1.0f64 - 0.95 * 0.95).sqrt();
        EmbeddingTable::from_rows([("diarrhea", vec![1.0, 0.0]), ("scour", vec![0.95, s])]).unwrap()
    }

    #[test]
    fn worked_example_is_reachable() {
        let g = medical();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let origin = LabeledText::new("s1", "I have a fever and scour. Could it be pneumonia?", "diagnosis");
        let m = loc.localize(&origin.text);
        assert_eq!(m.len(), 3);
        let p = find_related_pairs(&m, &g);
        assert_eq!(p.len(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = augment_kger(&origin, &m, &p, &g, &mut rng, 10);
        let texts: Vec<&str> = out.iter().map(|s| s.text.as_str()).collect();
        assert!(texts.contains(&"I have a diarrhea and sore throat. Could it be respiratory syndrome?"));
        for s in &out {
            validate_kger(s, &g).unwrap();
            assert_eq!(s.label, origin.label);
            assert_eq!(s.view, View::Kger);
        }
    }

    #[test]
    fn nothing_to_replace() {
        let g = medical();
        let origin = LabeledText::new("s", "hello there", "x");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(augment_kger(&origin, &[], &[], &g, &mut rng, 5).is_empty());
    }

    #[test]
    fn single_alternative_is_forced() {
        // pneumonia's 2-hop pool holds exactly one other disease
        let mut b = KgBuilder::new();
        for (n, c) in [("pneumonia", "disease"), ("bronchitis", "disease"), ("cough", "symptom")] {
            b.add_entity(n, c).unwrap();
        }
        b.add_triple("pneumonia", "hasSymptom", "cough").unwrap();
        b.add_triple("bronchitis", "hasSymptom", "cough").unwrap();
        let g = b.build();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let origin = LabeledText::new("o", "is it pneumonia", "x");
        let m = loc.localize(&origin.text);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = augment_kger(&origin, &m, &[], &g, &mut rng, 5);
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].text, "is it bronchitis");
        }
    }

    #[test]
    fn lone_pair_triple_yields_no_pair_replacement() {
        let mut b = KgBuilder::new();
        b.add_entity("pneumonia", "disease").unwrap();
        b.add_entity("fever", "symptom").unwrap();
        b.add_triple("pneumonia", "hasSymptom", "fever").unwrap();
        let g = b.build();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let origin = LabeledText::new("o", "fever from pneumonia", "x");
        let m = loc.localize(&origin.text);
        let p = find_related_pairs(&m, &g);
        assert_eq!(p.len(), 1);
        assert!(pair_candidates(&g, &p[0]).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(augment_kger(&origin, &m, &p, &g, &mut rng, 5).is_empty());
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let g = medical();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let origin = LabeledText::new("s1", "I have a fever and scour. Could it be pneumonia?", "d");
        let m = loc.localize(&origin.text);
        let p = find_related_pairs(&m, &g);
        let run = |seed| augment_kger(&origin, &m, &p, &g, &mut ChaCha8Rng::seed_from_u64(seed), 3);
        assert_eq!(run(9), run(9));
    }
}
