//! Augmented samples and the combination step shared by both replacement
//! views.

use std::collections::HashSet;
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledText};
use crate::kg::{EntityId, RelationId};
use crate::localize::TokenSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    #[serde(rename = "KGER")]
    Kger,
    #[serde(rename = "TrainER")]
    Trainer,
}

impl View {
    pub fn tag(self) -> &'static str {
        match self {
            View::Kger => "kger",
            View::Trainer => "trainer",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            View::Kger => "KGER",
            View::Trainer => "TrainER",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Head,
    Tail,
}

/// Membership of a replacement in a relation-consistent pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairSlot {
    pub pair: usize,
    pub role: Role,
    pub relation: RelationId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    pub span: TokenSpan,
    pub old_entity: EntityId,
    pub new_entity: EntityId,
    pub pair: Option<PairSlot>,
    /// Donor origin id (training-data view only).
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub aug_id: String,
    pub origin_id: String,
    pub text: String,
    pub label: Label,
    pub view: View,
    pub replacements: Vec<Replacement>,
}

/// Rewrites `text`, substituting each replacement span by `name(new_entity)`.
pub fn apply_replacements<'n>(text: &str, replacements: &[Replacement], name: impl Fn(EntityId) -> &'n str) -> String {
    let mut order: Vec<&Replacement> = replacements.iter().collect();
    order.sort_by_key(|r| std::cmp::Reverse(r.span.start));
    let mut out = text.to_string();
    for r in order {
        if r.old_entity != r.new_entity {
            out.replace_range(r.span.start..r.span.end, name(r.new_entity));
        }
    }
    out
}

/// Per-origin, per-view generator seed. FNV-1a over the global seed, the view
/// tag and the origin id, so that results do not depend on processing order.
pub fn origin_seed(global: u64, scope: &str, origin_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in global.to_le_bytes().iter().chain(scope.as_bytes()).chain(&[0xff]).chain(origin_id.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

pub fn origin_rng(global: u64, scope: &str, origin_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(origin_seed(global, scope, origin_id))
}

/// A group of spans that is substituted as one unit (a single mention or a
/// related pair), with its admissible alternatives.
#[derive(Debug, Clone)]
pub(crate) struct Unit {
    pub options: Vec<Vec<Replacement>>,
}

/// Draws up to `count` distinct combinations of one option per unit and turns
/// each into a sample. Combinations are sampled without replacement.
pub(crate) fn compose<'n, R: Rng>(
    origin: &LabeledText,
    units: &[Unit],
    view: View,
    count: usize,
    rng: &mut R,
    name: impl Fn(EntityId) -> &'n str,
) -> Vec<AugmentedSample> {
    let units: Vec<&Unit> = units.iter().filter(|u| !u.options.is_empty()).collect();
    if units.is_empty() || count == 0 {
        return Vec::new();
    }
    let radices: Vec<usize> = units.iter().map(|u| u.options.len()).collect();
    let total = radices.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));

    let combos: Vec<Vec<usize>> = match total {
        Some(total) => sample(rng, total, count.min(total))
            .into_iter()
            .map(|mut code| {
                radices
                    .iter()
                    .map(|&r| {
                        let d = code % r;
                        code /= r;
                        d
                    })
                    .collect()
            })
            .collect(),
        None => {
            // astronomically many combinations: independent draws, collisions
            // are negligible and removed by the text dedup below
            (0..count).map(|_| radices.iter().map(|&r| rng.gen_range(0..r)).collect()).collect()
        }
    };

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(combos.len());
    for combo in combos {
        let replacements: Vec<Replacement> =
            units.iter().zip(&combo).flat_map(|(u, &i)| u.options[i].iter().cloned()).collect();
        let text = apply_replacements(&origin.text, &replacements, &name);
        if text == origin.text || !seen.insert(text.clone()) {
            continue;
        }
        out.push(AugmentedSample {
            aug_id: format!("{}-{}-{}", origin.id, view.tag(), out.len()),
            origin_id: origin.id.clone(),
            text,
            label: origin.label.clone(),
            view,
            replacements,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(start: usize, end: usize, s: &str) -> TokenSpan {
        TokenSpan { start, end, surface: s.into(), lemma: s.into() }
    }

    fn rep(start: usize, end: usize, old: u32, new: u32) -> Replacement {
        Replacement {
            span: span(start, end, ""),
            old_entity: EntityId(old),
            new_entity: EntityId(new),
            pair: None,
            source: None,
        }
    }

    const NAMES: [&str; 4] = ["fever", "cough", "pneumonia", "respiratory syndrome"];

    #[test]
    fn replacements_apply_right_to_left() {
        let text = "fever and pneumonia";
        let out = apply_replacements(text, &[rep(0, 5, 0, 1), rep(10, 19, 2, 3)], |e| NAMES[e.0 as usize]);
        assert_eq!(out, "cough and respiratory syndrome");
    }

    #[test]
    fn seeds_are_scoped() {
        assert_eq!(origin_seed(7, "kger", "a"), origin_seed(7, "kger", "a"));
        assert_ne!(origin_seed(7, "kger", "a"), origin_seed(7, "trainer", "a"));
        assert_ne!(origin_seed(7, "kger", "a"), origin_seed(8, "kger", "a"));
        assert_ne!(origin_seed(7, "kger", "ab"), origin_seed(7, "kgera", "b"));
    }

    #[test]
    fn compose_enumerates_distinct_combinations() {
        let origin = LabeledText::new("o", "fever and pneumonia", "x");
        let units = vec![
            Unit { options: vec![vec![rep(0, 5, 0, 1)], vec![rep(0, 5, 0, 2)]] },
            Unit { options: vec![vec![rep(10, 19, 2, 3)], vec![rep(10, 19, 2, 0)]] },
            Unit { options: vec![] },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = compose(&origin, &units, View::Kger, 10, &mut rng, |e| NAMES[e.0 as usize]);
        assert_eq!(out.len(), 4);
        let texts: HashSet<_> = out.iter().map(|s| s.text.clone()).collect();
        assert_eq!(texts.len(), 4);
        assert!(out.iter().all(|s| s.replacements.len() == 2 && s.label == origin.label));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(compose(&origin, &units, View::Kger, 3, &mut rng, |e| NAMES[e.0 as usize]).len(), 3);
        assert!(compose(&origin, &[], View::Kger, 3, &mut rng, |e| NAMES[e.0 as usize]).is_empty());
    }
}
