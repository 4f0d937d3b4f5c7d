//! Confidence-based selection of augmented samples.
//!
//! An external scorer supplies, for every augmented sample, the probability
//! its origin's label receives. Samples whose confidence sits near `delta`
//! are preferred: weights are `softmax(1 - |delta - p|)` over one origin's
//! candidates, and `K` of them are drawn without replacement.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sample::{origin_rng, AugmentedSample};

pub const DEFAULT_DELTA: f64 = 0.75;
pub const DEFAULT_PER_ORIGIN: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AssessError {
    #[error("no confidences to weight")]
    EmptyInput,
    #[error("no confidence record for augmented sample `{0}`")]
    MissingConfidence(String),
    #[error("confidence {prob} for `{aug_id}` is outside [0, 1]")]
    InvalidProbability { aug_id: String, prob: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    DeltaK,
    TopK,
    Random,
    All,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delta-k" => Ok(Strategy::DeltaK),
            "top-k" => Ok(Strategy::TopK),
            "random" => Ok(Strategy::Random),
            "all" => Ok(Strategy::All),
            other => Err(format!("unknown strategy `{other}` (delta-k|top-k|random|all)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::DeltaK => "delta-k",
            Strategy::TopK => "top-k",
            Strategy::Random => "random",
            Strategy::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub delta: f64,
    pub per_origin: usize,
    pub strategy: Strategy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA, per_origin: DEFAULT_PER_ORIGIN, strategy: Strategy::DeltaK }
    }
}

/// One line of the confidence file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    #[serde(rename = "augId")]
    pub aug_id: String,
    #[serde(rename = "probTrueLabel")]
    pub prob_true_label: f64,
}

/// One line of the scoring request file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringRequest {
    #[serde(rename = "augId")]
    pub aug_id: String,
    pub text: String,
    pub label: crate::dataset::Label,
}

/// Anything selection can group and identify.
pub trait Candidate {
    fn aug_id(&self) -> &str;
    fn origin_id(&self) -> &str;
}

impl Candidate for AugmentedSample {
    fn aug_id(&self) -> &str {
        &self.aug_id
    }
    fn origin_id(&self) -> &str {
        &self.origin_id
    }
}

/// `softmax(1 - |delta - p|)`, shifted by the maximum before exponentiating.
pub fn sampling_weights(probs: &[f64], delta: f64) -> Result<Vec<f64>, AssessError> {
    if probs.is_empty() {
        return Err(AssessError::EmptyInput);
    }
    let xi: Vec<f64> = probs.iter().map(|p| 1.0 - (delta - p).abs()).collect();
    let max = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = xi.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / sum).collect())
}

/// Draws `k` distinct indices, each draw proportional to the remaining
/// weights.
pub fn weighted_without_replacement<R: Rng>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(k.min(weights.len()));
    while out.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pos = remaining.len() - 1;
        for (p, &i) in remaining.iter().enumerate() {
            if target < weights[i] {
                pos = p;
                break;
            }
            target -= weights[i];
        }
        out.push(remaining.remove(pos));
    }
    out
}

/// Selects up to `per_origin` candidates for every origin. Origins appear in
/// order of first occurrence and selected candidates keep their input order.
/// Randomness is derived per origin from `seed`.
pub fn select<'a, C: Candidate>(
    candidates: &'a [C],
    confidences: &HashMap<String, f64>,
    cfg: &SelectionConfig,
    seed: u64,
) -> Result<Vec<&'a C>, AssessError> {
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for (i, c) in candidates.iter().enumerate() {
        let g = *slot.entry(c.origin_id()).or_insert_with(|| {
            groups.push((c.origin_id(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }

    let needs_scores = matches!(cfg.strategy, Strategy::DeltaK | Strategy::TopK);
    let prob = |i: usize| -> Result<f64, AssessError> {
        let id = candidates[i].aug_id();
        let p = *confidences.get(id).ok_or_else(|| AssessError::MissingConfidence(id.to_string()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(AssessError::InvalidProbability { aug_id: id.to_string(), prob: p });
        }
        Ok(p)
    };

    let mut out = Vec::new();
    for (origin, members) in groups {
        let k = cfg.per_origin.min(members.len());
        let probs: Vec<f64> =
            if needs_scores { members.iter().map(|&i| prob(i)).collect::<Result<_, _>>()? } else { Vec::new() };
        let mut rng = origin_rng(seed, "assess", origin);
        let mut picked: Vec<usize> = match cfg.strategy {
            Strategy::All => (0..members.len()).collect(),
            Strategy::Random => sample(&mut rng, members.len(), k).into_vec(),
            Strategy::TopK => {
                let mut order: Vec<usize> = (0..members.len()).collect();
                order.sort_by(|&a, &b| {
                    probs[b]
                        .total_cmp(&probs[a])
                        .then_with(|| candidates[members[a]].aug_id().cmp(candidates[members[b]].aug_id()))
                });
                order.truncate(k);
                order
            }
            Strategy::DeltaK => {
                let w = sampling_weights(&probs, cfg.delta)?;
                weighted_without_replacement(&w, k, &mut rng)
            }
        };
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|p| &candidates[members[p]]));
    }
    Ok(out)
}

/// Builds the aug-id -> probability map, rejecting out-of-range values.
pub fn confidence_map(records: &[ConfidenceRecord]) -> Result<HashMap<String, f64>, AssessError> {
    let mut map = HashMap::with_capacity(records.len());
    for r in records {
        if !(0.0..=1.0).contains(&r.prob_true_label) {
            return Err(AssessError::InvalidProbability { aug_id: r.aug_id.clone(), prob: r.prob_true_label });
        }
        map.insert(r.aug_id.clone(), r.prob_true_label);
    }
    Ok(map)
}

/// Per-origin counts, handy for reports.
pub fn count_by_origin<C: Candidate>(items: &[&C]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for c in items {
        *m.entry(c.origin_id().to_string()).or_default() += 1;
    }
    m
}
