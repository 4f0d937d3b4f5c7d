//! Training-data entity retrieval.
//!
//! Each training text is reduced to an expression template by masking its
//! mentions with `[category]`. Templates are embedded with TF-IDF and grouped
//! with k-means; a mention is then replaced by a same-category entity found in
//! another training text that carries the same label but sits in a different
//! cluster. Related pairs draw a same-relation pair the same way.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{Label, LabeledText};
use crate::kg::{CategoryId, EntityId, KnowledgeGraph, RelationId};
use crate::localize::{base_tokens, MentionMatch, RelatedPair, SEP_MARKER};
use crate::sample::{compose, AugmentedSample, PairSlot, Replacement, Role, Unit, View};

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainerError {
    #[error("cannot vectorize an empty corpus")]
    EmptyCorpus,
    #[error("k = {k} is invalid for {rows} rows")]
    KTooLarge { k: usize, rows: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub origin_id: String,
    pub masked_text: String,
    pub label: Label,
}

/// Replaces every mention span with `[category]`.
pub fn mask_template(origin: &LabeledText, matches: &[MentionMatch], kg: &KnowledgeGraph) -> Template {
    let mut masked = origin.text.clone();
    let mut order: Vec<&MentionMatch> = matches.iter().collect();
    order.sort_by_key(|m| std::cmp::Reverse(m.span.start));
    for m in order {
        let placeholder = format!("[{}]", kg.category_name(kg.category(m.entity)));
        masked.replace_range(m.span.start..m.span.end, &placeholder);
    }
    Template { origin_id: origin.id.clone(), masked_text: masked, label: origin.label.clone() }
}

/// Lower-cased template tokens. A bracketed placeholder is one token; the
/// rest is split like localization input (words, single CJK characters).
pub fn template_tokens(masked: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = masked;
    loop {
        let open = rest.find('[');
        let close = open.and_then(|o| rest[o..].find(']').map(|c| o + c));
        let (before, placeholder, after) = match (open, close) {
            (Some(o), Some(c)) => (&rest[..o], Some(&rest[o..=c]), &rest[c + 1..]),
            _ => (rest, None, ""),
        };
        out.extend(base_tokens(before).into_iter().map(|(s, e)| before[s..e].to_lowercase()));
        match placeholder {
            Some(p) if p == SEP_MARKER => {}
            Some(p) => out.push(p.to_lowercase()),
            None => break,
        }
        rest = after;
    }
    out
}

/// Sparse row with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn from_dense(v: &[f64]) -> Self {
        let mut row = SparseRow::default();
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                row.indices.push(i);
                row.values.push(x);
            }
        }
        row
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            v[i] = x;
        }
        v
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, &x)| x * dense[i]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct TfidfMatrix {
    /// Sorted vocabulary; column `i` is `vocabulary[i]`.
    pub vocabulary: Vec<String>,
    pub idf: Vec<f64>,
    pub rows: Vec<SparseRow>,
}

/// Raw term counts times smoothed idf `ln((1+N)/(1+df)) + 1`, rows
/// L2-normalised. Empty templates give all-zero rows.
pub fn tfidf_vectors(templates: &[Template]) -> Result<TfidfMatrix, TrainerError> {
    if templates.is_empty() {
        return Err(TrainerError::EmptyCorpus);
    }
    let docs: Vec<Vec<String>> = templates.iter().map(|t| template_tokens(&t.masked_text)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &docs {
        let uniq: HashSet<&str> = d.iter().map(String::as_str).collect();
        for term in uniq {
            *df.entry(term).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let vocabulary: Vec<String> = df.keys().map(|s| s.to_string()).collect();
    let column: HashMap<&str, usize> = df.keys().enumerate().map(|(i, s)| (*s, i)).collect();
    let idf: Vec<f64> = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();

    let rows = docs
        .iter()
        .map(|d| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for term in d {
                *counts.entry(column[term.as_str()]).or_default() += 1.0;
            }
            let mut row = SparseRow {
                indices: counts.keys().copied().collect(),
                values: counts.iter().map(|(&i, &c)| c * idf[i]).collect(),
            };
            let norm = row.norm_sq().sqrt();
            if norm > 0.0 {
                row.values.iter_mut().for_each(|x| *x /= norm);
            }
            row
        })
        .collect();
    Ok(TfidfMatrix { vocabulary, idf, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    #[serde(skip)]
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per input row.
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }

    /// Model with a fixed assignment and no geometry, for callers that already
    /// know the clustering.
    pub fn from_assignment(k: usize, assignment: Vec<usize>) -> Self {
        Self { k, centroids: Vec::new(), assignment, inertia: 0.0, inertia_history: Vec::new(), iterations: 0 }
    }
}

/// `min(20, max(2, floor(sqrt(n / 2))))`, never more than `n`.
pub fn default_k(n: usize) -> usize {
    let k = ((n as f64 / 2.0).sqrt().floor() as usize).clamp(2, 20);
    k.min(n)
}

fn sq_dist(row: &SparseRow, row_norm: f64, c: &[f64], c_norm: f64) -> f64 {
    (row_norm + c_norm - 2.0 * row.dot_dense(c)).max(0.0)
}

fn nearest(row: &SparseRow, row_norm: f64, centroids: &[Vec<f64>], norms: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(row, row_norm, c, norms[j]);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp<R: Rng>(rows: &[SparseRow], norms: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![rows[first].to_dense(dim)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(&rows[i], norms[i], &centroids[0], norms[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive mass")
        } else {
            // every remaining point coincides with a centre
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = rows[pick].to_dense(dim);
        let cn = norms[pick];
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(&rows[i], norms[i], &c, cn));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's k-means with k-means++ seeding. Stops after [`MAX_ITERATIONS`] or
/// once no centroid moves more than [`SHIFT_TOLERANCE`].
pub fn cluster_templates(rows: &[SparseRow], dim: usize, k: usize, seed: u64) -> Result<ClusterModel, TrainerError> {
    let n = rows.len();
    if k == 0 || k > n {
        return Err(TrainerError::KTooLarge { k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norms: Vec<f64> = rows.iter().map(SparseRow::norm_sq).collect();
    let mut centroids = kmeans_pp(rows, &norms, dim, k, &mut rng);
    let mut history = Vec::new();
    let mut assignment = vec![0; n];
    let mut iterations = 0;

    loop {
        let c_norms: Vec<f64> = centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (j, d) = nearest(&rows[i], norms[i], &centroids, &c_norms);
            assignment[i] = j;
            dists[i] = d;
        }
        history.push(dists.iter().sum());
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (i, row) in rows.iter().enumerate() {
            let a = assignment[i];
            sizes[a] += 1;
            for (&c, &x) in row.indices.iter().zip(&row.values) {
                sums[a][c] += x;
            }
        }
        // empty clusters take over the point farthest from its centre
        for j in 0..k {
            if sizes[j] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                let from = assignment[i];
                for (&c, &x) in rows[i].indices.iter().zip(&rows[i].values) {
                    sums[from][c] -= x;
                    sums[j][c] += x;
                }
                sizes[from] -= 1;
                sizes[j] = 1;
                assignment[i] = j;
                dists[i] = 0.0;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if sizes[j] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[j] as f64;
            let moved: f64 = sums[j].iter().zip(&centroids[j]).map(|(s, c)| (s * inv - c).powi(2)).sum::<f64>().sqrt();
            shift = shift.max(moved);
            centroids[j] = sums[j].iter().map(|s| s * inv).collect();
        }
        if shift < SHIFT_TOLERANCE {
            // converged: one more assignment pass records the final state
            let c_norms: Vec<f64> = centroids.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
            let mut total = 0.0;
            for i in 0..n {
                let (j, d) = nearest(&rows[i], norms[i], &centroids, &c_norms);
                assignment[i] = j;
                total += d;
            }
            history.push(total);
            break;
        }
    }

    Ok(ClusterModel {
        k,
        centroids,
        assignment,
        inertia: *history.last().expect("at least one pass"),
        inertia_history: history,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Donor {
    pub entity: EntityId,
    /// Row of the donor text in the indexed dataset.
    pub origin: usize,
    pub cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDonor {
    pub head: EntityId,
    pub tail: EntityId,
    pub origin: usize,
    pub cluster: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ReplacementIndex {
    origin_ids: Vec<String>,
    labels: Vec<Label>,
    clusters: Vec<usize>,
    rows: HashMap<String, usize>,
    by_label_category: HashMap<(Label, CategoryId), Vec<Donor>>,
    by_label_relation: HashMap<(Label, RelationId), Vec<PairDonor>>,
}

impl ReplacementIndex {
    /// `localized[i]` holds the matches and pairs of `dataset[i]`;
    /// `clusters.assignment[i]` its cluster.
    pub fn build(
        dataset: &[LabeledText],
        localized: &[(Vec<MentionMatch>, Vec<RelatedPair>)],
        kg: &KnowledgeGraph,
        clusters: &ClusterModel,
    ) -> Self {
        assert_eq!(dataset.len(), localized.len(), "one localization per origin");
        assert_eq!(dataset.len(), clusters.assignment.len(), "one cluster per origin");
        let mut idx = ReplacementIndex {
            origin_ids: dataset.iter().map(|d| d.id.clone()).collect(),
            labels: dataset.iter().map(|d| d.label.clone()).collect(),
            clusters: clusters.assignment.clone(),
            rows: dataset.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect(),
            ..Default::default()
        };
        for (row, (origin, (matches, pairs))) in dataset.iter().zip(localized).enumerate() {
            let cluster = clusters.assignment[row];
            let mut seen = HashSet::new();
            for m in matches {
                if !seen.insert(m.entity) {
                    continue;
                }
                idx.by_label_category.entry((origin.label.clone(), kg.category(m.entity))).or_default().push(Donor {
                    entity: m.entity,
                    origin: row,
                    cluster,
                });
            }
            let mut seen = HashSet::new();
            for p in pairs {
                let (head, tail) = (matches[p.head].entity, matches[p.tail].entity);
                if !seen.insert((head, p.relation, tail)) {
                    continue;
                }
                idx.by_label_relation.entry((origin.label.clone(), p.relation)).or_default().push(PairDonor {
                    head,
                    tail,
                    origin: row,
                    cluster,
                });
            }
        }
        idx
    }

    pub fn row_of(&self, origin_id: &str) -> Option<usize> {
        self.rows.get(origin_id).copied()
    }

    pub fn cluster_of(&self, origin_id: &str) -> Option<usize> {
        self.row_of(origin_id).map(|r| self.clusters[r])
    }

    pub fn label_of(&self, origin_id: &str) -> Option<&Label> {
        self.row_of(origin_id).map(|r| &self.labels[r])
    }

    pub fn origin_id(&self, row: usize) -> &str {
        &self.origin_ids[row]
    }

    pub fn category_donors(&self, label: &Label, category: CategoryId) -> &[Donor] {
        self.by_label_category.get(&(label.clone(), category)).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn pair_donors(&self, label: &Label, relation: RelationId) -> &[PairDonor] {
        self.by_label_relation.get(&(label.clone(), relation)).map(Vec::as_slice).unwrap_or_default()
    }
}

pub fn augment_trainer<R: Rng>(
    origin: &LabeledText,
    matches: &[MentionMatch],
    pairs: &[RelatedPair],
    idx: &ReplacementIndex,
    kg: &KnowledgeGraph,
    rng: &mut R,
    count: usize,
) -> Vec<AugmentedSample> {
    let Some(own_cluster) = idx.cluster_of(&origin.id) else {
        return Vec::new();
    };
    let label = &origin.label;
    let mut paired = vec![false; matches.len()];
    let mut units = Vec::new();

    for (pid, p) in pairs.iter().enumerate() {
        paired[p.head] = true;
        paired[p.tail] = true;
        let (hm, tm) = (&matches[p.head], &matches[p.tail]);
        let mut seen = HashSet::new();
        let options = idx
            .pair_donors(label, p.relation)
            .iter()
            .filter(|d| d.cluster != own_cluster)
            .filter(|d| (d.head, d.tail) != (hm.entity, tm.entity))
            .filter(|d| kg.category(d.head) == kg.category(hm.entity) && kg.category(d.tail) == kg.category(tm.entity))
            .filter(|d| seen.insert((d.head, d.tail)))
            .map(|d| {
                let source = Some(idx.origin_id(d.origin).to_string());
                vec![
                    Replacement {
                        span: hm.span.clone(),
                        old_entity: hm.entity,
                        new_entity: d.head,
                        pair: Some(PairSlot { pair: pid, role: Role::Head, relation: p.relation }),
                        source: source.clone(),
                    },
                    Replacement {
                        span: tm.span.clone(),
                        old_entity: tm.entity,
                        new_entity: d.tail,
                        pair: Some(PairSlot { pair: pid, role: Role::Tail, relation: p.relation }),
                        source,
                    },
                ]
            })
            .collect();
        units.push(Unit { options });
    }

    for (m, _) in matches.iter().zip(&paired).filter(|(_, &p)| !p) {
        let mut seen = HashSet::new();
        let options = idx
            .category_donors(label, kg.category(m.entity))
            .iter()
            .filter(|d| d.cluster != own_cluster && d.entity != m.entity)
            .filter(|d| seen.insert(d.entity))
            .map(|d| {
                vec![Replacement {
                    span: m.span.clone(),
                    old_entity: m.entity,
                    new_entity: d.entity,
                    pair: None,
                    source: Some(idx.origin_id(d.origin).to_string()),
                }]
            })
            .collect();
        units.push(Unit { options });
    }

    compose(origin, &units, View::Trainer, count, rng, |e| kg.name(e))
}

/// Checks label consistency, expression diversity and category/relation
/// preservation of a TrainER sample.
pub fn validate_trainer(sample: &AugmentedSample, idx: &ReplacementIndex, kg: &KnowledgeGraph) -> Result<(), String> {
    let own = idx.cluster_of(&sample.origin_id).ok_or_else(|| format!("{}: origin not clustered", sample.aug_id))?;
    if idx.label_of(&sample.origin_id) != Some(&sample.label) {
        return Err(format!("{}: label differs from origin", sample.aug_id));
    }
    for r in &sample.replacements {
        let src = r.source.as_deref().ok_or_else(|| format!("{}: replacement without donor", sample.aug_id))?;
        let row = idx.row_of(src).ok_or_else(|| format!("{}: unknown donor {src}", sample.aug_id))?;
        if idx.labels[row] != sample.label {
            return Err(format!("{}: donor {src} has another label", sample.aug_id));
        }
        if idx.clusters[row] == own {
            return Err(format!("{}: donor {src} shares the origin's cluster", sample.aug_id));
        }
        if kg.category(r.old_entity) != kg.category(r.new_entity) {
            return Err(format!("{}: category changed", sample.aug_id));
        }
        match r.pair {
            None => {
                let found = idx
                    .category_donors(&sample.label, kg.category(r.new_entity))
                    .iter()
                    .any(|d| d.entity == r.new_entity && d.origin == row);
                if !found {
                    return Err(format!("{}: donor {src} never mentions the entity", sample.aug_id));
                }
            }
            Some(slot) if slot.role == Role::Head => {
                let tail = sample
                    .replacements
                    .iter()
                    .find(|t| t.pair.is_some_and(|s| s.pair == slot.pair && s.role == Role::Tail))
                    .ok_or_else(|| format!("{}: pair without tail", sample.aug_id))?;
                let found = idx
                    .pair_donors(&sample.label, slot.relation)
                    .iter()
                    .any(|d| d.head == r.new_entity && d.tail == tail.new_entity && d.origin == row);
                if !found {
                    return Err(format!("{}: donor pair does not carry the relation", sample.aug_id));
                }
            }
            Some(_) => {}
        }
    }
    Ok(())
}
