//! In-memory domain knowledge graph.
//!
//! Entities carry exactly one category. Relational triples are directed, but
//! neighbourhood queries treat every triple as an undirected edge, so an
//! entity's involved triples are the ones where it is head *or* tail.
//!
//! The graph is immutable once built. [`KnowledgeGraph::perturb`] returns a
//! fresh graph.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Relation name reserved for entity-category membership. Categories live in
/// the entity file, so this name may not appear in the triple file.
pub const RESERVED_RELATION: &str = "BelongTo";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CategoryId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RelationId(pub u32);

impl EntityId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A directed relational triple `(head, relation, tail)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }

    pub fn touches(&self, e: EntityId) -> bool {
        self.head == e || self.tail == e
    }

    /// The endpoint opposite to `e`, if `e` is an endpoint.
    pub fn other(&self, e: EntityId) -> Option<EntityId> {
        if self.head == e {
            Some(self.tail)
        } else if self.tail == e {
            Some(self.head)
        } else {
            None
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("{file} line {line}: malformed row ({reason})")]
    MalformedRow { file: &'static str, line: usize, reason: String },
    #[error("entity `{entity}` declared with two categories: `{first}` and `{second}`")]
    DuplicateEntityCategory { entity: String, first: String, second: String },
    #[error("triple references undeclared entity `{0}`")]
    UnknownEntityInTriple(String),
    #[error("self-loop triple on entity `{0}`")]
    SelfLoop(String),
    #[error("relation name `{RESERVED_RELATION}` is reserved; categories belong in the entity file")]
    ReservedRelation,
    #[error("unknown entity id {0}")]
    UnknownEntity(u32),
    #[error("perturbation needs at least two {0}")]
    InsufficientDiversity(&'static str),
    #[error("perturbation percentage must lie in [0, 100], got {0}")]
    InvalidPercentage(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Case-folding used for entity lookup throughout the crate.
pub fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Incremental construction of a [`KnowledgeGraph`].
#[derive(Debug, Default, Clone)]
pub struct KgBuilder {
    entity_names: Vec<String>,
    entity_category: Vec<CategoryId>,
    entity_index: HashMap<String, EntityId>,
    category_names: Vec<String>,
    category_index: HashMap<String, CategoryId>,
    relation_names: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    triples: BTreeSet<Triple>,
}

impl KgBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_category(&mut self, name: &str) -> CategoryId {
        if let Some(&id) = self.category_index.get(name) {
            return id;
        }
        let id = CategoryId(self.category_names.len() as u32);
        self.category_names.push(name.to_string());
        self.category_index.insert(name.to_string(), id);
        id
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelationId(self.relation_names.len() as u32);
        self.relation_names.push(name.to_string());
        self.relation_index.insert(name.to_string(), id);
        id
    }

    /// Declares an entity. Re-declaring the same (case-folded) entity with the
    /// same category is a no-op.
    pub fn add_entity(&mut self, name: &str, category: &str) -> Result<EntityId, KgError> {
        let key = fold(name);
        let cat = self.intern_category(category.trim());
        if let Some(&id) = self.entity_index.get(&key) {
            let existing = self.entity_category[id.idx()];
            if existing != cat {
                return Err(KgError::DuplicateEntityCategory {
                    entity: name.to_string(),
                    first: self.category_names[existing.0 as usize].clone(),
                    second: category.to_string(),
                });
            }
            return Ok(id);
        }
        let id = EntityId(self.entity_names.len() as u32);
        self.entity_names.push(name.split_whitespace().collect::<Vec<_>>().join(" "));
        self.entity_category.push(cat);
        self.entity_index.insert(key, id);
        Ok(id)
    }

    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Result<(), KgError> {
        let relation = relation.trim();
        if relation == RESERVED_RELATION {
            return Err(KgError::ReservedRelation);
        }
        let h = *self.entity_index.get(&fold(head)).ok_or_else(|| KgError::UnknownEntityInTriple(head.to_string()))?;
        let t = *self.entity_index.get(&fold(tail)).ok_or_else(|| KgError::UnknownEntityInTriple(tail.to_string()))?;
        if h == t {
            return Err(KgError::SelfLoop(head.to_string()));
        }
        let r = self.intern_relation(relation);
        self.triples.insert(Triple::new(h, r, t));
        Ok(())
    }

    pub fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(
            self.entity_names,
            self.entity_category,
            self.entity_index,
            self.category_names,
            self.relation_names,
            self.triples.into_iter().collect(),
        )
    }
}

/// Summary counts printed by `kgaug stats`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KgStats {
    pub entities: usize,
    pub categories: usize,
    pub relation_types: usize,
    pub triples: usize,
}

impl fmt::Display for KgStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entities: {}\ncategories: {}\nrelation types: {}\ntriples: {}",
            self.entities, self.categories, self.relation_types, self.triples
        )
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    entity_category: Vec<CategoryId>,
    entity_index: HashMap<String, EntityId>,
    category_names: Vec<String>,
    category_index: HashMap<String, CategoryId>,
    relation_names: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    /// Sorted and deduplicated.
    triples: Vec<Triple>,
    /// Triple indices incident to each entity.
    adjacency: Vec<Vec<usize>>,
    by_category: Vec<Vec<EntityId>>,
    by_relation: Vec<Vec<usize>>,
}

impl KnowledgeGraph {
    fn from_parts(
        entity_names: Vec<String>,
        entity_category: Vec<CategoryId>,
        entity_index: HashMap<String, EntityId>,
        category_names: Vec<String>,
        relation_names: Vec<String>,
        mut triples: Vec<Triple>,
    ) -> Self {
        triples.sort_unstable();
        triples.dedup();
        let mut adjacency = vec![Vec::new(); entity_names.len()];
        let mut by_relation = vec![Vec::new(); relation_names.len()];
        for (i, t) in triples.iter().enumerate() {
            adjacency[t.head.idx()].push(i);
            adjacency[t.tail.idx()].push(i);
            by_relation[t.relation.0 as usize].push(i);
        }
        let mut by_category = vec![Vec::new(); category_names.len()];
        for (i, c) in entity_category.iter().enumerate() {
            by_category[c.0 as usize].push(EntityId(i as u32));
        }
        let category_index =
            category_names.iter().enumerate().map(|(i, n)| (n.clone(), CategoryId(i as u32))).collect();
        let relation_index =
            relation_names.iter().enumerate().map(|(i, n)| (n.clone(), RelationId(i as u32))).collect();
        Self {
            entity_names,
            entity_category,
            entity_index,
            category_names,
            category_index,
            relation_names,
            relation_index,
            triples,
            adjacency,
            by_category,
            by_relation,
        }
    }

    /// Loads the graph from an `entity<TAB>category` stream and a
    /// `head<TAB>relation<TAB>tail` stream. Blank and `#` lines are skipped.
    pub fn load<E: Read, T: Read>(entities: E, triples: T) -> Result<Self, KgError> {
        let mut builder = KgBuilder::new();
        for row in tsv_rows(entities, "entities", 2) {
            let (_, cols) = row?;
            builder.add_entity(&cols[0], &cols[1])?;
        }
        for row in tsv_rows(triples, "triples", 3) {
            let (_, cols) = row?;
            builder.add_triple(&cols[0], &cols[1], &cols[2])?;
        }
        Ok(builder.build())
    }

    pub fn stats(&self) -> KgStats {
        KgStats {
            entities: self.entity_names.len(),
            categories: self.category_names.len(),
            relation_types: self.relation_names.len(),
            triples: self.triples.len(),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entity_names.len() as u32).map(EntityId)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, e: EntityId) -> bool {
        e.idx() < self.entity_names.len()
    }

    fn check(&self, e: EntityId) -> Result<(), KgError> {
        if self.contains(e) {
            Ok(())
        } else {
            Err(KgError::UnknownEntity(e.0))
        }
    }

    /// Canonical surface string of an entity.
    pub fn name(&self, e: EntityId) -> &str {
        &self.entity_names[e.idx()]
    }

    pub fn category(&self, e: EntityId) -> CategoryId {
        self.entity_category[e.idx()]
    }

    pub fn category_name(&self, c: CategoryId) -> &str {
        &self.category_names[c.0 as usize]
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        &self.relation_names[r.0 as usize]
    }

    /// Case-folded entity lookup.
    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(&fold(name)).copied()
    }

    pub fn category_id(&self, name: &str) -> Option<CategoryId> {
        self.category_index.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entities_in_category(&self, c: CategoryId) -> &[EntityId] {
        &self.by_category[c.0 as usize]
    }

    pub fn triples_of_relation(&self, r: RelationId) -> impl Iterator<Item = &Triple> + '_ {
        self.by_relation[r.0 as usize].iter().map(move |&i| &self.triples[i])
    }

    pub fn has_triple(&self, t: &Triple) -> bool {
        self.triples.binary_search(t).is_ok()
    }

    fn incident(&self, e: EntityId) -> impl Iterator<Item = &Triple> + '_ {
        self.adjacency[e.idx()].iter().map(move |&i| &self.triples[i])
    }

    /// Triples whose head or tail is `e`.
    pub fn involved_triples(&self, e: EntityId) -> Result<BTreeSet<Triple>, KgError> {
        self.check(e)?;
        Ok(self.incident(e).copied().collect())
    }

    /// Entities sharing a triple with `e`, in either direction.
    pub fn adjacent_entities(&self, e: EntityId) -> Result<BTreeSet<EntityId>, KgError> {
        self.check(e)?;
        Ok(self.incident(e).filter_map(|t| t.other(e)).collect())
    }

    /// Involved triples of `e` together with the involved triples of every
    /// adjacent entity.
    pub fn two_hop_candidates(&self, e: EntityId) -> Result<BTreeSet<Triple>, KgError> {
        self.check(e)?;
        let mut out: BTreeSet<Triple> = BTreeSet::new();
        for t in self.incident(e) {
            out.insert(*t);
            let n = t.other(e).expect("incident triple");
            out.extend(self.incident(n).copied());
        }
        Ok(out)
    }

    /// Endpoints of the 2-hop candidate triples that share `e`'s category,
    /// excluding `e`.
    pub fn same_category_candidates(&self, e: EntityId) -> Result<BTreeSet<EntityId>, KgError> {
        let cat = self.category(e);
        let pool = self.two_hop_candidates(e)?;
        Ok(pool.iter().flat_map(|t| [t.head, t.tail]).filter(|&x| x != e && self.category(x) == cat).collect())
    }

    /// Triples directly linking `a` and `b` in either orientation.
    pub fn triples_between(&self, a: EntityId, b: EntityId) -> Vec<Triple> {
        if !self.contains(a) || !self.contains(b) {
            return Vec::new();
        }
        let (small, other) =
            if self.adjacency[a.idx()].len() <= self.adjacency[b.idx()].len() { (a, b) } else { (b, a) };
        let mut found: Vec<Triple> = self.incident(small).filter(|t| t.other(small) == Some(other)).copied().collect();
        found.sort_unstable();
        found
    }

    /// Returns a copy in which `ceil(n% * |E|)` entities get a different
    /// category and `ceil(n% * |T|)` triples get a different relation type.
    ///
    /// A relation change that would collide with an existing triple is not
    /// allowed, so the triple count is preserved.
    pub fn perturb(&self, n_percent: f64, seed: u64) -> Result<Self, KgError> {
        if !(0.0..=100.0).contains(&n_percent) || n_percent.is_nan() {
            return Err(KgError::InvalidPercentage(n_percent));
        }
        let n_ent = perturb_count(n_percent, self.entity_names.len());
        let n_tri = perturb_count(n_percent, self.triples.len());
        if n_ent > 0 && self.category_names.len() < 2 {
            return Err(KgError::InsufficientDiversity("categories"));
        }
        if n_tri > 0 && self.relation_names.len() < 2 {
            return Err(KgError::InsufficientDiversity("relation types"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut categories = self.entity_category.clone();
        let mut chosen = sample(&mut rng, categories.len(), n_ent).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            categories[i] = CategoryId(draw_other(&mut rng, categories[i].0, self.category_names.len()));
        }

        let mut triples = self.triples.clone();
        let mut present: BTreeSet<Triple> = triples.iter().copied().collect();
        let n_rel = self.relation_names.len() as u32;
        let mut order: Vec<usize> = (0..triples.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let mut changed = 0;
        for i in order {
            if changed == n_tri {
                break;
            }
            let t = triples[i];
            let options: Vec<u32> = (0..n_rel)
                .filter(|&r| r != t.relation.0)
                .filter(|&r| !present.contains(&Triple::new(t.head, RelationId(r), t.tail)))
                .collect();
            if options.is_empty() {
                continue;
            }
            let r = options[rng.gen_range(0..options.len())];
            let nt = Triple::new(t.head, RelationId(r), t.tail);
            present.remove(&t);
            present.insert(nt);
            triples[i] = nt;
            changed += 1;
        }
        if changed < n_tri {
            return Err(KgError::InsufficientDiversity("free relation slots"));
        }

        Ok(Self::from_parts(
            self.entity_names.clone(),
            categories,
            self.entity_index.clone(),
            self.category_names.clone(),
            self.relation_names.clone(),
            triples,
        ))
    }

    /// Writes the graph back out in the two tab-separated formats accepted by
    /// [`KnowledgeGraph::load`]. Entities keep declaration order; triples are
    /// sorted by (head, relation, tail) name.
    pub fn write_tsv<E: Write, T: Write>(&self, mut entities: E, mut triples: T) -> std::io::Result<()> {
        for e in self.entities() {
            writeln!(entities, "{}\t{}", self.name(e), self.category_name(self.category(e)))?;
        }
        let mut rows: Vec<(&str, &str, &str)> = self
            .triples
            .iter()
            .map(|t| (self.name(t.head), self.relation_name(t.relation), self.name(t.tail)))
            .collect();
        rows.sort_unstable();
        for (h, r, t) in rows {
            writeln!(triples, "{h}\t{r}\t{t}")?;
        }
        Ok(())
    }
}

fn draw_other<R: Rng>(rng: &mut R, current: u32, n: usize) -> u32 {
    let pick = rng.gen_range(0..n as u32 - 1);
    if pick >= current {
        pick + 1
    } else {
        pick
    }
}

/// `ceil(n% * total)`, clamped to `total`. Any positive percentage changes at
/// least one item when `total > 0`.
pub fn perturb_count(n_percent: f64, total: usize) -> usize {
    let raw = n_percent * total as f64 / 100.0;
    if raw <= 0.0 {
        return 0;
    }
    // absorb representation error so that e.g. 10% of 10 is exactly 1
    let count = (raw - 1e-9).ceil().max(1.0) as usize;
    count.min(total)
}

type Row = Result<(usize, Vec<String>), KgError>;

fn tsv_rows<R: Read>(src: R, file: &'static str, width: usize) -> impl Iterator<Item = Row> {
    BufReader::new(src).lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(KgError::Io(e))),
        };
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            return None;
        }
        let cols: Vec<String> = trimmed.split('\t').map(|c| c.trim().to_string()).collect();
        if cols.len() != width {
            return Some(Err(KgError::MalformedRow {
                file,
                line: line_no,
                reason: format!("expected {width} tab-separated columns, found {}", cols.len()),
            }));
        }
        if cols.iter().any(|c| c.is_empty()) {
            return Some(Err(KgError::MalformedRow { file, line: line_no, reason: "empty column".into() }));
        }
        Some(Ok((line_no, cols)))
    })
}

/// Keeps only the triples of `candidates` whose relation is `r`.
pub fn triples_with_relation(candidates: &BTreeSet<Triple>, r: RelationId) -> BTreeSet<Triple> {
    candidates.iter().filter(|t| t.relation == r).copied().collect()
}
