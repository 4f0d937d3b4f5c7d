#![allow(dead_code)]

use std::fs::File;
use std::path::PathBuf;

use kgaug_core::dataset::{Dataset, InputMode};
use kgaug_core::pipeline::{AugmentPaths, KgPaths, LexiconPaths};
use kgaug_core::{EmbeddingTable, KnowledgeGraph};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn kg_paths() -> KgPaths {
    KgPaths { entities: fixture("entities.tsv"), triples: fixture("triples.tsv") }
}

pub fn medical_kg() -> KnowledgeGraph {
    KnowledgeGraph::load(File::open(fixture("entities.tsv")).unwrap(), File::open(fixture("triples.tsv")).unwrap())
        .unwrap()
}

pub fn embeddings() -> EmbeddingTable {
    EmbeddingTable::load(File::open(fixture("embeddings.txt")).unwrap()).unwrap()
}

pub fn dataset() -> Dataset {
    Dataset::read(File::open(fixture("dataset.jsonl")).unwrap(), InputMode::Classification).unwrap()
}

pub fn augment_paths(dataset: PathBuf, out: PathBuf) -> AugmentPaths {
    AugmentPaths {
        kg: kg_paths(),
        embeddings: fixture("embeddings.txt"),
        dataset,
        output_dir: out,
        lexicon: LexiconPaths::default(),
        test: None,
    }
}

/// Independent 2-hop enumeration: breadth-first search to depth 1 over the
/// undirected triple graph, then every triple with an endpoint at distance
/// at most 1.
pub fn bfs_two_hop(kg: &KnowledgeGraph, e: kgaug_core::EntityId) -> std::collections::BTreeSet<kgaug_core::Triple> {
    use std::collections::{HashMap, VecDeque};
    let mut adj: HashMap<kgaug_core::EntityId, Vec<kgaug_core::EntityId>> = HashMap::new();
    for t in kg.triples() {
        adj.entry(t.head).or_default().push(t.tail);
        adj.entry(t.tail).or_default().push(t.head);
    }
    let mut dist = HashMap::from([(e, 0usize)]);
    let mut queue = VecDeque::from([e]);
    while let Some(x) = queue.pop_front() {
        if dist[&x] == 1 {
            continue;
        }
        for &y in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(&y) {
                dist.insert(y, dist[&x] + 1);
                queue.push_back(y);
            }
        }
    }
    kg.triples().iter().filter(|t| dist.contains_key(&t.head) || dist.contains_key(&t.tail)).copied().collect()
}
