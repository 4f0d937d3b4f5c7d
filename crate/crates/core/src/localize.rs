//! Mapping text spans onto knowledge-graph entities.
//!
//! Text is segmented with the entity dictionary taking precedence over the
//! base tokenizer, every token is reduced to a lemma by table lookup, and each
//! lemma is linked either by exact (case-folded) match or by the best inner
//! product against the entity embedding matrix when that clears `lambda`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use crate::embed::{dot, EmbeddingTable};
use crate::kg::{fold, EntityId, KnowledgeGraph, RelationId, Triple};

/// Separator placed between question and answer in QA mode. Never tokenized.
pub const SEP_MARKER: &str = "[SEP]";

pub const DEFAULT_LAMBDA: f64 = 0.9;

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "before", "being",
    "but", "by", "can", "could", "did", "do", "does", "doing", "for", "from", "had", "has", "have", "having", "he",
    "her", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on", "or",
    "our", "she", "should", "so", "some", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "too", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "why",
    "will", "with", "would", "you", "your",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSpan {
    /// Byte offsets into the source text.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MentionMatch {
    pub span: TokenSpan,
    pub entity: EntityId,
    pub score: f64,
}

/// Two mentions certified as related by a KG triple. `head` and `tail` index
/// into the match list the pair was computed from and follow the triple's
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelatedPair {
    pub head: usize,
    pub tail: usize,
    pub relation: RelationId,
    pub triple: Triple,
}

#[derive(Debug, Clone)]
pub struct LocalizeConfig {
    pub lambda: f64,
    /// `false` disables the embedding path entirely (exact matching only).
    pub sim_match: bool,
    pub stopwords: HashSet<String>,
    /// Case-folded form -> lemma.
    pub lemmas: HashMap<String, String>,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, sim_match: true, stopwords: default_stopwords(), lemmas: HashMap::new() }
    }
}

pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// One token per line; blank and `#` lines ignored.
pub fn load_stopwords<R: Read>(src: R) -> std::io::Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in BufReader::new(src).lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.insert(fold(t));
        }
    }
    Ok(out)
}

/// `form<TAB>lemma` rows.
pub fn load_lemmas<R: Read>(src: R) -> std::io::Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(src).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(form), Some(lemma), None) if !form.trim().is_empty() && !lemma.trim().is_empty() => {
                out.insert(fold(form), fold(lemma));
            }
            _ => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("lemma table line {}: expected `form<TAB>lemma`", i + 1),
                ))
            }
        }
    }
    Ok(out)
}

fn is_unsegmented(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF   // kana
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

/// Byte ranges of base tokens: alphanumeric runs, with each CJK character
/// standing alone. Whitespace, punctuation and the QA separator split tokens.
pub(crate) fn base_tokens(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    let mut i = 0;
    while i < text.len() {
        if text[i..].starts_with(SEP_MARKER) {
            if let Some(s) = run.take() {
                out.push((s, i));
            }
            i += SEP_MARKER.len();
            continue;
        }
        let c = text[i..].chars().next().expect("char boundary");
        let w = c.len_utf8();
        if is_unsegmented(c) {
            if let Some(s) = run.take() {
                out.push((s, i));
            }
            out.push((i, i + w));
        } else if c.is_alphanumeric() {
            run.get_or_insert(i);
        } else if let Some(s) = run.take() {
            out.push((s, i));
        }
        i += w;
    }
    if let Some(s) = run {
        out.push((s, text.len()));
    }
    out
}

fn is_numeric_token(s: &str) -> bool {
    s.chars().all(|c| c.is_numeric()) || s.parse::<f64>().is_ok()
}

/// Entity linker bound to one graph and one embedding table.
pub struct Localizer<'a> {
    kg: &'a KnowledgeGraph,
    table: &'a EmbeddingTable,
    cfg: LocalizeConfig,
    /// Longest entity name, in base tokens.
    max_entity_tokens: usize,
    /// Entities with a vector, ordered by canonical name for tie-breaking.
    entity_vectors: Vec<(EntityId, Vec<f64>)>,
}

impl<'a> Localizer<'a> {
    pub fn new(kg: &'a KnowledgeGraph, table: &'a EmbeddingTable, cfg: LocalizeConfig) -> Self {
        let max_entity_tokens = kg.entities().map(|e| base_tokens(kg.name(e)).len()).max().unwrap_or(0).max(1);
        let mut entity_vectors: Vec<(EntityId, Vec<f64>)> = if cfg.sim_match {
            kg.entities()
                .filter_map(|e| {
                    let name = fold(kg.name(e));
                    let toks: Vec<&str> = name.split_whitespace().collect();
                    table.embed_phrase(&toks).map(|v| (e, v))
                })
                .collect()
        } else {
            Vec::new()
        };
        entity_vectors.sort_by(|a, b| kg.name(a.0).cmp(kg.name(b.0)).then(a.0.cmp(&b.0)));
        Self { kg, table, cfg, max_entity_tokens, entity_vectors }
    }

    pub fn config(&self) -> &LocalizeConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &'a KnowledgeGraph {
        self.kg
    }

    fn lemma_of(&self, surface: &str) -> String {
        let folded = fold(surface);
        self.cfg.lemmas.get(&folded).cloned().unwrap_or(folded)
    }

    /// Dictionary-first segmentation with table-driven lemmatisation.
    pub fn preprocess(&self, text: &str) -> Vec<TokenSpan> {
        let toks = base_tokens(text);
        let mut out = Vec::with_capacity(toks.len());
        let mut i = 0;
        while i < toks.len() {
            let start = toks[i].0;
            let last = (i + self.max_entity_tokens).min(toks.len());
            let mut taken = None;
            // leftmost-longest dictionary hit
            for j in (i..last).rev() {
                let slice = &text[start..toks[j].1];
                if self.kg.entity(slice).is_some() {
                    taken = Some(j);
                    break;
                }
            }
            match taken {
                Some(j) => {
                    let surface = &text[start..toks[j].1];
                    out.push(TokenSpan { start, end: toks[j].1, surface: surface.to_string(), lemma: fold(surface) });
                    i = j + 1;
                }
                None => {
                    let (s, e) = toks[i];
                    out.push(TokenSpan {
                        start: s,
                        end: e,
                        surface: text[s..e].to_string(),
                        lemma: self.lemma_of(&text[s..e]),
                    });
                    i += 1;
                }
            }
        }
        out
    }

    fn best_entity(&self, v: &[f64]) -> Option<(EntityId, f64)> {
        let mut best: Option<(EntityId, f64)> = None;
        for (e, ev) in &self.entity_vectors {
            let s = dot(v, ev);
            // strict comparison keeps the lexicographically first entity on ties
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((*e, s));
            }
        }
        best
    }

    fn span_vector(&self, span: &TokenSpan) -> Option<Vec<f64>> {
        let lemma_toks: Vec<&str> = span.lemma.split_whitespace().collect();
        self.table.embed_phrase(&lemma_toks).or_else(|| {
            let folded = fold(&span.surface);
            let toks: Vec<&str> = folded.split_whitespace().collect();
            self.table.embed_phrase(&toks)
        })
    }

    /// Links the spans of `text` to entities. Returned matches are in text
    /// order and never overlap.
    pub fn localize(&self, text: &str) -> Vec<MentionMatch> {
        let mut out = Vec::new();
        for span in self.preprocess(text) {
            if let Some(e) = self.kg.entity(&span.lemma) {
                out.push(MentionMatch { span, entity: e, score: 1.0 });
                continue;
            }
            if !self.cfg.sim_match
                || self.cfg.stopwords.contains(&span.lemma)
                || self.cfg.stopwords.contains(&fold(&span.surface))
                || is_numeric_token(&span.lemma)
            {
                continue;
            }
            let Some(v) = self.span_vector(&span) else {
                continue;
            };
            if let Some((e, s)) = self.best_entity(&v) {
                if s >= self.cfg.lambda {
                    out.push(MentionMatch { span, entity: e, score: s.min(1.0) });
                }
            }
        }
        out
    }
}

/// Greedy left-to-right pairing: each match pairs with the first later,
/// still-unpaired match it shares a triple with. Among several connecting
/// triples the smallest (by id order) certifies the pair.
pub fn find_related_pairs(matches: &[MentionMatch], kg: &KnowledgeGraph) -> Vec<RelatedPair> {
    let mut used = vec![false; matches.len()];
    let mut pairs = Vec::new();
    for i in 0..matches.len() {
        if used[i] {
            continue;
        }
        for j in i + 1..matches.len() {
            if used[j] {
                continue;
            }
            let (a, b) = (matches[i].entity, matches[j].entity);
            if a == b {
                continue;
            }
            if let Some(t) = kg.triples_between(a, b).first().copied() {
                let (head, tail) = if t.head == a { (i, j) } else { (j, i) };
                pairs.push(RelatedPair { head, tail, relation: t.relation, triple: t });
                used[i] = true;
                used[j] = true;
                break;
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KgBuilder;

    fn graph() -> KnowledgeGraph {
        let mut b = KgBuilder::new();
        for (n, c) in [
            ("cerebral embolis", "disease"),
            ("fever", "symptom"),
            ("diarrhea", "symptom"),
            ("pneumonia", "disease"),
            ("cough", "symptom"),
            ("rhinorrhea", "symptom"),
            ("肺炎", "disease"),
        ] {
            b.add_entity(n, c).unwrap();
        }
        b.add_triple("pneumonia", "hasSymptom", "fever").unwrap();
        b.add_triple("pneumonia", "hasSymptom", "cough").unwrap();
        b.add_triple("pneumonia", "hasSymptom", "diarrhea").unwrap();
        b.build()
    }

    fn table() -> EmbeddingTable {
        // scour ~ diarrhea at 0.95, runny ~ rhinorrhea at 0.85
        let s = (1.0f64 - 0.95 * 0.95).sqrt();
        let r = (1.0f64 - 0.85 * 0.85).sqrt();
        EmbeddingTable::from_rows([
            ("diarrhea", vec![1.0, 0.0, 0.0, 0.0, 0.0]),
            ("scour", vec![0.95, s, 0.0, 0.0, 0.0]),
            ("rhinorrhea", vec![0.0, 0.0, 1.0, 0.0, 0.0]),
            ("runny", vec![0.0, 0.0, 0.85, r, 0.0]),
            ("fever", vec![0.0, 0.0, 0.0, 0.0, 1.0]),
            ("the", vec![1.0, 0.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap()
    }

    #[test]
    fn dictionary_segmentation() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let spans = loc.preprocess("cerebral embolis hurts");
        let surfaces: Vec<_> = spans.iter().map(|s| s.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["cerebral embolis", "hurts"]);
        assert!(loc.preprocess("").is_empty());
    }

    #[test]
    fn lemma_lookup() {
        let g = graph();
        let t = table();
        let mut cfg = LocalizeConfig::default();
        cfg.lemmas.insert("coughed".into(), "cough".into());
        let loc = Localizer::new(&g, &t, cfg);
        let spans = loc.preprocess("He Coughed");
        assert_eq!(spans[1].lemma, "cough");
        assert_eq!(spans[0].lemma, "he");
        let m = loc.localize("He coughed");
        assert_eq!(m.len(), 1);
        assert_eq!(g.name(m[0].entity), "cough");
    }

    #[test]
    fn exact_and_similarity_matches() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let m = loc.localize("I have a fever and scour, runny nose.");
        let got: Vec<_> = m.iter().map(|x| (x.span.surface.as_str(), g.name(x.entity))).collect();
        assert_eq!(got, vec![("fever", "fever"), ("scour", "diarrhea")]);
        assert_eq!(m[0].score, 1.0);
        assert!((m[1].score - 0.95).abs() < 1e-9);
    }

    #[test]
    fn stopwords_and_numbers_never_similarity_matched() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        // "the" has the diarrhea vector but is a stopword
        assert!(loc.localize("the 42 3.5").is_empty());
    }

    #[test]
    fn cjk_segmentation() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let spans = loc.preprocess("得了肺炎吗");
        let surfaces: Vec<_> = spans.iter().map(|s| s.surface.as_str()).collect();
        assert_eq!(surfaces, vec!["得", "了", "肺炎", "吗"]);
    }

    #[test]
    fn separator_is_not_tokenized() {
        let toks = base_tokens("fever? [SEP] pneumonia");
        assert_eq!(toks, vec![(0, 5), (13, 22)]);
    }

    #[test]
    fn sim_match_off_keeps_exact_only() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig { sim_match: false, ..LocalizeConfig::default() });
        let m = loc.localize("fever and scour");
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn pairs_follow_triple_orientation() {
        let g = graph();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let m = loc.localize("fever, could it be pneumonia");
        let p = find_related_pairs(&m, &g);
        assert_eq!(p.len(), 1);
        assert_eq!(g.name(m[p[0].head].entity), "pneumonia");
        assert_eq!(g.name(m[p[0].tail].entity), "fever");
        assert_eq!(g.relation_name(p[0].relation), "hasSymptom");

        let none = loc.localize("fever and cough");
        assert!(find_related_pairs(&none, &g).is_empty());
    }

    #[test]
    fn greedy_pairing_on_triangle() {
        let mut b = KgBuilder::new();
        for n in ["x", "y", "z"] {
            b.add_entity(n, "c").unwrap();
        }
        b.add_triple("x", "r", "y").unwrap();
        b.add_triple("y", "r", "z").unwrap();
        b.add_triple("x", "r", "z").unwrap();
        let g = b.build();
        let t = table();
        let loc = Localizer::new(&g, &t, LocalizeConfig::default());
        let m = loc.localize("x y z");
        let p = find_related_pairs(&m, &g);
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].head, p[0].tail), (0, 1));
    }
}
