//! End-to-end runs: localize, augment through both views, emit scoring
//! requests, select, and write the final training file.
//!
//! A run with assessment enabled stops after writing `scoring_requests.jsonl`
//! and `checkpoint.json`; [`resume_assess`] finishes it once an external
//! scorer has produced the confidence file.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assess::{self, AssessError, Candidate, ConfidenceRecord, ScoringRequest, SelectionConfig, Strategy};
use crate::dataset::{split_qa, DataError, Dataset, InputMode, Label, LabeledText};
use crate::embed::{EmbedError, EmbeddingTable};
use crate::kg::{EntityId, KgError, KgStats, KnowledgeGraph};
use crate::kger::{augment_kger, validate_kger};
use crate::localize::{
    find_related_pairs, load_lemmas, load_stopwords, LocalizeConfig, Localizer, MentionMatch, RelatedPair,
};
use crate::sample::{origin_rng, AugmentedSample, Role, View};
use crate::trainer::{
    augment_trainer, cluster_templates, default_k, mask_template, tfidf_vectors, validate_trainer, ClusterModel,
    ReplacementIndex, TrainerError,
};

pub const AUGMENTED_FILE: &str = "augmented.jsonl";
pub const REQUESTS_FILE: &str = "scoring_requests.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SELECTED_FILE: &str = "selected.jsonl";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Assess(#[from] AssessError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub sim_match: bool,
    pub kger: bool,
    pub trainer: bool,
    pub assess: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { sim_match: true, kger: true, trainer: true, assess: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub delta: f64,
    pub per_origin: usize,
    /// `None` picks k from the corpus size.
    pub clusters: Option<usize>,
    pub seed: u64,
    pub toggles: Toggles,
    pub mode: InputMode,
    pub strategy: Strategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: crate::localize::DEFAULT_LAMBDA,
            delta: assess::DEFAULT_DELTA,
            per_origin: assess::DEFAULT_PER_ORIGIN,
            clusters: None,
            seed: 0,
            toggles: Toggles::default(),
            mode: InputMode::Classification,
            strategy: Strategy::DeltaK,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(PipelineError::Config(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PipelineError::Config(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.per_origin == 0 {
            return Err(PipelineError::Config("per-origin must be positive".into()));
        }
        if self.clusters == Some(0) {
            return Err(PipelineError::Config("clusters must be positive".into()));
        }
        if !self.toggles.kger && !self.toggles.trainer {
            return Err(PipelineError::Config("at least one of KGER and TrainER must stay enabled".into()));
        }
        Ok(())
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig { delta: self.delta, per_origin: self.per_origin, strategy: self.strategy }
    }

    pub fn localize_config(&self) -> LocalizeConfig {
        LocalizeConfig { lambda: self.lambda, sim_match: self.toggles.sim_match, ..LocalizeConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub inertia: f64,
    pub iterations: usize,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub origins: usize,
    pub origins_with_mentions: usize,
    pub mentions: usize,
    pub pairs: usize,
    pub candidates_by_view: BTreeMap<String, usize>,
    /// Origins that produced no candidate from any enabled view.
    pub skipped_origins: Vec<String>,
    pub clusters: Option<ClusterReport>,
    pub selected: Option<usize>,
    pub final_size: Option<usize>,
    /// Novel-entity coverage of the candidate pool, when a test file is given.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coverage: Option<Coverage>,
    pub warnings: Vec<String>,
}

/// Output of the in-memory generation stage.
#[derive(Debug, Clone)]
pub struct Generated {
    pub localized: Vec<(Vec<MentionMatch>, Vec<RelatedPair>)>,
    pub candidates: Vec<AugmentedSample>,
    pub clusters: Option<ClusterModel>,
    pub report: RunReport,
}

/// Localizes every origin and pools the candidates of the enabled views.
/// Every candidate is checked against its view's invariants before return.
pub fn generate(
    cfg: &RunConfig,
    kg: &KnowledgeGraph,
    localizer: &Localizer<'_>,
    dataset: &[LabeledText],
) -> Result<Generated, PipelineError> {
    cfg.validate()?;
    let localized: Vec<(Vec<MentionMatch>, Vec<RelatedPair>)> = dataset
        .par_iter()
        .map(|d| {
            let m = localizer.localize(&d.text);
            let p = find_related_pairs(&m, kg);
            (m, p)
        })
        .collect();

    let mut warnings = Vec::new();
    let (clusters, index) = if cfg.toggles.trainer && !dataset.is_empty() {
        let templates: Vec<_> = dataset.iter().zip(&localized).map(|(d, (m, _))| mask_template(d, m, kg)).collect();
        let tfidf = tfidf_vectors(&templates)?;
        let k = cfg.clusters.unwrap_or_else(|| default_k(dataset.len()));
        let model = cluster_templates(&tfidf.rows, tfidf.vocabulary.len(), k, cfg.seed)?;
        let index = ReplacementIndex::build(dataset, &localized, kg, &model);
        (Some(model), Some(index))
    } else {
        (None, None)
    };

    let per_origin: Vec<Vec<AugmentedSample>> = dataset
        .par_iter()
        .zip(&localized)
        .map(|(origin, (m, p))| {
            let mut out = Vec::new();
            if cfg.toggles.kger {
                let mut rng = origin_rng(cfg.seed, View::Kger.tag(), &origin.id);
                out.extend(augment_kger(origin, m, p, kg, &mut rng, cfg.per_origin));
            }
            if let Some(index) = &index {
                let mut rng = origin_rng(cfg.seed, View::Trainer.tag(), &origin.id);
                out.extend(augment_trainer(origin, m, p, index, kg, &mut rng, cfg.per_origin));
            }
            out
        })
        .collect();

    let mut candidates_by_view = BTreeMap::new();
    let mut skipped_origins = Vec::new();
    let mut candidates = Vec::new();
    for (origin, samples) in dataset.iter().zip(per_origin) {
        if samples.is_empty() {
            skipped_origins.push(origin.id.clone());
        }
        for s in samples {
            match s.view {
                View::Kger => validate_kger(&s, kg),
                View::Trainer => validate_trainer(&s, index.as_ref().expect("trainer enabled"), kg),
            }
            .map_err(PipelineError::Invariant)?;
            if s.label != origin.label {
                return Err(PipelineError::Invariant(format!("{}: label changed", s.aug_id)));
            }
            *candidates_by_view.entry(s.view.to_string()).or_insert(0) += 1;
            candidates.push(s);
        }
    }
    if candidates.is_empty() && !dataset.is_empty() {
        let msg = "NoAugmentableText: no origin produced an augmented candidate".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let report = RunReport {
        config: cfg.clone(),
        origins: dataset.len(),
        origins_with_mentions: localized.iter().filter(|(m, _)| !m.is_empty()).count(),
        mentions: localized.iter().map(|(m, _)| m.len()).sum(),
        pairs: localized.iter().map(|(_, p)| p.len()).sum(),
        candidates_by_view,
        skipped_origins,
        clusters: clusters.as_ref().map(|c| ClusterReport {
            k: c.k,
            inertia: c.inertia,
            iterations: c.iterations,
            sizes: c.sizes(),
        }),
        selected: None,
        final_size: None,
        coverage: None,
        warnings,
    };
    Ok(Generated { localized, candidates, clusters, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    #[serde(rename = "oldEntity")]
    pub old_entity: String,
    #[serde(rename = "newEntity")]
    pub new_entity: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pair: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub role: Option<Role>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
}

/// One line of the augmented file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedRecord {
    #[serde(rename = "augId")]
    pub aug_id: String,
    #[serde(rename = "originId")]
    pub origin_id: String,
    pub text: String,
    pub label: Label,
    pub view: View,
    pub replacements: Vec<ReplacementRecord>,
}

impl AugmentedRecord {
    pub fn from_sample(s: &AugmentedSample, kg: &KnowledgeGraph) -> Self {
        let name = |e: EntityId| kg.name(e).to_string();
        Self {
            aug_id: s.aug_id.clone(),
            origin_id: s.origin_id.clone(),
            text: s.text.clone(),
            label: s.label.clone(),
            view: s.view,
            replacements: s
                .replacements
                .iter()
                .map(|r| ReplacementRecord {
                    old_entity: name(r.old_entity),
                    new_entity: name(r.new_entity),
                    relation: r.pair.map(|p| kg.relation_name(p.relation).to_string()),
                    pair: r.pair.map(|p| p.pair),
                    role: r.pair.map(|p| p.role),
                    source: r.source.clone(),
                })
                .collect(),
        }
    }
}

impl Candidate for AugmentedRecord {
    fn aug_id(&self) -> &str {
        &self.aug_id
    }
    fn origin_id(&self) -> &str {
        &self.origin_id
    }
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    id: &'a str,
    text: &'a str,
    label: &'a Label,
}

#[derive(Serialize)]
struct QaTrainRecord<'a> {
    id: &'a str,
    question: &'a str,
    answer: &'a str,
    label: &'a Label,
}

/// Dataset-format line for an augmented record.
pub fn training_line(rec: &AugmentedRecord, mode: InputMode) -> String {
    match mode {
        InputMode::Classification => {
            serde_json::to_string(&TrainRecord { id: &rec.aug_id, text: &rec.text, label: &rec.label })
        }
        InputMode::Qa => {
            let (q, a) = split_qa(&rec.text);
            serde_json::to_string(&QaTrainRecord { id: &rec.aug_id, question: &q, answer: &a, label: &rec.label })
        }
    }
    .expect("plain records serialize")
}

fn write_lines<I, S>(path: &Path, lines: I) -> Result<(), PipelineError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for l in lines {
        writeln!(w, "{}", l.as_ref()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| PipelineError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct KgPaths {
    pub entities: PathBuf,
    pub triples: PathBuf,
}

pub fn load_kg(paths: &KgPaths) -> Result<KnowledgeGraph, PipelineError> {
    let e = File::open(&paths.entities).map_err(io_err(&paths.entities))?;
    let t = File::open(&paths.triples).map_err(io_err(&paths.triples))?;
    Ok(KnowledgeGraph::load(e, t)?)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, PipelineError> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(EmbeddingTable::load(f)?)
}

pub fn load_dataset(path: &Path, mode: InputMode) -> Result<Dataset, PipelineError> {
    let f = File::open(path).map_err(io_err(path))?;
    Ok(Dataset::read(f, mode)?)
}

/// Optional user-supplied lexicon files.
#[derive(Debug, Clone, Default)]
pub struct LexiconPaths {
    pub lemmas: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

pub fn localize_config(cfg: &RunConfig, lex: &LexiconPaths) -> Result<LocalizeConfig, PipelineError> {
    let mut lc = cfg.localize_config();
    if let Some(p) = &lex.lemmas {
        lc.lemmas = load_lemmas(File::open(p).map_err(io_err(p))?).map_err(io_err(p))?;
    }
    if let Some(p) = &lex.stopwords {
        lc.stopwords = load_stopwords(File::open(p).map_err(io_err(p))?).map_err(io_err(p))?;
    }
    Ok(lc)
}

#[derive(Debug, Clone)]
pub struct AugmentPaths {
    pub kg: KgPaths,
    pub embeddings: PathBuf,
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub lexicon: LexiconPaths,
    /// Held-out texts for the coverage figure in the report.
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub dataset: PathBuf,
}

/// Runs generation and writes the augmented file. With assessment on, also
/// writes the scoring requests and a checkpoint; otherwise selects with the
/// random strategy and writes the selected and final training files.
pub fn run_augment(cfg: &RunConfig, paths: &AugmentPaths) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let kg = load_kg(&paths.kg)?;
    let table = load_embeddings(&paths.embeddings)?;
    let dataset = load_dataset(&paths.dataset, cfg.mode)?;
    let localizer = Localizer::new(&kg, &table, localize_config(cfg, &paths.lexicon)?);
    let generated = generate(cfg, &kg, &localizer, &dataset.records)?;
    let mut report = generated.report;
    if let Some(test) = &paths.test {
        let train: Vec<&str> = dataset.records.iter().map(|d| d.text.as_str()).collect();
        let test = read_texts(test)?;
        let test: Vec<&str> = test.iter().map(String::as_str).collect();
        let aug: Vec<&str> = generated.candidates.iter().map(|c| c.text.as_str()).collect();
        report.coverage = Some(novel_entity_coverage(&localizer, &train, &test, &aug));
    }

    let out = &paths.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let records: Vec<AugmentedRecord> =
        generated.candidates.iter().map(|s| AugmentedRecord::from_sample(s, &kg)).collect();
    write_lines(
        &out.join(AUGMENTED_FILE),
        records.iter().map(|r| serde_json::to_string(r).expect("record serializes")),
    )?;

    if cfg.toggles.assess {
        write_lines(
            &out.join(REQUESTS_FILE),
            records.iter().map(|r| {
                serde_json::to_string(&ScoringRequest {
                    aug_id: r.aug_id.clone(),
                    text: r.text.clone(),
                    label: r.label.clone(),
                })
                .expect("request serializes")
            }),
        )?;
        write_json(&out.join(CHECKPOINT_FILE), &Checkpoint { config: cfg.clone(), dataset: paths.dataset.clone() })?;
    } else {
        // without scores, the scored strategies fall back to random selection
        let strategy = match cfg.strategy {
            Strategy::DeltaK | Strategy::TopK => Strategy::Random,
            s => s,
        };
        let sel = SelectionConfig { strategy, ..cfg.selection() };
        let chosen = assess::select(&records, &HashMap::new(), &sel, cfg.seed)?;
        report.selected = Some(chosen.len());
        report.final_size = Some(write_selection(out, &dataset, &chosen, cfg.mode)?);
    }
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Writes `selected.jsonl` and `train.jsonl`; returns the final size.
fn write_selection(
    out: &Path,
    dataset: &Dataset,
    chosen: &[&AugmentedRecord],
    mode: InputMode,
) -> Result<usize, PipelineError> {
    write_lines(&out.join(SELECTED_FILE), chosen.iter().map(|r| serde_json::to_string(r).expect("record serializes")))?;
    let lines: Vec<String> = dataset.raw.iter().cloned().chain(chosen.iter().map(|r| training_line(r, mode))).collect();
    write_lines(&out.join(TRAIN_FILE), &lines)?;
    Ok(lines.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessReport {
    pub strategy: Strategy,
    pub originals: usize,
    pub candidates: usize,
    pub selected: usize,
    pub final_size: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AssessPaths {
    pub dataset: PathBuf,
    pub augmented: PathBuf,
    pub confidence: PathBuf,
    pub output_dir: PathBuf,
}

/// Applies selection using the scorer's confidences and writes the final
/// training file (all originals followed by the selected augmentations).
pub fn resume_assess(cfg: &RunConfig, paths: &AssessPaths) -> Result<AssessReport, PipelineError> {
    let dataset = load_dataset(&paths.dataset, cfg.mode)?;
    let records: Vec<AugmentedRecord> = read_jsonl(&paths.augmented)?;
    let confidences: Vec<ConfidenceRecord> = read_jsonl(&paths.confidence)?;
    let map = assess::confidence_map(&confidences)?;
    let mut warnings = Vec::new();
    if records.is_empty() {
        let msg = "candidate set is empty; final file holds the originals only".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let chosen = assess::select(&records, &map, &cfg.selection(), cfg.seed)?;
    fs::create_dir_all(&paths.output_dir).map_err(io_err(&paths.output_dir))?;
    let final_size = write_selection(&paths.output_dir, &dataset, &chosen, cfg.mode)?;
    let report = AssessReport {
        strategy: cfg.strategy,
        originals: dataset.len(),
        candidates: records.len(),
        selected: chosen.len(),
        final_size,
        warnings,
    };
    write_json(&paths.output_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub novel: usize,
    pub covered: usize,
    /// 1.0 by convention when there are no novel entities.
    pub fraction: f64,
    pub novel_empty: bool,
}

/// Share of test-only entities that the augmented texts mention.
pub fn novel_entity_coverage<S: AsRef<str> + Sync>(
    localizer: &Localizer<'_>,
    train: &[S],
    test: &[S],
    augmented: &[S],
) -> Coverage {
    let entities = |texts: &[S]| -> std::collections::BTreeSet<EntityId> {
        texts
            .par_iter()
            .flat_map_iter(|t| localizer.localize(t.as_ref()).into_iter().map(|m| m.entity))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    };
    let seen = entities(train);
    let novel: std::collections::BTreeSet<EntityId> = entities(test).difference(&seen).copied().collect();
    let aug = entities(augmented);
    let covered = novel.intersection(&aug).count();
    if novel.is_empty() {
        Coverage { novel: 0, covered: 0, fraction: 1.0, novel_empty: true }
    } else {
        Coverage { novel: novel.len(), covered, fraction: covered as f64 / novel.len() as f64, novel_empty: false }
    }
}

/// Texts from any line-delimited file carrying either `text` or
/// `question`/`answer` fields (datasets, augmented and training files).
pub fn read_texts(path: &Path) -> Result<Vec<String>, PipelineError> {
    let values: Vec<serde_json::Value> = read_jsonl(path)?;
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if let Some(t) = v.get("text").and_then(|t| t.as_str()) {
                return Ok(t.to_string());
            }
            match (v.get("question").and_then(|q| q.as_str()), v.get("answer").and_then(|a| a.as_str())) {
                (Some(q), Some(a)) => Ok(crate::dataset::join_qa(q, a)),
                _ => Err(PipelineError::Config(format!(
                    "{} record {}: no `text` or `question`/`answer` fields",
                    path.display(),
                    i + 1
                ))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbReport {
    pub percent: f64,
    pub seed: u64,
    pub stats: KgStats,
    pub categories_changed: usize,
    pub relations_changed: usize,
}

/// Entities whose category differs, and triples of `a` absent from `b`.
pub fn kg_diff(a: &KnowledgeGraph, b: &KnowledgeGraph) -> (usize, usize) {
    let cats = a.entities().filter(|&e| a.category_name(a.category(e)) != b.category_name(b.category(e))).count();
    let rels = a.triples().iter().filter(|t| !b.has_triple(t)).count();
    (cats, rels)
}

pub fn perturb_kg_files(
    input: &KgPaths,
    percent: f64,
    seed: u64,
    output: &KgPaths,
) -> Result<PerturbReport, PipelineError> {
    let kg = load_kg(input)?;
    let perturbed = kg.perturb(percent, seed)?;
    let (categories_changed, relations_changed) = kg_diff(&kg, &perturbed);
    for p in [&output.entities, &output.triples] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    let mut e = BufWriter::new(File::create(&output.entities).map_err(io_err(&output.entities))?);
    let mut t = BufWriter::new(File::create(&output.triples).map_err(io_err(&output.triples))?);
    perturbed.write_tsv(&mut e, &mut t).map_err(io_err(&output.entities))?;
    e.flush().map_err(io_err(&output.entities))?;
    t.flush().map_err(io_err(&output.triples))?;
    Ok(PerturbReport { percent, seed, stats: perturbed.stats(), categories_changed, relations_changed })
}
