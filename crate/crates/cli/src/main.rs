use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgaug_core::dataset::InputMode;
use kgaug_core::pipeline::{
    self, AssessPaths, AugmentPaths, Checkpoint, KgPaths, LexiconPaths, RunConfig, Toggles, CHECKPOINT_FILE,
};
use kgaug_core::{Localizer, Strategy};

#[derive(Parser)]
#[command(name = "kgaug", version, about = "Knowledge-graph-driven data augmentation for domain text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Localize, augment and either emit scoring requests or select at random
    Augment(AugmentArgs),
    /// Select augmentations using scorer confidences and write the final training file
    Assess(AssessArgs),
    /// Fraction of test-only entities mentioned by augmented texts
    Coverage(CoverageArgs),
    /// Write a copy of the KG with n% categories and n% relation types changed
    PerturbKg(PerturbArgs),
    /// Print KG (and optionally embedding table) statistics
    Stats(StatsArgs),
}

#[derive(Args)]
struct KgArgs {
    #[arg(long)]
    kg_entities: PathBuf,
    #[arg(long)]
    kg_triples: PathBuf,
}

impl KgArgs {
    fn paths(&self) -> KgPaths {
        KgPaths { entities: self.kg_entities.clone(), triples: self.kg_triples.clone() }
    }
}

#[derive(Args)]
struct LexiconArgs {
    /// Tab-separated `form<TAB>lemma` table
    #[arg(long)]
    lemmas: Option<PathBuf>,
    /// One stopword per line; replaces the built-in English list
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl LexiconArgs {
    fn paths(&self) -> LexiconPaths {
        LexiconPaths { lemmas: self.lemmas.clone(), stopwords: self.stopwords.clone() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Classification,
    Qa,
}

impl From<Mode> for InputMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Classification => InputMode::Classification,
            Mode::Qa => InputMode::Qa,
        }
    }
}

/// `AUTO` (`None`) or a fixed cluster count.
#[derive(Clone, Copy)]
struct Clusters(Option<usize>);

fn parse_clusters(s: &str) -> Result<Clusters, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Clusters(None));
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected AUTO or a positive integer, got `{s}`")),
        Ok(n) => Ok(Clusters(Some(n))),
    }
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long)]
    embeddings: PathBuf,
    /// Line-delimited dataset
    #[arg(long)]
    input: PathBuf,
    /// Output directory
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long, default_value_t = 0.75)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    per_origin: usize,
    /// Number of template clusters, or AUTO
    #[arg(long, default_value = "AUTO", value_parser = parse_clusters)]
    clusters: Clusters,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "classification")]
    mode: Mode,
    #[arg(long)]
    no_sim_match: bool,
    #[arg(long)]
    no_kger: bool,
    #[arg(long)]
    no_trainer: bool,
    /// Skip scoring and select at random (`all` is kept as is)
    #[arg(long)]
    no_assess: bool,
    #[arg(long, default_value = "delta-k")]
    strategy: Strategy,
    /// Held-out dataset; adds novel-entity coverage to the report
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    lexicon: LexiconArgs,
}

#[derive(Args)]
struct AssessArgs {
    /// Checkpoint written by `augment`; supplies defaults for the other flags
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Original dataset
    #[arg(long)]
    input: Option<PathBuf>,
    /// Augmented file; defaults to the one next to the checkpoint
    #[arg(long)]
    augmented: Option<PathBuf>,
    /// Scorer output: one `{augId, probTrueLabel}` record per line
    #[arg(long)]
    confidence: PathBuf,
    /// Output directory; defaults to the checkpoint's directory
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    per_origin: Option<usize>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    augmented: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    #[arg(long)]
    no_sim_match: bool,
    #[command(flatten)]
    lexicon: LexiconArgs,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    kg: KgArgs,
    /// Percentage of entities and of triples to change
    #[arg(long)]
    percent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_entities: PathBuf,
    #[arg(long)]
    out_triples: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    kg: KgArgs,
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let cfg = RunConfig {
        lambda: a.lambda,
        delta: a.delta,
        per_origin: a.per_origin,
        clusters: a.clusters.0,
        seed: a.seed,
        toggles: Toggles { sim_match: !a.no_sim_match, kger: !a.no_kger, trainer: !a.no_trainer, assess: !a.no_assess },
        mode: a.mode.into(),
        strategy: a.strategy,
    };
    let paths = AugmentPaths {
        kg: a.kg.paths(),
        embeddings: a.embeddings,
        dataset: a.input,
        output_dir: a.output.clone(),
        lexicon: a.lexicon.paths(),
        test: a.test,
    };
    let report = pipeline::run_augment(&cfg, &paths)?;
    for (view, n) in &report.candidates_by_view {
        log::info!("{view}: {n} candidates");
    }
    print_json(&report)?;
    if cfg.toggles.assess {
        eprintln!(
            "scoring requests written to {}; resume with `kgaug assess --checkpoint {}`",
            a.output.join(pipeline::REQUESTS_FILE).display(),
            a.output.join(CHECKPOINT_FILE).display()
        );
    }
    Ok(())
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn assess(a: AssessArgs) -> Result<()> {
    let (mut cfg, dataset, run_dir) = match &a.checkpoint {
        Some(p) => {
            let cp = read_checkpoint(p)?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (cp.config, Some(cp.dataset), Some(dir))
        }
        None => (RunConfig::default(), None, None),
    };
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(k) = a.per_origin {
        cfg.per_origin = k;
    }
    if let Some(s) = a.strategy {
        cfg.strategy = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.mode {
        cfg.mode = m.into();
    }
    cfg.validate()?;
    let Some(dataset) = a.input.or(dataset) else {
        bail!("--input is required without --checkpoint");
    };
    let Some(augmented) = a.augmented.or_else(|| run_dir.as_ref().map(|d| d.join(pipeline::AUGMENTED_FILE))) else {
        bail!("--augmented is required without --checkpoint");
    };
    let Some(output) = a.output.or(run_dir) else {
        bail!("--output is required without --checkpoint");
    };
    let report = pipeline::resume_assess(
        &cfg,
        &AssessPaths { dataset, augmented, confidence: a.confidence, output_dir: output },
    )?;
    print_json(&report)
}

fn coverage(a: CoverageArgs) -> Result<()> {
    let kg = pipeline::load_kg(&a.kg.paths())?;
    let table = pipeline::load_embeddings(&a.embeddings)?;
    let cfg = RunConfig {
        lambda: a.lambda,
        toggles: Toggles { sim_match: !a.no_sim_match, ..Toggles::default() },
        ..RunConfig::default()
    };
    cfg.validate()?;
    let localizer = Localizer::new(&kg, &table, pipeline::localize_config(&cfg, &a.lexicon.paths())?);
    let train = pipeline::read_texts(&a.train)?;
    let test = pipeline::read_texts(&a.test)?;
    let augmented = pipeline::read_texts(&a.augmented)?;
    let c = pipeline::novel_entity_coverage(&localizer, &train, &test, &augmented);
    if c.novel_empty {
        log::warn!("test data holds no novel entity; coverage reported as 1");
    }
    print_json(&c)
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let out = KgPaths { entities: a.out_entities, triples: a.out_triples };
    let report = pipeline::perturb_kg_files(&a.kg.paths(), a.percent, a.seed, &out)?;
    print_json(&report)
}

fn stats(a: StatsArgs) -> Result<()> {
    let kg = pipeline::load_kg(&a.kg.paths())?;
    println!("{}", kg.stats());
    if let Some(p) = a.embeddings {
        let f = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
        let t = kgaug_core::EmbeddingTable::load(f)?;
        println!("embeddings: {} vectors of dimension {} ({} zero rows dropped)", t.len(), t.dim(), t.dropped_zero());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Augment(a) => augment(a),
        Command::Assess(a) => assess(a),
        Command::Coverage(a) => coverage(a),
        Command::PerturbKg(a) => perturb(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
