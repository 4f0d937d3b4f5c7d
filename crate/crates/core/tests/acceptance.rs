//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::time::{Duration, Instant};

use kgaug_core::assess::{sampling_weights, weighted_without_replacement, ConfidenceRecord, ScoringRequest};
use kgaug_core::kg::{perturb_count, KgBuilder};
use kgaug_core::kger::augment_kger;
use kgaug_core::pipeline::{self, generate, AssessPaths, AugmentedRecord, KgPaths, RunConfig, Toggles};
use kgaug_core::sample::Role;
use kgaug_core::{find_related_pairs, KnowledgeGraph, LocalizeConfig, Localizer, Strategy, Triple, View};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn random_kg(rng: &mut ChaCha8Rng) -> KnowledgeGraph {
    let n = rng.gen_range(3..=50);
    let cats = rng.gen_range(3..=6);
    let rels = rng.gen_range(1..=5);
    let mut b = KgBuilder::new();
    for i in 0..n {
        // the first three entities cover three distinct categories
        let c = if i < 3 { i } else { rng.gen_range(0..cats) };
        b.add_entity(&format!("e{i}"), &format!("c{c}")).unwrap();
    }
    let target = rng.gen_range(0..=200);
    for _ in 0..target {
        let h = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if h != t {
            b.add_triple(&format!("e{h}"), &format!("r{}", rng.gen_range(0..rels)), &format!("e{t}")).unwrap();
        }
    }
    b.build()
}

fn two_hop_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for g in 0..100 {
        let kg = random_kg(&mut rng);
        check(kg.num_entities() <= 50 && kg.num_triples() <= 200, "generator out of bounds")?;
        check(kg.stats().categories >= 3, "fewer than 3 categories")?;
        for e in kg.entities() {
            let got = kg.two_hop_candidates(e).unwrap();
            if got != common::bfs_two_hop(&kg, e) {
                return Err(format!("graph {g}, entity {}", kg.name(e)));
            }
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("100 graphs, {checked} entities, {:.2?}", start.elapsed()))
}

fn two_hop_entities_oracle(kg: &KnowledgeGraph, e: kgaug_core::EntityId) -> BTreeSet<kgaug_core::EntityId> {
    common::bfs_two_hop(kg, e).iter().flat_map(|t| [t.head, t.tail]).filter(|&x| x != e).collect()
}

fn kger_invariants() -> Outcome {
    let kg = common::medical_kg();
    let table = common::embeddings();
    let data = common::dataset();
    let loc = Localizer::new(&kg, &table, LocalizeConfig::default());
    let triples: HashSet<Triple> = kg.triples().iter().copied().collect();
    let localized: Vec<_> = data
        .records
        .iter()
        .map(|d| {
            let m = loc.localize(&d.text);
            let p = find_related_pairs(&m, &kg);
            (m, p)
        })
        .collect();

    let start = Instant::now();
    let mut samples = 0;
    let mut pairs = 0;
    let mut seed = 0u64;
    while samples < 1000 {
        for (origin, (m, p)) in data.records.iter().zip(&localized) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in augment_kger(origin, m, p, &kg, &mut rng, 5) {
                check(s.label == origin.label, format!("{}: label changed", s.aug_id))?;
                check(s.view == View::Kger, "wrong view")?;
                for r in &s.replacements {
                    check(
                        kg.category(r.old_entity) == kg.category(r.new_entity),
                        format!("{}: category changed", s.aug_id),
                    )?;
                    if r.pair.is_none() {
                        check(
                            two_hop_entities_oracle(&kg, r.old_entity).contains(&r.new_entity),
                            format!("{}: outside 2-hop", s.aug_id),
                        )?;
                    }
                }
                let slots: BTreeSet<usize> = s.replacements.iter().filter_map(|r| r.pair.map(|p| p.pair)).collect();
                for pid in slots {
                    let by_role = |role| {
                        s.replacements
                            .iter()
                            .find(|r| r.pair.is_some_and(|p| p.pair == pid && p.role == role))
                            .ok_or(format!("{}: incomplete pair", s.aug_id))
                    };
                    let (h, t) = (by_role(Role::Head)?, by_role(Role::Tail)?);
                    let rel = h.pair.unwrap().relation;
                    check(t.pair.unwrap().relation == rel, "pair relation mismatch")?;
                    let old = Triple::new(h.old_entity, rel, t.old_entity);
                    let new = Triple::new(h.new_entity, rel, t.new_entity);
                    check(triples.contains(&old), format!("{}: source triple missing", s.aug_id))?;
                    check(triples.contains(&new), format!("{}: new triple missing", s.aug_id))?;
                    check(old != new, "pair unchanged")?;
                    pairs += 1;
                }
                samples += 1;
            }
        }
        seed += 1;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{samples} samples, {pairs} pair swaps, {:.2?}", start.elapsed()))
}

fn trainer_invariants() -> Outcome {
    let kg = common::medical_kg();
    let table = common::embeddings();
    let data = common::dataset();
    let loc = Localizer::new(&kg, &table, LocalizeConfig::default());
    let row: HashMap<&str, usize> = data.records.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let mentions: Vec<BTreeSet<_>> =
        data.records.iter().map(|d| loc.localize(&d.text).into_iter().map(|m| m.entity).collect()).collect();

    let start = Instant::now();
    let mut samples = 0;
    let mut seed = 0;
    while samples < 1000 {
        let cfg = RunConfig {
            seed,
            per_origin: 20,
            toggles: Toggles { kger: false, ..Toggles::default() },
            ..RunConfig::default()
        };
        let g = generate(&cfg, &kg, &loc, &data.records).map_err(|e| e.to_string())?;
        let clusters = g.clusters.ok_or("no clustering")?;
        for s in &g.candidates {
            check(s.view == View::Trainer, "wrong view")?;
            let own = row[s.origin_id.as_str()];
            check(s.label == data.records[own].label, format!("{}: label changed", s.aug_id))?;
            for r in &s.replacements {
                let src = r.source.as_deref().ok_or("missing donor")?;
                let donor = row[src];
                check(data.records[donor].label == s.label, format!("{}: donor label differs", s.aug_id))?;
                check(
                    clusters.assignment[donor] != clusters.assignment[own],
                    format!("{}: donor in same cluster", s.aug_id),
                )?;
                check(
                    kg.category(r.old_entity) == kg.category(r.new_entity),
                    format!("{}: category changed", s.aug_id),
                )?;
                check(mentions[donor].contains(&r.new_entity), format!("{}: donor lacks entity", s.aug_id))?;
            }
            samples += 1;
        }
        seed += 1;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{samples} samples over {seed} clusterings, {:.2?}", start.elapsed()))
}

fn weight_numerics() -> Outcome {
    let w = sampling_weights(&[0.75, 0.95, 0.15], 0.75).map_err(|e| e.to_string())?;
    for (got, want) in w.iter().zip([0.42239, 0.34582, 0.23180]) {
        check((got - want).abs() <= 1e-4, format!("weights {w:?}"))?;
    }
    let u = sampling_weights(&[0.3, 0.3, 0.3, 0.3], 0.75).map_err(|e| e.to_string())?;
    check(u.iter().all(|x| (x - 0.25).abs() <= 1e-12), format!("uniform {u:?}"))?;

    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut counts = [0usize; 3];
    for _ in 0..trials {
        counts[weighted_without_replacement(&w, 1, &mut rng)[0]] += 1;
    }
    let mut chi2 = 0.0;
    for (c, p) in counts.iter().zip(&w) {
        let expected = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        check((*c as f64 - expected).abs() <= 3.0 * sigma, format!("bucket outside 3 sigma: {counts:?}"))?;
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    // survival function of chi-square with 2 degrees of freedom
    let p_value = (-chi2 / 2.0).exp();
    check(p_value > 0.001, format!("chi-square p = {p_value}"))?;
    Ok(format!("w = [{:.5}, {:.5}, {:.5}], counts {counts:?}, p = {p_value:.3}", w[0], w[1], w[2]))
}

fn localization() -> Outcome {
    let kg = common::medical_kg();
    let table = common::embeddings();
    let loc = Localizer::new(&kg, &table, LocalizeConfig::default());
    for e in kg.entities() {
        let text = format!("what about {} today", kg.name(e));
        let m = loc.localize(&text);
        check(
            m.iter().any(|m| m.entity == e && m.score == 1.0 && m.span.surface == kg.name(e)),
            format!("exact `{}` not matched", kg.name(e)),
        )?;
    }
    let scour = loc.localize("fever and scour");
    let diarrhea = kg.entity("diarrhea").unwrap();
    check(scour.iter().any(|m| m.entity == diarrhea && (m.score - 0.95).abs() < 1e-4), "0.95 pair not matched")?;
    check(loc.localize("runny").is_empty(), "0.85 pair matched")?;

    let off = Localizer::new(&kg, &table, LocalizeConfig { sim_match: false, ..LocalizeConfig::default() });
    let strict = Localizer::new(&kg, &table, LocalizeConfig { lambda: 1.0, ..LocalizeConfig::default() });
    let mut texts: Vec<String> = common::dataset().records.into_iter().map(|d| d.text).collect();
    texts.extend(pipeline::read_texts(&common::fixture("qa.jsonl")).map_err(|e| e.to_string())?);
    for t in &texts {
        check(off.localize(t) == strict.localize(t), format!("sim-match off differs from lambda 1 on `{t}`"))?;
    }
    Ok(format!("{} entities exact, {} corpus texts compared", kg.num_entities(), texts.len()))
}

fn fake_scores(requests: &[ScoringRequest]) -> Vec<ConfidenceRecord> {
    requests
        .iter()
        .map(|r| ConfidenceRecord {
            aug_id: r.aug_id.clone(),
            prob_true_label: (kgaug_core::sample::origin_seed(1, "score", &r.aug_id) % 1000) as f64 / 999.0,
        })
        .collect()
}

fn write_confidences(path: &std::path::Path, recs: &[ConfidenceRecord]) {
    let lines: Vec<String> = recs.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn full_run(dir: &std::path::Path, cfg: &RunConfig) -> Result<(), String> {
    let paths = common::augment_paths(common::fixture("dataset.jsonl"), dir.to_path_buf());
    pipeline::run_augment(cfg, &paths).map_err(|e| e.to_string())?;
    if cfg.toggles.assess {
        let requests: Vec<ScoringRequest> =
            pipeline::read_jsonl(&dir.join(pipeline::REQUESTS_FILE)).map_err(|e| e.to_string())?;
        write_confidences(&dir.join("confidence.jsonl"), &fake_scores(&requests));
        pipeline::resume_assess(
            cfg,
            &AssessPaths {
                dataset: common::fixture("dataset.jsonl"),
                augmented: dir.join(pipeline::AUGMENTED_FILE),
                confidence: dir.join("confidence.jsonl"),
                output_dir: dir.to_path_buf(),
            },
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn scale_convention() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig { seed: 42, per_origin: 5, strategy: Strategy::DeltaK, ..RunConfig::default() };
    full_run(dir.path(), &cfg)?;
    let data = common::dataset();
    let records: Vec<AugmentedRecord> =
        pipeline::read_jsonl(&dir.path().join(pipeline::AUGMENTED_FILE)).map_err(|e| e.to_string())?;
    let mut per_origin: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        *per_origin.entry(r.origin_id.as_str()).or_default() += 1;
    }
    let min = data.records.iter().map(|d| per_origin.get(d.id.as_str()).copied().unwrap_or(0)).min().unwrap();
    check(min >= 5, format!("an origin has only {min} candidates"))?;
    let train = fs::read_to_string(dir.path().join(pipeline::TRAIN_FILE)).map_err(|e| e.to_string())?;
    let lines = train.lines().count();
    check(lines == 6 * data.len(), format!("{lines} records for |D| = {}", data.len()))?;
    Ok(format!("|D| = {}, min m = {min}, final = {lines}", data.len()))
}

fn read_kg(dir: &std::path::Path) -> KnowledgeGraph {
    KnowledgeGraph::load(
        fs::File::open(dir.join("entities.tsv")).unwrap(),
        fs::File::open(dir.join("triples.tsv")).unwrap(),
    )
    .unwrap()
}

fn perturb_kg() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = |name: &str| KgPaths {
        entities: dir.path().join(name).join("entities.tsv"),
        triples: dir.path().join(name).join("triples.tsv"),
    };
    let kg = common::medical_kg();
    let names = |g: &KnowledgeGraph| -> HashMap<String, String> {
        g.entities().map(|e| (g.name(e).to_string(), g.category_name(g.category(e)).to_string())).collect()
    };
    let triple_names = |g: &KnowledgeGraph| -> BTreeSet<(String, String, String)> {
        g.triples()
            .iter()
            .map(|t| (g.name(t.head).into(), g.relation_name(t.relation).into(), g.name(t.tail).into()))
            .collect()
    };
    let mut summary = Vec::new();
    for n in [1.0, 4.0, 10.0, 25.0] {
        pipeline::perturb_kg_files(&common::kg_paths(), n, 3, &out("a")).map_err(|e| e.to_string())?;
        let p = read_kg(&dir.path().join("a"));
        let (before, after) = (names(&kg), names(&p));
        let cats = before.iter().filter(|(k, v)| after[*k] != **v).count();
        let rels = triple_names(&kg).difference(&triple_names(&p)).count();
        let want_e = perturb_count(n, kg.num_entities());
        let want_t = perturb_count(n, kg.num_triples());
        check(cats == want_e, format!("n={n}: {cats} categories changed, want {want_e}"))?;
        check(rels == want_t, format!("n={n}: {rels} relations changed, want {want_t}"))?;
        check(p.num_triples() == kg.num_triples(), "triple count changed")?;
        summary.push(format!("{n}%: {cats}/{rels}"));

        pipeline::perturb_kg_files(&common::kg_paths(), n, 3, &out("b")).map_err(|e| e.to_string())?;
        for f in ["entities.tsv", "triples.tsv"] {
            check(
                fs::read(dir.path().join("a").join(f)).unwrap() == fs::read(dir.path().join("b").join(f)).unwrap(),
                format!("n={n}: {f} differs across equal seeds"),
            )?;
        }
    }
    pipeline::perturb_kg_files(&common::kg_paths(), 0.0, 3, &out("zero")).map_err(|e| e.to_string())?;
    let z = read_kg(&dir.path().join("zero"));
    check(names(&z) == names(&kg) && triple_names(&z) == triple_names(&kg), "n=0 is not an identity")?;
    Ok(format!("{} (categories/relations), seed-stable, n=0 identity", summary.join(", ")))
}

fn coverage() -> Outcome {
    let kg = common::medical_kg();
    let table = common::embeddings();
    let loc = Localizer::new(&kg, &table, LocalizeConfig::default());
    let train = ["I have fever and cough", "is it pneumonia"];
    let test = ["jaundice from hepatitis", "migraine with dizziness", "fever again"];
    let augmented = ["jaundice all week", "hepatitis and cough", "dizziness", "amoxicillin please"];
    let got = pipeline::novel_entity_coverage(&loc, &train, &test, &augmented);

    // brute force: substring search of every entity name on word boundaries
    let mentions = |texts: &[&str]| -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        for t in texts {
            let words: Vec<String> = t.to_lowercase().split_whitespace().map(String::from).collect();
            for e in kg.entities() {
                let name: Vec<&str> = kg.name(e).split(' ').collect();
                if words.windows(name.len()).any(|w| w.iter().zip(&name).all(|(a, b)| a == b)) {
                    s.insert(kg.name(e).to_string());
                }
            }
        }
        s
    };
    let novel: BTreeSet<_> = mentions(&test).difference(&mentions(&train)).cloned().collect();
    let covered = novel.intersection(&mentions(&augmented)).count();
    let brute = covered as f64 / novel.len() as f64;

    check(got.novel == 4 && got.covered == 3, format!("{got:?}"))?;
    check(got.fraction == 0.75, format!("fraction {}", got.fraction))?;
    check(novel.len() == 4 && brute == got.fraction, format!("brute force {brute} over {novel:?}"))?;
    Ok(format!("|Novel| = {}, covered = {}, coverage = {}", got.novel, got.covered, got.fraction))
}

fn determinism() -> Outcome {
    let mut summary = Vec::new();
    for assess in [true, false] {
        let cfg = RunConfig { seed: 2024, toggles: Toggles { assess, ..Toggles::default() }, ..RunConfig::default() };
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        full_run(a.path(), &cfg)?;
        full_run(b.path(), &cfg)?;
        for f in [pipeline::AUGMENTED_FILE, pipeline::SELECTED_FILE, pipeline::TRAIN_FILE] {
            let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
            check(x == y, format!("{f} differs (assess = {assess})"))?;
            check(!x.is_empty(), format!("{f} is empty"))?;
        }
        summary.push(if assess { "scored run" } else { "unscored run" });
    }
    Ok(format!("{} byte-identical", summary.join(" and ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("2-hop oracle equivalence", two_hop_oracle),
        ("KGER invariants", kger_invariants),
        ("TrainER invariants", trainer_invariants),
        ("selection weight numerics", weight_numerics),
        ("localization", localization),
        ("scale convention 6|D|", scale_convention),
        ("perturb-kg", perturb_kg),
        ("novel entity coverage", coverage),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
