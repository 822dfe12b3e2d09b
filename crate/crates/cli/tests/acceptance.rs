//! Acceptance suite: one PASS/FAIL line per primary criterion, each checked
//! against an independent oracle and a wall-clock limit. Exits nonzero if
//! any criterion fails.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use metaug_core::corpus::{assign_colleges, CollegeMapping, Dataset, ThesisRecord, MISSING};
use metaug_core::eval::{model_reports, per_class_accuracy, PredictionSet};
use metaug_core::gbt::{self, grid_search_with, loss, ParamGrid, TrainConfig};
use metaug_core::llm::{
    draw_samples, run_experiment, ExperimentConfig, Fault, LabelAliases, LlmError, MockBackend,
    PromptTemplate, SampleSpec, Variant,
};
use metaug_core::synth;
use metaug_core::textprep::{DocumentText, Stopwords};
use metaug_core::tfidf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn repo_mapping() -> CollegeMapping {
    CollegeMapping::load(&repo().join("data/colleges.json")).expect("bundled mapping")
}

// ---- TF-IDF -------------------------------------------------------------

/// Dense brute force over a sorted vocabulary: count / length times
/// ln(N / df).
fn dense_tfidf(docs: &[DocumentText]) -> (Vec<String>, Vec<Vec<f64>>) {
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| (n / docs.iter().filter(|d| d.tokens.contains(t)).count() as f64).ln())
        .collect();
    let rows = docs
        .iter()
        .map(|d| {
            vocab
                .iter()
                .zip(&idf)
                .map(|(t, w)| {
                    d.tokens.iter().filter(|x| *x == t).count() as f64 / d.tokens.len() as f64 * w
                })
                .collect()
        })
        .collect();
    (vocab, rows)
}

fn tfidf_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for corpus in 0..100 {
        let n_docs = rng.random_range(1..=50);
        let vocab_size = rng.random_range(1..=200);
        let docs = synth::random_documents(n_docs, vocab_size, 40, rng.random());
        let vocab = tfidf::fit(&docs).map_err(|e| e.to_string())?;
        let sparse = tfidf::transform(&docs, &vocab);
        let (terms, dense) = dense_tfidf(&docs);
        ensure(vocab.terms() == terms.as_slice(), || {
            format!("corpus {corpus}: vocabulary differs")
        })?;
        for (i, row) in dense.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                let got = sparse.matrix.get(i, j).unwrap_or(0.0);
                worst = worst.max((got - want).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max |sparse - dense| = {worst:e}")
    })?;
    Ok(format!("100 corpora, max |sparse - dense| = {worst:e}"))
}

// ---- GBT ----------------------------------------------------------------

fn training_accuracy(points: &synth::LabeledPoints, config: &TrainConfig) -> Result<f64, String> {
    let matrix = points.matrix();
    let model = gbt::train(&matrix, &points.labels, config).map_err(|e| e.to_string())?;
    let predicted = model.predict_labels(&matrix).map_err(|e| e.to_string())?;
    let hits = predicted
        .iter()
        .zip(&points.labels)
        .filter(|(p, t)| **p == t.as_str())
        .count();
    Ok(hits as f64 / points.labels.len() as f64)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn gbt_correctness() -> Outcome {
    let xor = synth::xor_points();
    let xor_cfg = TrainConfig {
        max_depth: 2,
        num_round: 100,
        min_child_hessian: 0.0,
        ..TrainConfig::default()
    };
    let acc = training_accuracy(&xor, &xor_cfg)?;
    ensure(acc == 1.0, || format!("XOR training accuracy {acc}"))?;

    let blobs = synth::gaussian_blobs(30, 0.5, 7);
    ensure(blobs.labels.len() == 60, || "blob fixture size".into())?;
    let acc = training_accuracy(
        &blobs,
        &TrainConfig {
            max_depth: 3,
            num_round: 50,
            ..TrainConfig::default()
        },
    )?;
    ensure(acc == 1.0, || format!("blob training accuracy {acc}"))?;

    let mut rounds_checked = 0;
    for seed in 0..5 {
        let noisy = synth::gaussian_blobs(40, 1.5, seed);
        for eta in [0.05, 0.3, 1.0] {
            let cfg = TrainConfig {
                max_depth: 3,
                eta,
                num_round: 40,
                subsample: 1.0,
                ..TrainConfig::default()
            };
            let model =
                gbt::train(&noisy.matrix(), &noisy.labels, &cfg).map_err(|e| e.to_string())?;
            for (r, w) in model.training_loss().windows(2).enumerate() {
                ensure(w[1] <= w[0] + 1e-12, || {
                    format!(
                        "seed {seed} eta {eta} round {}: {} -> {}",
                        r + 1,
                        w[0],
                        w[1]
                    )
                })?;
                rounds_checked += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let k = rng.random_range(2..=8);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let label = rng.random_range(0..k);
        let (grad, hess) = loss::gradients(&logits, label);
        for c in 0..k {
            let shifted = |d: f64| {
                let mut z = logits.clone();
                z[c] += d;
                z
            };
            let fd_grad = (loss::cross_entropy(&shifted(h), label)
                - loss::cross_entropy(&shifted(-h), label))
                / (2.0 * h);
            let fd_hess = (loss::gradients(&shifted(h), label).0[c]
                - loss::gradients(&shifted(-h), label).0[c])
                / (2.0 * h);
            worst = worst
                .max(rel_err(grad[c], fd_grad))
                .max(rel_err(hess[c], fd_hess));
        }
    }
    ensure(worst < 1e-6, || {
        format!("finite-difference relative error {worst:e}")
    })?;
    Ok(format!(
        "XOR 1.0, blobs 1.0, {rounds_checked} rounds non-increasing, max FD rel err {worst:.1e}"
    ))
}

// ---- Grid search --------------------------------------------------------

fn grid_mechanics() -> Outcome {
    let text = std::fs::read_to_string(repo().join("data/grid.toml")).map_err(|e| e.to_string())?;
    let (grid, folds) = ParamGrid::from_toml(&text).map_err(|e| e.to_string())?;
    ensure(folds == Some(5), || format!("folds {folds:?}"))?;
    let base = TrainConfig::default();
    let configs = grid.configs(&base).map_err(|e| e.to_string())?;
    ensure(configs.len() == 162, || {
        format!("{} configurations", configs.len())
    })?;
    let distinct: HashSet<String> = configs.iter().map(|c| format!("{c:?}")).collect();
    ensure(distinct.len() == 162, || "duplicate configurations".into())?;

    // A bowl with its minimum at one specific grid point.
    let stub = |c: &TrainConfig| {
        (c.max_depth as f64 - 6.0).powi(2)
            + (c.eta - 0.1).powi(2) * 100.0
            + (c.num_round as f64 - 200.0).powi(2) / 1e4
            + (c.gamma - 0.3).powi(2)
            + (c.subsample - 0.8).powi(2)
    };
    let table = grid_search_with(&grid, &base, |c| Ok(vec![stub(c), stub(c) + 0.5]))
        .map_err(|e| e.to_string())?;
    let brute = configs
        .iter()
        .min_by(|a, b| stub(a).total_cmp(&stub(b)))
        .expect("non-empty");
    ensure(table.rows.len() == 162, || {
        format!("{} table rows", table.rows.len())
    })?;
    ensure(table.best_config() == brute, || {
        format!("best {:?} vs brute force {brute:?}", table.best_config())
    })?;
    Ok(format!(
        "162 configurations, argmin max_depth={} eta={} num_round={} gamma={} subsample={}",
        brute.max_depth, brute.eta, brute.num_round, brute.gamma, brute.subsample
    ))
}

// ---- College assignment -------------------------------------------------

fn random_case(rng: &mut ChaCha8Rng) -> (CollegeMapping, Dataset) {
    let n_colleges = rng.random_range(1..=7);
    let sizes: Vec<usize> = (0..n_colleges).map(|_| rng.random_range(1..=4)).collect();
    let mut json = serde_json::Map::new();
    for (c, n) in sizes.iter().enumerate() {
        let depts: Vec<String> = (0..*n).map(|k| format!("Dept {c}.{k}")).collect();
        json.insert(format!("College {c}"), depts.into());
    }
    let mapping = CollegeMapping::from_json_str(&serde_json::Value::Object(json).to_string())
        .expect("valid mapping");
    let records = (0..rng.random_range(0..30))
        .map(|i| {
            let department = match rng.random_range(0..6) {
                0 => None,
                1 => Some(format!("Unowned {i}")),
                _ => {
                    let c = rng.random_range(0..n_colleges);
                    let name = format!("Dept {c}.{}", rng.random_range(0..sizes[c]));
                    let name = if rng.random() {
                        name.to_uppercase()
                    } else {
                        name
                    };
                    Some(format!(
                        "{}{name}{}",
                        " ".repeat(rng.random_range(0..3)),
                        " ".repeat(rng.random_range(0..2))
                    ))
                }
            };
            let college = match rng.random_range(0..4) {
                0 => None,
                1 => Some(MISSING.to_owned()),
                2 => Some("Stale".to_owned()),
                _ => Some(format!("College {}", rng.random_range(0..n_colleges))),
            };
            ThesisRecord {
                id: format!("r{i}"),
                title: "t".into(),
                keywords: vec![],
                department,
                college,
            }
        })
        .collect();
    (
        mapping,
        Dataset::from_records(records, "generated").expect("unique ids"),
    )
}

fn owning_college(mapping: &CollegeMapping, department: &str) -> String {
    let wanted = department.trim().to_lowercase();
    mapping
        .entries()
        .find(|(_, depts)| depts.iter().any(|d| d.trim().to_lowercase() == wanted))
        .map_or_else(|| MISSING.to_owned(), |(c, _)| c.to_owned())
}

fn college_assignment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut labeled_rows = 0;
    for case in 0..10_000 {
        let (mapping, dataset) = random_case(&mut rng);
        let labeled = assign_colleges(&dataset, &mapping);
        for (before, after) in dataset.records().iter().zip(labeled.records()) {
            let want = before
                .department
                .as_deref()
                .map_or_else(|| MISSING.to_owned(), |d| owning_college(&mapping, d));
            ensure(after.college.as_deref() == Some(want.as_str()), || {
                format!(
                    "case {case}, record {}: got {:?}, want {want:?}",
                    before.id, after.college
                )
            })?;
            labeled_rows += 1;
        }
        let again = assign_colleges(&labeled, &mapping);
        ensure(again.records() == labeled.records(), || {
            format!("case {case}: relabeling changed the output")
        })?;
    }
    Ok(format!("10000 cases, {labeled_rows} records, idempotent"))
}

// ---- LLM harness --------------------------------------------------------

fn harness_round_trip() -> Outcome {
    let mapping = repo_mapping();
    let records = synth::thesis_records(&mapping, 15, 4);
    let dataset = assign_colleges(
        &Dataset::from_records(records, "synthetic").expect("ids"),
        &mapping,
    );
    let batches = draw_samples(
        &dataset,
        &mapping,
        &Stopwords::english(),
        &SampleSpec::with_seed(1),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        batches.len() == 5 && batches.iter().all(|b| b.len() == 70),
        || "expected 5 batches of 70".into(),
    )?;
    let aliases = LabelAliases::bundled();

    for variant in [Variant::Plain, Variant::Bracketed] {
        let template = PromptTemplate::new(variant);
        let mock = MockBackend::for_batches(&batches, &template, &mapping, &[]);
        let out = run_experiment(
            &batches,
            &template,
            &mock,
            &mapping,
            &aliases,
            &ExperimentConfig::new("mock"),
        );
        ensure(out.predictions.len() == 350, || {
            format!("{variant}: {} rows", out.predictions.len())
        })?;
        ensure(out.failures.is_empty(), || {
            format!("{variant}: {} failures", out.failures.len())
        })?;
        let reports = model_reports(&out.predictions).map_err(|e| e.to_string())?;
        let per_class = &reports[0].per_class;
        ensure(
            per_class.len() == 7 && per_class.values().all(|a| a.accuracy == 1.0),
            || format!("{variant}: per-class accuracies {per_class:?}"),
        )?;
    }

    let template = PromptTemplate::new(Variant::Plain);
    let mock =
        MockBackend::for_batches(&batches, &template, &mapping, &[(2, Fault::ExtraLines(2))]);
    let out = run_experiment(
        &batches,
        &template,
        &mock,
        &mapping,
        &aliases,
        &ExperimentConfig::new("mock"),
    );
    let mismatches: Vec<&LlmError> = out
        .batches
        .iter()
        .filter_map(|b| b.result.as_ref().err())
        .collect();
    ensure(mismatches.len() == 1, || {
        format!("{} failed batches", mismatches.len())
    })?;
    ensure(
        matches!(
            mismatches[0],
            LlmError::CountMismatch {
                got: 72,
                expected: 70
            }
        ),
        || format!("failure was {:?}", mismatches[0]),
    )?;
    ensure(
        out.failures.len() == 1 && out.failures[0].kind == "CountMismatch",
        || format!("{:?}", out.failures),
    )?;
    ensure(out.predictions.len() == 280, || {
        format!("{} rows after the fault", out.predictions.len())
    })?;
    Ok("fault-free 350 rows at 1.0 (both variants); 2 extra lines -> one CountMismatch{72,70}, 280 rows".into())
}

// ---- Evaluation fixture -------------------------------------------------

fn evaluation_fixture() -> Outcome {
    let path = repo().join("crates/core/tests/fixtures/xgboost_reference_predictions.csv");
    let preds = PredictionSet::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let reference_row = [
        ("CE", 0.569),
        ("MCS", 0.714),
        ("SCS", 0.685),
        ("Tepper", 0.727),
        ("DCHSS", 0.529),
        ("Heinz College", 0.0),
        ("CFA", 0.548),
    ];
    let acc = per_class_accuracy(&preds);
    for (college, want) in reference_row {
        let got = acc
            .get(college)
            .ok_or_else(|| format!("no rows for {college}"))?;
        // Recount from the raw rows rather than trusting the evaluator.
        let support = preds
            .rows()
            .iter()
            .filter(|r| r.true_label == college)
            .count();
        let correct = preds
            .rows()
            .iter()
            .filter(|r| r.true_label == college && r.is_correct())
            .count();
        ensure(got.support == support && got.correct == correct, || {
            format!("{college}: counts differ from recount")
        })?;
        let rounded = (correct as f64 / support as f64 * 1000.0).round() / 1000.0;
        ensure(rounded == want, || {
            format!("{college}: {rounded} vs {want}")
        })?;
    }
    ensure(acc["Heinz College"].support == 3, || "Heinz support".into())?;

    let mut worst = 0.0f64;
    let mut sets = vec![preds];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<&str> = reference_row.iter().map(|(c, _)| *c).collect();
    for _ in 0..200 {
        let rows = (0..rng.random_range(1..300))
            .map(|i| metaug_core::eval::Prediction {
                record_id: format!("r{i}"),
                true_label: labels[rng.random_range(0..labels.len())].into(),
                predicted_label: labels[rng.random_range(0..labels.len())].into(),
                model: ["m1", "m2"][rng.random_range(0..2)].into(),
                sample_id: rng.random_range(1..=5),
            })
            .collect();
        sets.push(PredictionSet::new(rows));
    }
    for set in &sets {
        for report in model_reports(set).map_err(|e| e.to_string())? {
            let total: usize = report.per_class.values().map(|a| a.support).sum();
            let weighted: f64 = report
                .per_class
                .values()
                .map(|a| a.accuracy * a.support as f64)
                .sum::<f64>()
                / total as f64;
            worst = worst.max((weighted - report.overall).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("weighted-mean identity off by {worst:e}")
    })?;
    Ok(format!(
        "7 per-class accuracies reproduced; weighted-mean identity max error {worst:e}"
    ))
}

// ---- End-to-end determinism ---------------------------------------------

fn metaug(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_metaug"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "metaug {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn pipeline(dir: &Path, mapping: &str, records: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    metaug(&[
        "label",
        "--in",
        records,
        "--mapping",
        mapping,
        "--out",
        &p("labeled.jsonl"),
    ])?;
    metaug(&[
        "sample",
        "--in",
        &p("labeled.jsonl"),
        "--mapping",
        mapping,
        "--out",
        &p("samples.jsonl"),
        "--seed",
        "11",
    ])?;
    metaug(&[
        "prompt",
        "--in",
        &p("samples.jsonl"),
        "--mapping",
        mapping,
        "--variant",
        "bracketed",
        "--out",
        &p("prompts"),
    ])?;
    metaug(&[
        "classify-llm",
        "--in",
        &p("samples.jsonl"),
        "--mapping",
        mapping,
        "--variant",
        "bracketed",
        "--endpoint",
        "mock:unknown=4:9",
        "--model",
        "mock-bracketed",
        "--out",
        &p("run"),
    ])?;
    metaug(&[
        "score",
        "--in",
        &p("run/predictions.csv"),
        "--mapping",
        mapping,
        "--out",
        &p("scores.json"),
    ])?;
    metaug(&[
        "report",
        "--in",
        &p("scores.json"),
        "--format",
        "markdown",
        "--out",
        &p("report.md"),
    ])?;
    let read = |name: &str| std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"));
    Ok((read("run/predictions.csv")?, read("report.md")?))
}

fn end_to_end_determinism() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mapping = repo().join("data/colleges.json");
    let records = synth::thesis_records(&repo_mapping(), 20, 8);
    let jsonl = Dataset::from_records(records, "synthetic")
        .expect("ids")
        .to_jsonl();
    let records_path = work.path().join("records.jsonl");
    std::fs::write(&records_path, jsonl).map_err(|e| e.to_string())?;

    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = work.path().join(name);
        std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
        runs.push(pipeline(
            &dir,
            &mapping.to_string_lossy(),
            &records_path.to_string_lossy(),
        )?);
    }
    ensure(runs[0].0 == runs[1].0, || {
        "PredictionSet files differ".into()
    })?;
    ensure(runs[0].1 == runs[1].1, || "report files differ".into())?;
    let rows = runs[0].0.iter().filter(|b| **b == b'\n').count() - 1;
    // Batch 4 fails on the injected unknown label, leaving four of five.
    ensure(rows == 280, || format!("{rows} prediction rows"))?;
    let report = String::from_utf8_lossy(&runs[0].1);
    ensure(report.starts_with("| Model | CE | MCS |"), || {
        format!("unexpected report header: {report}")
    })?;
    Ok(format!(
        "2 runs byte-identical ({rows} rows, {} byte report)",
        runs[0].1.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("tfidf-oracle", Duration::from_secs(10), tfidf_oracle),
        ("gbt-correctness", Duration::from_secs(30), gbt_correctness),
        (
            "grid-search-mechanics",
            Duration::from_secs(5),
            grid_mechanics,
        ),
        (
            "college-assignment",
            Duration::from_secs(5),
            college_assignment,
        ),
        (
            "harness-round-trip",
            Duration::from_secs(60),
            harness_round_trip,
        ),
        (
            "evaluation-fixture",
            Duration::from_secs(60),
            evaluation_fixture,
        ),
        (
            "end-to-end-determinism",
            Duration::from_secs(120),
            end_to_end_determinism,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; too slow"))
            }
        });
        let secs = elapsed.as_secs_f64();
        let budget = limit.as_secs();
        match result {
            Ok(detail) => println!("PASS {name} [{secs:.2}s / {budget}s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{secs:.2}s / {budget}s] {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
