//! `ingest`, `label` and `featurize`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use metaug_core::corpus::{
    assign_colleges, class_distribution, split, split_over_mapping, Dataset, RecordFormat,
    SplitSpec,
};
use metaug_core::textprep::{build_document, DocumentText, Stopwords};
use metaug_core::tfidf::{self, TfidfMatrix};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::files;
use crate::manifest::{self, Run};
use crate::{FeaturizeArgs, IngestArgs, LabelArgs};

pub fn ingest(args: &IngestArgs) -> anyhow::Result<()> {
    let format = files::record_format(&args.input, args.format.as_deref())?;
    files::distinct_output(&args.out, &[&args.input])?;
    files::require_file(&args.input)?;
    let dataset = files::load_records(&args.input, format)?;

    #[derive(Serialize)]
    struct Resolved {
        format: RecordFormat,
        records: usize,
    }
    let run = Run::start(
        "ingest",
        manifest::beside(&args.out),
        Resolved {
            format,
            records: dataset.len(),
        },
        &[],
        vec![args.input.clone()],
        vec![args.out.clone()],
    )?;
    files::write(&args.out, dataset.to_jsonl())?;
    run.finish()
}

pub fn label(args: &LabelArgs) -> anyhow::Result<()> {
    let format = files::record_format(&args.input, None)?;
    files::distinct_output(&args.out, &[&args.input, &args.mapping])?;
    files::require_file(&args.input)?;
    let mapping = files::load_mapping(&args.mapping)?;
    let dataset = files::load_records(&args.input, format)?;
    let labeled = assign_colleges(&dataset, &mapping);
    let distribution = class_distribution(&labeled);
    for (college, n) in &distribution {
        log::info!("{college}: {n}");
    }

    let run = Run::start(
        "label",
        manifest::beside(&args.out),
        serde_json::json!({ "distribution": distribution }),
        &[],
        vec![args.input.clone(), args.mapping.clone()],
        vec![args.out.clone()],
    )?;
    files::write(&args.out, labeled.to_jsonl())?;
    run.finish()
}

/// Feature directory layout shared with `train`, `gridsearch` and `predict`.
pub const VOCAB_FILE: &str = "vocab.tsv";

pub fn matrix_file(part: &str) -> String {
    format!("{part}.coo.tsv")
}

pub fn rows_file(part: &str) -> String {
    format!("{part}.rows.tsv")
}

/// `row\trecord_id\tlabel`, one line per matrix row.
fn rows_tsv(docs: &[DocumentText], dataset: &Dataset) -> String {
    let labels: std::collections::HashMap<&str, &str> = dataset
        .records()
        .iter()
        .filter_map(|r| r.labeled_college().map(|c| (r.id.as_str(), c)))
        .collect();
    let mut out = String::from("row\trecord_id\tlabel\n");
    for (i, d) in docs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i}\t{}\t{}",
            d.record_id,
            labels[d.record_id.as_str()]
        );
    }
    out
}

fn documents(dataset: &Dataset, stopwords: &Stopwords) -> Vec<DocumentText> {
    dataset
        .records()
        .iter()
        .filter_map(|r| match build_document(r, stopwords) {
            Ok(d) => Some(d),
            Err(e) => {
                log::warn!("skipping: {e}");
                None
            }
        })
        .collect()
}

pub fn featurize(args: &FeaturizeArgs) -> anyhow::Result<()> {
    files::require_file(&args.input)?;
    let config = PipelineConfig::load(args.config.as_deref())?;
    let stopwords = config.stopwords()?;
    let mapping = args
        .mapping
        .as_deref()
        .map(files::load_mapping)
        .transpose()?;
    let format = files::record_format(&args.input, None)?;
    let dataset = files::load_records(&args.input, format)?;
    let spec = SplitSpec {
        train_fraction: config.split.train_fraction,
        seed: args.seed,
        stratified: config.split.stratified,
    };
    let (train_set, test_set) = match &mapping {
        Some(m) => {
            dataset
                .validate_labels(m)
                .with_context(|| args.input.display().to_string())?;
            split_over_mapping(&dataset, m, &spec)
        }
        None => split(&dataset, &spec),
    }
    .with_context(|| args.input.display().to_string())?;

    let train_docs = documents(&train_set, &stopwords);
    let test_docs = documents(&test_set, &stopwords);
    if train_docs.is_empty() {
        bail!(
            "{}: no labeled records with usable text",
            args.input.display()
        );
    }
    let vocab = tfidf::fit(&train_docs).with_context(|| args.input.display().to_string())?;
    let train_m = tfidf::transform(&train_docs, &vocab);
    let test_m = tfidf::transform(&test_docs, &vocab);

    let out = &args.out;
    let mut inputs = vec![args.input.clone()];
    inputs.extend(args.mapping.clone());
    inputs.extend(args.config.clone());
    let outputs = [
        matrix_file("train"),
        matrix_file("test"),
        rows_file("train"),
        rows_file("test"),
        VOCAB_FILE.into(),
    ]
    .into_iter()
    .map(|f| out.join(f))
    .collect();
    files::create_dir(out)?;
    let run = Run::start(
        "featurize",
        manifest::inside(out),
        serde_json::json!({
            "split": spec,
            "stopwords": config.stopwords,
            "vocabulary": vocab.len(),
            "train_rows": train_docs.len(),
            "test_rows": test_docs.len(),
        }),
        &[("split", args.seed)],
        inputs,
        outputs,
    )?;
    write_matrix(out, "train", &train_m)?;
    write_matrix(out, "test", &test_m)?;
    files::write(
        &out.join(rows_file("train")),
        rows_tsv(&train_docs, &train_set),
    )?;
    files::write(
        &out.join(rows_file("test")),
        rows_tsv(&test_docs, &test_set),
    )?;
    let mut buf = Vec::new();
    vocab.write_tsv(&mut buf)?;
    files::write(&out.join(VOCAB_FILE), buf)?;
    run.finish()
}

fn write_matrix(dir: &Path, part: &str, m: &TfidfMatrix) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    m.write_coo(&mut buf)?;
    files::write(&dir.join(matrix_file(part)), buf)
}
