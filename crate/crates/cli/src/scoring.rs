//! `score` and `report`.

use std::collections::BTreeMap;

use anyhow::{bail, Context};
use metaug_core::corpus::MISSING;
use metaug_core::eval::{
    confusion, emit_report, model_reports, ConfusionMatrix, ModelReport, PredictionSet,
    ReportFormat,
};
use serde::{Deserialize, Serialize};

use crate::files;
use crate::manifest::{self, Run};
use crate::{usage, ReportArgs, ScoreArgs};

/// Contents of the file written by `score`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Scores {
    /// College column order, from the mapping when one was given.
    pub columns: Vec<String>,
    pub models: Vec<ModelReport>,
    pub confusion: BTreeMap<String, ConfusionMatrix>,
}

pub fn score(args: &ScoreArgs) -> anyhow::Result<()> {
    let inputs: Vec<&std::path::Path> = args.input.iter().map(|p| p.as_path()).collect();
    files::distinct_output(&args.out, &inputs)?;
    for path in &args.input {
        files::require_file(path)?;
    }
    let mapping = args
        .mapping
        .as_deref()
        .map(files::load_mapping)
        .transpose()?;

    let mut all = PredictionSet::default();
    for path in &args.input {
        let set = PredictionSet::load(path).with_context(|| path.display().to_string())?;
        if let Some(m) = &mapping {
            for (i, row) in set.rows().iter().enumerate() {
                for label in [&row.true_label, &row.predicted_label] {
                    if label != MISSING && !m.contains_college(label) {
                        // Data rows start on line 2; quoted fields never span lines here.
                        bail!(
                            "{}: line {}: label {label:?} is not a college of the mapping",
                            path.display(),
                            i + 2
                        );
                    }
                }
            }
        }
        all.extend(set);
    }
    if all.is_empty() {
        bail!(
            "no prediction rows in {}",
            args.input
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    let models = model_reports(&all)?;
    let confusion = all
        .models()
        .into_iter()
        .map(|m| (m.to_owned(), confusion(&all.by_model(m))))
        .collect();
    let columns = mapping
        .as_ref()
        .map_or_else(Vec::new, |m| m.colleges().map(str::to_owned).collect());
    let scores = Scores {
        columns,
        models,
        confusion,
    };

    let mut run_inputs = args.input.clone();
    run_inputs.extend(args.mapping.clone());
    let run = Run::start(
        "score",
        manifest::beside(&args.out),
        serde_json::json!({ "rows": all.len() }),
        &[],
        run_inputs,
        vec![args.out.clone()],
    )?;
    let mut text = serde_json::to_string_pretty(&scores).expect("scores serialize");
    text.push('\n');
    files::write(&args.out, text)?;
    run.finish()
}

pub fn report(args: &ReportArgs) -> anyhow::Result<()> {
    let format: ReportFormat = args
        .format
        .parse()
        .map_err(|e: metaug_core::eval::EvalError| usage(e.to_string()))?;
    files::distinct_output(&args.out, &[&args.input])?;
    files::require_file(&args.input)?;
    let scores: Scores = serde_json::from_str(&files::read(&args.input)?)
        .with_context(|| args.input.display().to_string())?;
    if scores.models.is_empty() {
        bail!("{}: no models", args.input.display());
    }
    let columns = match &args.mapping {
        Some(p) => files::load_mapping(p)?
            .colleges()
            .map(str::to_owned)
            .collect(),
        None => scores.columns.clone(),
    };

    let mut inputs = vec![args.input.clone()];
    inputs.extend(args.mapping.clone());
    let run = Run::start(
        "report",
        manifest::beside(&args.out),
        serde_json::json!({ "format": args.format, "columns": columns }),
        &[],
        inputs,
        vec![args.out.clone()],
    )?;
    files::write(&args.out, emit_report(&scores.models, format, &columns))?;
    run.finish()
}
