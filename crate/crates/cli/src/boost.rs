//! `train`, `gridsearch` and `predict` over a feature directory.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use metaug_core::eval::{Prediction, PredictionSet};
use metaug_core::gbt::{self, grid_search, BoostedEnsemble, ParamGrid, TrainConfig};
use metaug_core::tfidf::{TfidfMatrix, Vocabulary};

use crate::config::PipelineConfig;
use crate::files;
use crate::manifest::{self, Run};
use crate::records::{matrix_file, rows_file, VOCAB_FILE};
use crate::{usage, GridArgs, PredictArgs, TrainArgs};

const DEFAULT_FOLDS: usize = 5;

/// One split of a feature directory.
struct Part {
    matrix: TfidfMatrix,
    labels: Vec<String>,
    files: Vec<PathBuf>,
}

fn load_part(dir: &Path, part: &str) -> anyhow::Result<Part> {
    files::require_dir(dir)?;
    let rows_path = dir.join(rows_file(part));
    let coo_path = dir.join(matrix_file(part));
    files::require_file(&rows_path)?;
    files::require_file(&coo_path)?;

    let text = files::read(&rows_path)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [row, id, label] = fields[..] else {
            bail!(
                "{}: line {}: expected row, record_id and label",
                rows_path.display(),
                i + 1
            );
        };
        if row.parse::<usize>().ok() != Some(ids.len()) {
            bail!(
                "{}: line {}: row {row:?} out of sequence",
                rows_path.display(),
                i + 1
            );
        }
        ids.push(id.to_owned());
        labels.push(label.to_owned());
    }
    let file = std::fs::File::open(&coo_path).with_context(|| coo_path.display().to_string())?;
    let matrix = TfidfMatrix::read_coo(BufReader::new(file), ids)
        .with_context(|| coo_path.display().to_string())?;
    Ok(Part {
        matrix,
        labels,
        files: vec![rows_path, coo_path],
    })
}

fn train_config(config: &PipelineConfig, seed: Option<u64>) -> anyhow::Result<TrainConfig> {
    let mut cfg = config.train;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().context("[train] section")?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs) -> anyhow::Result<()> {
    let config = PipelineConfig::load(args.config.as_deref())?;
    let cfg = train_config(&config, args.seed)?;
    let part = load_part(&args.input, "train")?;
    let model = gbt::train(&part.matrix.matrix, &part.labels, &cfg)
        .with_context(|| args.input.display().to_string())?;

    let mut inputs = part.files;
    inputs.extend(args.config.clone());
    let run = Run::start(
        "train",
        manifest::beside(&args.out),
        cfg,
        &[("train", cfg.seed)],
        inputs,
        vec![args.out.clone()],
    )?;
    files::write(&args.out, model.to_json())?;
    run.finish()
}

/// Splits the grid file into the parameter grid and the base config. Grid
/// keys live in a `[grid]` table or, failing that, at the top level.
fn read_grid(path: &Path) -> anyhow::Result<(ParamGrid, Option<usize>)> {
    const SECTIONS: [&str; 7] = [
        "split",
        "train",
        "sample",
        "endpoint",
        "experiment",
        "stopwords",
        "aliases",
    ];
    let text = files::read(path)?;
    let mut table: toml::Table =
        toml::from_str(&text).with_context(|| path.display().to_string())?;
    let grid_table = match table.remove("grid") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => bail!("{}: [grid] must be a table", path.display()),
        None => {
            table.retain(|k, _| !SECTIONS.contains(&k));
            table
        }
    };
    let grid_text = toml::to_string(&grid_table).expect("table serializes");
    let (grid, folds) =
        ParamGrid::from_toml(&grid_text).with_context(|| path.display().to_string())?;
    if grid.is_empty() {
        bail!("{}: the grid has no parameter values", path.display());
    }
    Ok((grid, folds))
}

pub fn gridsearch(args: &GridArgs) -> anyhow::Result<()> {
    files::distinct_output(&args.out, &[&args.config])?;
    files::require_file(&args.config)?;
    let config = PipelineConfig::load(Some(&args.config))?;
    let base = train_config(&config, args.seed)?;
    let (grid, folds) = read_grid(&args.config)?;
    let folds = folds.unwrap_or(DEFAULT_FOLDS);
    let configs = grid
        .configs(&base)
        .with_context(|| args.config.display().to_string())?;
    let part = load_part(&args.input, "train")?;
    log::info!("{} grid points x {folds} folds", configs.len());

    let best_path = best_config_path(&args.out);
    let mut inputs = part.files.clone();
    inputs.push(args.config.clone());
    let run = Run::start(
        "gridsearch",
        manifest::beside(&args.out),
        serde_json::json!({ "base": base, "folds": folds, "grid_points": configs.len() }),
        &[("gridsearch", base.seed)],
        inputs,
        vec![args.out.clone(), best_path.clone()],
    )?;
    let table = grid_search(
        &part.matrix.matrix,
        &part.labels,
        &grid,
        &base,
        folds,
        base.seed,
    )
    .with_context(|| args.input.display().to_string())?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    files::write(&args.out, csv)?;

    #[derive(serde::Serialize)]
    struct Best<'a> {
        train: &'a TrainConfig,
    }
    let best = toml::to_string(&Best {
        train: table.best_config(),
    })
    .expect("config serializes");
    files::write(&best_path, best)?;
    run.finish()
}

/// `<out>.best.toml`: the winning configuration as a `[train]` table, usable
/// as `train --config`.
pub fn best_config_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".best.toml");
    PathBuf::from(name)
}

pub fn predict(args: &PredictArgs) -> anyhow::Result<()> {
    if args.name.trim().is_empty() {
        return Err(usage("--name must not be empty"));
    }
    files::distinct_output(&args.out, &[&args.model])?;
    files::require_file(&args.model)?;
    let model = BoostedEnsemble::from_json(&files::read(&args.model)?)
        .with_context(|| args.model.display().to_string())?;
    let part = load_part(&args.input, "test")?;
    let vocab_path = args.input.join(VOCAB_FILE);
    files::require_file(&vocab_path)?;
    let vocab = Vocabulary::read_tsv(BufReader::new(
        std::fs::File::open(&vocab_path).with_context(|| vocab_path.display().to_string())?,
    ))
    .with_context(|| vocab_path.display().to_string())?;
    if vocab.len() != model.n_features() {
        bail!(
            "{}: model expects {} features but the vocabulary has {}",
            args.model.display(),
            model.n_features(),
            vocab.len()
        );
    }
    let predicted = model
        .predict_labels(&part.matrix.matrix)
        .with_context(|| args.input.display().to_string())?;
    let rows = part
        .matrix
        .row_ids
        .iter()
        .zip(&part.labels)
        .zip(predicted)
        .map(|((id, truth), p)| Prediction {
            record_id: id.clone(),
            true_label: truth.clone(),
            predicted_label: p.to_owned(),
            model: args.name.clone(),
            sample_id: 1,
        })
        .collect();

    let mut inputs = part.files;
    inputs.push(args.model.clone());
    let run = Run::start(
        "predict",
        manifest::beside(&args.out),
        serde_json::json!({ "name": args.name }),
        &[],
        inputs,
        vec![args.out.clone()],
    )?;
    let mut csv = Vec::new();
    PredictionSet::new(rows).write_csv(&mut csv)?;
    files::write(&args.out, csv)?;
    run.finish()
}
