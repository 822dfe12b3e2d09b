//! Scoring of prediction sets: per-class accuracy, per-sample spread,
//! confusion matrices, and report rendering.
//!
//! Every classifier writes the same [`PredictionSet`] CSV, so a model trained
//! here, an external fine-tuned model, and a chat endpoint are all scored by
//! the same code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no predictions to score")]
    Empty,
    #[error("unsupported report format {0:?} (expected markdown, csv or plotdata)")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const PREDICTION_HEADER: [&str; 5] = [
    "record_id",
    "true_label",
    "predicted_label",
    "model",
    "sample_id",
];

/// One scored document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    pub true_label: String,
    pub predicted_label: String,
    pub model: String,
    /// 1-based; a single held-out test set is sample 1.
    pub sample_id: u32,
}

impl Prediction {
    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionSet {
    rows: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(rows: Vec<Prediction>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Prediction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: PredictionSet) {
        self.rows.extend(other.rows);
    }

    /// Distinct model names, sorted.
    pub fn models(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.model.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn by_model(&self, model: &str) -> PredictionSet {
        Self::new(
            self.rows
                .iter()
                .filter(|r| r.model == model)
                .cloned()
                .collect(),
        )
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), EvalError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        w.write_record(PREDICTION_HEADER).map_err(csv_io)?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV layout written by [`Self::write_csv`]. The header must
    /// match exactly; errors carry the 1-based file line.
    pub fn read_csv(input: impl Read) -> Result<Self, EvalError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(input);
        let headers = reader.headers().map_err(|e| parse_error(1, &e))?.clone();
        if headers.iter().collect::<Vec<_>>() != PREDICTION_HEADER {
            return Err(EvalError::Parse {
                line: 1,
                message: format!("expected header {:?}", PREDICTION_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_error(line, &e)
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let row: Prediction = record
                .deserialize(Some(&headers))
                .map_err(|e| parse_error(line, &e))?;
            if row.sample_id == 0 {
                return Err(EvalError::Parse {
                    line,
                    message: "sample_id must be at least 1".into(),
                });
            }
            if row.true_label.is_empty() || row.predicted_label.is_empty() {
                return Err(EvalError::Parse {
                    line,
                    message: "empty label".into(),
                });
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Self::read_csv(File::open(path)?)
    }
}

fn csv_io(e: csv::Error) -> EvalError {
    EvalError::Io(io::Error::other(e))
}

fn parse_error(line: usize, e: &dyn std::fmt::Display) -> EvalError {
    EvalError::Parse {
        line,
        message: e.to_string(),
    }
}

/// Recall of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub support: usize,
}

/// Correct among rows whose true label is the class, for every true label
/// present.
pub fn per_class_accuracy(preds: &PredictionSet) -> BTreeMap<String, ClassAccuracy> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for row in preds.rows() {
        let entry = counts.entry(row.true_label.clone()).or_default();
        entry.1 += 1;
        if row.is_correct() {
            entry.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(label, (correct, support))| {
            let accuracy = correct as f64 / support as f64;
            (
                label,
                ClassAccuracy {
                    accuracy,
                    correct,
                    support,
                },
            )
        })
        .collect()
}

/// Everything reported about one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub per_class: BTreeMap<String, ClassAccuracy>,
    /// Pooled over all rows.
    pub overall: f64,
    /// `(sample_id, accuracy)` in sample order.
    pub samples: Vec<(u32, f64)>,
    pub mean: f64,
    /// Population standard deviation of the per-sample accuracies.
    pub std: f64,
    /// Set when there is only one sample, so `std` is a placeholder 0.
    pub single_sample: bool,
}

/// Scores one model's rows. The model name is taken from the rows; if they
/// name several models the names are joined with `+`.
pub fn sample_summary(preds: &PredictionSet) -> Result<ModelReport, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_sample: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for row in preds.rows() {
        let entry = by_sample.entry(row.sample_id).or_default();
        entry.1 += 1;
        if row.is_correct() {
            entry.0 += 1;
            correct += 1;
        }
    }
    let samples: Vec<(u32, f64)> = by_sample
        .into_iter()
        .map(|(id, (c, n))| (id, c as f64 / n as f64))
        .collect();
    let k = samples.len() as f64;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / k;
    let std = (samples.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / k).sqrt();
    Ok(ModelReport {
        model: preds.models().join("+"),
        per_class: per_class_accuracy(preds),
        overall: correct as f64 / preds.len() as f64,
        single_sample: samples.len() == 1,
        samples,
        mean,
        std,
    })
}

/// One report per model, sorted by model name.
pub fn model_reports(preds: &PredictionSet) -> Result<Vec<ModelReport>, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    preds
        .models()
        .into_iter()
        .map(|m| sample_summary(&preds.by_model(m)))
        .collect()
}

/// `counts[t][p]` = rows with true label `labels[t]` predicted as
/// `labels[p]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Header `true\predicted,<labels...>`, then one row per true label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(&csv_field(l));
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(&csv_field(label));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Labels are the sorted union of true and predicted labels.
pub fn confusion(preds: &PredictionSet) -> ConfusionMatrix {
    let labels: Vec<String> = preds
        .rows()
        .iter()
        .flat_map(|r| [r.true_label.clone(), r.predicted_label.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut counts = vec![vec![0; labels.len()]; labels.len()];
    for row in preds.rows() {
        let t = labels.binary_search(&row.true_label).expect("label set");
        let p = labels
            .binary_search(&row.predicted_label)
            .expect("label set");
        counts[t][p] += 1;
    }
    ConfusionMatrix { labels, counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Models as rows, colleges as columns, then mean and std.
    Markdown,
    /// Long format: `model,college,accuracy,correct,support`.
    Csv,
    /// `model,mean,std` for external plotting.
    PlotData,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "plotdata" => Ok(Self::PlotData),
            other => Err(EvalError::UnsupportedFormat(other.to_owned())),
        }
    }
}

/// Renders reports in `format`. `columns` fixes the college order; colleges
/// seen in the reports but not listed are appended in sorted order.
pub fn emit_report(reports: &[ModelReport], format: ReportFormat, columns: &[String]) -> String {
    let mut cols: Vec<String> = columns.to_vec();
    let extra: BTreeSet<&String> = reports
        .iter()
        .flat_map(|r| r.per_class.keys())
        .filter(|k| !columns.contains(k))
        .collect();
    cols.extend(extra.into_iter().cloned());

    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            out.push_str("| Model |");
            for c in &cols {
                let _ = write!(out, " {c} |");
            }
            out.push_str(" Accuracy | Std |\n|---|");
            for _ in &cols {
                out.push_str("---:|");
            }
            out.push_str("---:|---:|\n");
            for r in reports {
                let _ = write!(out, "| {} |", r.model);
                for c in &cols {
                    match r.per_class.get(c) {
                        Some(a) => {
                            let _ = write!(out, " {:.3} |", a.accuracy);
                        }
                        None => out.push_str(" - |"),
                    }
                }
                let std = if r.single_sample {
                    "n/a".to_owned()
                } else {
                    format!("{:.3}", r.std)
                };
                let _ = writeln!(out, " {:.3} | {std} |", r.mean);
            }
        }
        ReportFormat::Csv => {
            out.push_str("model,college,accuracy,correct,support\n");
            for r in reports {
                for c in &cols {
                    if let Some(a) = r.per_class.get(c) {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            csv_field(&r.model),
                            csv_field(c),
                            a.accuracy,
                            a.correct,
                            a.support
                        );
                    }
                }
            }
        }
        ReportFormat::PlotData => {
            out.push_str("model,mean,std\n");
            for r in reports {
                let _ = writeln!(out, "{},{},{}", csv_field(&r.model), r.mean, r.std);
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
