use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::Serialize;

use super::{
    classify, parse_labels, render_prompt, ChatBackend, ChatExchange, LabelAliases, LlmError,
    PromptTemplate, SampleBatch,
};
use crate::corpus::CollegeMapping;
use crate::eval::{Prediction, PredictionSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    /// Written to the `model` column of every prediction.
    pub model: String,
    pub max_in_flight: usize,
    /// Resubmit a batch once when its answer cannot be parsed.
    pub repair: bool,
}

impl ExperimentConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            max_in_flight: 1,
            repair: false,
        }
    }
}

/// Everything that happened to one batch.
#[derive(Debug)]
pub struct BatchOutcome {
    pub sample_id: u32,
    pub prompt: String,
    /// One entry per answered request; two when a repair was attempted.
    pub exchanges: Vec<ChatExchange>,
    pub result: Result<Vec<String>, LlmError>,
}

/// A batch that contributed no predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatchFailure {
    pub sample_id: u32,
    pub kind: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub predictions: PredictionSet,
    pub failures: Vec<BatchFailure>,
    /// In batch order.
    pub batches: Vec<BatchOutcome>,
}

fn run_batch(
    batch: &SampleBatch,
    template: &PromptTemplate,
    backend: &dyn ChatBackend,
    mapping: &CollegeMapping,
    aliases: &LabelAliases,
    repair: bool,
) -> BatchOutcome {
    let prompt = render_prompt(template, batch, mapping);
    let mut exchanges = Vec::new();
    let submit = |exchanges: &mut Vec<ChatExchange>| -> Result<Vec<String>, LlmError> {
        let exchange = classify(backend, &prompt)?;
        let parsed = parse_labels(
            &exchange.raw,
            batch.len(),
            mapping,
            aliases,
            template.variant(),
        );
        exchanges.push(exchange);
        Ok(parsed?.labels)
    };
    let mut result = submit(&mut exchanges);
    if repair {
        if let Err(e) = &result {
            if e.is_parse_failure() {
                log::info!("sample {}: {e}; resubmitting once", batch.sample_id);
                result = submit(&mut exchanges);
            }
        }
    }
    BatchOutcome {
        sample_id: batch.sample_id,
        prompt,
        exchanges,
        result,
    }
}

/// Renders, submits and parses every batch.
///
/// Up to `max_in_flight` batches are outstanding at once; results are
/// assembled in batch order regardless of completion order. A batch either
/// contributes one prediction per document or none.
pub fn run_experiment(
    batches: &[SampleBatch],
    template: &PromptTemplate,
    backend: &dyn ChatBackend,
    mapping: &CollegeMapping,
    aliases: &LabelAliases,
    config: &ExperimentConfig,
) -> ExperimentOutcome {
    let slots: Vec<Mutex<Option<BatchOutcome>>> =
        batches.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.clamp(1, batches.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(batch) = batches.get(i) else {
                    break;
                };
                let outcome = run_batch(batch, template, backend, mapping, aliases, config.repair);
                *slots[i].lock().expect("slot lock") = Some(outcome);
            });
        }
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut outcomes = Vec::with_capacity(batches.len());
    for (batch, slot) in batches.iter().zip(slots) {
        let outcome = slot
            .into_inner()
            .expect("slot lock")
            .expect("every batch ran");
        match &outcome.result {
            Ok(labels) => {
                for (item, label) in batch.items.iter().zip(labels) {
                    rows.push(Prediction {
                        record_id: item.record_id.clone(),
                        true_label: item.true_label.clone(),
                        predicted_label: label.clone(),
                        model: config.model.clone(),
                        sample_id: batch.sample_id,
                    });
                }
            }
            Err(e) => {
                log::warn!("sample {} excluded: {e}", batch.sample_id);
                failures.push(BatchFailure {
                    sample_id: batch.sample_id,
                    kind: e.kind().to_owned(),
                    message: e.to_string(),
                });
            }
        }
        outcomes.push(outcome);
    }
    ExperimentOutcome {
        predictions: PredictionSet::new(rows),
        failures,
        batches: outcomes,
    }
}

#[derive(Serialize)]
struct ExchangeRecord<'a> {
    sample_id: u32,
    attempt: usize,
    endpoint: &'a str,
    timestamp: &'a str,
    latency_ms: u64,
    retries: u32,
    response_file: String,
}

/// Writes the prompt and every raw response of each batch as plain text,
/// plus `exchanges.jsonl` (timing metadata) and `failures.csv`.
pub fn write_audit(dir: &Path, outcome: &ExperimentOutcome) -> Result<(), LlmError> {
    fs::create_dir_all(dir)?;
    let mut meta = String::new();
    for batch in &outcome.batches {
        let stem = format!("sample-{:02}", batch.sample_id);
        fs::write(dir.join(format!("{stem}.prompt.txt")), &batch.prompt)?;
        for (attempt, ex) in batch.exchanges.iter().enumerate() {
            let response_file = if attempt == 0 {
                format!("{stem}.response.txt")
            } else {
                format!("{stem}.response-{}.txt", attempt + 1)
            };
            fs::write(dir.join(&response_file), &ex.raw)?;
            let record = ExchangeRecord {
                sample_id: batch.sample_id,
                attempt: attempt + 1,
                endpoint: &ex.endpoint,
                timestamp: &ex.timestamp,
                latency_ms: ex.latency_ms,
                retries: ex.retries,
                response_file,
            };
            meta.push_str(&serde_json::to_string(&record).expect("plain record"));
            meta.push('\n');
        }
    }
    fs::write(dir.join("exchanges.jsonl"), meta)?;
    fs::write(dir.join("failures.csv"), failures_csv(&outcome.failures))?;
    Ok(())
}

/// `sample_id,kind,message`, one line per failed batch.
pub fn failures_csv(failures: &[BatchFailure]) -> String {
    let mut out = String::from("sample_id,kind,message\n");
    for f in failures {
        let _ = writeln!(
            out,
            "{},{},\"{}\"",
            f.sample_id,
            f.kind,
            f.message.replace('"', "\"\"")
        );
    }
    out
}
