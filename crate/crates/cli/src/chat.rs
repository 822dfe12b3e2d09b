//! `sample`, `prompt` and `classify-llm`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use metaug_core::corpus::CollegeMapping;
use metaug_core::llm::{
    draw_samples, render_prompt, run_experiment, write_audit, ChatBackend, Completion,
    EndpointConfig, ExperimentConfig, Fault, HttpChatBackend, LlmError, MockBackend,
    PromptTemplate, SampleBatch, SampleSpec,
};

use crate::config::PipelineConfig;
use crate::files;
use crate::manifest::{self, Run};
use crate::{usage, ClassifyArgs, PromptArgs, SampleArgs};

pub fn sample(args: &SampleArgs) -> anyhow::Result<()> {
    files::distinct_output(&args.out, &[&args.input, &args.mapping])?;
    files::require_file(&args.input)?;
    let config = PipelineConfig::load(args.config.as_deref())?;
    if config.sample.per_college == 0 || config.sample.n_samples == 0 {
        bail!("[sample] per_college and n_samples must be positive");
    }
    let mapping = files::load_mapping(&args.mapping)?;
    let stopwords = config.stopwords()?;
    let dataset = files::load_records(&args.input, files::record_format(&args.input, None)?)?;
    dataset
        .validate_labels(&mapping)
        .with_context(|| args.input.display().to_string())?;
    let spec = SampleSpec {
        per_college: config.sample.per_college,
        n_samples: config.sample.n_samples,
        seed: args.seed,
    };
    let batches = draw_samples(&dataset, &mapping, &stopwords, &spec)
        .with_context(|| args.input.display().to_string())?;

    let mut inputs = vec![args.input.clone(), args.mapping.clone()];
    inputs.extend(args.config.clone());
    let run = Run::start(
        "sample",
        manifest::beside(&args.out),
        serde_json::json!({ "sample": config.sample, "stopwords": config.stopwords }),
        &[("sample", args.seed)],
        inputs,
        vec![args.out.clone()],
    )?;
    let mut text = String::new();
    for b in &batches {
        text.push_str(&serde_json::to_string(b).expect("batch serializes"));
        text.push('\n');
    }
    files::write(&args.out, text)?;
    run.finish()
}

fn load_batches(path: &Path, mapping: &CollegeMapping) -> anyhow::Result<Vec<SampleBatch>> {
    files::require_file(path)?;
    let text = files::read(path)?;
    let mut batches: Vec<SampleBatch> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let batch: SampleBatch = serde_json::from_str(line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if batch.is_empty() {
            bail!("{}: line {}: empty batch", path.display(), i + 1);
        }
        if batches.iter().any(|b| b.sample_id == batch.sample_id) {
            bail!(
                "{}: line {}: duplicate sample_id {}",
                path.display(),
                i + 1,
                batch.sample_id
            );
        }
        if let Some(item) = batch
            .items
            .iter()
            .find(|it| !mapping.contains_college(&it.true_label))
        {
            bail!(
                "{}: line {}: true label {:?} is not a college of the mapping",
                path.display(),
                i + 1,
                item.true_label
            );
        }
        batches.push(batch);
    }
    if batches.is_empty() {
        bail!("{}: no batches", path.display());
    }
    Ok(batches)
}

fn prompt_file(sample_id: u32) -> String {
    format!("sample-{sample_id:02}.prompt.txt")
}

pub fn prompt(args: &PromptArgs) -> anyhow::Result<()> {
    let mapping = files::load_mapping(&args.mapping)?;
    let batches = load_batches(&args.input, &mapping)?;
    let template = PromptTemplate::new(args.variant);
    let outputs: Vec<PathBuf> = batches
        .iter()
        .map(|b| args.out.join(prompt_file(b.sample_id)))
        .collect();

    files::create_dir(&args.out)?;
    let run = Run::start(
        "prompt",
        manifest::inside(&args.out),
        serde_json::json!({ "variant": args.variant }),
        &[],
        vec![args.input.clone(), args.mapping.clone()],
        outputs.clone(),
    )?;
    for (b, path) in batches.iter().zip(&outputs) {
        files::write(path, render_prompt(&template, b, &mapping))?;
    }
    run.finish()
}

/// Answers prompts from `sample-NN.response.txt` files of an earlier run.
struct ReplayBackend {
    source: PathBuf,
    answers: HashMap<String, String>,
}

impl ChatBackend for ReplayBackend {
    fn describe(&self) -> String {
        format!("replay:{}", self.source.display())
    }

    fn complete(&self, prompt: &str) -> Result<Completion, LlmError> {
        let text = self
            .answers
            .get(prompt)
            .cloned()
            .ok_or_else(|| LlmError::TransportError {
                attempts: 1,
                message: "no saved response for this prompt".into(),
            })?;
        Ok(Completion { text, retries: 0 })
    }
}

/// Fault list after `mock:`. Items are `extra=S:N`, `missing=S:N`,
/// `unknown=S:LINE[:TEXT]` and `blank=S`, separated by commas.
fn parse_faults(spec: &str) -> anyhow::Result<Vec<(u32, Fault)>> {
    let bad = |item: &str| {
        usage(format!("bad mock fault {item:?}; expected extra=S:N, missing=S:N, unknown=S:LINE[:TEXT] or blank=S"))
    };
    let mut out = Vec::new();
    for item in spec.split(',').filter(|s| !s.is_empty()) {
        let (kind, rest) = item.split_once('=').ok_or_else(|| bad(item))?;
        let parts: Vec<&str> = rest.splitn(3, ':').collect();
        let num = |i: usize| {
            parts
                .get(i)
                .and_then(|p| p.parse::<usize>().ok())
                .ok_or_else(|| bad(item))
        };
        let sample = u32::try_from(num(0)?).map_err(|_| bad(item))?;
        let fault = match (kind, parts.len()) {
            ("extra", 2) => Fault::ExtraLines(num(1)?),
            ("missing", 2) => Fault::MissingLines(num(1)?),
            ("unknown", 2 | 3) => Fault::UnknownLabel {
                line: num(1)?,
                text: parts.get(2).map_or("Unlisted College", |t| t).to_owned(),
            },
            ("blank", 1) => Fault::BlankLines,
            _ => return Err(bad(item)),
        };
        out.push((sample, fault));
    }
    Ok(out)
}

enum EndpointKind {
    Mock(Vec<(u32, Fault)>),
    Replay(PathBuf),
    Http(String),
}

fn endpoint_kind(spec: &str) -> anyhow::Result<EndpointKind> {
    if spec == "mock" {
        return Ok(EndpointKind::Mock(Vec::new()));
    }
    if let Some(faults) = spec.strip_prefix("mock:") {
        return Ok(EndpointKind::Mock(parse_faults(faults)?));
    }
    if let Some(dir) = spec.strip_prefix("replay:") {
        return Ok(EndpointKind::Replay(PathBuf::from(dir)));
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        return Ok(EndpointKind::Http(spec.trim_end_matches('/').to_owned()));
    }
    Err(usage(format!(
        "--endpoint {spec:?}: expected an http(s) URL, mock, mock:<faults> or replay:<dir>"
    )))
}

pub fn classify(args: &ClassifyArgs) -> anyhow::Result<()> {
    let kind = endpoint_kind(&args.endpoint)?;
    if let Some(m) = &args.model {
        if m.trim().is_empty() {
            return Err(usage("--model must not be empty"));
        }
    }
    let config = PipelineConfig::load(args.config.as_deref())?;
    let aliases = config.aliases()?;
    let mapping = files::load_mapping(&args.mapping)?;
    let batches = load_batches(&args.input, &mapping)?;
    let template = PromptTemplate::new(args.variant);
    let mut inputs = vec![args.input.clone(), args.mapping.clone()];
    inputs.extend(args.config.clone());

    let (backend, model, endpoint_config): (Box<dyn ChatBackend>, String, Option<EndpointConfig>) =
        match kind {
            EndpointKind::Mock(faults) => {
                let mock = MockBackend::for_batches(&batches, &template, &mapping, &faults);
                (
                    Box::new(mock),
                    args.model.clone().unwrap_or_else(|| "mock".into()),
                    None,
                )
            }
            EndpointKind::Replay(dir) => {
                files::require_dir(&dir)?;
                let mut answers = HashMap::new();
                for b in &batches {
                    let path = dir.join(format!("sample-{:02}.response.txt", b.sample_id));
                    files::require_file(&path)?;
                    answers.insert(render_prompt(&template, b, &mapping), files::read(&path)?);
                    inputs.push(path);
                }
                let model = args.model.clone().unwrap_or_else(|| "replay".into());
                (
                    Box::new(ReplayBackend {
                        source: dir,
                        answers,
                    }),
                    model,
                    None,
                )
            }
            EndpointKind::Http(base_url) => {
                let mut ec = config.endpoint.clone().unwrap_or_default();
                ec.base_url = base_url;
                if let Some(m) = &args.model {
                    ec.model = m.clone();
                }
                if ec.model.is_empty() {
                    return Err(usage(
                        "an HTTP endpoint needs --model or endpoint.model in --config",
                    ));
                }
                let backend = HttpChatBackend::new(ec.clone()).context("endpoint")?;
                let model = ec.model.clone();
                (Box::new(backend), model, Some(ec))
            }
        };
    let experiment = ExperimentConfig {
        model: model.clone(),
        max_in_flight: config
            .experiment
            .max_in_flight
            .or(endpoint_config.as_ref().map(|e| e.max_in_flight))
            .unwrap_or(1),
        repair: args.repair || config.experiment.repair,
    };

    let out = &args.out;
    let predictions_path = out.join("predictions.csv");
    let mut outputs = vec![
        predictions_path.clone(),
        out.join("exchanges.jsonl"),
        out.join("failures.csv"),
    ];
    for b in &batches {
        outputs.push(out.join(prompt_file(b.sample_id)));
        outputs.push(out.join(format!("sample-{:02}.response.txt", b.sample_id)));
    }
    files::create_dir(out)?;
    let mut run = Run::start(
        "classify-llm",
        manifest::inside(out),
        serde_json::json!({
            "endpoint": args.endpoint,
            "model": model,
            "variant": args.variant,
            "max_in_flight": experiment.max_in_flight,
            "repair": experiment.repair,
            "endpoint_config": endpoint_config,
            "aliases": config.aliases,
        }),
        &[],
        inputs,
        outputs,
    )?;

    let outcome = run_experiment(
        &batches,
        &template,
        backend.as_ref(),
        &mapping,
        &aliases,
        &experiment,
    );
    write_audit(out, &outcome).with_context(|| out.display().to_string())?;
    for b in &outcome.batches {
        for attempt in 2..=b.exchanges.len() {
            run.record_output(
                out.join(format!("sample-{:02}.response-{attempt}.txt", b.sample_id)),
            );
        }
    }
    let mut csv = Vec::new();
    outcome.predictions.write_csv(&mut csv)?;
    files::write(&predictions_path, csv)?;
    log::info!(
        "{} predictions from {} of {} batches",
        outcome.predictions.len(),
        batches.len() - outcome.failures.len(),
        batches.len()
    );
    run.finish()
}
