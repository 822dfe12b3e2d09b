//! Zero-shot classification through a chat-completion endpoint.
//!
//! The flow is [`draw_samples`] → [`render_prompt`] → [`ChatBackend`] →
//! [`parse_labels`], driven batch by batch by [`run_experiment`]. A batch
//! whose answer has the wrong number of lines is dropped whole; that failure
//! is the thing being measured, so nothing here tries to paper over it
//! unless repair is switched on.

mod endpoint;
mod experiment;
mod parse;
mod prompt;
mod sample;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use endpoint::{
    classify, classify_remote, ChatBackend, ChatExchange, Completion, EndpointConfig, Fault,
    HttpChatBackend, MockBackend,
};
pub use experiment::{
    failures_csv, run_experiment, write_audit, BatchFailure, BatchOutcome, ExperimentConfig,
    ExperimentOutcome,
};
pub use parse::{normalize_label, parse_labels, LabelAliases, ParsedLabels};
pub use prompt::{render_prompt, PromptTemplate};
pub use sample::{draw_samples, SampleBatch, SampleItem, SampleSpec};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("college {0:?} has no labeled records to sample from")]
    EmptyCollege(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("expected {expected} labels, got {got}")]
    CountMismatch { got: usize, expected: usize },
    #[error("line {line}: unknown label {text:?}")]
    UnknownLabel { line: usize, text: String },
    #[error("line {line}: expected `{{document}} - label`, got {text:?}")]
    MalformedPair { line: usize, text: String },
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("invalid alias table: {0}")]
    Aliases(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LlmError {
    /// Short stable name used in failure logs.
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::EmptyCollege(_) => "EmptyCollege",
            LlmError::Timeout { .. } => "Timeout",
            LlmError::AuthError(_) => "AuthError",
            LlmError::TransportError { .. } => "TransportError",
            LlmError::CountMismatch { .. } => "CountMismatch",
            LlmError::UnknownLabel { .. } => "UnknownLabel",
            LlmError::MalformedPair { .. } => "MalformedPair",
            LlmError::Config(_) => "Config",
            LlmError::Aliases(_) => "Aliases",
            LlmError::Io(_) => "Io",
        }
    }

    /// Whether the error came from reading the model's answer rather than
    /// from reaching the endpoint.
    pub fn is_parse_failure(&self) -> bool {
        matches!(
            self,
            LlmError::CountMismatch { .. }
                | LlmError::UnknownLabel { .. }
                | LlmError::MalformedPair { .. }
        )
    }
}

/// Prompt and answer layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One comma-separated document per line; one label per answer line.
    Plain,
    /// Documents wrapped in `{` `}`; answers echo the line, then ` - label`.
    Bracketed,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Bracketed => "bracketed",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Variant::Plain),
            "bracketed" => Ok(Variant::Bracketed),
            other => Err(format!(
                "unknown prompt variant {other:?} (expected plain or bracketed)"
            )),
        }
    }
}

pub(crate) fn millis(d: Duration) -> u64 {
    d.as_millis().min(u128::from(u64::MAX)) as u64
}
