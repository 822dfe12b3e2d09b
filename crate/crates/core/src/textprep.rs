//! Title/keyword normalization and per-record document construction.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ThesisRecord;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Separator between terms in [`DocumentText::rendered`].
pub const TERM_SEPARATOR: &str = ", ";

#[derive(Debug, Error)]
pub enum TextError {
    #[error("record {0:?} has no terms left after normalization")]
    EmptyDocument(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercase stopword set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|source| TextError::Io {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            terms
                .into_iter()
                .map(|t| t.as_ref().to_lowercase())
                .collect(),
        )
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercases, splits on every non-alphanumeric character and drops
/// stopwords. Term order is preserved.
pub fn normalize_title(title: &str, stopwords: &Stopwords) -> Vec<String> {
    title
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

/// Normalized content of one record: title terms followed by keyword terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentText {
    pub record_id: String,
    pub tokens: Vec<String>,
    /// Terms joined by [`TERM_SEPARATOR`]. A multi-word keyword stays one
    /// term here (words separated by a single space).
    pub rendered: String,
}

impl DocumentText {
    /// Terms of the rendered string, in order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.rendered
            .split(TERM_SEPARATOR)
            .filter(|t| !t.is_empty())
    }

    /// Re-derives the token list from the rendered string.
    pub fn tokens_from_rendered(rendered: &str) -> Vec<String> {
        rendered
            .split(TERM_SEPARATOR)
            .flat_map(str::split_whitespace)
            .map(str::to_owned)
            .collect()
    }
}

pub fn build_document(
    record: &ThesisRecord,
    stopwords: &Stopwords,
) -> Result<DocumentText, TextError> {
    let title_tokens = normalize_title(&record.title, stopwords);
    let mut terms: Vec<String> = title_tokens.clone();
    let mut tokens = title_tokens;
    for keyword in &record.keywords {
        let words = normalize_title(keyword, stopwords);
        if words.is_empty() {
            continue;
        }
        terms.push(words.join(" "));
        tokens.extend(words);
    }
    if tokens.is_empty() {
        return Err(TextError::EmptyDocument(record.id.clone()));
    }
    Ok(DocumentText {
        record_id: record.id.clone(),
        tokens,
        rendered: terms.join(TERM_SEPARATOR),
    })
}
