use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use super::{LlmError, Variant};
use crate::corpus::CollegeMapping;

const BUNDLED_ALIASES: &str = include_str!("../../data/aliases.toml");

/// Alternative names a model may answer with, keyed by college.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelAliases {
    table: IndexMap<String, Vec<String>>,
}

impl LabelAliases {
    /// The alias table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_ALIASES).expect("bundled alias table parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, LlmError> {
        let table: IndexMap<String, Vec<String>> =
            toml::from_str(text).map_err(|e| LlmError::Aliases(e.to_string()))?;
        Ok(Self { table })
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn aliases_of(&self, college: &str) -> &[String] {
        self.table.get(college).map_or(&[], Vec::as_slice)
    }

    /// Normalized surface form → college, restricted to `mapping`. College
    /// names win over aliases; between aliases the first listed wins.
    fn resolver<'m>(&self, mapping: &'m CollegeMapping) -> HashMap<String, &'m str> {
        let mut out = HashMap::new();
        for college in mapping.colleges() {
            out.insert(normalize_label(college), college);
        }
        for college in mapping.colleges() {
            for alias in self.aliases_of(college) {
                let key = normalize_label(alias);
                if let Some(prev) = out.get(&key) {
                    if *prev != college {
                        log::warn!(
                            "alias {alias:?} of {college:?} already names {prev:?}; ignored"
                        );
                    }
                    continue;
                }
                out.insert(key, college);
            }
        }
        out
    }
}

/// Labels recovered from one answer, in answer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLabels {
    pub labels: Vec<String>,
    /// The echoed document of each line (bracketed variant only).
    pub echoes: Option<Vec<String>>,
}

/// Case-folded, whitespace-collapsed label with list decoration removed:
/// bullets, numbering, emphasis markers, quotes, trailing punctuation.
pub fn normalize_label(text: &str) -> String {
    let mut s = strip_list_marker(text.trim());
    loop {
        let before = s.len();
        s = s.trim();
        for wrap in ["**", "__", "`", "\"", "'", "*"] {
            if let Some(inner) = s.strip_prefix(wrap).and_then(|x| x.strip_suffix(wrap)) {
                s = inner;
            }
        }
        s = s.trim_end_matches(['.', ',', ';', ':']);
        if s.len() == before {
            break;
        }
    }
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Drops a leading `- `, `* `, `• `, `3. ` or `3) ` marker.
fn strip_list_marker(line: &str) -> &str {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest.trim_start();
        }
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(after) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if after.starts_with(char::is_whitespace) {
                return after.trim_start();
            }
        }
    }
    line
}

/// Splits a bracketed answer line into the echoed document and the label.
/// The separator is the last ` - `; a bare `-` right after the closing
/// brace is accepted as well.
fn split_pair(line: &str) -> Option<(&str, &str)> {
    let line = strip_list_marker(line);
    let (echo, label) = match line.rfind(" - ") {
        Some(at) => (&line[..at], &line[at + 3..]),
        None => {
            let close = line.rfind('}')?;
            let rest = line[close + 1..].trim_start().strip_prefix('-')?;
            (&line[..=close], rest)
        }
    };
    let echo = echo.trim();
    (echo.starts_with('{') && echo.ends_with('}')).then_some((echo, label))
}

/// Reads one label per non-blank line of `raw`.
///
/// The line count is checked before anything else, so an answer with the
/// wrong number of lines always reports [`LlmError::CountMismatch`]. Line
/// numbers in errors are 1-based positions in `raw`.
pub fn parse_labels(
    raw: &str,
    expected: usize,
    mapping: &CollegeMapping,
    aliases: &LabelAliases,
    variant: Variant,
) -> Result<ParsedLabels, LlmError> {
    let lines: Vec<(usize, &str)> = raw
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim()))
        .collect();
    if lines.len() != expected {
        return Err(LlmError::CountMismatch {
            got: lines.len(),
            expected,
        });
    }
    let resolver = aliases.resolver(mapping);
    let resolve = |line: usize, text: &str| {
        resolver
            .get(&normalize_label(text))
            .map(|c| (*c).to_owned())
            .ok_or_else(|| LlmError::UnknownLabel {
                line,
                text: text.trim().to_owned(),
            })
    };

    let mut labels = Vec::with_capacity(expected);
    match variant {
        Variant::Plain => {
            for (line, text) in lines {
                labels.push(resolve(line, text)?);
            }
            Ok(ParsedLabels {
                labels,
                echoes: None,
            })
        }
        Variant::Bracketed => {
            let mut echoes = Vec::with_capacity(expected);
            for (line, text) in lines {
                let (echo, label) = split_pair(text).ok_or_else(|| LlmError::MalformedPair {
                    line,
                    text: text.to_owned(),
                })?;
                labels.push(resolve(line, label)?);
                echoes.push(echo.to_owned());
            }
            Ok(ParsedLabels {
                labels,
                echoes: Some(echoes),
            })
        }
    }
}
