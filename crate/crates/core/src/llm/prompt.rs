use std::fmt::Write as _;

use super::{SampleBatch, Variant};
use crate::corpus::CollegeMapping;
use crate::textprep::DocumentText;

const PLAIN_INSTRUCTION: &str = include_str!("../../data/prompts/plain.txt");
const BRACKETED_INSTRUCTION: &str = include_str!("../../data/prompts/bracketed.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    variant: Variant,
    instruction: String,
}

impl PromptTemplate {
    /// The stock instruction for `variant`.
    pub fn new(variant: Variant) -> Self {
        let text = match variant {
            Variant::Plain => PLAIN_INSTRUCTION,
            Variant::Bracketed => BRACKETED_INSTRUCTION,
        };
        Self::with_instruction(variant, text)
    }

    /// A custom instruction; trailing whitespace is dropped.
    pub fn with_instruction(variant: Variant, instruction: &str) -> Self {
        Self {
            variant,
            instruction: instruction.trim_end().to_owned(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn instruction(&self) -> &str {
        &self.instruction
    }

    /// How one document appears in the prompt.
    pub fn document_line(&self, document: &DocumentText) -> String {
        match self.variant {
            Variant::Plain => document.rendered.clone(),
            Variant::Bracketed => format!("{{{}}}", document.rendered),
        }
    }
}

/// Instruction, then one `College: dept, dept` line per college, a blank
/// line, and one line per document in batch order. Ends with a newline.
pub fn render_prompt(
    template: &PromptTemplate,
    batch: &SampleBatch,
    mapping: &CollegeMapping,
) -> String {
    let mut out = String::new();
    out.push_str(template.instruction());
    out.push('\n');
    for (college, departments) in mapping.entries() {
        let _ = writeln!(out, "{college}: {}", departments.join(", "));
    }
    out.push('\n');
    for item in &batch.items {
        out.push_str(&template.document_line(&item.document));
        out.push('\n');
    }
    out
}
