//! Metadata augmentation by document classification.
//!
//! Thesis-style records get a college label from three independent routes:
//! a department dictionary ([`corpus::assign_colleges`]), a TF-IDF plus
//! gradient-boosted-tree classifier ([`tfidf`], [`gbt`]), and zero-shot
//! chat-completion prompting ([`llm`]). Every route emits a
//! [`PredictionSet`], which [`eval`] scores the same way.

pub mod corpus;
pub mod eval;
pub mod gbt;
pub mod llm;
pub mod sparse;
pub mod synth;
pub mod textprep;
pub mod tfidf;

pub use corpus::{CollegeMapping, Dataset, SplitSpec, ThesisRecord, MISSING};
pub use eval::{ModelReport, Prediction, PredictionSet};
pub use gbt::{BoostedEnsemble, TrainConfig};
pub use sparse::SparseMatrix;
pub use textprep::{DocumentText, Stopwords};
pub use tfidf::{TfidfMatrix, Vocabulary};
