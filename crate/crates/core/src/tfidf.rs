//! TF-IDF featurization.
//!
//! `tf(t, d)` is the count of `t` in `d` divided by the number of tokens in
//! `d`; `idf(t, D) = ln(|D| / df(t))` with no smoothing. Vocabulary columns
//! are assigned in lexicographic term order.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::sparse::SparseMatrix;
use crate::textprep::DocumentText;

#[derive(Debug, Error)]
pub enum TfidfError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("term {0:?} is not in the vocabulary")]
    UnknownTerm(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_documents: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_documents: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            doc_freq,
            n_documents,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn idf_at(&self, index: usize) -> f64 {
        (self.n_documents as f64 / self.doc_freq[index] as f64).ln()
    }

    /// Sidecar format: a `#documents=<n>` line, a `term\tindex\tdf` header,
    /// then one row per term in index order.
    pub fn write_tsv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "#documents={}", self.n_documents)?;
        writeln!(out, "term\tindex\tdf")?;
        for (i, (t, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            writeln!(out, "{t}\t{i}\t{df}")?;
        }
        Ok(())
    }

    pub fn read_tsv(input: impl BufRead) -> Result<Self, TfidfError> {
        let mut n_documents = None;
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let bad = |message: String| TfidfError::Format {
                line: line_no,
                message,
            };
            if let Some(n) = line.strip_prefix("#documents=") {
                n_documents = Some(n.trim().parse().map_err(|e| bad(format!("{e}")))?);
                continue;
            }
            if line_no <= 2 && line == "term\tindex\tdf" || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [term, index, df] = fields[..] else {
                return Err(bad(format!(
                    "expected 3 tab-separated fields, got {}",
                    fields.len()
                )));
            };
            let index: usize = index.parse().map_err(|e| bad(format!("index: {e}")))?;
            if index != terms.len() {
                return Err(bad(format!("index {index} out of sequence")));
            }
            let df: usize = df.parse().map_err(|e| bad(format!("df: {e}")))?;
            terms.push(term.to_owned());
            doc_freq.push(df);
        }
        let n_documents = n_documents.ok_or(TfidfError::Format {
            line: 1,
            message: "missing #documents header".into(),
        })?;
        if let Some(i) = doc_freq.iter().position(|&df| df == 0 || df > n_documents) {
            return Err(TfidfError::Format {
                line: i + 3,
                message: format!("document frequency outside [1, {n_documents}]"),
            });
        }
        Ok(Self::from_parts(terms, doc_freq, n_documents))
    }
}

/// Counts document frequencies over the training documents.
pub fn fit(documents: &[DocumentText]) -> Result<Vocabulary, TfidfError> {
    if documents.iter().all(|d| d.tokens.is_empty()) {
        return Err(TfidfError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in documents {
        let mut distinct: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (terms, doc_freq) = df.into_iter().map(|(t, n)| (t.to_owned(), n)).unzip();
    Ok(Vocabulary::from_parts(terms, doc_freq, documents.len()))
}

pub fn term_frequency(term: &str, document: &DocumentText) -> f64 {
    if document.tokens.is_empty() {
        return 0.0;
    }
    let count = document.tokens.iter().filter(|t| *t == term).count();
    count as f64 / document.tokens.len() as f64
}

pub fn inverse_document_frequency(term: &str, vocab: &Vocabulary) -> Result<f64, TfidfError> {
    vocab
        .index_of(term)
        .map(|i| vocab.idf_at(i))
        .ok_or_else(|| TfidfError::UnknownTerm(term.to_owned()))
}

/// Sparse TF-IDF weights with the record id of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfMatrix {
    pub row_ids: Vec<String>,
    pub matrix: SparseMatrix,
}

impl TfidfMatrix {
    /// Coordinate text format: a `%%coo rows=R cols=C nnz=N` header, a
    /// `row\tcol\tweight` header, then one line per stored entry.
    pub fn write_coo(&self, mut out: impl Write) -> io::Result<()> {
        let m = &self.matrix;
        writeln!(
            out,
            "%%coo rows={} cols={} nnz={}",
            m.n_rows(),
            m.n_cols(),
            m.nnz()
        )?;
        writeln!(out, "row\tcol\tweight")?;
        for (r, c, v) in m.triplets() {
            writeln!(out, "{r}\t{c}\t{v}")?;
        }
        Ok(())
    }

    /// Reads the coordinate format; `row_ids` supplies the row count.
    pub fn read_coo(input: impl BufRead, row_ids: Vec<String>) -> Result<Self, TfidfError> {
        let mut dims: Option<(usize, usize)> = None;
        let mut triplets = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let bad = |message: String| TfidfError::Format {
                line: line_no,
                message,
            };
            if let Some(header) = line.strip_prefix("%%coo") {
                let mut rows = None;
                let mut cols = None;
                for kv in header.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("rows", v)) => rows = v.parse().ok(),
                        Some(("cols", v)) => cols = v.parse().ok(),
                        _ => {}
                    }
                }
                match (rows, cols) {
                    (Some(r), Some(c)) => dims = Some((r, c)),
                    _ => return Err(bad("malformed %%coo header".into())),
                }
                continue;
            }
            if line == "row\tcol\tweight" || line.is_empty() {
                continue;
            }
            let mut f = line.split('\t');
            let (Some(r), Some(c), Some(w), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad("expected row, col, weight".into()));
            };
            let r: usize = r.parse().map_err(|e| bad(format!("row: {e}")))?;
            let c: usize = c.parse().map_err(|e| bad(format!("col: {e}")))?;
            let w: f64 = w.parse().map_err(|e| bad(format!("weight: {e}")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(bad(format!(
                    "weight {w} is not a finite nonnegative number"
                )));
            }
            triplets.push((r, c, w));
        }
        let (rows, cols) = dims.ok_or(TfidfError::Format {
            line: 1,
            message: "missing %%coo header".into(),
        })?;
        if rows != row_ids.len() {
            return Err(TfidfError::Format {
                line: 1,
                message: format!(
                    "header declares {rows} rows but {} row ids given",
                    row_ids.len()
                ),
            });
        }
        let matrix = SparseMatrix::from_triplets(rows, cols, triplets)
            .map_err(|message| TfidfError::Format { line: 0, message })?;
        Ok(Self { row_ids, matrix })
    }
}

fn weigh(doc: &DocumentText, vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for t in &doc.tokens {
        if let Some(j) = vocab.index_of(t) {
            *counts.entry(j).or_insert(0) += 1;
        }
    }
    // tf is normalized by the full document length, unknown terms included.
    let len = doc.tokens.len() as f64;
    let mut row: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(j, n)| (j, n as f64 / len * vocab.idf_at(j)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    row.sort_unstable_by_key(|&(j, _)| j);
    row
}

/// Weights each document against a fitted vocabulary. Terms outside the
/// vocabulary are dropped; a document with none left yields an empty row.
pub fn transform(documents: &[DocumentText], vocab: &Vocabulary) -> TfidfMatrix {
    let rows: Vec<Vec<(usize, f64)>> = documents.par_iter().map(|d| weigh(d, vocab)).collect();
    let mut matrix = SparseMatrix::empty(vocab.len());
    for row in rows {
        matrix.push_row(row);
    }
    TfidfMatrix {
        row_ids: documents.iter().map(|d| d.record_id.clone()).collect(),
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, tokens: &[&str]) -> DocumentText {
        DocumentText {
            record_id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            rendered: tokens.join(", "),
        }
    }

    #[test]
    fn fit_counts_documents() {
        let v = fit(&[doc("1", &["a", "b"]), doc("2", &["b", "c"])]).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!(v.doc_freq("a"), Some(1));
        assert_eq!(v.doc_freq("b"), Some(2));
        assert_eq!(v.doc_freq("c"), Some(1));
        assert_eq!(v.n_documents(), 2);
    }

    #[test]
    fn fit_df_ignores_repeats() {
        let v = fit(&[doc("1", &["a", "a"])]).unwrap();
        assert_eq!(v.doc_freq("a"), Some(1));
        assert!(matches!(fit(&[]), Err(TfidfError::EmptyCorpus)));
        assert!(matches!(
            fit(&[doc("1", &[])]),
            Err(TfidfError::EmptyCorpus)
        ));
    }

    #[test]
    fn tf_formula() {
        let d = doc("1", &["a", "b", "a"]);
        assert_eq!(term_frequency("a", &d), 2.0 / 3.0);
        assert_eq!(term_frequency("z", &d), 0.0);
    }

    #[test]
    fn idf_formula() {
        let mut docs: Vec<_> = (0..8).map(|i| doc(&i.to_string(), &["common"])).collect();
        docs[0].tokens.push("rare".into());
        let v = fit(&docs).unwrap();
        assert_eq!(inverse_document_frequency("common", &v).unwrap(), 0.0);
        let rare = inverse_document_frequency("rare", &v).unwrap();
        // ln 8 evaluated independently: 3 ln 2.
        assert!((rare - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!((rare - 2.0794).abs() < 1e-4);
        assert!(matches!(
            inverse_document_frequency("nope", &v),
            Err(TfidfError::UnknownTerm(_))
        ));
    }

    #[test]
    fn unknown_terms_give_zero_row_and_zero_idf_is_unstored() {
        let v = fit(&[doc("1", &["a", "b"]), doc("2", &["a"])]).unwrap();
        let m = transform(&[doc("x", &["zzz", "yyy"]), doc("y", &["a", "b"])], &v);
        assert_eq!(m.matrix.n_rows(), 2);
        assert_eq!(m.matrix.row(0).0.len(), 0);
        // "a" is in every fitted document: idf 0, never stored.
        let a = v.index_of("a").unwrap();
        assert_eq!(m.matrix.get(1, a), None);
        assert!(m.matrix.get(1, v.index_of("b").unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn coo_and_vocab_round_trip() {
        let docs = [
            doc("1", &["a", "b", "b"]),
            doc("2", &["c"]),
            doc("3", &["a", "c"]),
        ];
        let v = fit(&docs).unwrap();
        let m = transform(&docs, &v);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let back = TfidfMatrix::read_coo(&buf[..], m.row_ids.clone()).unwrap();
        assert_eq!(back, m);
        let mut vb = Vec::new();
        v.write_tsv(&mut vb).unwrap();
        assert_eq!(Vocabulary::read_tsv(&vb[..]).unwrap(), v);
        let err = TfidfMatrix::read_coo(
            &b"%%coo rows=1 cols=2 nnz=1\n0\t1\t-1\n"[..],
            vec!["a".into()],
        )
        .unwrap_err();
        assert!(matches!(err, TfidfError::Format { line: 2, .. }));
    }
}
