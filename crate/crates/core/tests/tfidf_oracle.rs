use std::collections::BTreeSet;
use std::io::Cursor;

use metaug_core::synth;
use metaug_core::tfidf::{self, TfidfMatrix, Vocabulary};
use metaug_core::DocumentText;
use proptest::prelude::*;

/// Dense brute force: sorted vocabulary, raw counts over document length,
/// natural-log inverse document frequency without smoothing.
fn dense_oracle(train: &[DocumentText], docs: &[DocumentText]) -> (Vec<String>, Vec<Vec<f64>>) {
    let vocab: Vec<String> = train
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = train.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = train.iter().filter(|d| d.tokens.contains(t)).count() as f64;
            (n / df).ln()
        })
        .collect();
    let rows = docs
        .iter()
        .map(|d| {
            vocab
                .iter()
                .zip(&idf)
                .map(|(t, idf)| {
                    let count = d.tokens.iter().filter(|x| *x == t).count() as f64;
                    count / d.tokens.len() as f64 * idf
                })
                .collect()
        })
        .collect();
    (vocab, rows)
}

fn assert_matches(got: &TfidfMatrix, want: &[Vec<f64>]) {
    assert_eq!(got.matrix.n_rows(), want.len());
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            let g = got.matrix.get(i, j).unwrap_or(0.0);
            assert!((g - w).abs() <= 1e-12, "({i},{j}): {g} vs {w}");
        }
    }
}

#[test]
fn matches_dense_oracle_on_random_corpora() {
    let started = std::time::Instant::now();
    for seed in 0..100u64 {
        let n_docs = 1 + (seed as usize * 7) % 50;
        let vocab_size = 1 + (seed as usize * 13) % 200;
        let docs = synth::random_documents(n_docs, vocab_size, 30, seed);
        let vocab = tfidf::fit(&docs).unwrap();
        let (terms, dense) = dense_oracle(&docs, &docs);
        assert_eq!(vocab.terms(), terms.as_slice());
        assert_matches(&tfidf::transform(&docs, &vocab), &dense);
    }
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn unknown_terms_are_dropped_and_empty_rows_kept() {
    let train = synth::random_documents(20, 30, 10, 1);
    let vocab = tfidf::fit(&train).unwrap();
    let unseen = vec![
        DocumentText {
            record_id: "x".into(),
            tokens: vec!["zzz".into()],
            rendered: "zzz".into(),
        },
        DocumentText {
            record_id: "y".into(),
            tokens: vec!["w1".into(), "zzz".into()],
            rendered: "w1, zzz".into(),
        },
    ];
    let m = tfidf::transform(&unseen, &vocab);
    assert_eq!(m.matrix.n_rows(), 2);
    assert_eq!(m.matrix.row(0).0.len(), 0);
    if let Some(j) = vocab.index_of("w1") {
        let idf = tfidf::inverse_document_frequency("w1", &vocab).unwrap();
        let g = m.matrix.get(1, j).unwrap_or(0.0);
        assert!((g - 0.5 * idf).abs() < 1e-12);
    }
    assert!(tfidf::inverse_document_frequency("zzz", &vocab).is_err());
}

#[test]
fn coo_and_vocab_round_trip() {
    let docs = synth::random_documents(40, 80, 20, 9);
    let vocab = tfidf::fit(&docs).unwrap();
    let m = tfidf::transform(&docs, &vocab);

    let mut coo = Vec::new();
    m.write_coo(&mut coo).unwrap();
    let back = TfidfMatrix::read_coo(Cursor::new(coo), m.row_ids.clone()).unwrap();
    assert_eq!(back, m);

    let mut tsv = Vec::new();
    vocab.write_tsv(&mut tsv).unwrap();
    let vback = Vocabulary::read_tsv(Cursor::new(tsv)).unwrap();
    assert_eq!(vback.terms(), vocab.terms());
    assert_eq!(vback.n_documents(), vocab.n_documents());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_finite_and_non_negative(
        seed in any::<u64>(),
        n_docs in 1usize..50,
        vocab_size in 1usize..200,
    ) {
        let docs = synth::random_documents(n_docs, vocab_size, 25, seed);
        let vocab = tfidf::fit(&docs).unwrap();
        let m = tfidf::transform(&docs, &vocab);
        for (_, _, w) in m.matrix.triplets() {
            prop_assert!(w.is_finite() && w > 0.0);
        }
        // Terms in every document carry zero weight and are not stored.
        for t in vocab.terms() {
            if vocab.doc_freq(t) == Some(n_docs) {
                let j = vocab.index_of(t).unwrap();
                prop_assert!((0..n_docs).all(|i| m.matrix.get(i, j).is_none()));
            }
        }
    }
}
