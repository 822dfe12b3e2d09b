//! Fixtures shared by the criterion benchmarks.

use metaug_core::corpus::{assign_colleges, CollegeMapping, Dataset};
use metaug_core::llm::{draw_samples, SampleBatch, SampleSpec};
use metaug_core::synth;
use metaug_core::textprep::{build_document, DocumentText, Stopwords};

/// The seven-college mapping shipped in `data/colleges.json`.
pub fn mapping() -> CollegeMapping {
    CollegeMapping::from_json_str(include_str!("../../../data/colleges.json"))
        .expect("bundled mapping")
}

/// Labeled synthetic thesis records, `per_college` per college.
pub fn labeled_corpus(per_college: usize, seed: u64) -> (CollegeMapping, Dataset) {
    let mapping = mapping();
    let records = synth::thesis_records(&mapping, per_college, seed);
    let dataset = Dataset::from_records(records, "synthetic").expect("unique ids");
    let labeled = assign_colleges(&dataset, &mapping);
    (mapping, labeled)
}

/// Documents and labels of a labeled corpus, in record order.
pub fn documents(dataset: &Dataset) -> (Vec<DocumentText>, Vec<String>) {
    let stop = Stopwords::english();
    dataset
        .records()
        .iter()
        .filter_map(|r| {
            let label = r.labeled_college()?.to_owned();
            build_document(r, &stop).ok().map(|d| (d, label))
        })
        .unzip()
}

/// Five batches of ten documents per college.
pub fn batches(mapping: &CollegeMapping, dataset: &Dataset) -> Vec<SampleBatch> {
    draw_samples(
        dataset,
        mapping,
        &Stopwords::english(),
        &SampleSpec::with_seed(1),
    )
    .expect("every college populated")
}
