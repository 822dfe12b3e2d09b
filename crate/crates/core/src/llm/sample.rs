use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::corpus::{CollegeMapping, Dataset};
use crate::textprep::{build_document, DocumentText, Stopwords};

/// One document queued for classification, with the label it should get.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleItem {
    pub record_id: String,
    pub true_label: String,
    pub document: DocumentText,
}

/// The documents of one submission, in submission order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    /// 1-based.
    pub sample_id: u32,
    pub items: Vec<SampleItem>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    pub per_college: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            per_college: 10,
            n_samples: 5,
            seed,
        }
    }
}

/// Draws `n_samples` batches of `per_college` documents per college.
///
/// Documents are drawn uniformly with replacement from each college's
/// labeled records (mapping order), then each batch is shuffled. Records
/// whose text normalizes to nothing cannot be rendered and are not
/// candidates.
pub fn draw_samples(
    dataset: &Dataset,
    mapping: &CollegeMapping,
    stopwords: &Stopwords,
    spec: &SampleSpec,
) -> Result<Vec<SampleBatch>, LlmError> {
    let mut pools: Vec<Vec<SampleItem>> = vec![Vec::new(); mapping.len()];
    let colleges: Vec<&str> = mapping.colleges().collect();
    for record in dataset.records() {
        let Some(label) = record.labeled_college() else {
            continue;
        };
        let Some(slot) = colleges.iter().position(|c| *c == label) else {
            continue;
        };
        match build_document(record, stopwords) {
            Ok(document) => pools[slot].push(SampleItem {
                record_id: record.id.clone(),
                true_label: label.to_owned(),
                document,
            }),
            Err(e) => log::debug!("not sampling {}: {e}", record.id),
        }
    }
    if let Some(slot) = pools.iter().position(Vec::is_empty) {
        return Err(LlmError::EmptyCollege(colleges[slot].to_owned()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut batches = Vec::with_capacity(spec.n_samples);
    for s in 0..spec.n_samples {
        let mut items = Vec::with_capacity(spec.per_college * pools.len());
        for pool in &pools {
            for _ in 0..spec.per_college {
                items.push(pool[rng.random_range(0..pool.len())].clone());
            }
        }
        items.shuffle(&mut rng);
        batches.push(SampleBatch {
            sample_id: s as u32 + 1,
            items,
        });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ThesisRecord;
    use indexmap::IndexMap;

    fn mapping() -> CollegeMapping {
        let mut m = IndexMap::new();
        m.insert("A".to_string(), vec!["Dept A".to_string()]);
        m.insert("B".to_string(), vec!["Dept B".to_string()]);
        CollegeMapping::new(m).unwrap()
    }

    fn record(id: &str, title: &str, college: &str) -> ThesisRecord {
        ThesisRecord {
            id: id.into(),
            title: title.into(),
            keywords: vec![],
            department: None,
            college: Some(college.into()),
        }
    }

    fn dataset(records: Vec<ThesisRecord>) -> Dataset {
        Dataset::from_records(records, "mem").unwrap()
    }

    #[test]
    fn singleton_college_repeats_its_record() {
        let mut records = vec![record("a1", "fluid dynamics", "A")];
        for i in 0..5 {
            records.push(record(&format!("b{i}"), "market pricing", "B"));
        }
        let batches = draw_samples(
            &dataset(records),
            &mapping(),
            &Stopwords::english(),
            &SampleSpec::with_seed(1),
        )
        .unwrap();
        assert_eq!(batches.len(), 5);
        for b in &batches {
            assert_eq!(b.len(), 20);
            let a: Vec<_> = b.items.iter().filter(|i| i.true_label == "A").collect();
            assert_eq!(a.len(), 10);
            assert!(a.iter().all(|i| i.record_id == "a1"));
        }
        assert_eq!(
            batches.iter().map(|b| b.sample_id).collect::<Vec<_>>(),
            [1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn empty_college_is_an_error() {
        let records = vec![
            record("a1", "fluid dynamics", "A"),
            record("m", "x y", "missing"),
        ];
        let err = draw_samples(
            &dataset(records),
            &mapping(),
            &Stopwords::english(),
            &SampleSpec::with_seed(1),
        )
        .unwrap_err();
        assert!(matches!(err, LlmError::EmptyCollege(c) if c == "B"));
    }

    #[test]
    fn same_seed_same_batches() {
        let records: Vec<_> = (0..20)
            .map(|i| {
                record(
                    &format!("r{i}"),
                    &format!("topic{i} study"),
                    ["A", "B"][i % 2],
                )
            })
            .collect();
        let ds = dataset(records);
        let run = |seed| {
            draw_samples(
                &ds,
                &mapping(),
                &Stopwords::english(),
                &SampleSpec::with_seed(seed),
            )
            .unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }
}
