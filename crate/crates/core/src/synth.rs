//! Seeded synthetic datasets for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{CollegeMapping, ThesisRecord};
use crate::sparse::SparseMatrix;
use crate::textprep::DocumentText;

/// Dense feature rows with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl LabeledPoints {
    pub fn matrix(&self) -> SparseMatrix {
        let width = self.rows.first().map_or(0, Vec::len);
        SparseMatrix::from_dense(&self.rows, width)
    }
}

/// Four points in the XOR layout: class `a` in the low/low and high/high
/// quadrants, class `b` in the mixed ones. Coordinates are distinct per axis.
pub fn xor_points() -> LabeledPoints {
    let rows = vec![
        vec![0.1, 0.2],
        vec![0.9, 0.8],
        vec![0.2, 0.9],
        vec![0.8, 0.1],
    ];
    let labels = ["a", "a", "b", "b"].map(String::from).to_vec();
    LabeledPoints { rows, labels }
}

/// Two isotropic Gaussian blobs in the plane, `per_class` points each,
/// centered at `(1, 1)` (class `a`) and `(4, 4)` (class `b`).
pub fn gaussian_blobs(per_class: usize, std_dev: f64, seed: u64) -> LabeledPoints {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, std_dev).expect("finite std");
    let mut rows = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let (label, center) = if i % 2 == 0 { ("a", 1.0) } else { ("b", 4.0) };
        rows.push(vec![
            center + noise.sample(&mut rng),
            center + noise.sample(&mut rng),
        ]);
        labels.push(label.to_owned());
    }
    LabeledPoints { rows, labels }
}

/// Documents over the vocabulary `w0..w{vocab_size}`, each with
/// `1..=max_len` tokens drawn uniformly.
pub fn random_documents(
    n_docs: usize,
    vocab_size: usize,
    max_len: usize,
    seed: u64,
) -> Vec<DocumentText> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..vocab_size)))
                .collect();
            DocumentText {
                record_id: format!("d{i}"),
                rendered: tokens.join(", "),
                tokens,
            }
        })
        .collect()
}

const SHARED_WORDS: [&str; 12] = [
    "analysis",
    "study",
    "systems",
    "design",
    "models",
    "approach",
    "data",
    "theory",
    "methods",
    "evaluation",
    "framework",
    "applications",
];

/// Thesis records whose titles mix college-specific topic words (derived
/// from the department names) with shared filler words. Departments are
/// set, colleges are not.
pub fn thesis_records(
    mapping: &CollegeMapping,
    per_college: usize,
    seed: u64,
) -> Vec<ThesisRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for (ci, (college, departments)) in mapping.entries().enumerate() {
        let topic: Vec<String> = departments
            .iter()
            .flat_map(|d| d.split_whitespace())
            .map(|w| w.to_lowercase())
            .filter(|w| w.len() > 3)
            .chain((0..4).map(|k| format!("{}topic{k}", college.to_lowercase().replace(' ', ""))))
            .collect();
        for j in 0..per_college {
            let mut words = Vec::new();
            for _ in 0..rng.random_range(2..=4) {
                words.push(topic[rng.random_range(0..topic.len())].clone());
            }
            for _ in 0..rng.random_range(1..=3) {
                words.push(SHARED_WORDS[rng.random_range(0..SHARED_WORDS.len())].to_owned());
            }
            let keywords = vec![topic[rng.random_range(0..topic.len())].clone()];
            let department = departments[rng.random_range(0..departments.len())].clone();
            records.push(ThesisRecord {
                id: format!("c{ci}-{j:04}"),
                title: words.join(" "),
                keywords,
                department: Some(department),
                college: None,
            });
        }
    }
    records
}
