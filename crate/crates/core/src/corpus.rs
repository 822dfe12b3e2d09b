//! Thesis records, the college/department vocabulary, and dataset splitting.
//!
//! Records are loaded from JSONL or CSV, validated once at load, and are
//! immutable afterwards. [`assign_colleges`] implements the dictionary
//! labeling pass: every record ends up with either the owning college of its
//! department or the [`MISSING`] sentinel.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label assigned when a record's department is absent or unmapped.
pub const MISSING: &str = "missing";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate record id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid college mapping: {0}")]
    InvalidMapping(String),
    #[error("line {line}: college {label:?} is neither a mapping key nor \"missing\"")]
    UnknownCollege { line: usize, label: String },
    #[error("stratified split requested but class {0:?} has no records")]
    EmptyClass(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

/// One metadata record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThesisRecord {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub department: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub college: Option<String>,
}

impl ThesisRecord {
    /// The college label if it is a real class (present and not [`MISSING`]).
    pub fn labeled_college(&self) -> Option<&str> {
        self.college.as_deref().filter(|c| *c != MISSING)
    }
}

/// Controlled vocabulary: college name to the departments it owns.
///
/// Iteration order is the order of the source file, which is also the column
/// order used by reports and prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CollegeMapping {
    entries: IndexMap<String, Vec<String>>,
    #[serde(skip)]
    by_department: HashMap<String, usize>,
}

impl CollegeMapping {
    pub fn new(entries: IndexMap<String, Vec<String>>) -> Result<Self, CorpusError> {
        let mut by_department = HashMap::new();
        for (idx, (college, departments)) in entries.iter().enumerate() {
            if college.trim().is_empty() {
                return Err(CorpusError::InvalidMapping("empty college name".into()));
            }
            if college == MISSING {
                return Err(CorpusError::InvalidMapping(format!(
                    "{MISSING:?} is reserved and cannot be a college"
                )));
            }
            if departments.is_empty() {
                return Err(CorpusError::InvalidMapping(format!(
                    "college {college:?} has no departments"
                )));
            }
            for dept in departments {
                let key = fold_department(dept);
                if key.is_empty() {
                    return Err(CorpusError::InvalidMapping(format!(
                        "college {college:?} lists an empty department"
                    )));
                }
                if let Some(&prev) = by_department.get(&key) {
                    let (other, _) = entries.get_index(prev).expect("index from same map");
                    if prev != idx {
                        return Err(CorpusError::InvalidMapping(format!(
                            "department {dept:?} appears under both {other:?} and {college:?}"
                        )));
                    }
                }
                by_department.insert(key, idx);
            }
        }
        Ok(Self {
            entries,
            by_department,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CorpusError> {
        let entries: IndexMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| CorpusError::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn colleges(&self) -> impl ExactSizeIterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_college(&self, college: &str) -> bool {
        self.entries.contains_key(college)
    }

    /// Owning college of a department; matching ignores case and
    /// surrounding whitespace.
    pub fn college_of(&self, department: &str) -> Option<&str> {
        self.by_department
            .get(&fold_department(department))
            .and_then(|&idx| self.entries.get_index(idx))
            .map(|(k, _)| k.as_str())
    }
}

fn fold_department(dept: &str) -> String {
    dept.trim().to_lowercase()
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: PathBuf,
    pub loaded_at: SystemTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<ThesisRecord>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    /// Guess from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(Self::Jsonl),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!(
                "unknown record format {other:?} (expected jsonl or csv)"
            )),
        }
    }
}

impl Dataset {
    /// Builds a dataset from in-memory records, checking id uniqueness.
    pub fn from_records(
        records: Vec<ThesisRecord>,
        source: impl Into<PathBuf>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.id.trim().is_empty() {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    message: "empty id".into(),
                });
            }
            if !seen.insert(rec.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: rec.id.clone(),
                });
            }
        }
        Ok(Self {
            records,
            provenance: Provenance {
                source: source.into(),
                loaded_at: SystemTime::now(),
            },
        })
    }

    pub fn records(&self) -> &[ThesisRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<ThesisRecord> {
        self.records
    }

    /// Checks that every present college label is a mapping key or [`MISSING`].
    pub fn validate_labels(&self, mapping: &CollegeMapping) -> Result<(), CorpusError> {
        for (i, rec) in self.records.iter().enumerate() {
            if let Some(label) = &rec.college {
                if label != MISSING && !mapping.contains_college(label) {
                    return Err(CorpusError::UnknownCollege {
                        line: i + 1,
                        label: label.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn derived(&self, records: Vec<ThesisRecord>) -> Self {
        Self {
            records,
            provenance: self.provenance.clone(),
        }
    }

    /// Records carrying a real college label.
    pub fn labeled(&self) -> Self {
        self.derived(
            self.records
                .iter()
                .filter(|r| r.labeled_college().is_some())
                .cloned()
                .collect(),
        )
    }

    /// Writes canonical JSONL, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("records always serialize"));
            out.push('\n');
        }
        out
    }
}

/// Loads and validates a record file. Line numbers in errors are 1-based
/// physical lines (CSV: the header is line 1).
pub fn load_dataset(path: &Path, format: RecordFormat) -> Result<Dataset, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let (records, lines) = match format {
        RecordFormat::Jsonl => parse_jsonl(BufReader::new(file)).map_err(|e| match e {
            ParseFailure::Io(source) => io_err(source),
            ParseFailure::Corpus(e) => e,
        })?,
        RecordFormat::Csv => parse_csv(file)?,
    };
    let mut seen = HashSet::new();
    for (rec, &line) in records.iter().zip(&lines) {
        if !seen.insert(rec.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: rec.id.clone(),
            });
        }
    }
    Ok(Dataset {
        records,
        provenance: Provenance {
            source: path.to_owned(),
            loaded_at: SystemTime::now(),
        },
    })
}

enum ParseFailure {
    Io(std::io::Error),
    Corpus(CorpusError),
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    title: Option<String>,
    #[serde(default)]
    keywords: Vec<String>,
    department: Option<String>,
    college: Option<String>,
}

fn check_raw(raw: RawRecord, line: usize) -> Result<ThesisRecord, CorpusError> {
    let id = raw
        .id
        .filter(|id| !id.trim().is_empty())
        .ok_or_else(|| CorpusError::Parse {
            line,
            message: "missing or empty id".into(),
        })?;
    let title = raw.title.ok_or_else(|| CorpusError::Parse {
        line,
        message: format!("record {id:?} has no title"),
    })?;
    let non_blank = |s: Option<String>| s.filter(|v| !v.trim().is_empty());
    Ok(ThesisRecord {
        id,
        title,
        keywords: raw.keywords,
        department: non_blank(raw.department),
        college: non_blank(raw.college),
    })
}

fn parse_jsonl(reader: impl BufRead) -> Result<(Vec<ThesisRecord>, Vec<usize>), ParseFailure> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(ParseFailure::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| {
            ParseFailure::Corpus(CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })
        })?;
        records.push(check_raw(raw, line_no).map_err(ParseFailure::Corpus)?);
        lines.push(line_no);
    }
    Ok((records, lines))
}

/// CSV columns: `id,title,keywords,department,college`, keywords separated by `;`.
fn parse_csv(file: fs::File) -> Result<(Vec<ThesisRecord>, Vec<usize>), CorpusError> {
    #[derive(Deserialize)]
    struct CsvRow {
        id: Option<String>,
        title: Option<String>,
        #[serde(default)]
        keywords: Option<String>,
        #[serde(default)]
        department: Option<String>,
        #[serde(default)]
        college: Option<String>,
    }
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CorpusError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let row: CsvRow = row
            .deserialize(Some(&headers))
            .map_err(|e| CorpusError::Parse {
                line,
                message: e.to_string(),
            })?;
        let keywords = row
            .keywords
            .unwrap_or_default()
            .split(';')
            .map(str::trim)
            .filter(|k| !k.is_empty())
            .map(str::to_owned)
            .collect();
        let raw = RawRecord {
            id: row.id,
            title: row.title.filter(|t| !t.is_empty()),
            keywords,
            department: row.department,
            college: row.college,
        };
        records.push(check_raw(raw, line)?);
        lines.push(line);
    }
    Ok((records, lines))
}

/// Labels every record from its department. Unknown or absent departments
/// become [`MISSING`]; pre-existing labels that disagree are overwritten.
pub fn assign_colleges(dataset: &Dataset, mapping: &CollegeMapping) -> Dataset {
    let records = dataset
        .records
        .iter()
        .map(|rec| {
            let college = rec
                .department
                .as_deref()
                .and_then(|d| mapping.college_of(d))
                .unwrap_or(MISSING);
            if let Some(prev) = rec.college.as_deref() {
                if prev != college {
                    log::info!(
                        "record {:?}: college {:?} overwritten with {:?}",
                        rec.id,
                        prev,
                        college
                    );
                }
            }
            ThesisRecord {
                college: Some(college.to_owned()),
                ..rec.clone()
            }
        })
        .collect();
    dataset.derived(records)
}

/// Record count per college label, [`MISSING`] included. Unlabeled records
/// (college absent) are counted under [`MISSING`] too.
pub fn class_distribution(dataset: &Dataset) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for rec in &dataset.records {
        let label = rec.college.as_deref().unwrap_or(MISSING);
        *counts.entry(label.to_owned()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    /// 80/20 stratified.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            train_fraction: 0.8,
            seed,
            stratified: true,
        }
    }
}

/// Splits labeled records into train and test sets. Records labeled
/// [`MISSING`] or unlabeled are dropped first. Both outputs keep the input
/// order of their records.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), CorpusError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(CorpusError::InvalidSplit(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let labeled: Vec<usize> = (0..dataset.records.len())
        .filter(|&i| dataset.records[i].labeled_college().is_some())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_train = vec![false; dataset.records.len()];

    if spec.stratified {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in &labeled {
            let label = dataset.records[i].labeled_college().expect("filtered");
            groups.entry(label).or_default().push(i);
        }
        if let Some((label, _)) = groups.iter().find(|(_, g)| g.is_empty()) {
            return Err(CorpusError::EmptyClass((*label).to_owned()));
        }
        for group in groups.values_mut() {
            group.shuffle(&mut rng);
            let n_train = train_count(group.len(), spec.train_fraction);
            for &i in &group[..n_train] {
                in_train[i] = true;
            }
        }
    } else {
        let mut order = labeled.clone();
        order.shuffle(&mut rng);
        let n_train = train_count(order.len(), spec.train_fraction);
        for &i in &order[..n_train] {
            in_train[i] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for &i in &labeled {
        let rec = dataset.records[i].clone();
        if in_train[i] {
            train.push(rec);
        } else {
            test.push(rec);
        }
    }
    Ok((dataset.derived(train), dataset.derived(test)))
}

fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Stratification requested over the mapping's full vocabulary: fails with
/// [`CorpusError::EmptyClass`] when a mapped college has no labeled record.
pub fn split_over_mapping(
    dataset: &Dataset,
    mapping: &CollegeMapping,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset), CorpusError> {
    if spec.stratified {
        let dist = class_distribution(&dataset.labeled());
        if let Some(empty) = mapping.colleges().find(|c| !dist.contains_key(*c)) {
            return Err(CorpusError::EmptyClass(empty.to_owned()));
        }
    }
    split(dataset, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn rec(id: &str, dept: Option<&str>, college: Option<&str>) -> ThesisRecord {
        ThesisRecord {
            id: id.into(),
            title: format!("title {id}"),
            keywords: vec![],
            department: dept.map(Into::into),
            college: college.map(Into::into),
        }
    }

    fn mapping(pairs: &[(&str, &[&str])]) -> CollegeMapping {
        CollegeMapping::new(
            pairs
                .iter()
                .map(|(c, ds)| (c.to_string(), ds.iter().map(|d| d.to_string()).collect()))
                .collect(),
        )
        .unwrap()
    }

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_jsonl() {
        let f = write_tmp(
            concat!(
                r#"{"id":"t1","title":"A","keywords":["x"],"department":"Physics"}"#,
                "\n",
                r#"{"id":"t2","title":"B","keywords":[]}"#,
                "\n",
                r#"{"id":"t3","title":"C","keywords":["y","z"],"college":"MCS"}"#,
                "\n"
            ),
            ".jsonl",
        );
        let ds = load_dataset(f.path(), RecordFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records()[0].department.as_deref(), Some("Physics"));
        assert_eq!(ds.records()[2].college.as_deref(), Some("MCS"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_tmp(
            concat!(
                r#"{"id":"t1","title":"A"}"#,
                "\n",
                r#"{"id":"t1","title":"B"}"#,
                "\n"
            ),
            ".jsonl",
        );
        match load_dataset(f.path(), RecordFormat::Jsonl) {
            Err(CorpusError::DuplicateId { line, id }) => {
                assert_eq!(line, 2);
                assert_eq!(id, "t1");
            }
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn missing_title_names_row() {
        let f = write_tmp(
            concat!(
                r#"{"id":"t1","title":"A"}"#,
                "\n",
                r#"{"id":"t2","keywords":["a"]}"#,
                "\n"
            ),
            ".jsonl",
        );
        let err = load_dataset(f.path(), RecordFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn loads_csv_with_semicolon_keywords() {
        let f = write_tmp(
            "id,title,keywords,department,college\n\
             t1,Graph Mining,graphs; mining,Computer Science,\n\
             t2,Soil,,,\n",
            ".csv",
        );
        let ds = load_dataset(f.path(), RecordFormat::Csv).unwrap();
        assert_eq!(ds.records()[0].keywords, vec!["graphs", "mining"]);
        assert_eq!(ds.records()[1].department, None);
        let bad = write_tmp("id,title\nt1,\n", ".csv");
        let err = load_dataset(bad.path(), RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn mapping_rejects_shared_department() {
        let entries: IndexMap<String, Vec<String>> = [
            ("A".to_string(), vec!["Physics".to_string()]),
            ("B".to_string(), vec![" physics ".to_string()]),
        ]
        .into_iter()
        .collect();
        assert!(matches!(
            CollegeMapping::new(entries),
            Err(CorpusError::InvalidMapping(_))
        ));
        let empty: IndexMap<String, Vec<String>> =
            [("A".to_string(), vec![])].into_iter().collect();
        assert!(CollegeMapping::new(empty).is_err());
    }

    #[test]
    fn assign_direct_lookup() {
        let m = mapping(&[("SCS", &["Computer Science"])]);
        let ds =
            Dataset::from_records(vec![rec("t1", Some("Computer Science"), None)], "mem").unwrap();
        let out = assign_colleges(&ds, &m);
        assert_eq!(out.records()[0].college.as_deref(), Some("SCS"));
    }

    #[test]
    fn assign_absent_department_is_missing() {
        let m = mapping(&[("SCS", &["Computer Science"])]);
        let ds = Dataset::from_records(vec![rec("t1", None, None)], "mem").unwrap();
        assert_eq!(
            assign_colleges(&ds, &m).records()[0].college.as_deref(),
            Some(MISSING)
        );
    }

    #[test]
    fn assign_unmapped_department_falls_through_to_missing() {
        // Hand trace: department exists, lookup finds no college, so nothing
        // is assigned and the record ends up marked missing.
        let m = mapping(&[("SCS", &["Computer Science"]), ("MCS", &["Physics"])]);
        let ds = Dataset::from_records(vec![rec("t1", Some("Astrology"), None)], "mem").unwrap();
        assert_eq!(
            assign_colleges(&ds, &m).records()[0].college.as_deref(),
            Some(MISSING)
        );
    }

    #[test]
    fn assign_matches_case_and_whitespace_insensitively_and_overwrites() {
        let m = mapping(&[("SCS", &["Computer Science"])]);
        let ds = Dataset::from_records(
            vec![rec("t1", Some("  computer SCIENCE "), Some("CFA"))],
            "mem",
        )
        .unwrap();
        let out = assign_colleges(&ds, &m);
        assert_eq!(out.records()[0].college.as_deref(), Some("SCS"));
        assert_eq!(out.records()[0].title, ds.records()[0].title);
    }

    #[test]
    fn distribution_counts() {
        let ds = Dataset::from_records(
            vec![
                rec("a", None, Some("SCS")),
                rec("b", None, Some("SCS")),
                rec("c", None, Some(MISSING)),
            ],
            "mem",
        )
        .unwrap();
        let d = class_distribution(&ds);
        assert_eq!(d.get("SCS"), Some(&2));
        assert_eq!(d.get(MISSING), Some(&1));
        assert!(class_distribution(&Dataset::from_records(vec![], "mem").unwrap()).is_empty());
    }

    #[test]
    fn distribution_seventy_record_fixture() {
        let colleges = ["CE", "MCS", "SCS", "Tepper", "DCHSS", "Heinz", "CFA"];
        let records: Vec<_> = (0..70)
            .map(|i| rec(&format!("r{i}"), None, Some(colleges[i % 7])))
            .collect();
        let ds = Dataset::from_records(records, "mem").unwrap();
        let d = class_distribution(&ds);
        assert_eq!(d.len(), 7);
        // Independent recount.
        for c in colleges {
            let n = ds
                .records()
                .iter()
                .filter(|r| r.college.as_deref() == Some(c))
                .count();
            assert_eq!(n, 10);
            assert_eq!(d[c], 10);
        }
    }

    fn labeled_dataset(counts: &[(&str, usize)]) -> Dataset {
        let mut records = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                records.push(rec(&format!("{label}{i}"), None, Some(label)));
            }
        }
        Dataset::from_records(records, "mem").unwrap()
    }

    #[test]
    fn split_is_deterministic() {
        let ds = labeled_dataset(&[("A", 5), ("B", 5)]);
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 7,
            stratified: false,
        };
        let (a_train, a_test) = split(&ds, &spec).unwrap();
        let (b_train, b_test) = split(&ds, &spec).unwrap();
        assert_eq!(a_train.records(), b_train.records());
        assert_eq!(a_test.records(), b_test.records());
    }

    #[test]
    fn stratified_half_split_is_balanced() {
        let ds = labeled_dataset(&[("A", 10), ("B", 10)]);
        let spec = SplitSpec {
            train_fraction: 0.5,
            seed: 3,
            stratified: true,
        };
        let (train, test) = split(&ds, &spec).unwrap();
        for part in [&train, &test] {
            let d = class_distribution(part);
            assert_eq!(d["A"], 5);
            assert_eq!(d["B"], 5);
        }
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let ds = labeled_dataset(&[("A", 100)]);
        let (train, test) = split(&ds, &SplitSpec::with_seed(1)).unwrap();
        // 0.8 * 100 = 80 exactly.
        assert_eq!((train.len(), test.len()), (80, 20));
    }

    #[test]
    fn split_drops_missing_and_rejects_bad_fraction() {
        let mut records = labeled_dataset(&[("A", 4)]).into_records();
        records.push(rec("m", None, Some(MISSING)));
        records.push(rec("u", None, None));
        let ds = Dataset::from_records(records, "mem").unwrap();
        let (train, test) = split(&ds, &SplitSpec::with_seed(0)).unwrap();
        assert_eq!(train.len() + test.len(), 4);
        let bad = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::with_seed(0)
        };
        assert!(matches!(
            split(&ds, &bad),
            Err(CorpusError::InvalidSplit(_))
        ));
    }

    #[test]
    fn stratified_split_over_mapping_needs_every_class() {
        let ds = labeled_dataset(&[("A", 4)]);
        let m = mapping(&[("A", &["a"]), ("B", &["b"])]);
        assert!(matches!(
            split_over_mapping(&ds, &m, &SplitSpec::with_seed(0)),
            Err(CorpusError::EmptyClass(c)) if c == "B"
        ));
    }

    proptest! {
        #[test]
        fn split_is_disjoint_cover(
            labels in proptest::collection::vec(0u8..4, 1..60),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
            stratified in any::<bool>(),
        ) {
            let records: Vec<_> = labels
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let label = if *l == 3 { MISSING.to_string() } else { format!("C{l}") };
                    rec(&format!("r{i}"), None, Some(&label))
                })
                .collect();
            let ds = Dataset::from_records(records, "mem").unwrap();
            let spec = SplitSpec { train_fraction: fraction, seed, stratified };
            let (train, test) = split(&ds, &spec).unwrap();
            let train_ids: HashSet<_> = train.records().iter().map(|r| r.id.clone()).collect();
            let test_ids: HashSet<_> = test.records().iter().map(|r| r.id.clone()).collect();
            prop_assert!(train_ids.is_disjoint(&test_ids));
            let all: HashSet<_> = ds.labeled().records().iter().map(|r| r.id.clone()).collect();
            let union: HashSet<_> = train_ids.union(&test_ids).cloned().collect();
            prop_assert_eq!(union, all);
            if stratified {
                let full = class_distribution(&ds.labeled());
                let tr = class_distribution(&train);
                for (label, n) in full {
                    let got = *tr.get(&label).unwrap_or(&0) as f64;
                    prop_assert!((got - n as f64 * fraction).abs() <= 1.0);
                }
            }
        }
    }
}
