//! Exhaustive grid search scored by stratified k-fold cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{loss, train, GbtError, TrainConfig};
use crate::sparse::SparseMatrix;

/// Tunable training parameters, in enumeration order (the last varies
/// fastest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    MaxDepth,
    Eta,
    NumRound,
    Gamma,
    Subsample,
    Lambda,
    MinChildHessian,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::MaxDepth,
        Param::Eta,
        Param::NumRound,
        Param::Gamma,
        Param::Subsample,
        Param::Lambda,
        Param::MinChildHessian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::MaxDepth => "max_depth",
            Param::Eta => "eta",
            Param::NumRound => "num_round",
            Param::Gamma => "gamma",
            Param::Subsample => "subsample",
            Param::Lambda => "lambda",
            Param::MinChildHessian => "min_child_hessian",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn get(self, c: &TrainConfig) -> f64 {
        match self {
            Param::MaxDepth => c.max_depth as f64,
            Param::Eta => c.eta,
            Param::NumRound => c.num_round as f64,
            Param::Gamma => c.gamma,
            Param::Subsample => c.subsample,
            Param::Lambda => c.lambda,
            Param::MinChildHessian => c.min_child_hessian,
        }
    }

    fn set(self, c: &mut TrainConfig, v: f64) -> Result<(), GbtError> {
        let as_count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(GbtError::InvalidGrid(format!(
                    "{} must be a whole number, got {v}",
                    self.name()
                )))
            }
        };
        match self {
            Param::MaxDepth => c.max_depth = as_count(v)?,
            Param::Eta => c.eta = v,
            Param::NumRound => c.num_round = as_count(v)?,
            Param::Gamma => c.gamma = v,
            Param::Subsample => c.subsample = v,
            Param::Lambda => c.lambda = v,
            Param::MinChildHessian => c.min_child_hessian = v,
        }
        Ok(())
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Candidate values per parameter. Parameters not listed keep the base
/// config's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrid {
    values: BTreeMap<Param, Vec<f64>>,
}

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, param: Param, values: impl IntoIterator<Item = f64>) -> Self {
        self.values.insert(param, values.into_iter().collect());
        self
    }

    /// The tuning grid used for the reference boosted-tree runs:
    /// 3 * 3 * 3 * 3 * 2 = 162 points.
    pub fn reference() -> Self {
        Self::new()
            .with(Param::MaxDepth, [3.0, 6.0, 9.0])
            .with(Param::Eta, [0.05, 0.1, 0.3])
            .with(Param::NumRound, [100.0, 200.0, 300.0])
            .with(Param::Gamma, [0.1, 0.2, 0.3])
            .with(Param::Subsample, [0.8, 1.0])
    }

    /// TOML keys are parameter names with array (or scalar) values, e.g.
    /// `max_depth = [3, 6, 9]`. An optional `folds` key is returned as well.
    pub fn from_toml(text: &str) -> Result<(Self, Option<usize>), GbtError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(f64),
            Many(Vec<f64>),
        }
        let table: BTreeMap<String, toml::Value> =
            toml::from_str(text).map_err(|e| GbtError::InvalidGrid(e.to_string()))?;
        let mut grid = Self::new();
        let mut folds = None;
        for (key, value) in table {
            if key == "folds" {
                let n = value
                    .as_integer()
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| GbtError::InvalidGrid("folds must be an integer >= 2".into()))?;
                folds = Some(n as usize);
                continue;
            }
            let param = Param::from_name(&key)
                .ok_or_else(|| GbtError::InvalidGrid(format!("unknown parameter {key:?}")))?;
            let values = match OneOrMany::deserialize(value)
                .map_err(|e| GbtError::InvalidGrid(format!("{key}: {e}")))?
            {
                OneOrMany::One(v) => vec![v],
                OneOrMany::Many(v) => v,
            };
            grid.values.insert(param, values);
        }
        Ok((grid, folds))
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty() || self.values.values().any(Vec::is_empty)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        if self.values.is_empty() {
            0
        } else {
            self.values.values().map(Vec::len).product()
        }
    }

    pub fn params(&self) -> impl Iterator<Item = Param> + '_ {
        self.values.keys().copied()
    }

    /// Every grid point applied to `base`, in enumeration order.
    pub fn configs(&self, base: &TrainConfig) -> Result<Vec<TrainConfig>, GbtError> {
        if self.is_empty() {
            return Err(GbtError::EmptyGrid);
        }
        let axes: Vec<(Param, &Vec<f64>)> = self.values.iter().map(|(p, v)| (*p, v)).collect();
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; axes.len()];
        loop {
            let mut cfg = *base;
            for (&(p, vals), &i) in axes.iter().zip(&idx) {
                p.set(&mut cfg, vals[i])?;
            }
            cfg.validate()
                .map_err(|e| GbtError::InvalidGrid(format!("grid point {}: {e}", out.len())))?;
            out.push(cfg);
            // Odometer increment, last axis fastest.
            let mut a = axes.len();
            loop {
                if a == 0 {
                    return Ok(out);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < axes[a].1.len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub index: usize,
    pub config: TrainConfig,
    pub fold_losses: Vec<f64>,
    pub mean_loss: f64,
    pub std_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    pub params: Vec<Param>,
    pub rows: Vec<CvRow>,
    pub best: usize,
}

impl CvTable {
    pub fn best_config(&self) -> &TrainConfig {
        &self.rows[self.best].config
    }

    /// CSV with the searched parameters, per-fold losses, mean and std.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        let n_folds = self.rows.first().map_or(0, |r| r.fold_losses.len());
        let mut header = vec!["index".to_string()];
        header.extend(Param::ALL.iter().map(|p| p.name().to_string()));
        header.extend((1..=n_folds).map(|f| format!("fold_{f}_log_loss")));
        header.extend(["mean_log_loss".into(), "std_log_loss".into(), "best".into()]);
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = vec![row.index.to_string()];
            fields.extend(Param::ALL.iter().map(|p| p.get(&row.config).to_string()));
            fields.extend(row.fold_losses.iter().map(f64::to_string));
            fields.push(row.mean_loss.to_string());
            fields.push(row.std_loss.to_string());
            fields.push((row.index == self.best).to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluates every grid point with `scorer` (lower is better) and returns the
/// table with the first minimum marked best. The scorer returns per-fold
/// losses.
pub fn grid_search_with<F>(
    grid: &ParamGrid,
    base: &TrainConfig,
    scorer: F,
) -> Result<CvTable, GbtError>
where
    F: Fn(&TrainConfig) -> Result<Vec<f64>, GbtError> + Sync,
{
    let configs = grid.configs(base)?;
    let scored: Vec<Result<Vec<f64>, GbtError>> = configs.par_iter().map(&scorer).collect();
    let mut rows = Vec::with_capacity(configs.len());
    for (index, (config, losses)) in configs.into_iter().zip(scored).enumerate() {
        let fold_losses = losses?;
        if fold_losses.is_empty() {
            return Err(GbtError::InvalidGrid("scorer returned no losses".into()));
        }
        let (mean_loss, std_loss) = mean_std(&fold_losses);
        rows.push(CvRow {
            index,
            config,
            fold_losses,
            mean_loss,
            std_loss,
        });
    }
    let mut best = 0;
    for (i, row) in rows.iter().enumerate() {
        if row.mean_loss < rows[best].mean_loss {
            best = i;
        }
    }
    Ok(CvTable {
        params: grid.params().collect(),
        rows,
        best,
    })
}

/// Fold index per row: each class's rows are shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes stay balanced.
pub fn stratified_folds<S: AsRef<str>>(labels: &[S], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_ref()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Held-out mean log-loss per fold.
pub fn cross_validate<S: AsRef<str> + Sync>(
    matrix: &SparseMatrix,
    labels: &[S],
    config: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>, GbtError> {
    if folds < 2 {
        return Err(GbtError::InvalidGrid("folds must be at least 2".into()));
    }
    if labels.len() != matrix.n_rows() {
        return Err(GbtError::DimensionMismatch {
            expected: matrix.n_rows(),
            got: labels.len(),
        });
    }
    if labels.len() < folds {
        return Err(GbtError::InvalidGrid(format!(
            "{} rows cannot fill {folds} folds",
            labels.len()
        )));
    }
    let assignment = stratified_folds(labels, folds, seed);
    (0..folds)
        .map(|f| {
            let train_rows: Vec<usize> =
                (0..labels.len()).filter(|&i| assignment[i] != f).collect();
            let test_rows: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == f).collect();
            let train_labels: Vec<&str> = train_rows.iter().map(|&i| labels[i].as_ref()).collect();
            let model = train(&matrix.select_rows(&train_rows), &train_labels, config)?;
            let proba = model.predict_proba(&matrix.select_rows(&test_rows))?;
            let targets: Vec<Option<usize>> = test_rows
                .iter()
                .map(|&i| model.classes().iter().position(|c| c == labels[i].as_ref()))
                .collect();
            Ok(loss::mean_log_loss(&proba, &targets))
        })
        .collect()
}

/// Grid search scored by stratified k-fold mean log-loss. Every grid point
/// sees the same folds.
pub fn grid_search<S: AsRef<str> + Sync>(
    matrix: &SparseMatrix,
    labels: &[S],
    grid: &ParamGrid,
    base: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<CvTable, GbtError> {
    if folds < 2 {
        return Err(GbtError::InvalidGrid("folds must be at least 2".into()));
    }
    grid_search_with(grid, base, |cfg| {
        cross_validate(matrix, labels, cfg, folds, seed)
    })
}
