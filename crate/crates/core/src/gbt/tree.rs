//! Regression trees grown level by level with exact greedy split search.
//!
//! Absent (unstored) entries of a sparse row are "missing" and follow the
//! node's learned default direction. Present values go left when
//! `value < threshold`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::SparseMatrix;

/// Regularized gain of splitting a node into the given children, minus the
/// per-split penalty `gamma`.
pub fn split_gain(
    grad_sum_left: f64,
    hess_sum_left: f64,
    grad_sum_right: f64,
    hess_sum_right: f64,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let parent = score(
        grad_sum_left + grad_sum_right,
        hess_sum_left + hess_sum_right,
        lambda,
    );
    0.5 * (score(grad_sum_left, hess_sum_left, lambda)
        + score(grad_sum_right, hess_sum_right, lambda)
        - parent)
        - gamma
}

/// `G^2 / (H + lambda)`, zero when the denominator vanishes.
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

/// `-G / (H + lambda)`, zero when the denominator vanishes.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Node 0 is the root; children always have larger indices than parents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { weight }],
        }
    }

    /// Validates structure: in-range children pointing forward, finite
    /// thresholds and weights, every node reachable exactly once.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                TreeNode::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return Err(format!("node {i}: bad child index {child}"));
                        }
                        parents[child] += 1;
                    }
                }
                TreeNode::Leaf { weight } => {
                    if !weight.is_finite() {
                        return Err(format!("node {i}: non-finite leaf weight"));
                    }
                }
            }
        }
        if parents[1..].iter().any(|&p| p != 1) {
            return Err("every non-root node needs exactly one parent".into());
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Output for one sparse row (sorted column indices and values).
    pub fn predict_row(&self, cols: &[usize], vals: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let go_left = match cols.binary_search(&feature) {
                        Ok(k) => vals[k] < threshold,
                        Err(_) => default_left,
                    };
                    i = if go_left { left } else { right };
                }
            }
        }
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

/// Column-major copy of the training matrix, each column sorted by value
/// (ties by row).
pub(crate) struct FeatureColumns {
    columns: Vec<Vec<(u32, f64)>>,
}

impl FeatureColumns {
    pub(crate) fn new(matrix: &SparseMatrix) -> Self {
        let mut columns = vec![Vec::new(); matrix.n_cols()];
        for (r, c, v) in matrix.triplets() {
            columns[c].push((r as u32, v));
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Self { columns }
    }

    fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Settings the builder needs from the training config.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            g: self.g - other.g,
            h: self.h - other.h,
            n: self.n - other.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
    left: Stats,
    right: Stats,
}

impl Candidate {
    /// Higher gain wins; ties go to the lower feature, then the lower
    /// threshold, then missing-right.
    fn beats(&self, other: &Candidate) -> bool {
        if self.gain != other.gain {
            return self.gain > other.gain;
        }
        self.feature
            .cmp(&other.feature)
            .then(self.threshold.total_cmp(&other.threshold))
            .then(self.default_left.cmp(&other.default_left))
            .is_lt()
    }
}

const NO_SLOT: u32 = u32::MAX;

/// Midpoint between consecutive distinct values, nudged so that `lo` still
/// routes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

struct Frontier<'a> {
    params: GrowParams,
    totals: &'a [Stats],
    slot_of_row: &'a [u32],
    grad: &'a [f64],
    hess: &'a [f64],
}

impl Frontier<'_> {
    fn consider(
        &self,
        best: &mut [Option<Candidate>],
        slot: usize,
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: Stats,
        right: Stats,
    ) {
        let p = &self.params;
        if left.h < p.min_child_hessian || right.h < p.min_child_hessian {
            return;
        }
        let gain = split_gain(left.g, left.h, right.g, right.h, p.lambda, p.gamma);
        if !(gain > 0.0) {
            return;
        }
        let cand = Candidate {
            gain,
            feature,
            threshold,
            default_left,
            left,
            right,
        };
        if best[slot].as_ref().map_or(true, |b| cand.beats(b)) {
            best[slot] = Some(cand);
        }
    }

    /// Best split per frontier slot on one feature.
    fn scan_feature(&self, feature: usize, column: &[(u32, f64)], best: &mut [Option<Candidate>]) {
        let n_slots = self.totals.len();
        // Missing values go right: ascending scan, left side accumulates.
        let mut acc = vec![Stats::default(); n_slots];
        let mut last = vec![0.0f64; n_slots];
        for &(row, v) in column {
            let slot = self.slot_of_row[row as usize];
            if slot == NO_SLOT {
                continue;
            }
            let s = slot as usize;
            if acc[s].n > 0 && v != last[s] {
                let right = self.totals[s].minus(&acc[s]);
                self.consider(best, s, feature, midpoint(last[s], v), false, acc[s], right);
            }
            acc[s].add(self.grad[row as usize], self.hess[row as usize]);
            last[s] = v;
        }
        let has_missing: Vec<bool> = (0..n_slots)
            .map(|s| acc[s].n > 0 && acc[s].n < self.totals[s].n)
            .collect();
        if !has_missing.iter().any(|&m| m) {
            return;
        }
        // Missing values go left: descending scan, right side accumulates.
        let mut acc = vec![Stats::default(); n_slots];
        for &(row, v) in column.iter().rev() {
            let slot = self.slot_of_row[row as usize];
            if slot == NO_SLOT || !has_missing[slot as usize] {
                continue;
            }
            let s = slot as usize;
            if acc[s].n > 0 && v != last[s] {
                let left = self.totals[s].minus(&acc[s]);
                self.consider(best, s, feature, midpoint(v, last[s]), true, left, acc[s]);
            }
            acc[s].add(self.grad[row as usize], self.hess[row as usize]);
            last[s] = v;
        }
        // Every present value right, only missing rows left.
        for s in (0..n_slots).filter(|&s| has_missing[s]) {
            let left = self.totals[s].minus(&acc[s]);
            self.consider(best, s, feature, last[s], true, left, acc[s]);
        }
    }
}

const FEATURE_CHUNK: usize = 256;

/// Grows one tree on the rows listed in `rows`, fitting `grad`/`hess`
/// (indexed by matrix row). Leaf weights are shrunk by `eta`.
pub(crate) fn grow_tree(
    matrix: &SparseMatrix,
    columns: &FeatureColumns,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    params: GrowParams,
) -> RegressionTree {
    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { weight: 0.0 }];
    let mut slot_of_row = vec![NO_SLOT; matrix.n_rows()];
    let mut root = Stats::default();
    for &r in rows {
        slot_of_row[r] = 0;
        root.add(grad[r], hess[r]);
    }
    // (node index, stats) for the current level.
    let mut frontier: Vec<(usize, Stats)> = vec![(0, root)];
    let mut members: Vec<Vec<usize>> = vec![rows.to_vec()];

    for depth in 0..=params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let totals: Vec<Stats> = frontier.iter().map(|&(_, s)| s).collect();
        let best: Vec<Option<Candidate>> = if depth == params.max_depth {
            vec![None; totals.len()]
        } else {
            let ctx = Frontier {
                params,
                totals: &totals,
                slot_of_row: &slot_of_row,
                grad,
                hess,
            };
            let features: Vec<usize> = (0..columns.n_features()).collect();
            let per_chunk: Vec<Vec<Option<Candidate>>> = features
                .par_chunks(FEATURE_CHUNK)
                .map(|chunk| {
                    let mut best = vec![None; totals.len()];
                    for &f in chunk {
                        ctx.scan_feature(f, &columns.columns[f], &mut best);
                    }
                    best
                })
                .collect();
            // Chunks are reduced in feature order, so the result does not
            // depend on scheduling.
            let mut best: Vec<Option<Candidate>> = vec![None; totals.len()];
            for chunk in per_chunk {
                for (b, c) in best.iter_mut().zip(chunk) {
                    if let Some(c) = c {
                        if b.as_ref().map_or(true, |cur| c.beats(cur)) {
                            *b = Some(c);
                        }
                    }
                }
            }
            best
        };

        let mut next_frontier = Vec::new();
        let mut next_members = Vec::new();
        for ((slot_rows, &(node, stats)), cand) in members.iter().zip(&frontier).zip(best) {
            let Some(c) = cand else {
                nodes[node] = TreeNode::Leaf {
                    weight: params.eta * leaf_weight(stats.g, stats.h, params.lambda),
                };
                for &r in slot_rows {
                    slot_of_row[r] = NO_SLOT;
                }
                continue;
            };
            let (left, right) = (nodes.len(), nodes.len() + 1);
            nodes.push(TreeNode::Leaf { weight: 0.0 });
            nodes.push(TreeNode::Leaf { weight: 0.0 });
            nodes[node] = TreeNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                default_left: c.default_left,
                left,
                right,
            };
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            for &r in slot_rows {
                let go_left = match matrix.get(r, c.feature) {
                    Some(v) => v < c.threshold,
                    None => c.default_left,
                };
                if go_left {
                    lrows.push(r);
                } else {
                    rrows.push(r);
                }
            }
            debug_assert_eq!(lrows.len(), c.left.n);
            debug_assert_eq!(rrows.len(), c.right.n);
            next_frontier.push((left, c.left));
            next_members.push(lrows);
            next_frontier.push((right, c.right));
            next_members.push(rrows);
        }
        for (slot, slot_rows) in next_members.iter().enumerate() {
            for &r in slot_rows {
                slot_of_row[r] = slot as u32;
            }
        }
        frontier = next_frontier;
        members = next_members;
    }
    RegressionTree { nodes }
}
