//! CART regression trees: greedy binary splits on squared-error reduction,
//! leaves predicting the mean of their targets.
//!
//! Split search at a node considers every distinct feature in the allowed set
//! and every midpoint between consecutive distinct values. The reduction in
//! sum of squared errors for a split into `L` and `R` is
//!
//! ```text
//! |L| * |R| / (|L| + |R|) * (mean(L) - mean(R))^2
//! ```
//!
//! which is non-negative by construction. Equal reductions (up to a relative
//! `1e-10`) go to the lower feature index, then the lower threshold.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two split reductions count as tied.
pub const TIE_RTOL: f64 = 1e-10;

/// Reductions below this fraction of the node's SSE are rounding noise.
const NOISE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until another stopping rule fires.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::Parameter("min_samples_leaf must be at least 1".into()));
        }
        if !self.min_impurity_decrease.is_finite() || self.min_impurity_decrease < 0.0 {
            return Err(Error::Parameter(
                "min_impurity_decrease must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        count: usize,
    },
    /// Samples with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedTree {
    nodes: Vec<Node>,
}

impl FittedTree {
    /// A tree that predicts `value` everywhere.
    pub fn constant(value: f64, count: usize) -> Self {
        FittedTree {
            nodes: vec![Node::Leaf { value, count }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// `(feature, threshold)` of the root, if the root splits.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Highest feature index any split reads.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return Ok(value),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x.get(feature).ok_or_else(|| {
                        Error::Shape(format!(
                            "tree splits on feature {feature} but the vector has {} values",
                            x.len()
                        ))
                    })?;
                    i = if *v <= threshold { left } else { right };
                }
            }
        }
    }

    /// Indented debug rendering, one node per line.
    pub fn to_text(&self) -> String {
        fn walk(nodes: &[Node], i: usize, depth: usize, out: &mut String) {
            let pad = "  ".repeat(depth);
            match nodes[i] {
                Node::Leaf { value, count } => {
                    let _ = writeln!(out, "{pad}leaf {value} (n={count})");
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(out, "{pad}x[{feature}] <= {threshold}");
                    walk(nodes, left, depth + 1, out);
                    let _ = writeln!(out, "{pad}x[{feature}] > {threshold}");
                    walk(nodes, right, depth + 1, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.nodes, 0, 0, &mut out);
        out
    }
}

/// Routes `x` to a leaf and returns its value.
pub fn predict_tree<R: AsRef<[f64]> + ?Sized>(tree: &FittedTree, x: &R) -> Result<f64> {
    tree.predict(x.as_ref())
}

/// True when `candidate` beats `best` by more than the tie tolerance.
pub(crate) fn beats(candidate: f64, best: f64) -> bool {
    candidate - best > TIE_RTOL * candidate.abs().max(best.abs())
}

struct BestSplit {
    slot: usize,
    feature: usize,
    threshold: f64,
    n_left: usize,
    reduction: f64,
}

struct Builder<'a> {
    y: &'a [f64],
    features: Vec<usize>,
    /// Column-major copies of the used features.
    columns: Vec<Vec<f64>>,
    /// Per used feature, sample indices sorted by value. Every node owns the
    /// same `[lo, hi)` segment of each list.
    orders: Vec<Vec<usize>>,
    /// Sample indices in original order, segmented like `orders`.
    members: Vec<usize>,
    go_left: Vec<bool>,
    scratch: Vec<usize>,
    params: &'a TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&self, lo: usize, hi: usize) -> Node {
        let idx = &self.members[lo..hi];
        let first = self.y[idx[0]];
        let value = if idx.iter().all(|&i| self.y[i] == first) {
            first
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
        };
        Node::Leaf {
            value,
            count: idx.len(),
        }
    }

    fn is_pure(&self, lo: usize, hi: usize) -> bool {
        let idx = &self.members[lo..hi];
        idx.iter().all(|&i| self.y[i] == self.y[idx[0]])
    }

    fn node_sse(&self, lo: usize, hi: usize) -> f64 {
        let idx = &self.members[lo..hi];
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum()
    }

    fn best_split(&self, lo: usize, hi: usize) -> Option<BestSplit> {
        let n = hi - lo;
        let min_leaf = self.params.min_samples_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = self.members[lo..hi].iter().map(|&i| self.y[i]).sum();
        let mut best: Option<BestSplit> = None;
        for (slot, order) in self.orders.iter().enumerate() {
            let col = &self.columns[slot];
            let seg = &order[lo..hi];
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                left_sum += self.y[seg[pos]];
                let (a, b) = (col[seg[pos]], col[seg[pos + 1]]);
                if a == b {
                    continue;
                }
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let mean_l = left_sum / n_left as f64;
                let mean_r = (total - left_sum) / n_right as f64;
                let reduction = (n_left as f64 * n_right as f64 / n as f64) * (mean_l - mean_r).powi(2);
                if best.as_ref().is_none_or(|b| beats(reduction, b.reduction)) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        slot,
                        feature: self.features[slot],
                        threshold,
                        n_left,
                        reduction,
                    });
                }
            }
        }
        best
    }

    fn partition(list: &mut [usize], go_left: &[bool], scratch: &mut Vec<usize>) {
        scratch.clear();
        let mut w = 0;
        for r in 0..list.len() {
            let i = list[r];
            if go_left[i] {
                list[w] = i;
                w += 1;
            } else {
                scratch.push(i);
            }
        }
        list[w..].copy_from_slice(scratch);
    }

    fn build(mut self) -> FittedTree {
        let n = self.y.len();
        self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
        let mut stack = vec![(0usize, 0usize, n, 0usize)];
        while let Some((slot_id, lo, hi, depth)) = stack.pop() {
            let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
            let split = if depth_ok && !self.is_pure(lo, hi) {
                self.best_split(lo, hi)
            } else {
                None
            };
            let split = split.filter(|s| {
                s.reduction > self.params.min_impurity_decrease && s.reduction > NOISE_RTOL * self.node_sse(lo, hi)
            });
            let Some(split) = split else {
                self.nodes[slot_id] = self.leaf(lo, hi);
                continue;
            };
            let col = &self.columns[split.slot];
            for &i in &self.orders[split.slot][lo..hi] {
                self.go_left[i] = col[i] <= split.threshold;
            }
            for order in self.orders.iter_mut() {
                Self::partition(&mut order[lo..hi], &self.go_left, &mut self.scratch);
            }
            Self::partition(&mut self.members[lo..hi], &self.go_left, &mut self.scratch);
            debug_assert_eq!(
                self.members[lo..hi].iter().filter(|&&i| self.go_left[i]).count(),
                split.n_left
            );
            let left = self.nodes.len();
            let right = left + 1;
            self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
            self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
            self.nodes[slot_id] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            let mid = lo + split.n_left;
            stack.push((right, mid, hi, depth + 1));
            stack.push((left, lo, mid, depth + 1));
        }
        FittedTree { nodes: self.nodes }
    }
}

/// Fits a regression tree on rows `x` and targets `y`, splitting only on the
/// listed features. Duplicate entries in `features` are ignored.
pub fn fit_tree<R: AsRef<[f64]>>(x: &[R], y: &[f64], features: &[usize], params: &TreeParams) -> Result<FittedTree> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::Parameter("cannot fit a tree on zero samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} targets",
            x.len(),
            y.len()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Value(format!("non-finite target {v}")));
    }
    let mut distinct = features.to_vec();
    distinct.sort_unstable();
    distinct.dedup();

    let mut columns = Vec::with_capacity(distinct.len());
    for &f in &distinct {
        let mut col = Vec::with_capacity(x.len());
        for (r, row) in x.iter().enumerate() {
            let v = *row.as_ref().get(f).ok_or_else(|| {
                Error::Shape(format!(
                    "feature {f} requested but row {r} has {} values",
                    row.as_ref().len()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Value(format!("non-finite value {v} in row {r}, feature {f}")));
            }
            col.push(v);
        }
        columns.push(col);
    }
    let orders = columns
        .iter()
        .map(|col| {
            let mut order: Vec<usize> = (0..y.len()).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            order
        })
        .collect();

    Ok(Builder {
        y,
        features: distinct,
        columns,
        orders,
        members: (0..y.len()).collect(),
        go_left: vec![false; y.len()],
        scratch: Vec::with_capacity(y.len()),
        params,
        nodes: Vec::new(),
    }
    .build())
}
