//! CART regression tree with minimal cost-complexity pruning.
//!
//! Pruning uses the standardized target: a subtree is collapsed when its
//! effective alpha, measured in units of the training variance, is at most
//! `ccp_alpha`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::encode::FeatureEncoder;
use crate::error::{Error, Result};
use crate::preprocess::FeatureRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub ccp_alpha: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self::fleet()
    }
}

impl TreeConfig {
    pub fn fleet() -> Self {
        Self {
            max_depth: 15,
            min_samples_split: 20,
            min_samples_leaf: 10,
            ccp_alpha: 0.2,
        }
    }

    pub fn single_aircraft() -> Self {
        Self {
            max_depth: 10,
            min_samples_split: 10,
            min_samples_leaf: 5,
            ccp_alpha: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 || self.min_samples_split < 2 {
            return Err(Error::Config("tree needs min_samples_leaf >= 1 and min_samples_split >= 2".into()));
        }
        if !(self.ccp_alpha >= 0.0) {
            return Err(Error::Config(format!("tree ccp_alpha must be >= 0, got {}", self.ccp_alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `None` for leaves.
    pub split: Option<Split>,
    pub value: f64,
    pub samples: usize,
    /// Sum of squared deviations from `value` over the node's samples.
    pub sse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub config: TreeConfig,
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    config: TreeConfig,
    nodes: Vec<Node>,
}

fn mean_sse(y: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, sse)
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], parent_sse: f64) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let leaf = self.config.min_samples_leaf;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            let col = self.x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let (mut s1, mut s2) = (0.0, 0.0);
            let total1: f64 = order.iter().map(|&i| self.y[i]).sum();
            let total2: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
            for k in 1..n {
                let yi = self.y[order[k - 1]];
                s1 += yi;
                s2 += yi * yi;
                if k < leaf || n - k < leaf {
                    continue;
                }
                let (lo, hi) = (col[order[k - 1]], col[order[k]]);
                if lo >= hi {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let sse = (s2 - s1 * s1 / nl) + ((total2 - s2) - (total1 - s1).powi(2) / nr);
                if best.map_or(true, |b| sse < b.2) {
                    let mid = 0.5 * (lo + hi);
                    best = Some((f, if mid < hi { mid } else { lo }, sse));
                }
            }
        }
        best.filter(|b| b.2 < parent_sse * (1.0 - 1e-12))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (value, sse) = mean_sse(self.y, &idx);
        let id = self.nodes.len();
        self.nodes.push(Node {
            split: None,
            value,
            samples: idx.len(),
            sse,
        });
        if depth >= self.config.max_depth || idx.len() < self.config.min_samples_split || sse <= 0.0 {
            return id;
        }
        let Some((feature, threshold, _)) = self.best_split(&idx, sse) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id].split = Some(Split {
            feature,
            threshold,
            left,
            right,
        });
        id
    }
}

/// Weakest-link pruning: repeatedly collapse the internal node with the
/// smallest `(R(t) − R(T_t)) / (|T_t| − 1)` while it does not exceed `alpha`.
fn prune(nodes: &mut [Node], alpha: f64) {
    // children always follow their parent in the arena, so a reverse sweep
    // visits every subtree before its root
    let mut leaf_sse = vec![0.0; nodes.len()];
    let mut leaves = vec![0usize; nodes.len()];
    let mut live = vec![false; nodes.len()];
    loop {
        live.iter_mut().for_each(|l| *l = false);
        live[0] = true;
        for id in 0..nodes.len() {
            if let (true, Some(s)) = (live[id], nodes[id].split) {
                live[s.left] = true;
                live[s.right] = true;
            }
        }
        let mut weakest: Option<(usize, f64)> = None;
        for id in (0..nodes.len()).rev().filter(|&id| live[id]) {
            match nodes[id].split {
                None => {
                    leaf_sse[id] = nodes[id].sse;
                    leaves[id] = 1;
                }
                Some(s) => {
                    leaf_sse[id] = leaf_sse[s.left] + leaf_sse[s.right];
                    leaves[id] = leaves[s.left] + leaves[s.right];
                    let g = (nodes[id].sse - leaf_sse[id]) / (leaves[id] as f64 - 1.0);
                    if weakest.map_or(true, |w| g <= w.1) {
                        weakest = Some((id, g));
                    }
                }
            }
        }
        match weakest {
            Some((id, g)) if g <= alpha => nodes[id].split = None,
            _ => return,
        }
    }
}

/// Drops nodes no longer reachable from the root, renumbering in preorder.
fn compact(nodes: &[Node]) -> Vec<Node> {
    fn visit(nodes: &[Node], id: usize, out: &mut Vec<Node>) -> usize {
        let new_id = out.len();
        out.push(Node {
            split: None,
            ..nodes[id].clone()
        });
        if let Some(s) = nodes[id].split {
            let left = visit(nodes, s.left, out);
            let right = visit(nodes, s.right, out);
            out[new_id].split = Some(Split { left, right, ..s });
        }
        new_id
    }
    let mut out = Vec::with_capacity(nodes.len());
    visit(nodes, 0, &mut out);
    out
}

pub fn tree_fit(config: &TreeConfig, x: &DMatrix<f64>, y: &[f64]) -> Result<TreeModel> {
    config.validate()?;
    if x.nrows() == 0 {
        return Err(Error::Empty("tree rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let mut b = Builder {
        x,
        y,
        config: *config,
        nodes: Vec::new(),
    };
    b.grow((0..x.nrows()).collect(), 0);
    let mut nodes = b.nodes;
    // cost R(t) = sse_t / N in standardized units, so alpha scales by N · var
    let n = y.len() as f64;
    let var = nodes[0].sse / n;
    if var > 0.0 {
        prune(&mut nodes, config.ccp_alpha * n * var);
    }
    Ok(TreeModel {
        config: *config,
        n_features: x.ncols(),
        nodes: compact(&nodes),
    })
}

impl TreeModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        while let Some(s) = self.nodes[id].split {
            id = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        self.nodes[id].value
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                row.iter_mut().zip(x.row(i).iter()).for_each(|(r, v)| *r = *v);
                self.predict_row(&row)
            })
            .collect())
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], id: usize) -> usize {
            nodes[id].split.map_or(0, |s| 1 + d(nodes, s.left).max(d(nodes, s.right)))
        }
        d(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRegressor {
    pub encoder: FeatureEncoder,
    pub model: TreeModel,
}

impl TreeRegressor {
    pub fn fit(rows: &[FeatureRow], config: &TreeConfig) -> Result<Self> {
        Self::fit_encoded(FeatureEncoder::fit(rows, false)?, rows, config)
    }

    pub fn fit_encoded(encoder: FeatureEncoder, rows: &[FeatureRow], config: &TreeConfig) -> Result<Self> {
        let x = encoder.inputs(rows)?;
        let y: Vec<f64> = rows.iter().map(|r| r.target_m).collect();
        let model = tree_fit(config, &x, &y)?;
        Ok(Self { encoder, model })
    }

    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<f64>> {
        self.model.predict(&self.encoder.inputs(rows)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, prop_assume, proptest};

    fn unpruned(max_depth: usize, leaf: usize) -> TreeConfig {
        TreeConfig {
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: leaf,
            ccp_alpha: 0.0,
        }
    }

    #[test]
    fn four_point_example() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 10.0, 11.0]);
        let y = [0.0, 0.0, 10.0, 10.0];
        for cfg in [unpruned(5, 2), TreeConfig { min_samples_leaf: 2, min_samples_split: 2, ..TreeConfig::fleet() }] {
            let t = tree_fit(&cfg, &x, &y).unwrap();
            assert_eq!(t.nodes.len(), 3);
            let s = t.nodes[0].split.unwrap();
            assert!(s.threshold > 1.0 && s.threshold < 10.0);
            assert_eq!(t.predict(&x).unwrap(), y);
        }
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let x = DMatrix::from_fn(50, 3, |i, j| (i * (j + 2)) as f64);
        let t = tree_fit(&unpruned(10, 1), &x, &[4.5; 50]).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!(t.predict(&x).unwrap().iter().all(|&v| v == 4.5));
    }

    #[test]
    fn pruning_collapses_weak_splits() {
        // a strong step plus a faint one
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v < 20.0 { 0.0 } else { 10.0 } + if (v as usize) % 20 < 10 { 0.0 } else { 0.1 }).collect();
        let x = DMatrix::from_column_slice(40, 1, &xs);
        let full = tree_fit(&unpruned(10, 5), &x, &y).unwrap();
        assert_eq!(full.leaves().count(), 4);
        let pruned = tree_fit(&TreeConfig { ccp_alpha: 0.2, ..unpruned(10, 5) }, &x, &y).unwrap();
        assert_eq!(pruned.leaves().count(), 2);
        assert_eq!(pruned.depth(), 1);
    }

    proptest! {
        #[test]
        fn depth_and_leaf_constraints_hold(
            data in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -10.0..10.0f64), 1..120),
            depth in 0usize..6,
            leaf in 1usize..6,
        ) {
            let x = DMatrix::from_fn(data.len(), 2, |i, j| if j == 0 { data[i].0 } else { data[i].1 });
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let t = tree_fit(&unpruned(depth, leaf), &x, &y).unwrap();
            prop_assert!(t.depth() <= depth);
            for l in t.leaves() {
                prop_assert!(l.samples >= leaf.min(data.len()));
            }
            let total: usize = t.leaves().map(|l| l.samples).sum();
            prop_assert_eq!(total, data.len());
        }

        #[test]
        fn predictions_are_constant_within_a_cell(
            data in prop::collection::vec((0.0..1.0f64, -10.0..10.0f64), 10..80),
            probe in 0usize..80,
            t in 0.0..1.0f64,
        ) {
            let xs: Vec<f64> = data.iter().map(|d| d.0).collect();
            let y: Vec<f64> = data.iter().map(|d| d.1).collect();
            let x = DMatrix::from_column_slice(xs.len(), 1, &xs);
            let tree = tree_fit(&unpruned(6, 2), &x, &y).unwrap();
            // the cell of a sample is bounded by the nearest thresholds on each side
            let v = xs[probe % xs.len()];
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for n in &tree.nodes {
                if let Some(s) = n.split {
                    if s.threshold < v { lo = lo.max(s.threshold); } else { hi = hi.min(s.threshold); }
                }
            }
            let inside = if lo.is_finite() { lo + (hi.min(1.0) - lo) * t } else { v * t };
            prop_assume!(inside > lo && inside <= hi);
            prop_assert_eq!(tree.predict_row(&[inside]), tree.predict_row(&[v]));
        }
    }
}
