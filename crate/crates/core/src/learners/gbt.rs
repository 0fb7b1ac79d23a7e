//! Stagewise boosting on squared-loss residuals with histogram trees.
//!
//! Each feature's training range is cut into `n_bins` equal-width bins; the
//! interior bin edges are the only split thresholds a tree may use.

use serde::{Deserialize, Serialize};

use super::tree::{Node, RegressionTree, GAIN_TIE_TOLERANCE};
use super::GbtParams;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    base: f64,
    learning_rate: f64,
    /// Interior bin edges per feature, ascending.
    bin_edges: Vec<Vec<f64>>,
    trees: Vec<RegressionTree>,
}

fn equal_width_edges(values: impl Iterator<Item = f64>, n_bins: usize) -> Vec<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Vec::new();
    }
    let width = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (1..n_bins).map(|i| lo + width * i as f64).collect();
    edges.dedup();
    edges
}

/// Number of edges strictly below `v`; `v <= edges[k]` iff the bin is at most `k`.
fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e < v)
}

impl GbtModel {
    pub(crate) fn fit(x: &Matrix, y: &[f64], params: &GbtParams) -> Self {
        let n = y.len();
        let base = y.iter().sum::<f64>() / n as f64;
        let bin_edges: Vec<Vec<f64>> = (0..x.cols())
            .map(|f| equal_width_edges(x.iter_rows().map(|r| r[f]), params.n_bins))
            .collect();
        // Column-major bin codes.
        let bins: Vec<Vec<u32>> = bin_edges
            .iter()
            .enumerate()
            .map(|(f, edges)| x.iter_rows().map(|r| bin_of(edges, r[f]) as u32).collect())
            .collect();

        let mut fitted = vec![base; n];
        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(t, f)| t - f).collect();
            let mut builder = HistogramBuilder {
                bins: &bins,
                edges: &bin_edges,
                residuals: &residuals,
                max_depth: params.max_depth,
                nodes: Vec::new(),
                leaf_of: vec![0; n],
            };
            builder.build((0..n).collect(), 0);
            for (i, f) in fitted.iter_mut().enumerate() {
                if let Node::Leaf { value } = builder.nodes[builder.leaf_of[i]] {
                    *f += params.learning_rate * value;
                }
            }
            trees.push(RegressionTree::from_nodes(builder.nodes));
        }
        GbtModel {
            base,
            learning_rate: params.learning_rate,
            bin_edges,
            trees,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_one(&self, row: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict_one(row)).sum::<f64>()
    }
}

struct HistogramBuilder<'a> {
    bins: &'a [Vec<u32>],
    edges: &'a [Vec<f64>],
    residuals: &'a [f64],
    max_depth: usize,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
}

impl HistogramBuilder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let n = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.residuals[i]).sum();
        self.nodes.push(Node::Leaf { value: sum / n });
        for &i in &idx {
            self.leaf_of[i] = at;
        }
        if depth >= self.max_depth || idx.len() < 2 {
            return at;
        }
        let Some((feature, bin)) = self.best_split(&idx, sum) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.bins[feature][i] as usize <= bin);
        let threshold = self.edges[feature][bin];
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    /// Best (feature, last-left-bin) by squared-error reduction.
    fn best_split(&self, idx: &[usize], sum: f64) -> Option<(usize, usize)> {
        let n = idx.len() as f64;
        let scale: f64 = idx.iter().map(|&i| self.residuals[i] * self.residuals[i]).sum();
        let mut best: Option<(f64, usize, usize)> = None;
        let mut counts = Vec::new();
        let mut sums = Vec::new();
        for (f, edges) in self.edges.iter().enumerate() {
            if edges.is_empty() {
                continue;
            }
            let n_bins = edges.len() + 1;
            counts.clear();
            counts.resize(n_bins, 0usize);
            sums.clear();
            sums.resize(n_bins, 0.0f64);
            for &i in idx {
                let b = self.bins[f][i] as usize;
                counts[b] += 1;
                sums[b] += self.residuals[i];
            }
            let (mut nl, mut sl) = (0usize, 0.0);
            for b in 0..n_bins - 1 {
                nl += counts[b];
                sl += sums[b];
                let nr = idx.len() - nl;
                if nl == 0 || nr == 0 || counts[b] == 0 {
                    continue;
                }
                let sr = sum - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - sum * sum / n;
                if best.is_none_or(|(g, _, _)| gain > g + GAIN_TIE_TOLERANCE * scale.max(1.0)) {
                    best = Some((gain, f, b));
                }
            }
        }
        best.filter(|(g, _, _)| *g > GAIN_TIE_TOLERANCE * scale.max(1.0))
            .map(|(_, f, b)| (f, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_and_bins_agree_with_threshold_rule() {
        let edges = equal_width_edges([0.0, 10.0].into_iter(), 5);
        assert_eq!(edges, vec![2.0, 4.0, 6.0, 8.0]);
        for v in [0.0, 1.9, 2.0, 2.1, 5.0, 8.0, 9.9, 10.0] {
            let b = bin_of(&edges, v);
            for (k, e) in edges.iter().enumerate() {
                assert_eq!(v <= *e, b <= k, "v={v} k={k}");
            }
        }
        assert!(equal_width_edges([3.0, 3.0].into_iter(), 5).is_empty());
    }

    #[test]
    fn constant_feature_never_splits() {
        let x = Matrix::from_vec(4, 1, vec![1.0; 4]).unwrap();
        let p = GbtParams {
            n_trees: 3,
            max_depth: 3,
            learning_rate: 0.5,
            n_bins: 4,
        };
        let m = GbtModel::fit(&x, &[1.0, 2.0, 3.0, 4.0], &p);
        assert_eq!(m.predict_one(&[1.0]), 2.5);
    }
}
