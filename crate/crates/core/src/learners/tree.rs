use serde::{Deserialize, Serialize};

use super::DtParams;
use crate::matrix::Matrix;

/// Gains closer than this are treated as equal; the earlier candidate wins.
pub(crate) const GAIN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict_one(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Greedy variance-reduction tree over every midpoint between sorted
    /// distinct feature values.
    ///
    /// A node splits only when its depth is below `max_depth`, both children
    /// keep at least `min_leaf_size` rows, and the split removes at least
    /// `min_gain` of the node's squared error (relative). Ties go to the lower
    /// feature index, then the lower threshold.
    pub fn fit_exact(x: &Matrix, y: &[f64], params: &DtParams) -> Self {
        let mut builder = ExactBuilder {
            x,
            y,
            params,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..y.len()).collect();
        builder.build(idx, 0);
        RegressionTree { nodes: builder.nodes }
    }
}

struct ExactBuilder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a DtParams,
    nodes: Vec<Node>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl ExactBuilder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        self.nodes.push(Node::Leaf { value: mean });

        let min_leaf = self.params.min_leaf_size.max(1);
        if depth >= self.params.max_depth || idx.len() < 2 * min_leaf {
            return at;
        }
        let parent_sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        if parent_sse <= 0.0 {
            return at;
        }
        let Some(best) = self.best_split(&idx, mean, parent_sse, min_leaf) else {
            return at;
        };
        if best.gain < self.params.min_gain || best.gain <= GAIN_TIE_TOLERANCE {
            return at;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[usize], mean: f64, parent_sse: f64, min_leaf: usize) -> Option<Candidate> {
        let n = idx.len();
        let mut best: Option<Candidate> = None;
        let mut order = idx.to_vec();
        // Centered targets keep the running sums well conditioned.
        let total_s: f64 = idx.iter().map(|&i| self.y[i] - mean).sum();
        let total_sq = parent_sse;
        for f in 0..self.x.cols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let (mut s, mut sq) = (0.0, 0.0);
            for p in 1..n {
                let c = self.y[order[p - 1]] - mean;
                s += c;
                sq += c * c;
                let lo = self.x.get(order[p - 1], f);
                let hi = self.x.get(order[p], f);
                if lo == hi || p < min_leaf || n - p < min_leaf {
                    continue;
                }
                let (nl, nr) = (p as f64, (n - p) as f64);
                let sse_l = sq - s * s / nl;
                let sse_r = (total_sq - sq) - (total_s - s) * (total_s - s) / nr;
                let gain = (parent_sse - sse_l - sse_r) / parent_sse;
                if best.as_ref().is_none_or(|b| gain > b.gain + GAIN_TIE_TOLERANCE) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }
}
