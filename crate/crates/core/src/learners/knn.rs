use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::KnnParams;
use crate::matrix::Matrix;

/// Stored (standardized) training examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    points: Matrix,
    targets: Vec<f64>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// Distance first, then training index.
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnModel {
    pub(crate) fn fit(params: &KnnParams, points: Matrix, targets: Vec<f64>) -> Self {
        KnnModel {
            k: params.k,
            points,
            targets,
        }
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Unweighted mean target of the `k` nearest points (all points when `k`
    /// exceeds the training size). Equal distances go to the lower index.
    pub fn predict_one(&self, query: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter_rows()
            .enumerate()
            .map(|(i, p)| (squared_distance(query, p), i))
            .collect();
        let k = self.k.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance_then_index);
            dist.truncate(k);
        }
        dist.sort_unstable_by(by_distance_then_index);
        dist.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }
}
