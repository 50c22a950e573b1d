use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Uniform-weight k-nearest-neighbour regressor on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Standardized training rows, row-major.
    train: Vec<f64>,
    y: Vec<f64>,
    y_range: (f64, f64),
}

impl KnnModel {
    pub(crate) fn fit(params: &KnnParams, x: &Matrix, y: &[f64]) -> Self {
        let cols = x.columns();
        let mean: Vec<f64> = cols.iter().map(|c| stats::mean(c)).collect();
        let scale: Vec<f64> = cols
            .iter()
            .map(|c| match stats::pop_std(c) {
                s if s > 0.0 => s,
                _ => 1.0,
            })
            .collect();
        let d = x.cols();
        let mut train = Vec::with_capacity(x.rows() * d);
        for i in 0..x.rows() {
            train.extend((0..d).map(|j| (x.at(i, j) - mean[j]) / scale[j]));
        }
        Self { k: params.k.min(y.len()), mean, scale, train, y: y.to_vec(), y_range: stats::min_max(y) }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let d = self.mean.len();
        let q: Vec<f64> = (0..d).map(|j| (row[j] - self.mean[j]) / self.scale[j]).collect();
        let mut dist: Vec<(f64, usize)> = (0..self.y.len())
            .map(|i| {
                let t = &self.train[i * d..(i + 1) * d];
                let s: f64 = t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (s, i)
            })
            .collect();
        // Equal distances resolve to the lower training index.
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
            dist.truncate(self.k);
        }
        dist.sort_by(by_dist);
        let sum: f64 = dist.iter().map(|&(_, i)| self.y[i]).sum();
        (sum / self.k as f64).clamp(self.y_range.0, self.y_range.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_neighbour_reproduces_training_targets() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, -1.0], vec![2.0, 2.0]]).unwrap();
        let y = [1.5, -2.0, 7.0];
        let m = KnnModel::fit(&KnnParams { k: 1 }, &x, &y);
        for (i, &t) in y.iter().enumerate() {
            assert_eq!(m.predict_row(x.row(i)), t);
        }
    }

    #[test]
    fn equidistant_neighbours_prefer_lower_index() {
        let x = Matrix::new(4, 1, vec![1.0, -1.0, 3.0, -3.0]).unwrap();
        let m = KnnModel::fit(&KnnParams { k: 1 }, &x, &[10.0, 20.0, 30.0, 40.0]);
        assert_eq!(m.predict_row(&[0.0]), 10.0);
    }

    #[test]
    fn k_larger_than_training_set_uses_all_rows() {
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let m = KnnModel::fit(&KnnParams { k: 5 }, &x, &[1.0, 3.0]);
        assert_eq!(m.predict_row(&[100.0]), 2.0);
    }

    #[test]
    fn standardization_balances_feature_scales() {
        // Feature 1 is in much larger units; unscaled distance would ignore feature 0.
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1000.0], vec![0.0, 1000.0], vec![1.0, 0.0]])
            .unwrap();
        let m = KnnModel::fit(&KnnParams { k: 1 }, &x, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(m.predict_row(&[0.9, 100.0]), 3.0);
    }
}
