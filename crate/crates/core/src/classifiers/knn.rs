//! K-nearest-neighbours with uniform vote weights and an exhaustive scan.

use std::cmp::Ordering;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::ClassProbs;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub train_matrix: Array2<f64>,
    /// Index into `classes` per training row.
    pub train_labels: Vec<usize>,
    /// Sorted class names.
    pub classes: Vec<String>,
    pub n_neighbors: usize,
    pub minkowski_p: f64,
}

/// Minkowski distance; `p = 2` is evaluated as plain Euclidean distance.
pub fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

fn by_distance_then_index(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

impl KnnModel {
    pub fn fit(matrix: &Array2<f64>, labels: &[String], n_neighbors: usize, minkowski_p: f64) -> Result<Self> {
        if labels.len() != matrix.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                matrix.nrows(),
                labels.len()
            )));
        }
        if n_neighbors == 0 || n_neighbors > matrix.nrows() {
            return Err(Error::InvalidArgument(format!(
                "n_neighbors must be in 1..={}, got {n_neighbors}",
                matrix.nrows()
            )));
        }
        if !(minkowski_p >= 1.0) {
            return Err(Error::InvalidArgument(format!("Minkowski p must be >= 1, got {minkowski_p}")));
        }
        let mut classes = labels.to_vec();
        classes.sort();
        classes.dedup();
        let train_labels = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        Ok(KnnModel {
            train_matrix: matrix.clone(),
            train_labels,
            classes,
            n_neighbors,
            minkowski_p,
        })
    }

    pub fn n_features(&self) -> usize {
        self.train_matrix.ncols()
    }

    /// Label of training row `i`.
    pub fn train_label(&self, i: usize) -> &str {
        &self.classes[self.train_labels[i]]
    }

    /// The `n_neighbors` closest training rows as `(row, distance)`, nearest
    /// first; equal distances go to the lower row index.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        let mut dists: Vec<(usize, f64)> = self
            .train_matrix
            .axis_iter(Axis(0))
            .enumerate()
            .map(|(i, row)| {
                let d = match row.as_slice() {
                    Some(r) => minkowski(x, r, self.minkowski_p),
                    None => minkowski(x, &row.to_vec(), self.minkowski_p),
                };
                (i, d)
            })
            .collect();
        let k = self.n_neighbors;
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, by_distance_then_index);
            dists.truncate(k);
        }
        dists.sort_by(by_distance_then_index);
        Ok(dists)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ClassProbs> {
        Ok(self.vote(x)?.0)
    }

    /// Vote fractions plus the winning class. Equal vote counts are settled
    /// by the smaller summed neighbour distance, then by class name.
    pub fn vote(&self, x: &[f64]) -> Result<(ClassProbs, String)> {
        let neighbors = self.neighbors(x)?;
        let mut counts = vec![0usize; self.classes.len()];
        let mut dist_sum = vec![0.0; self.classes.len()];
        for &(i, d) in &neighbors {
            counts[self.train_labels[i]] += 1;
            dist_sum[self.train_labels[i]] += d;
        }
        let winner = (0..self.classes.len())
            .filter(|&c| counts[c] > 0)
            .min_by(|&a, &b| {
                counts[b]
                    .cmp(&counts[a])
                    .then(dist_sum[a].total_cmp(&dist_sum[b]))
                    .then(a.cmp(&b))
            })
            .expect("at least one neighbour");
        let k = neighbors.len() as f64;
        let probs = self
            .classes
            .iter()
            .zip(&counts)
            .map(|(c, &n)| (c.clone(), n as f64 / k))
            .collect();
        Ok((probs, self.classes[winner].clone()))
    }
}

pub fn knn_fit(data: &LabeledDataset, n_neighbors: usize, minkowski_p: f64) -> Result<KnnModel> {
    KnnModel::fit(&data.matrix, &data.labels, n_neighbors, minkowski_p)
}
