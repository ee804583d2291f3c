//! Univariate ANOVA F-test feature ranking (select k best).

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    /// One-way ANOVA F statistic per input feature; `+inf` for perfectly
    /// separated features with zero within-class spread.
    #[serde(with = "crate::persist::extended_floats")]
    pub scores: Vec<f64>,
    /// Strictly increasing column indices.
    pub selected_indices: Vec<usize>,
}

/// One-way ANOVA F per column.
pub fn anova_f_scores(data: &LabeledDataset) -> Result<Vec<f64>> {
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let groups: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..data.n_samples()).filter(|&i| &data.labels[i] == c).collect())
        .collect();
    let n = data.n_samples() as f64;
    let g = groups.len() as f64;
    if n <= g {
        return Err(Error::InvalidArgument(format!(
            "ANOVA needs more samples ({n}) than classes ({g})"
        )));
    }

    Ok(data
        .matrix
        .axis_iter(Axis(1))
        .map(|col| {
            let grand = col.sum() / n;
            let (mut between, mut within) = (0.0, 0.0);
            for rows in &groups {
                let ng = rows.len() as f64;
                let mean = rows.iter().map(|&i| col[i]).sum::<f64>() / ng;
                between += ng * (mean - grand) * (mean - grand);
                within += rows.iter().map(|&i| (col[i] - mean) * (col[i] - mean)).sum::<f64>();
            }
            let between = between / (g - 1.0);
            let within = within / (n - g);
            if within > 0.0 {
                between / within
            } else if between > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect())
}

/// Feature indices ordered by descending score, ties by lower index.
pub fn rank_features(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn select_k_best_fit(data: &LabeledDataset, k: usize) -> Result<SelectorModel> {
    for class in data.classes() {
        let count = data.labels.iter().filter(|l| **l == class).count();
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class:?} has {count} sample(s); feature selection needs at least 2"
            )));
        }
    }
    let scores = anova_f_scores(data)?;
    let mut selected: Vec<usize> = rank_features(&scores).into_iter().take(k).collect();
    selected.sort_unstable();
    Ok(SelectorModel {
        scores,
        selected_indices: selected,
    })
}

impl SelectorModel {
    pub fn n_features_in(&self) -> usize {
        self.scores.len()
    }

    pub fn transform(&self, matrix: &Array2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.n_features_in() {
            return Err(Error::Dimension {
                expected: self.n_features_in(),
                actual: matrix.ncols(),
            });
        }
        Ok(matrix.select(Axis(1), &self.selected_indices))
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features_in() {
            return Err(Error::Dimension {
                expected: self.n_features_in(),
                actual: row.len(),
            });
        }
        Ok(self.selected_indices.iter().map(|&i| row[i]).collect())
    }
}
