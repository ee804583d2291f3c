use std::collections::BTreeSet;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Reserved label for rejected or out-of-training-set traces.
pub const UNKNOWN_LABEL: &str = "UNKNOWN";

/// Feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: Array2<f64>,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub trace_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        matrix: Array2<f64>,
        labels: Vec<String>,
        feature_names: Vec<String>,
        trace_ids: Vec<String>,
    ) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if labels.len() != rows || trace_ids.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "{rows} rows but {} labels and {} trace ids",
                labels.len(),
                trace_ids.len()
            )));
        }
        if feature_names.len() != cols {
            return Err(Error::Dimension {
                expected: feature_names.len(),
                actual: cols,
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature matrix contains non-finite values".into()));
        }
        Ok(LabeledDataset {
            matrix,
            labels,
            feature_names,
            trace_ids,
        })
    }

    /// Dataset with generated trace ids (`row<i>`).
    pub fn from_rows(matrix: Array2<f64>, labels: Vec<String>, feature_names: Vec<String>) -> Result<Self> {
        let ids = (0..matrix.nrows()).map(|i| format!("row{i}")).collect();
        Self::new(matrix, labels, feature_names, ids)
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    /// Distinct labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            matrix: self.matrix.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            trace_ids: rows.iter().map(|&i| self.trace_ids[i].clone()).collect(),
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}
