//! Selector, scaler and classifier fitted together as one model.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, ClassifierKind, ForestConfig, ForestModel, KnnModel, Prediction};
use crate::dataset::{LabeledDataset, UNKNOWN_LABEL};
use crate::error::{Error, Result};
use crate::features::{feature_names, feature_values, FeatureConfig};
use crate::preprocess::clean;
use crate::rng::seeded;
use crate::scaling::{scaler_fit, ScalerKind, ScalerModel};
use crate::selection::{select_k_best_fit, SelectorModel};
use crate::trace_io::RawTrace;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scaler: ScalerKind,
    pub classifier: ClassifierKind,
    pub k_best: usize,
    pub knn_k: usize,
    pub minkowski_p: f64,
    pub n_trees: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scaler: ScalerKind::Normalizer,
            classifier: ClassifierKind::Knn,
            k_best: 30,
            knn_k: 5,
            minkowski_p: 2.0,
            n_trees: 100,
            threshold: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    /// Full input feature list, in column order.
    pub feature_names: Vec<String>,
    pub selector: SelectorModel,
    pub scaler: ScalerModel,
    pub classifier: Classifier,
    pub threshold: f64,
}

pub fn validate_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("threshold must lie in [0, 1], got {threshold}")))
    }
}

/// Fits selector, then scaler, then classifier, all on `train` only.
pub fn fit_pipeline(train: &LabeledDataset, cfg: &PipelineConfig) -> Result<PipelineModel> {
    validate_threshold(cfg.threshold)?;
    if train.labels.iter().any(|l| l == UNKNOWN_LABEL) {
        return Err(Error::InvalidArgument(format!("{UNKNOWN_LABEL} is reserved and cannot be a training class")));
    }
    let selector = select_k_best_fit(train, cfg.k_best)?;
    let reduced = selector.transform(&train.matrix)?;
    let scaler = scaler_fit(cfg.scaler, &reduced)?;
    let scaled = scaler.transform(&reduced)?;
    let classifier = match cfg.classifier {
        ClassifierKind::Knn => Classifier::Knn(KnnModel::fit(&scaled, &train.labels, cfg.knn_k, cfg.minkowski_p)?),
        ClassifierKind::Forest => Classifier::Forest(ForestModel::fit(
            &scaled,
            &train.labels,
            &ForestConfig {
                n_trees: cfg.n_trees,
                seed: cfg.seed,
            },
        )?),
    };
    Ok(PipelineModel {
        format_version: FORMAT_VERSION,
        feature_names: train.feature_names.clone(),
        selector,
        scaler,
        classifier,
        threshold: cfg.threshold,
    })
}

impl PipelineModel {
    /// Classifies one full-width feature row at `threshold`.
    pub fn predict_row_at(&self, row: &[f64], threshold: f64) -> Result<Prediction> {
        let reduced = self.selector.transform_row(row)?;
        let scaled = self.scaler.transform_row(&reduced)?;
        self.classifier.predict(&scaled, threshold)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<Prediction> {
        self.predict_row_at(row, self.threshold)
    }

    pub fn classes(&self) -> &[String] {
        self.classifier.classes()
    }

    /// Structural consistency of a fitted or loaded model.
    pub fn validate(&self) -> Result<()> {
        let corrupt = |m: String| Err(Error::CorruptModel(m));
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                supported: FORMAT_VERSION,
            });
        }
        validate_threshold(self.threshold).or_else(|e| corrupt(e.to_string()))?;
        let width = self.feature_names.len();
        if self.selector.scores.len() != width {
            return corrupt(format!("{} selector scores for {width} features", self.selector.scores.len()));
        }
        let sel = &self.selector.selected_indices;
        if sel.is_empty() || sel.windows(2).any(|w| w[0] >= w[1]) || sel.iter().any(|&i| i >= width) {
            return corrupt("selected feature indices invalid".into());
        }
        if self.scaler.n_features != sel.len() || self.classifier.n_features() != sel.len() {
            return corrupt("scaler or classifier width disagrees with selection".into());
        }
        match &self.classifier {
            Classifier::Knn(m) => {
                if m.train_labels.len() != m.train_matrix.nrows()
                    || m.train_labels.iter().any(|&l| l >= m.classes.len())
                    || m.n_neighbors == 0
                    || m.n_neighbors > m.train_matrix.nrows()
                {
                    return corrupt("nearest-neighbour state inconsistent".into());
                }
            }
            Classifier::Forest(m) => {
                for tree in &m.trees {
                    for node in &tree.nodes {
                        match node {
                            crate::classifiers::forest::Node::Split { feature, left, right, .. } => {
                                if *feature >= m.n_features || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                                    return corrupt("tree node out of range".into());
                                }
                            }
                            crate::classifiers::forest::Node::Leaf { counts } => {
                                if counts.len() != m.classes.len() || counts.iter().sum::<u32>() == 0 {
                                    return corrupt("leaf counts inconsistent".into());
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cleans and featurizes `trace`, then classifies it at the model threshold.
pub fn predict_trace(model: &PipelineModel, trace: &RawTrace, cfg: &FeatureConfig) -> Result<Prediction> {
    predict_trace_at(model, trace, cfg, model.threshold)
}

pub fn predict_trace_at(model: &PipelineModel, trace: &RawTrace, cfg: &FeatureConfig, threshold: f64) -> Result<Prediction> {
    validate_threshold(threshold)?;
    check_feature_layout(model, cfg)?;
    let cleaned = clean(trace)?;
    let values = feature_values(&cleaned.values, cleaned.sample_rate_hz, cfg)?;
    model.predict_row_at(&values, threshold)
}

pub fn check_feature_layout(model: &PipelineModel, cfg: &FeatureConfig) -> Result<()> {
    if feature_names(cfg) != model.feature_names {
        return Err(Error::InvalidArgument(
            "feature configuration does not match the features the model was trained on".into(),
        ));
    }
    Ok(())
}

/// Per-class stratified hold-out split.
///
/// Each class sends `ceil(test_fraction * n_c)` rows (at most `n_c - 1`) to the
/// test side after a seeded shuffle. Row order within each side follows the
/// input.
pub fn stratified_split(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    use rand::seq::SliceRandom;

    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}; the test set would be empty or take everything"
        )));
    }
    let mut rng = seeded(seed);
    let mut test_rows = Vec::new();
    for class in data.classes() {
        let mut rows: Vec<usize> = (0..data.n_samples()).filter(|&i| data.labels[i] == class).collect();
        if rows.len() < 2 {
            log::warn!("class {class:?} has a single sample; keeping it for training");
            continue;
        }
        rows.shuffle(&mut rng);
        // small slack so e.g. 0.1 * 30 does not round up to 4
        let n_test = ((test_fraction * rows.len() as f64 - 1e-9).ceil() as usize).clamp(1, rows.len() - 1);
        test_rows.extend_from_slice(&rows[..n_test]);
    }
    if test_rows.is_empty() {
        return Err(Error::InvalidArgument("stratified split produced an empty test set".into()));
    }
    test_rows.sort_unstable();
    let train_rows: Vec<usize> = (0..data.n_samples()).filter(|i| test_rows.binary_search(i).is_err()).collect();
    Ok((data.subset(&train_rows), data.subset(&test_rows)))
}

/// Predicts every row of `matrix`, in parallel when enabled.
pub fn predict_matrix(model: &PipelineModel, matrix: &ndarray::Array2<f64>, threshold: f64) -> Result<Vec<Prediction>> {
    let rows: Vec<Vec<f64>> = matrix.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    crate::par::try_map(&rows, |r| model.predict_row_at(r, threshold))
}
