//! Probabilistic classifiers and confidence-threshold rejection.

pub mod forest;
pub mod knn;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::UNKNOWN_LABEL;
use crate::error::{Error, Result};

pub use forest::{ForestConfig, ForestModel};
pub use knn::KnnModel;

/// Probability per class name.
pub type ClassProbs = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `None` when the top probability fell below the threshold.
    pub label: Option<String>,
    pub confidence: f64,
    pub class_probs: ClassProbs,
}

impl Prediction {
    pub fn is_unknown(&self) -> bool {
        self.label.is_none()
    }

    /// The predicted class name, or [`UNKNOWN_LABEL`].
    pub fn label_str(&self) -> &str {
        self.label.as_deref().unwrap_or(UNKNOWN_LABEL)
    }

    /// Applies the threshold to a vote whose winner was already chosen.
    pub fn from_vote(class_probs: ClassProbs, winner: String, threshold: f64) -> Self {
        let confidence = class_probs.get(&winner).copied().unwrap_or(0.0);
        Prediction {
            label: (confidence >= threshold).then_some(winner),
            confidence,
            class_probs,
        }
    }
}

/// Highest-probability class; ties go to the lexicographically smallest name.
pub fn argmax(probs: &ClassProbs) -> Option<(&String, f64)> {
    probs
        .iter()
        .fold(None, |best: Option<(&String, f64)>, (c, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((c, p)),
        })
}

/// Labels `probs` with its argmax class, or UNKNOWN when the top probability
/// is below `threshold`.
pub fn predict_with_rejection(probs: &ClassProbs, threshold: f64) -> Result<Prediction> {
    let (winner, _) = argmax(probs).ok_or_else(|| Error::InvalidArgument("empty class probabilities".into()))?;
    Ok(Prediction::from_vote(probs.clone(), winner.clone(), threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Forest,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ClassifierKind::Knn),
            "forest" => Ok(ClassifierKind::Forest),
            other => Err(Error::InvalidArgument(format!("unknown classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Knn(KnnModel),
    Forest(ForestModel),
}

impl Classifier {
    pub fn classes(&self) -> &[String] {
        match self {
            Classifier::Knn(m) => &m.classes,
            Classifier::Forest(m) => &m.classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Classifier::Knn(m) => m.n_features(),
            Classifier::Forest(m) => m.n_features,
        }
    }

    /// Class probabilities plus the classifier's own choice of winner.
    pub fn vote(&self, x: &[f64]) -> Result<(ClassProbs, String)> {
        match self {
            Classifier::Knn(m) => m.vote(x),
            Classifier::Forest(m) => {
                let probs = m.predict_proba(x)?;
                let winner = argmax(&probs).map(|(c, _)| c.clone()).expect("forest has classes");
                Ok((probs, winner))
            }
        }
    }

    pub fn predict(&self, x: &[f64], threshold: f64) -> Result<Prediction> {
        let (probs, winner) = self.vote(x)?;
        Ok(Prediction::from_vote(probs, winner, threshold))
    }
}
