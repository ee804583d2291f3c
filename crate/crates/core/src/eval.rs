//! Closed- and open-set evaluation, metrics and report export.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::dataset::{LabeledDataset, UNKNOWN_LABEL};
use crate::error::{Error, Result};
use crate::pipeline::{predict_matrix, PipelineModel};
use crate::selection::{rank_features, SelectorModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Sorted labels, UNKNOWN last when present.
    pub labels: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub n: usize,
}

/// Sorts labels with UNKNOWN last.
pub fn order_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = labels.into_iter().map(str::to_string).collect();
    out.sort_by(|a, b| (a == UNKNOWN_LABEL).cmp(&(b == UNKNOWN_LABEL)).then(a.cmp(b)));
    out.dedup();
    out
}

/// Multiclass metrics over the union of true and predicted labels.
pub fn compute_metrics(y_true: &[String], y_pred: &[String]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let labels = order_labels(y_true.iter().chain(y_pred).map(String::as_str));
    let index = |l: &str| labels.iter().position(|x| x == l).expect("label collected");
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        confusion[index(t)][index(p)] += 1;
    }
    let n = y_true.len();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i] as f64;
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[i]).sum();
            let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let recall = if support > 0 { tp / support as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: labels[i].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    let weighted_f1 = per_class.iter().map(|c| c.f1 * c.support as f64).sum::<f64>() / n as f64;
    Ok(Metrics {
        labels,
        confusion,
        per_class,
        accuracy: correct as f64 / n as f64,
        macro_f1,
        weighted_f1,
        n,
    })
}

/// Open-set breakdown: how known and unknown rows were treated separately.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetStats {
    pub threshold: f64,
    /// Known rows classified correctly; a rejection counts as wrong.
    pub known_accuracy: f64,
    /// Known rows wrongly rejected as UNKNOWN.
    pub false_rejection_rate: f64,
    /// Unknown rows labelled UNKNOWN; `None` without unknown rows.
    pub unknown_rejection_rate: Option<f64>,
    pub n_known: usize,
    pub n_unknown: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub open_set: Option<OpenSetStats>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy
    }

    pub fn macro_f1(&self) -> f64 {
        self.metrics.macro_f1
    }

    pub fn weighted_f1(&self) -> f64 {
        self.metrics.weighted_f1
    }

    /// Machine-readable `key=value` summary lines.
    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("mode={}", if self.open_set.is_some() { "open" } else { "closed" }),
            format!("n_test={}", self.n_test),
            format!("accuracy={:.6}", self.accuracy()),
            format!("macro_f1={:.6}", self.macro_f1()),
            format!("weighted_f1={:.6}", self.weighted_f1()),
        ];
        if let Some(o) = &self.open_set {
            out.push(format!("threshold={}", o.threshold));
            out.push(format!("known_accuracy={:.6}", o.known_accuracy));
            out.push(format!("false_rejection_rate={:.6}", o.false_rejection_rate));
            if let Some(r) = o.unknown_rejection_rate {
                out.push(format!("unknown_rejection_rate={r:.6}"));
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for line in self.summary_lines() {
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s);
        let width = self.metrics.labels.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:<width$}  precision  recall     f1  support", "class");
        for c in &self.metrics.per_class {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>6.4}  {:>5.4}  {:>7}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        s
    }

    /// Confusion matrix as CSV: header `true\pred,<labels>`, one row per label.
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for l in &self.metrics.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
        for (l, row) in self.metrics.labels.iter().zip(&self.metrics.confusion) {
            s.push_str(l);
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Scores `model` on `test`.
///
/// Closed-set evaluation disables rejection (threshold 0). Open-set evaluation
/// rejects at the model threshold, and `unknown_rows` count as correct when
/// labelled UNKNOWN.
pub fn evaluate(
    model: &PipelineModel,
    test: &LabeledDataset,
    open_set: bool,
    unknown_rows: Option<&Array2<f64>>,
) -> Result<EvalReport> {
    if test.n_samples() == 0 {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    if test.feature_names != model.feature_names {
        return Err(Error::InvalidArgument("test features do not match the model".into()));
    }
    let threshold = if open_set { model.threshold } else { 0.0 };
    let mut y_true = test.labels.clone();
    let mut y_pred: Vec<String> = predict_matrix(model, &test.matrix, threshold)?
        .iter()
        .map(|p| p.label_str().to_string())
        .collect();
    let n_known = y_true.len();

    let mut n_unknown = 0;
    match (open_set, unknown_rows) {
        (true, Some(rows)) => {
            n_unknown = rows.nrows();
            let preds = predict_matrix(model, rows, threshold)?;
            y_true.extend(std::iter::repeat_n(UNKNOWN_LABEL.to_string(), n_unknown));
            y_pred.extend(preds.iter().map(|p| p.label_str().to_string()));
        }
        (true, None) => log::warn!("open-set evaluation without unknown rows measures false rejection only"),
        (false, Some(_)) => log::warn!("unknown rows ignored in closed-set evaluation"),
        (false, None) => {}
    }

    let metrics = compute_metrics(&y_true, &y_pred)?;
    let open = open_set.then(|| {
        let known = y_true[..n_known].iter().zip(&y_pred[..n_known]);
        let correct = known.clone().filter(|(t, p)| t == p).count();
        let rejected = known.filter(|(_, p)| *p == UNKNOWN_LABEL).count();
        let caught = y_pred[n_known..].iter().filter(|p| *p == UNKNOWN_LABEL).count();
        OpenSetStats {
            threshold,
            known_accuracy: correct as f64 / n_known as f64,
            false_rejection_rate: rejected as f64 / n_known as f64,
            unknown_rejection_rate: (n_unknown > 0).then(|| caught as f64 / n_unknown as f64),
            n_known,
            n_unknown,
        }
    });
    Ok(EvalReport {
        n_test: metrics.n,
        metrics,
        open_set: open,
    })
}

/// Top `top_n` features by selector score, best first.
pub fn feature_importance_report(selector: &SelectorModel, feature_names: &[String], top_n: usize) -> Result<Vec<(String, f64)>> {
    if selector.scores.len() != feature_names.len() {
        return Err(Error::Dimension {
            expected: feature_names.len(),
            actual: selector.scores.len(),
        });
    }
    Ok(rank_features(&selector.scores)
        .into_iter()
        .take(top_n)
        .map(|i| (feature_names[i].clone(), selector.scores[i]))
        .collect())
}

pub fn importance_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from("rank,feature,f_score\n");
    for (i, (name, score)) in rows.iter().enumerate() {
        let _ = writeln!(s, "{},{name},{score}", i + 1);
    }
    s
}

/// Box-plot statistics of one feature within one class.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub class: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Values beyond 1.5 IQR from the quartiles, ascending.
    pub outliers: Vec<f64>,
}

fn interpolated(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-class box-plot data for `feature_name`, classes sorted.
pub fn per_feature_class_summary(data: &LabeledDataset, feature_name: &str) -> Result<Vec<BoxSummary>> {
    let col = data
        .feature_index(feature_name)
        .ok_or_else(|| Error::InvalidArgument(format!("no feature named {feature_name:?}")))?;
    Ok(data
        .classes()
        .into_iter()
        .map(|class| {
            let mut v: Vec<f64> = (0..data.n_samples())
                .filter(|&i| data.labels[i] == class)
                .map(|i| data.matrix[[i, col]])
                .collect();
            v.sort_by(f64::total_cmp);
            let (q1, q3) = (interpolated(&v, 0.25), interpolated(&v, 0.75));
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            BoxSummary {
                class,
                min: v[0],
                q1,
                median: interpolated(&v, 0.5),
                q3,
                max: v[v.len() - 1],
                outliers: v.iter().copied().filter(|&x| x < lo || x > hi).collect(),
            }
        })
        .collect())
}

pub fn boxplot_csv(rows: &[BoxSummary]) -> String {
    let mut s = String::from("class,min,q1,median,q3,max,n_outliers,outliers\n");
    for b in rows {
        let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            b.class,
            b.min,
            b.q1,
            b.median,
            b.q3,
            b.max,
            b.outliers.len(),
            outliers.join(";")
        );
    }
    s
}

/// Writes `report.txt`, `confusion.csv` and `importance.csv` into `dir`.
pub fn write_report_dir(dir: &Path, report: &EvalReport, importance: &[(String, f64)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in [
        ("report.txt", report.to_text()),
        ("confusion.csv", report.confusion_csv()),
        ("importance.csv", importance_csv(importance)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
