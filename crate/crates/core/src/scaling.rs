//! Fit/transform feature scalers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    MaxAbs,
    MinMax,
    Standard,
    Quantile,
    Normalizer,
}

impl ScalerKind {
    pub const ALL: [ScalerKind; 5] = [
        ScalerKind::MaxAbs,
        ScalerKind::MinMax,
        ScalerKind::Standard,
        ScalerKind::Quantile,
        ScalerKind::Normalizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalerKind::MaxAbs => "maxabs",
            ScalerKind::MinMax => "minmax",
            ScalerKind::Standard => "standard",
            ScalerKind::Quantile => "quantile",
            ScalerKind::Normalizer => "normalizer",
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScalerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scaler {s:?}")))
    }
}

/// Upper bound on stored reference quantiles per feature.
pub const MAX_QUANTILES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalerParams {
    MaxAbs { scale: Vec<f64> },
    MinMax { min: Vec<f64>, range: Vec<f64> },
    Standard { mean: Vec<f64>, std: Vec<f64> },
    /// Per feature, values at evenly spaced probabilities `0..=1`.
    Quantile { quantiles: Vec<Vec<f64>> },
    Normalizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub n_features: usize,
    pub params: ScalerParams,
}

fn nonzero_or_one(v: f64) -> f64 {
    if v == 0.0 {
        1.0
    } else {
        v
    }
}

/// Linear-interpolated percentile of sorted data, `p` in [0, 1].
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn scaler_fit(kind: ScalerKind, matrix: &Array2<f64>) -> Result<ScalerModel> {
    let (rows, cols) = matrix.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("cannot fit a scaler on an empty matrix".into()));
    }
    let columns = || matrix.axis_iter(Axis(1));
    let params = match kind {
        ScalerKind::MaxAbs => ScalerParams::MaxAbs {
            scale: columns()
                .map(|c| nonzero_or_one(c.iter().fold(0.0, |m, v| m.max(v.abs()))))
                .collect(),
        },
        ScalerKind::MinMax => {
            let (min, range) = columns()
                .map(|c| {
                    let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (lo, nonzero_or_one(hi - lo))
                })
                .unzip();
            ScalerParams::MinMax { min, range }
        }
        ScalerKind::Standard => {
            let n = rows as f64;
            let (mean, std) = columns()
                .map(|c| {
                    let mean = c.sum() / n;
                    let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    (mean, nonzero_or_one(var.sqrt()))
                })
                .unzip();
            ScalerParams::Standard { mean, std }
        }
        ScalerKind::Quantile => {
            let q = rows.min(MAX_QUANTILES);
            ScalerParams::Quantile {
                quantiles: columns()
                    .map(|c| {
                        let mut sorted = c.to_vec();
                        sorted.sort_by(f64::total_cmp);
                        (0..q)
                            .map(|j| {
                                let p = if q == 1 { 0.0 } else { j as f64 / (q - 1) as f64 };
                                percentile_sorted(&sorted, p)
                            })
                            .collect()
                    })
                    .collect(),
            }
        }
        ScalerKind::Normalizer => ScalerParams::Normalizer,
    };
    Ok(ScalerModel {
        n_features: cols,
        params,
    })
}

/// Maps `x` through the empirical CDF given by `quantiles`; ties in the
/// reference take the midpoint of their rank range.
pub fn quantile_cdf(quantiles: &[f64], x: f64) -> f64 {
    let q = quantiles.len();
    if q == 1 {
        return if x < quantiles[0] { 0.0 } else if x > quantiles[0] { 1.0 } else { 0.5 };
    }
    let r = |j: usize| j as f64 / (q - 1) as f64;
    // forward: last reference <= x
    let upper = quantiles.partition_point(|&v| v <= x);
    let forward = match upper {
        0 => 0.0,
        u if u == q => 1.0,
        u => {
            let (a, b) = (quantiles[u - 1], quantiles[u]);
            r(u - 1) + (x - a) / (b - a) * (r(u) - r(u - 1))
        }
    };
    // backward: first reference >= x
    let lower = quantiles.partition_point(|&v| v < x);
    let backward = match lower {
        0 => 0.0,
        l if l == q => 1.0,
        l => {
            let (a, b) = (quantiles[l - 1], quantiles[l]);
            r(l - 1) + (x - a) / (b - a) * (r(l) - r(l - 1))
        }
    };
    (0.5 * (forward + backward)).clamp(0.0, 1.0)
}

impl ScalerModel {
    pub fn kind(&self) -> ScalerKind {
        match self.params {
            ScalerParams::MaxAbs { .. } => ScalerKind::MaxAbs,
            ScalerParams::MinMax { .. } => ScalerKind::MinMax,
            ScalerParams::Standard { .. } => ScalerKind::Standard,
            ScalerParams::Quantile { .. } => ScalerKind::Quantile,
            ScalerParams::Normalizer => ScalerKind::Normalizer,
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: row.len(),
            });
        }
        let out = match &self.params {
            ScalerParams::MaxAbs { scale } => row.iter().zip(scale).map(|(x, s)| x / s).collect(),
            ScalerParams::MinMax { min, range } => row
                .iter()
                .zip(min.iter().zip(range))
                .map(|(x, (lo, r))| (x - lo) / r)
                .collect(),
            ScalerParams::Standard { mean, std } => row
                .iter()
                .zip(mean.iter().zip(std))
                .map(|(x, (m, s))| (x - m) / s)
                .collect(),
            ScalerParams::Quantile { quantiles } => row
                .iter()
                .zip(quantiles)
                .map(|(&x, q)| quantile_cdf(q, x))
                .collect(),
            ScalerParams::Normalizer => {
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter().map(|x| x / norm).collect()
                } else {
                    row.to_vec()
                }
            }
        };
        Ok(out)
    }

    pub fn transform(&self, matrix: &Array2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: matrix.ncols(),
            });
        }
        let mut out = Array2::zeros(matrix.dim());
        for (src, mut dst) in matrix.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let row = self.transform_row(&src.to_vec())?;
            dst.assign(&ndarray::ArrayView1::from(&row));
        }
        Ok(out)
    }
}
