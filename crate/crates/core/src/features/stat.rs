//! Whole-trace summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STAT_NAMES: [&str; 8] = [
    "sum", "mean", "mad", "std", "var", "skewness", "sem", "kurtosis",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatFeatures {
    pub sum: f64,
    pub mean: f64,
    /// Mean absolute deviation about the mean.
    pub mad: f64,
    pub std: f64,
    /// Sample variance (n - 1 denominator).
    pub var: f64,
    /// Fisher-Pearson g1 from population moments.
    pub skewness: f64,
    pub sem: f64,
    /// Excess kurtosis g2.
    pub kurtosis: f64,
}

impl StatFeatures {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.sum,
            self.mean,
            self.mad,
            self.std,
            self.var,
            self.skewness,
            self.sem,
            self.kurtosis,
        ]
    }
}

pub fn stat_features(values: &[f64]) -> Result<StatFeatures> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooShort { len: n, required: 2 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in trace".into()));
    }

    let nf = n as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / nf;

    let (mut abs, mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        abs += d.abs();
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let var = m2 / (nf - 1.0);
    let std = var.sqrt();
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    Ok(StatFeatures {
        sum,
        mean,
        mad: abs / nf,
        std,
        var,
        skewness,
        sem: std / nf.sqrt(),
        kurtosis,
    })
}
