//! Statistical and spectral feature extraction.
//!
//! [`extract_features`] turns one cleaned trace into a fixed-length vector.
//! Names follow `<family>_<index>`: scalar per-frame families store the frame
//! mean at index 0 and the frame standard deviation at index 1 (`flatness_0`),
//! vector families store the per-coefficient frame mean (`chroma_9`). Roll-off
//! holds one (mean, std) pair per percentage, so `rolloff_0` is the mean
//! 85 % roll-off with the default configuration.

pub mod rhythm;
pub mod spectral;
pub mod stat;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::preprocess::CalibratedTrace;

pub use stat::{stat_features, StatFeatures, STAT_NAMES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub frame_length: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub n_chroma: usize,
    pub tuning_hz: f64,
    pub contrast_bands: usize,
    pub contrast_alpha: f64,
    pub rolloff_percents: Vec<f64>,
    pub tempogram_win: usize,
    /// Lags kept from the autocorrelation tempogram and bins kept from the
    /// Fourier tempogram.
    pub tempogram_keep: usize,
    pub tempo_ratios: Vec<f64>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            frame_length: 2048,
            hop: 512,
            n_mels: 40,
            n_mfcc: 20,
            n_chroma: 12,
            tuning_hz: 440.0,
            contrast_bands: 6,
            contrast_alpha: 0.02,
            rolloff_percents: vec![0.85, 0.95, 0.99],
            tempogram_win: 384,
            tempogram_keep: 16,
            tempo_ratios: vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.frame_length < 2 || self.hop == 0 || self.hop > self.frame_length {
            return bad("need frame_length >= 2 and 1 <= hop <= frame_length");
        }
        if self.n_mels == 0 || self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad("need 1 <= n_mfcc <= n_mels");
        }
        if self.n_chroma == 0 || !(self.tuning_hz > 0.0) {
            return bad("need n_chroma >= 1 and a positive tuning frequency");
        }
        if !(self.contrast_alpha > 0.0 && self.contrast_alpha <= 1.0) {
            return bad("contrast_alpha must lie in (0, 1]");
        }
        if self.rolloff_percents.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return bad("roll-off percentages must lie in (0, 1]");
        }
        if self.tempogram_win < 2 || self.tempogram_keep == 0 || self.tempogram_keep >= self.tempogram_win {
            return bad("need 1 <= tempogram_keep < tempogram_win");
        }
        Ok(())
    }

    pub fn min_samples(&self) -> usize {
        self.frame_length
    }
}

/// Ordered feature names produced by `cfg`.
pub fn feature_names(cfg: &FeatureConfig) -> Vec<String> {
    let mut names: Vec<String> = STAT_NAMES.iter().map(|s| s.to_string()).collect();
    let indexed = |names: &mut Vec<String>, family: &str, n: usize| {
        names.extend((0..n).map(|i| format!("{family}_{i}")));
    };
    for family in ["centroid", "bandwidth", "flatness"] {
        indexed(&mut names, family, 2);
    }
    indexed(&mut names, "rolloff", 2 * cfg.rolloff_percents.len());
    indexed(&mut names, "zcr", 2);
    indexed(&mut names, "rms", 2);
    indexed(&mut names, "contrast", cfg.contrast_bands + 1);
    indexed(&mut names, "mfcc", cfg.n_mfcc);
    indexed(&mut names, "chroma", cfg.n_chroma);
    names.push("tempo".to_string());
    indexed(&mut names, "tempogram", cfg.tempogram_keep);
    indexed(&mut names, "ftempogram", cfg.tempogram_keep);
    indexed(&mut names, "tempo_ratio", cfg.tempo_ratios.len());
    names
}

/// Features of one trace, in [`feature_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub trace_id: String,
    pub label: Option<String>,
    pub names: Arc<[String]>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-column mean of per-frame vectors.
pub fn column_means(frames: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut acc = vec![0.0; width];
    for f in frames {
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
    }
    let n = frames.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Feature values of `values` sampled at `sample_rate_hz`, in [`feature_names`] order.
pub fn feature_values(values: &[f64], sample_rate_hz: f64, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    use rhythm::*;
    use spectral::*;

    cfg.validate()?;
    if values.len() < cfg.min_samples() {
        return Err(Error::TooShort {
            len: values.len(),
            required: cfg.min_samples(),
        });
    }

    let mut out = Vec::with_capacity(128);
    out.extend(stat_features(values)?.to_array());

    let spec = stft(values, cfg.frame_length, cfg.hop, sample_rate_hz)?;
    let push_scalar = |frames: Vec<f64>, out: &mut Vec<f64>| {
        let (m, s) = mean_std(&frames);
        out.push(m);
        out.push(s);
    };
    push_scalar(spectral_centroid(&spec), &mut out);
    push_scalar(spectral_bandwidth(&spec), &mut out);
    push_scalar(spectral_flatness(&spec), &mut out);
    for &p in &cfg.rolloff_percents {
        push_scalar(spectral_rolloff(&spec, p), &mut out);
    }
    push_scalar(zero_crossing_rate(values, cfg.frame_length, cfg.hop)?, &mut out);
    push_scalar(rms(values, cfg.frame_length, cfg.hop)?, &mut out);

    out.extend(column_means(
        &spectral_contrast(&spec, cfg.contrast_bands, cfg.contrast_alpha),
        cfg.contrast_bands + 1,
    ));

    let bank = MelFilterbank::new(cfg.n_mels, &spec.bin_freqs_hz, spec.nyquist_hz());
    let mel = mel_power(&spec, &bank);
    out.extend(column_means(&mfcc_from_mel(&mel, cfg.n_mfcc), cfg.n_mfcc));
    out.extend(column_means(&chroma(&spec, cfg.n_chroma, cfg.tuning_hz), cfg.n_chroma));

    let env = onset_envelope(&mel);
    out.push(tempo(&env, spec.frame_rate_hz).bpm);
    out.extend(column_means(
        &tempogram(&env, cfg.tempogram_win, cfg.tempogram_keep),
        cfg.tempogram_keep,
    ));
    out.extend(column_means(
        &fourier_tempogram(&env, cfg.tempogram_win, cfg.tempogram_keep),
        cfg.tempogram_keep,
    ));
    out.extend(tempogram_ratio(&env, spec.frame_rate_hz, &cfg.tempo_ratios));

    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("feature {i} is not finite")));
    }
    Ok(out)
}

pub fn extract_features(trace: &CalibratedTrace, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let names: Arc<[String]> = feature_names(cfg).into();
    extract_with_names(trace, cfg, names)
}

fn extract_with_names(trace: &CalibratedTrace, cfg: &FeatureConfig, names: Arc<[String]>) -> Result<FeatureVector> {
    let values = feature_values(&trace.values, trace.sample_rate_hz, cfg)?;
    debug_assert_eq!(values.len(), names.len());
    Ok(FeatureVector {
        trace_id: trace.trace_id.clone(),
        label: trace.label.clone(),
        names,
        values,
    })
}

/// Extracts many traces, in parallel when enabled. Output order matches input.
pub fn extract_batch(traces: &[CalibratedTrace], cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    let names: Arc<[String]> = feature_names(cfg).into();
    par::try_map(traces, |t| extract_with_names(t, cfg, names.clone()))
}
