//! Seeded synthetic power traces: baseline plus drift plus periodic burst
//! trains plus Gaussian noise, quantised to 12-bit counts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, seeded};
use crate::trace_io::{save_trace, DatasetManifest, Port, RawTrace, DEFAULT_ADC_BITS, UNKNOWN_DIR};

const FULL_SCALE: f64 = 4095.0;
/// Candidate burst periods, log-spaced.
const PERIOD_GRID: usize = 150;
const PERIOD_RANGE_S: (f64, f64) = (0.005, 0.5);
pub const MAX_CLASSES: usize = PERIOD_GRID / 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstComponent {
    pub period_s: f64,
    /// Fraction of each period spent in the burst, in (0, 1].
    pub duty: f64,
    pub amplitude_counts: f64,
    /// Half-width of the uniform per-cycle start offset.
    pub phase_jitter_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub class_name: String,
    pub baseline_counts: f64,
    pub components: Vec<BurstComponent>,
    pub noise_std_counts: f64,
    pub drift_counts_per_s: f64,
}

impl ClassSignature {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("signature {:?}: {m}", self.class_name)));
        let margin = 4.0 * self.noise_std_counts;
        let peak: f64 = self.baseline_counts + self.components.iter().map(|c| c.amplitude_counts).sum::<f64>();
        if !(self.noise_std_counts >= 0.0) {
            return bad("noise std must be non-negative".into());
        }
        if peak + margin > FULL_SCALE || self.baseline_counts - margin < 0.0 {
            return bad(format!("levels leave the ADC range (baseline {}, peak {peak})", self.baseline_counts));
        }
        for c in &self.components {
            if !(c.period_s > 0.0 && c.duty > 0.0 && c.duty <= 1.0 && c.amplitude_counts >= 0.0 && c.phase_jitter_s >= 0.0) {
                return bad(format!("invalid component {c:?}"));
            }
        }
        Ok(())
    }
}

fn period_grid() -> Vec<f64> {
    let (lo, hi) = PERIOD_RANGE_S;
    let step = (hi / lo).ln() / (PERIOD_GRID - 1) as f64;
    (0..PERIOD_GRID).map(|i| lo * (step * i as f64).exp()).collect()
}

/// `n` signatures named `class_00`, `class_01`, ... with pairwise disjoint
/// period sets. Signature `i` does not depend on `n`, so asking for one more
/// yields the same classes plus a fresh one.
pub fn default_signatures(n: usize, seed: u64) -> Result<Vec<ClassSignature>> {
    if n == 0 || n > MAX_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "number of classes must be in 1..={MAX_CLASSES}, got {n}"
        )));
    }
    let mut periods = period_grid();
    periods.shuffle(&mut seeded(derive_seed(seed, &[u64::MAX])));

    Ok((0..n)
        .map(|i| {
            let mut rng = seeded(derive_seed(seed, &[i as u64]));
            let own = &periods[3 * i..3 * i + rng.random_range(1..=3)];
            let noise = rng.random_range(20.0..=60.0);
            let drift = rng.random_range(-2.0..=2.0);
            let components: Vec<BurstComponent> = own
                .iter()
                .map(|&period_s| BurstComponent {
                    period_s,
                    duty: rng.random_range(0.2..=0.8),
                    amplitude_counts: rng.random_range(100.0..=800.0),
                    phase_jitter_s: period_s * rng.random_range(0.0..=0.05),
                })
                .collect();
            // leave room for drift over a long capture on top of the 4-sigma margin
            let total: f64 = components.iter().map(|c| c.amplitude_counts).sum();
            let lo = 4.0 * noise + 50.0;
            let hi = FULL_SCALE - total - 4.0 * noise - 50.0;
            ClassSignature {
                class_name: format!("class_{i:02}"),
                baseline_counts: rng.random_range(lo..=hi),
                components,
                noise_std_counts: noise,
                drift_counts_per_s: drift,
            }
        })
        .collect())
}

/// Index of the first sample at or after `t`. Times that land on a sample
/// up to rounding error count as that sample, so edges stay periodic.
fn first_sample_at(t: f64, sample_rate_hz: f64, n: usize) -> usize {
    ((t * sample_rate_hz - 1e-6).ceil().max(0.0) as usize).min(n)
}

/// One trace of `sig`; fully determined by its arguments.
pub fn generate_trace(sig: &ClassSignature, duration_s: f64, sample_rate_hz: f64, seed: u64) -> Result<RawTrace> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration_s}")));
    }
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    sig.validate()?;
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(Error::InvalidArgument("duration shorter than one sample".into()));
    }
    let mut rng = seeded(seed);
    let mut level: Vec<f64> = (0..n)
        .map(|i| sig.baseline_counts + sig.drift_counts_per_s * i as f64 / sample_rate_hz)
        .collect();

    for c in &sig.components {
        let mut k = 0u64;
        loop {
            let jitter = if c.phase_jitter_s > 0.0 {
                rng.random_range(-c.phase_jitter_s..=c.phase_jitter_s)
            } else {
                0.0
            };
            let start = k as f64 * c.period_s + jitter;
            if start >= duration_s {
                break;
            }
            let end = start + c.duty * c.period_s;
            let lo = first_sample_at(start, sample_rate_hz, n);
            let hi = first_sample_at(end, sample_rate_hz, n);
            for v in &mut level[lo..hi] {
                *v += c.amplitude_counts;
            }
            k += 1;
        }
    }

    let noise = Normal::new(0.0, sig.noise_std_counts).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samples = level
        .into_iter()
        .map(|v| {
            let x = if sig.noise_std_counts > 0.0 { v + noise.sample(&mut rng) } else { v };
            x.round().clamp(0.0, FULL_SCALE) as u16
        })
        .collect();

    Ok(RawTrace {
        samples,
        sample_rate_hz,
        adc_bits: DEFAULT_ADC_BITS,
        port: Port::Synth,
        label: Some(sig.class_name.clone()),
        trace_id: sig.class_name.clone(),
        captured_gap_s: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub traces_per_class: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            traces_per_class: 25,
            duration_s: 10.0,
            sample_rate_hz: 40_000.0,
            seed: 42,
        }
    }
}

/// Seconds between repetitions recorded in generated trace headers.
pub const CAPTURE_GAP_S: f64 = 10.0;

/// Writes `<out>/<class>/rep_NNN.txt` per signature and repetition, plus
/// `<out>/unknown/rep_NNN.txt` for `unknown` when given.
pub fn generate_dataset(
    signatures: &[ClassSignature],
    unknown: Option<&ClassSignature>,
    cfg: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if signatures.is_empty() || cfg.traces_per_class == 0 {
        return Err(Error::InvalidArgument("need at least one class and one trace per class".into()));
    }
    let mut names: Vec<&str> = signatures.iter().map(|s| s.class_name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) || names.contains(&UNKNOWN_DIR) {
        return Err(Error::InvalidArgument("class names must be unique and not 'unknown'".into()));
    }

    let mut jobs: Vec<(usize, &ClassSignature, PathBuf)> = signatures
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s, out_dir.join(&s.class_name)))
        .collect();
    if let Some(u) = unknown {
        jobs.push((signatures.len(), u, out_dir.join(UNKNOWN_DIR)));
    }
    for (_, _, dir) in &jobs {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let tasks: Vec<(usize, usize)> = (0..jobs.len())
        .flat_map(|j| (0..cfg.traces_per_class).map(move |rep| (j, rep)))
        .collect();
    let paths = par::try_map(&tasks, |&(j, rep)| {
        let (class_idx, sig, dir) = &jobs[j];
        let seed = derive_seed(cfg.seed, &[*class_idx as u64, rep as u64]);
        let mut trace = generate_trace(sig, cfg.duration_s, cfg.sample_rate_hz, seed)?;
        trace.trace_id = format!("{}_rep{rep:03}", sig.class_name);
        trace.captured_gap_s = Some(CAPTURE_GAP_S);
        let path = dir.join(format!("rep_{rep:03}.txt"));
        save_trace(&path, &trace)?;
        Ok::<_, Error>(path)
    })?;

    let mut chunks = paths.chunks(cfg.traces_per_class);
    let mut classes: Vec<(String, Vec<PathBuf>)> = signatures
        .iter()
        .zip(chunks.by_ref())
        .map(|(s, p)| (s.class_name.clone(), p.to_vec()))
        .collect();
    classes.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(DatasetManifest {
        root_path: out_dir.to_path_buf(),
        classes,
        unknown_paths: chunks.next().map(<[PathBuf]>::to_vec),
    })
}
