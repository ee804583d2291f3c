//! Periodicity of activity bursts: onset envelope, tempograms and tempo.

use std::f64::consts::PI;

use super::spectral::{hann, EPS};

/// Lowest and highest tempo considered, in beats per minute.
pub const TEMPO_RANGE_BPM: (f64, f64) = (30.0, 300.0);

/// Half-wave-rectified frame-to-frame increase of log mel power, summed over
/// bands. The first frame is 0.
pub fn onset_envelope(mel_power: &[Vec<f64>]) -> Vec<f64> {
    let logs: Vec<Vec<f64>> = mel_power
        .iter()
        .map(|bands| bands.iter().map(|p| (p + EPS).ln()).collect())
        .collect();
    let mut env = vec![0.0; logs.len()];
    for t in 1..logs.len() {
        env[t] = logs[t]
            .iter()
            .zip(&logs[t - 1])
            .map(|(a, b)| (a - b).max(0.0))
            .sum();
    }
    env
}

/// Hann-windowed segment of `env` centred on frame `t`, zero outside the signal.
fn windowed_segment(env: &[f64], t: usize, window: &[f64], out: &mut Vec<f64>) {
    let win = window.len();
    let offset = t as isize - (win / 2) as isize;
    out.clear();
    out.extend(window.iter().enumerate().map(|(i, w)| {
        let j = offset + i as isize;
        if j >= 0 && (j as usize) < env.len() {
            w * env[j as usize]
        } else {
            0.0
        }
    }));
}

/// Per-frame autocorrelation at lags `1..=n_lags`, normalised by lag 0.
pub fn tempogram(env: &[f64], win: usize, n_lags: usize) -> Vec<Vec<f64>> {
    let window = hann(win);
    let mut seg = Vec::with_capacity(win);
    (0..env.len())
        .map(|t| {
            windowed_segment(env, t, &window, &mut seg);
            let energy: f64 = seg.iter().map(|x| x * x).sum();
            (1..=n_lags)
                .map(|lag| {
                    if energy <= 0.0 || lag >= win {
                        return 0.0;
                    }
                    let ac: f64 = seg.iter().zip(&seg[lag..]).map(|(a, b)| a * b).sum();
                    (ac / energy).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect()
}

/// Per-frame DFT magnitudes of the windowed envelope, bins `0..n_bins`.
pub fn fourier_tempogram(env: &[f64], win: usize, n_bins: usize) -> Vec<Vec<f64>> {
    let window = hann(win);
    let twiddles: Vec<Vec<(f64, f64)>> = (0..n_bins)
        .map(|k| {
            (0..win)
                .map(|n| {
                    let phase = -2.0 * PI * (k * n % win) as f64 / win as f64;
                    (phase.cos(), phase.sin())
                })
                .collect()
        })
        .collect();
    let mut seg = Vec::with_capacity(win);
    (0..env.len())
        .map(|t| {
            windowed_segment(env, t, &window, &mut seg);
            twiddles
                .iter()
                .map(|tw| {
                    let (re, im) = seg
                        .iter()
                        .zip(tw)
                        .fold((0.0, 0.0), |(re, im), (x, (c, s))| (re + x * c, im + x * s));
                    re.hypot(im)
                })
                .collect()
        })
        .collect()
}

/// Autocorrelation of the mean-removed envelope at one lag.
fn centred_autocorrelation(centred: &[f64], lag: usize) -> f64 {
    centred.iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum()
}

fn centred(env: &[f64]) -> Vec<f64> {
    let mean = env.iter().sum::<f64>() / env.len().max(1) as f64;
    env.iter().map(|v| v - mean).collect()
}

/// Global tempo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tempo {
    pub bpm: f64,
    /// Period in frames; 0 when no periodicity was found.
    pub lag: usize,
}

/// Tempo from the strongest envelope autocorrelation lag between 30 and 300
/// BPM. Returns 0 BPM if no lag in range correlates positively.
pub fn tempo(env: &[f64], frame_rate_hz: f64) -> Tempo {
    tempo_from_centred(&centred(env), frame_rate_hz)
}

fn tempo_from_centred(c: &[f64], frame_rate_hz: f64) -> Tempo {
    let none = Tempo { bpm: 0.0, lag: 0 };
    let (lo_bpm, hi_bpm) = TEMPO_RANGE_BPM;
    let min_lag = (60.0 * frame_rate_hz / hi_bpm).ceil().max(1.0) as usize;
    let max_lag = ((60.0 * frame_rate_hz / lo_bpm).floor() as usize).min(c.len().saturating_sub(1));
    if min_lag > max_lag {
        return none;
    }
    let mut best = (0.0, 0);
    for lag in min_lag..=max_lag {
        let ac = centred_autocorrelation(c, lag);
        if ac > best.0 {
            best = (ac, lag);
        }
    }
    if best.1 == 0 {
        return none;
    }
    Tempo {
        bpm: 60.0 * frame_rate_hz / best.1 as f64,
        lag: best.1,
    }
}

/// Autocorrelation at `round(lag * r)` for each `r`, relative to the tempo lag.
/// Lags outside the envelope give 0, as does an envelope without tempo.
pub fn tempogram_ratio(env: &[f64], frame_rate_hz: f64, ratios: &[f64]) -> Vec<f64> {
    let c = centred(env);
    let t = tempo_from_centred(&c, frame_rate_hz);
    if t.lag == 0 {
        return vec![0.0; ratios.len()];
    }
    let reference = centred_autocorrelation(&c, t.lag);
    ratios
        .iter()
        .map(|&r| {
            let lag = (t.lag as f64 * r).round() as usize;
            if lag >= 1 && lag < c.len() {
                centred_autocorrelation(&c, lag) / reference
            } else {
                0.0
            }
        })
        .collect()
}
