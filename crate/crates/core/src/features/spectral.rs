//! Short-time spectra and the per-frame descriptors computed from them.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Result;
use crate::preprocess::{frame_count, pad_reflect, Padding};

/// Floor added inside logarithms and ratios so silent input stays finite.
pub const EPS: f64 = 1e-10;

/// Magnitude short-time Fourier transform.
///
/// Stored frame-major: `frame(t)[k]` is the magnitude of bin `k` in frame `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    magnitudes: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
    pub frame_rate_hz: f64,
    pub sample_rate_hz: f64,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn magnitude(&self, bin: usize, t: usize) -> f64 {
        self.magnitudes[t * self.n_bins + bin]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.magnitudes.chunks_exact(self.n_bins)
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Hann-windowed magnitude STFT over reflect-padded, centred frames.
pub fn stft(values: &[f64], frame_length: usize, hop: usize, sample_rate_hz: f64) -> Result<Spectrogram> {
    let n_frames = frame_count(values.len(), frame_length, hop, Padding::Reflect)?;
    let padded = pad_reflect(values, frame_length / 2);
    let window = hann(frame_length);
    let n_bins = frame_length / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_length);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); frame_length];
    let mut magnitudes = Vec::with_capacity(n_frames * n_bins);

    for t in 0..n_frames {
        let seg = &padded[t * hop..t * hop + frame_length];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        magnitudes.extend(buf[..n_bins].iter().map(|c| c.norm()));
    }

    Ok(Spectrogram {
        n_bins,
        n_frames,
        magnitudes,
        bin_freqs_hz: (0..n_bins)
            .map(|k| k as f64 * sample_rate_hz / frame_length as f64)
            .collect(),
        frame_rate_hz: sample_rate_hz / hop as f64,
        sample_rate_hz,
    })
}

/// Magnitude-weighted mean frequency per frame; silent frames give 0.
pub fn spectral_centroid(s: &Spectrogram) -> Vec<f64> {
    s.frames()
        .map(|m| {
            let total: f64 = m.iter().sum();
            if total > 0.0 {
                m.iter().zip(&s.bin_freqs_hz).map(|(a, f)| a * f).sum::<f64>() / total
            } else {
                0.0
            }
        })
        .collect()
}

/// Magnitude-weighted spread about the centroid.
pub fn spectral_bandwidth(s: &Spectrogram) -> Vec<f64> {
    s.frames()
        .zip(spectral_centroid(s))
        .map(|(m, c)| {
            let total: f64 = m.iter().sum();
            if total > 0.0 {
                let spread: f64 = m
                    .iter()
                    .zip(&s.bin_freqs_hz)
                    .map(|(a, f)| a * (f - c) * (f - c))
                    .sum();
                (spread / total).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// Geometric over arithmetic mean of floored power, in [0, 1].
pub fn spectral_flatness(s: &Spectrogram) -> Vec<f64> {
    s.frames()
        .map(|m| {
            let n = m.len() as f64;
            let (log_sum, sum) = m.iter().fold((0.0, 0.0), |(ls, su), &a| {
                let p = (a * a).max(EPS);
                (ls + p.ln(), su + p)
            });
            ((log_sum / n).exp() / (sum / n)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Lowest bin frequency at which cumulative magnitude reaches `percent` of the
/// frame total.
pub fn spectral_rolloff(s: &Spectrogram, percent: f64) -> Vec<f64> {
    s.frames()
        .map(|m| {
            let total: f64 = m.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let target = percent * total;
            let mut acc = 0.0;
            for (a, &f) in m.iter().zip(&s.bin_freqs_hz) {
                acc += a;
                if acc >= target {
                    return f;
                }
            }
            *s.bin_freqs_hz.last().unwrap()
        })
        .collect()
}

fn time_frames(values: &[f64], frame_length: usize, hop: usize) -> Result<(Vec<f64>, usize)> {
    let n = frame_count(values.len(), frame_length, hop, Padding::Reflect)?;
    Ok((pad_reflect(values, frame_length / 2), n))
}

/// Sign changes between adjacent samples divided by `frame_length`; zero
/// counts as non-negative.
pub fn zero_crossing_rate(values: &[f64], frame_length: usize, hop: usize) -> Result<Vec<f64>> {
    let (padded, n) = time_frames(values, frame_length, hop)?;
    Ok((0..n)
        .map(|t| {
            let seg = &padded[t * hop..t * hop + frame_length];
            let crossings = seg
                .windows(2)
                .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
                .count();
            crossings as f64 / frame_length as f64
        })
        .collect())
}

pub fn rms(values: &[f64], frame_length: usize, hop: usize) -> Result<Vec<f64>> {
    let (padded, n) = time_frames(values, frame_length, hop)?;
    Ok((0..n)
        .map(|t| {
            let seg = &padded[t * hop..t * hop + frame_length];
            (seg.iter().map(|x| x * x).sum::<f64>() / frame_length as f64).sqrt()
        })
        .collect())
}

/// Band edges for spectral contrast: `[0, 200, 400, ...]` doubling `n_bands - 1`
/// times, closed at Nyquist. Gives `n_bands + 1` sub-bands.
pub fn contrast_band_edges(n_bands: usize, nyquist_hz: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend((0..n_bands).map(|i| (200.0 * 2f64.powi(i as i32)).min(nyquist_hz)));
    edges.push(nyquist_hz);
    edges
}

/// Log peak-to-valley power ratio per octave sub-band.
pub fn spectral_contrast(s: &Spectrogram, n_bands: usize, alpha: f64) -> Vec<Vec<f64>> {
    let edges = contrast_band_edges(n_bands, s.nyquist_hz());
    let last = edges.len() - 2;
    let bands: Vec<(usize, usize)> = (0..=last)
        .map(|b| {
            let (lo, hi) = (edges[b], edges[b + 1]);
            let in_band = |f: f64| f >= lo && (f < hi || (b == last && f <= hi));
            let start = s.bin_freqs_hz.iter().position(|&f| in_band(f));
            let count = s.bin_freqs_hz.iter().filter(|&&f| in_band(f)).count();
            (start.unwrap_or(0), count)
        })
        .collect();

    let mut sorted = Vec::new();
    s.frames()
        .map(|m| {
            bands
                .iter()
                .map(|&(start, count)| {
                    if count == 0 {
                        return 0.0;
                    }
                    sorted.clear();
                    sorted.extend(m[start..start + count].iter().map(|a| a * a));
                    sorted.sort_by(f64::total_cmp);
                    let q = ((alpha * count as f64).ceil() as usize).clamp(1, count);
                    let valley = sorted[..q].iter().sum::<f64>() / q as f64;
                    let peak = sorted[count - q..].iter().sum::<f64>() / q as f64;
                    (peak + EPS).ln() - (valley + EPS).ln()
                })
                .collect()
        })
        .collect()
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters spanning 0 Hz to Nyquist, stored sparsely.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, bin_freqs_hz: &[f64], nyquist_hz: f64) -> Self {
        let top = hz_to_mel(nyquist_hz);
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let filters = (0..n_mels)
            .map(|m| {
                let (lo, centre, hi) = (points[m], points[m + 1], points[m + 2]);
                let weights: Vec<f64> = bin_freqs_hz
                    .iter()
                    .map(|&f| {
                        let rise = (f - lo) / (centre - lo);
                        let fall = (hi - f) / (hi - centre);
                        rise.min(fall).max(0.0)
                    })
                    .collect();
                let start = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
                let end = weights.iter().rposition(|&w| w > 0.0).map_or(start, |e| e + 1);
                (start, weights[start..end].to_vec())
            })
            .collect();
        MelFilterbank {
            filters,
            n_bins: bin_freqs_hz.len(),
        }
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    /// Filter `m` as a dense row over all bins.
    pub fn row(&self, m: usize) -> Vec<f64> {
        let (start, w) = &self.filters[m];
        let mut row = vec![0.0; self.n_bins];
        row[*start..start + w.len()].copy_from_slice(w);
        row
    }

    /// Mel-band energies of one power frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(start, w)| w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Mel-band power for every frame.
pub fn mel_power(s: &Spectrogram, bank: &MelFilterbank) -> Vec<Vec<f64>> {
    let mut power = vec![0.0; s.n_bins];
    s.frames()
        .map(|m| {
            for (p, a) in power.iter_mut().zip(m) {
                *p = a * a;
            }
            bank.apply(&power)
        })
        .collect()
}

/// Orthonormal DCT-II basis, `n_coeffs` rows of length `n`.
pub fn dct_basis(n_coeffs: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n_coeffs)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Cepstral coefficients from per-frame mel power.
pub fn mfcc_from_mel(mel: &[Vec<f64>], n_coeffs: usize) -> Vec<Vec<f64>> {
    let Some(first) = mel.first() else {
        return Vec::new();
    };
    let basis = dct_basis(n_coeffs, first.len());
    mel.iter()
        .map(|bands| {
            let logs: Vec<f64> = bands.iter().map(|p| (p + EPS).ln()).collect();
            basis
                .iter()
                .map(|row| row.iter().zip(&logs).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

pub fn mfcc(s: &Spectrogram, n_mels: usize, n_coeffs: usize) -> Vec<Vec<f64>> {
    let bank = MelFilterbank::new(n_mels, &s.bin_freqs_hz, s.nyquist_hz());
    mfcc_from_mel(&mel_power(s, &bank), n_coeffs)
}

/// Pitch class of a frequency relative to `tuning_hz` (class 0); `None` below 20 Hz.
pub fn pitch_class(f: f64, n_chroma: usize, tuning_hz: f64) -> Option<usize> {
    if f < 20.0 {
        return None;
    }
    let steps = (n_chroma as f64 * (f / tuning_hz).log2()).round() as i64;
    Some(steps.rem_euclid(n_chroma as i64) as usize)
}

/// Magnitude folded onto pitch classes, each frame scaled to max 1.
pub fn chroma(s: &Spectrogram, n_chroma: usize, tuning_hz: f64) -> Vec<Vec<f64>> {
    let classes: Vec<Option<usize>> = s
        .bin_freqs_hz
        .iter()
        .map(|&f| pitch_class(f, n_chroma, tuning_hz))
        .collect();
    s.frames()
        .map(|m| {
            let mut c = vec![0.0; n_chroma];
            for (a, class) in m.iter().zip(&classes) {
                if let Some(p) = class {
                    c[*p] += a;
                }
            }
            let max = c.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                c.iter_mut().for_each(|v| *v /= max);
            }
            c
        })
        .collect()
}
