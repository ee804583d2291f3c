//! Slow, direct reference implementations used to check the library.
//!
//! Nothing here calls into the library's numeric code; each oracle is written
//! from the textbook definition with no reuse of intermediate results.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= rel * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

// ---------------------------------------------------------------- statistics

/// Exact statistics of integer samples via i128 central sums of `n*x - S`.
pub fn stats_exact(xs: &[i64]) -> [f64; 8] {
    let n = xs.len() as i128;
    let s: i128 = xs.iter().map(|&x| x as i128).sum();
    let (mut a1, mut a2, mut a3, mut a4) = (0i128, 0i128, 0i128, 0i128);
    for &x in xs {
        let d = n * x as i128 - s;
        a1 += d.abs();
        a2 += d * d;
        a3 += d * d * d;
        a4 += d * d * d * d;
    }
    let nf = n as f64;
    let mean = s as f64 / nf;
    // sample variance = A2 / (n^2 (n - 1))
    let var = a2 as f64 / (nf * nf * (nf - 1.0));
    let std = var.sqrt();
    let (skew, kurt) = if a2 == 0 {
        (0.0, 0.0)
    } else {
        let a2f = a2 as f64;
        (a3 as f64 * nf.sqrt() / a2f.powf(1.5), nf * (a4 as f64 / (a2f * a2f)) - 3.0)
    };
    [s as f64, mean, a1 as f64 / (nf * nf), std, var, skew, std / nf.sqrt(), kurt]
}

// ------------------------------------------------------------------ spectra

pub fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let j = i.rem_euclid(period);
    if j < len as isize { j as usize } else { (period - j) as usize }
}

/// Frames centred at multiples of `hop`, reflect-padded by `frame_length / 2`.
pub fn centred_frames(x: &[f64], frame_length: usize, hop: usize) -> Vec<Vec<f64>> {
    let half = (frame_length / 2) as isize;
    let count = 1 + x.len() / hop;
    (0..count)
        .map(|t| {
            (0..frame_length)
                .map(|i| x[reflect_index(t as isize * hop as isize + i as isize - half, x.len())])
                .collect()
        })
        .collect()
}

/// Direct O(N^2) DFT magnitudes of bins `0..=N/2`.
pub fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in frame.iter().enumerate() {
                let angle = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
                re += x * angle.cos();
                im -= x * angle.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub struct OracleSpec {
    pub mags: Vec<Vec<f64>>,
    pub freqs: Vec<f64>,
    pub rate: f64,
    pub frame_length: usize,
    pub hop: usize,
}

pub fn spectrogram(x: &[f64], frame_length: usize, hop: usize, rate: f64) -> OracleSpec {
    let window: Vec<f64> = (0..frame_length)
        .map(|i| (PI * i as f64 / frame_length as f64).sin().powi(2))
        .collect();
    let mags = centred_frames(x, frame_length, hop)
        .into_iter()
        .map(|f| {
            let w: Vec<f64> = f.iter().zip(&window).map(|(a, b)| a * b).collect();
            dft_magnitudes(&w)
        })
        .collect();
    OracleSpec {
        mags,
        freqs: (0..=frame_length / 2).map(|k| k as f64 * rate / frame_length as f64).collect(),
        rate,
        frame_length,
        hop,
    }
}

pub fn centroid(s: &OracleSpec) -> Vec<f64> {
    s.mags
        .iter()
        .map(|m| {
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..m.len() {
                num += s.freqs[k] * m[k];
                den += m[k];
            }
            if den > 0.0 { num / den } else { 0.0 }
        })
        .collect()
}

pub fn bandwidth(s: &OracleSpec) -> Vec<f64> {
    let c = centroid(s);
    s.mags
        .iter()
        .enumerate()
        .map(|(t, m)| {
            let den: f64 = m.iter().sum();
            if den == 0.0 {
                return 0.0;
            }
            let mut num = 0.0;
            for k in 0..m.len() {
                num += m[k] * (s.freqs[k] - c[t]).powi(2);
            }
            (num / den).sqrt()
        })
        .collect()
}

pub fn flatness(s: &OracleSpec) -> Vec<f64> {
    s.mags
        .iter()
        .map(|m| {
            let p: Vec<f64> = m.iter().map(|a| f64::max(a * a, 1e-10)).collect();
            let geo = (p.iter().map(|v| v.ln()).sum::<f64>() / p.len() as f64).exp();
            let arith = p.iter().sum::<f64>() / p.len() as f64;
            (geo / arith).min(1.0)
        })
        .collect()
}

pub fn rolloff(s: &OracleSpec, pct: f64) -> Vec<f64> {
    s.mags
        .iter()
        .map(|m| {
            let total: f64 = m.iter().sum();
            if total == 0.0 {
                return 0.0;
            }
            (0..m.len())
                .find(|&k| m[..=k].iter().sum::<f64>() >= pct * total)
                .map_or(*s.freqs.last().unwrap(), |k| s.freqs[k])
        })
        .collect()
}

pub fn zcr(x: &[f64], frame_length: usize, hop: usize) -> Vec<f64> {
    centred_frames(x, frame_length, hop)
        .iter()
        .map(|f| {
            let mut c = 0;
            for i in 1..f.len() {
                if (f[i] < 0.0) != (f[i - 1] < 0.0) {
                    c += 1;
                }
            }
            c as f64 / frame_length as f64
        })
        .collect()
}

pub fn rms(x: &[f64], frame_length: usize, hop: usize) -> Vec<f64> {
    centred_frames(x, frame_length, hop)
        .iter()
        .map(|f| (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt())
        .collect()
}

pub fn contrast(s: &OracleSpec, n_bands: usize, alpha: f64) -> Vec<Vec<f64>> {
    let nyq = s.rate / 2.0;
    let mut edges = vec![0.0];
    let mut e = 200.0;
    for _ in 0..n_bands {
        edges.push(f64::min(e, nyq));
        e *= 2.0;
    }
    edges.push(nyq);
    s.mags
        .iter()
        .map(|m| {
            (0..=n_bands)
                .map(|b| {
                    let last = b == n_bands;
                    let mut band: Vec<f64> = (0..m.len())
                        .filter(|&k| {
                            let f = s.freqs[k];
                            f >= edges[b] && (f < edges[b + 1] || (last && f == edges[b + 1]))
                        })
                        .map(|k| m[k] * m[k])
                        .collect();
                    if band.is_empty() {
                        return 0.0;
                    }
                    band.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let q = ((alpha * band.len() as f64).ceil() as usize).max(1).min(band.len());
                    let lo: f64 = band.iter().take(q).sum::<f64>() / q as f64;
                    let hi: f64 = band.iter().rev().take(q).sum::<f64>() / q as f64;
                    ((hi + 1e-10) / (lo + 1e-10)).ln()
                })
                .collect()
        })
        .collect()
}

fn mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Dense triangular HTK filterbank from 0 Hz to Nyquist.
pub fn mel_bank(n_mels: usize, freqs: &[f64], nyq: f64) -> Vec<Vec<f64>> {
    let top = mel(nyq);
    let pts: Vec<f64> = (0..n_mels + 2).map(|i| inv_mel(top * i as f64 / (n_mels + 1) as f64)).collect();
    (0..n_mels)
        .map(|m| {
            freqs
                .iter()
                .map(|&f| {
                    if f <= pts[m] || f >= pts[m + 2] {
                        0.0
                    } else if f <= pts[m + 1] {
                        (f - pts[m]) / (pts[m + 1] - pts[m])
                    } else {
                        (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
                    }
                })
                .collect()
        })
        .collect()
}

pub fn mel_power(s: &OracleSpec, n_mels: usize) -> Vec<Vec<f64>> {
    let bank = mel_bank(n_mels, &s.freqs, s.rate / 2.0);
    s.mags
        .iter()
        .map(|m| bank.iter().map(|row| (0..m.len()).map(|k| row[k] * m[k] * m[k]).sum()).collect())
        .collect()
}

pub fn mfcc(s: &OracleSpec, n_mels: usize, n_mfcc: usize) -> Vec<Vec<f64>> {
    mel_power(s, n_mels)
        .iter()
        .map(|bands| {
            let n = bands.len() as f64;
            (0..n_mfcc)
                .map(|k| {
                    let norm = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                    norm * bands
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (p + 1e-10).ln() * (PI / n * (i as f64 + 0.5) * k as f64).cos())
                        .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

pub fn chroma(s: &OracleSpec, n_chroma: usize, tuning: f64) -> Vec<Vec<f64>> {
    s.mags
        .iter()
        .map(|m| {
            let mut c = vec![0.0; n_chroma];
            for k in 0..m.len() {
                let f = s.freqs[k];
                if f < 20.0 {
                    continue;
                }
                let semis = (n_chroma as f64 * (f / tuning).ln() / 2f64.ln()).round() as i64;
                let n = n_chroma as i64;
                c[(((semis % n) + n) % n) as usize] += m[k];
            }
            let max = c.iter().fold(0.0f64, |a, &b| a.max(b));
            if max > 0.0 {
                c.iter_mut().for_each(|v| *v /= max);
            }
            c
        })
        .collect()
}

// ------------------------------------------------------------------- rhythm

pub fn onset(mel_power: &[Vec<f64>]) -> Vec<f64> {
    let mut env = vec![0.0];
    for t in 1..mel_power.len() {
        let mut acc = 0.0;
        for b in 0..mel_power[t].len() {
            let diff = (mel_power[t][b] + 1e-10).ln() - (mel_power[t - 1][b] + 1e-10).ln();
            if diff > 0.0 {
                acc += diff;
            }
        }
        env.push(acc);
    }
    env
}

fn window_segment(env: &[f64], t: usize, win: usize) -> Vec<f64> {
    (0..win)
        .map(|i| {
            let j = t as isize + i as isize - (win / 2) as isize;
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / win as f64).cos());
            if j < 0 || j as usize >= env.len() { 0.0 } else { w * env[j as usize] }
        })
        .collect()
}

pub fn tempogram(env: &[f64], win: usize, n_lags: usize) -> Vec<Vec<f64>> {
    (0..env.len())
        .map(|t| {
            let seg = window_segment(env, t, win);
            let e0: f64 = seg.iter().map(|v| v * v).sum();
            (1..=n_lags)
                .map(|lag| {
                    if e0 == 0.0 {
                        return 0.0;
                    }
                    (0..win - lag).map(|i| seg[i] * seg[i + lag]).sum::<f64>() / e0
                })
                .collect()
        })
        .collect()
}

pub fn fourier_tempogram(env: &[f64], win: usize, n_bins: usize) -> Vec<Vec<f64>> {
    (0..env.len())
        .map(|t| {
            let seg = window_segment(env, t, win);
            (0..n_bins)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, &x) in seg.iter().enumerate() {
                        let a = 2.0 * PI * k as f64 * n as f64 / win as f64;
                        re += x * a.cos();
                        im -= x * a.sin();
                    }
                    (re * re + im * im).sqrt()
                })
                .collect()
        })
        .collect()
}

fn autocorr_centred(env: &[f64], lag: usize) -> f64 {
    let mean = env.iter().sum::<f64>() / env.len() as f64;
    (0..env.len() - lag).map(|i| (env[i] - mean) * (env[i + lag] - mean)).sum()
}

/// `(bpm, lag)` of the best positive centred autocorrelation in 30..300 BPM.
pub fn tempo(env: &[f64], frame_rate: f64) -> (f64, usize) {
    let lo = (frame_rate * 60.0 / 300.0).ceil() as usize;
    let hi = ((frame_rate * 60.0 / 30.0).floor() as usize).min(env.len() - 1);
    let mut best: Option<(f64, usize)> = None;
    for lag in lo.max(1)..=hi {
        let r = autocorr_centred(env, lag);
        if r > 0.0 && best.is_none_or(|(b, _)| r > b) {
            best = Some((r, lag));
        }
    }
    best.map_or((0.0, 0), |(_, lag)| (frame_rate * 60.0 / lag as f64, lag))
}

pub fn tempo_ratio(env: &[f64], frame_rate: f64, ratios: &[f64]) -> Vec<f64> {
    let (_, lag) = tempo(env, frame_rate);
    if lag == 0 {
        return vec![0.0; ratios.len()];
    }
    let base = autocorr_centred(env, lag);
    ratios
        .iter()
        .map(|r| {
            let l = (lag as f64 * r).round() as usize;
            if l == 0 || l >= env.len() { 0.0 } else { autocorr_centred(env, l) / base }
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn col_means(rows: &[Vec<f64>]) -> Vec<f64> {
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
        .collect()
}

/// Full default-layout feature vector computed from the oracles above.
pub fn feature_vector(x: &[f64], rate: f64) -> Vec<f64> {
    let (fl, hop) = (2048, 512);
    let ints: Option<Vec<i64>> = x.iter().map(|&v| (v.fract() == 0.0).then_some(v as i64)).collect();
    let mut out: Vec<f64> = match ints {
        Some(i) => stats_exact(&i).to_vec(),
        None => panic!("oracle feature vector needs integer samples"),
    };
    let s = spectrogram(x, fl, hop, rate);
    let mut pair = |v: Vec<f64>| {
        let (m, sd) = mean_std(&v);
        out.push(m);
        out.push(sd);
    };
    pair(centroid(&s));
    pair(bandwidth(&s));
    pair(flatness(&s));
    for p in [0.85, 0.95, 0.99] {
        pair(rolloff(&s, p));
    }
    pair(zcr(x, fl, hop));
    pair(rms(x, fl, hop));
    out.extend(col_means(&contrast(&s, 6, 0.02)));
    out.extend(col_means(&mfcc(&s, 40, 20)));
    out.extend(col_means(&chroma(&s, 12, 440.0)));
    let env = onset(&mel_power(&s, 40));
    let fr = rate / hop as f64;
    out.push(tempo(&env, fr).0);
    out.extend(col_means(&tempogram(&env, 384, 16)));
    out.extend(col_means(&fourier_tempogram(&env, 384, 16)));
    out.extend(tempo_ratio(&env, fr, &[0.25, 0.5, 1.0, 2.0, 4.0]));
    out
}

// ---------------------------------------------------------- classification

/// One-way ANOVA F on integer data. Group sums are exact in i128, and both
/// sums of squares are accumulated from nonnegative terms, so nothing cancels.
pub fn anova(rows: &[Vec<i64>], labels: &[String]) -> Vec<f64> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let n = rows.len() as i128;
    let k = groups.len() as f64;
    (0..rows[0].len())
        .map(|j| {
            let total: i128 = rows.iter().map(|r| r[j] as i128).sum();
            let (mut ssb, mut ssw) = (0.0, 0.0);
            for idx in groups.values() {
                let ng = idx.len() as i128;
                let sg: i128 = idx.iter().map(|&i| rows[i][j] as i128).sum();
                let sq: i128 = idx.iter().map(|&i| (rows[i][j] as i128).pow(2)).sum();
                // n_g * sum(x - mean_g)^2 and n_g * N^2 * (mean_g - mean)^2
                ssw += (ng * sq - sg * sg) as f64 / ng as f64;
                let d = (n * sg - ng * total) as f64;
                ssb += d * d / (ng as f64 * (n * n) as f64);
            }
            (ssb / (k - 1.0)) / (ssw / (n as f64 - k))
        })
        .collect()
}

/// Exhaustive KNN: fully sorts every training row by (distance, index).
pub fn knn_vote(train: &[Vec<f64>], labels: &[String], x: &[f64], k: usize) -> (BTreeMap<String, f64>, String) {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut count: BTreeMap<String, usize> = BTreeMap::new();
    let mut dist: BTreeMap<String, f64> = BTreeMap::new();
    for &(di, i) in &d[..k] {
        *count.entry(labels[i].clone()).or_default() += 1;
        *dist.entry(labels[i].clone()).or_default() += di;
    }
    let best = count.values().copied().max().unwrap();
    let winner = count
        .iter()
        .filter(|(_, &c)| c == best)
        .min_by(|a, b| dist[a.0].partial_cmp(&dist[b.0]).unwrap().then(a.0.cmp(b.0)))
        .unwrap()
        .0
        .clone();
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let probs = classes
        .into_iter()
        .map(|c| {
            let p = *count.get(&c).unwrap_or(&0) as f64 / k as f64;
            (c, p)
        })
        .collect();
    (probs, winner)
}

/// Counting metrics: `(accuracy, macro_f1, weighted_f1)`.
pub fn count_metrics(y_true: &[String], y_pred: &[String]) -> (f64, f64, f64) {
    let mut labels: Vec<&String> = y_true.iter().chain(y_pred).collect();
    labels.sort();
    labels.dedup();
    let n = y_true.len() as f64;
    let mut macro_sum = 0.0;
    let mut weighted = 0.0;
    for l in &labels {
        let tp = y_true.iter().zip(y_pred).filter(|(t, p)| t == l && p == l).count() as f64;
        let fp = y_true.iter().zip(y_pred).filter(|(t, p)| t != l && p == l).count() as f64;
        let fneg = y_true.iter().zip(y_pred).filter(|(t, p)| t == l && p != l).count() as f64;
        let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
        macro_sum += f1;
        weighted += f1 * (tp + fneg);
    }
    let acc = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count() as f64 / n;
    (acc, macro_sum / labels.len() as f64, weighted / n)
}

/// Quartile by linear interpolation between closest ranks, on a fresh sort.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let below = v[h.floor() as usize];
    let above = v[h.ceil() as usize];
    below + (h - h.floor()) * (above - below)
}

// ------------------------------------------------------------------- inputs

pub fn random_ints(seed: u64, len: usize, max: i64) -> Vec<i64> {
    let mut r = rng(seed);
    let centre = r.random_range(0..=max);
    let spread = r.random_range(1..=max / 2 + 1);
    (0..len)
        .map(|_| (centre + r.random_range(-spread..=spread)).clamp(0, max))
        .collect()
}

pub fn sine(freq: f64, rate: f64, len: usize, amp: f64) -> Vec<f64> {
    (0..len).map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin()).collect()
}

pub fn white_noise(seed: u64, len: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}
