//! Cleaning, sensor calibration and framing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace_io::RawTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Counts,
    Milliamps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedTrace {
    pub values: Vec<f64>,
    pub unit: Unit,
    pub sample_rate_hz: f64,
    pub trace_id: String,
    pub label: Option<String>,
}

/// Hall-effect current sensor transfer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    pub v_ref: f64,
    pub sensitivity_mv_per_a: f64,
    pub zero_offset_counts: f64,
}

impl SensorCalibration {
    pub fn new(sensitivity_mv_per_a: f64, zero_offset_counts: f64) -> Self {
        SensorCalibration {
            v_ref: 3.3,
            sensitivity_mv_per_a,
            zero_offset_counts,
        }
    }

    pub fn validate(&self, adc_bits: u32) -> Result<()> {
        if !(self.sensitivity_mv_per_a.is_finite() && self.sensitivity_mv_per_a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sensitivity must be positive, got {}",
                self.sensitivity_mv_per_a
            )));
        }
        let full_scale = f64::from(1u32 << adc_bits);
        if !(0.0..full_scale).contains(&self.zero_offset_counts) {
            return Err(Error::InvalidArgument(format!(
                "zero offset {} outside [0, {full_scale})",
                self.zero_offset_counts
            )));
        }
        if !(self.v_ref.is_finite() && self.v_ref > 0.0) {
            return Err(Error::InvalidArgument(format!("v_ref must be positive, got {}", self.v_ref)));
        }
        Ok(())
    }
}

/// Zero-current offset from an idle capture: mean of its first 1000 samples.
pub fn estimate_zero_offset(idle: &RawTrace) -> Result<f64> {
    let head = &idle.samples[..idle.samples.len().min(1000)];
    if head.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(head.iter().map(|&s| f64::from(s)).sum::<f64>() / head.len() as f64)
}

/// Converts counts to reals. Trace files cannot carry missing values, so this
/// only guarantees finiteness and non-emptiness.
pub fn clean(trace: &RawTrace) -> Result<CalibratedTrace> {
    let values = clean_values(trace.samples.iter().map(|&s| f64::from(s)))?;
    Ok(CalibratedTrace {
        values,
        unit: Unit::Counts,
        sample_rate_hz: trace.sample_rate_hz,
        trace_id: trace.trace_id.clone(),
        label: trace.label.clone(),
    })
}

/// Drops non-finite entries, preserving order.
pub fn clean_values(values: impl IntoIterator<Item = f64>) -> Result<Vec<f64>> {
    let out: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
    if out.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(out)
}

/// Maps counts to milliamps: volts `(c - offset) * v_ref / (2^bits - 1)` over
/// `sensitivity / 1000` V/A gives amps, times 1000 gives mA.
pub fn calibrate(
    trace: &CalibratedTrace,
    cal: &SensorCalibration,
    adc_bits: u32,
) -> Result<CalibratedTrace> {
    if trace.unit != Unit::Counts {
        return Err(Error::InvalidArgument("trace is already calibrated".into()));
    }
    cal.validate(adc_bits)?;
    let full_scale = f64::from((1u32 << adc_bits) - 1);
    let gain = cal.v_ref / (full_scale * cal.sensitivity_mv_per_a) * 1e6;
    Ok(CalibratedTrace {
        values: trace
            .values
            .iter()
            .map(|&c| (c - cal.zero_offset_counts) * gain)
            .collect(),
        unit: Unit::Milliamps,
        ..trace.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Pad `frame_length / 2` on each side by mirror reflection (edge excluded).
    Reflect,
    None,
}

/// Number of frames [`frame`] would produce, without materialising them.
pub fn frame_count(len: usize, frame_length: usize, hop: usize, pad: Padding) -> Result<usize> {
    check_frame_params(frame_length, hop)?;
    match pad {
        Padding::Reflect => {
            if len < 2 {
                return Err(Error::TooShort { len, required: 2 });
            }
            Ok(1 + len / hop)
        }
        Padding::None => {
            if len < frame_length {
                return Err(Error::TooShort {
                    len,
                    required: frame_length,
                });
            }
            Ok(1 + (len - frame_length) / hop)
        }
    }
}

fn check_frame_params(frame_length: usize, hop: usize) -> Result<()> {
    if frame_length < 2 || hop == 0 || hop > frame_length {
        return Err(Error::InvalidArgument(format!(
            "need frame_length >= 2 and 1 <= hop <= frame_length, got {frame_length}/{hop}"
        )));
    }
    Ok(())
}

/// Pads `values` for centred framing. Reflection wraps back and forth for
/// signals shorter than the pad.
pub fn pad_reflect(values: &[f64], pad: usize) -> Vec<f64> {
    let n = values.len() as isize;
    let period = 2 * (n - 1);
    (0..values.len() + 2 * pad)
        .map(|i| {
            let mut j = (i as isize - pad as isize).rem_euclid(period.max(1));
            if j >= n {
                j = period - j;
            }
            values[j as usize]
        })
        .collect()
}

/// Slices `values` into overlapping frames starting every `hop` samples.
pub fn frame(values: &[f64], frame_length: usize, hop: usize, pad: Padding) -> Result<Vec<Vec<f64>>> {
    let count = frame_count(values.len(), frame_length, hop, pad)?;
    let padded;
    let source = match pad {
        Padding::Reflect => {
            padded = pad_reflect(values, frame_length / 2);
            &padded[..]
        }
        Padding::None => values,
    };
    Ok((0..count)
        .map(|i| source[i * hop..i * hop + frame_length].to_vec())
        .collect())
}
