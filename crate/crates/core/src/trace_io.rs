//! Raw trace files, the live serial stream, and the on-disk dataset layout.
//!
//! A trace file is UTF-8 text: optional `# key=value` header lines followed by
//! one decimal ADC count per line.
//!
//! ```text
//! # sample_rate_hz=40000
//! # adc_bits=12
//! # port=USB
//! # label=vgg16
//! # trace_id=vgg16_rep000
//! 2011
//! 2034
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 40_000.0;
pub const DEFAULT_ADC_BITS: u32 = 12;
pub const MAX_ADC_BITS: u32 = 16;

/// Directory name holding traces of workloads absent from training.
pub const UNKNOWN_DIR: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    Usb,
    Hdmi,
    Synth,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Usb => "USB",
            Port::Hdmi => "HDMI",
            Port::Synth => "SYNTH",
        })
    }
}

impl FromStr for Port {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "USB" => Ok(Port::Usb),
            "HDMI" => Ok(Port::Hdmi),
            "SYNTH" => Ok(Port::Synth),
            other => Err(format!("unknown port {other:?} (expected USB, HDMI or SYNTH)")),
        }
    }
}

/// One capture session of current-sensor readings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub samples: Vec<u16>,
    pub sample_rate_hz: f64,
    pub adc_bits: u32,
    pub port: Port,
    pub label: Option<String>,
    pub trace_id: String,
    /// Pause between consecutive collection runs, kept as metadata only.
    pub captured_gap_s: Option<f64>,
}

impl RawTrace {
    /// A trace with the acquisition device defaults (40 kHz, 12-bit, synthetic port).
    pub fn new(samples: Vec<u16>) -> Self {
        RawTrace {
            samples,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            adc_bits: DEFAULT_ADC_BITS,
            port: Port::Synth,
            label: None,
            trace_id: String::new(),
            captured_gap_s: None,
        }
    }

    pub fn max_count(&self) -> u32 {
        max_count(self.adc_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        validate_bits(self.adc_bits).map_err(|m| Error::InvalidArgument(m))?;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        let max = self.max_count();
        if let Some((i, &v)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, &v)| u32::from(v) > max)
        {
            return Err(Error::InvalidArgument(format!(
                "sample {i} = {v} exceeds {max}"
            )));
        }
        for (name, text) in [("label", self.label.as_deref()), ("trace_id", Some(&self.trace_id))] {
            if text.is_some_and(|t| t.contains(['\n', '\r'])) {
                return Err(Error::InvalidArgument(format!("{name} contains a line break")));
            }
        }
        Ok(())
    }
}

fn max_count(bits: u32) -> u32 {
    (1u32 << bits) - 1
}

fn validate_bits(bits: u32) -> Result<(), String> {
    if (1..=MAX_ADC_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(format!("adc_bits must be in 1..={MAX_ADC_BITS}, got {bits}"))
    }
}

/// Parses a trace file. Errors carry the 1-based line number.
pub fn parse_trace_file(bytes: &[u8]) -> Result<RawTrace> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        Error::parse(line, "invalid UTF-8")
    })?;

    let mut trace = RawTrace::new(Vec::new());
    let mut max = trace.max_count();
    let mut in_data = false;

    for (idx, raw_line) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);

        if let Some(header) = line.strip_prefix('#') {
            if in_data {
                return Err(Error::parse(line_no, "header line after sample data"));
            }
            let header = header.trim_start();
            let (key, value) = header
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, "header must have the form `# key=value`"))?;
            apply_header(&mut trace, key.trim(), value)
                .map_err(|m| Error::parse(line_no, m))?;
            max = trace.max_count();
            continue;
        }

        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        in_data = true;
        if !token.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::parse(line_no, format!("expected an integer sample, got {token:?}")));
        }
        let value: u64 = match token.parse() {
            Ok(v) => v,
            // all digits, so only overflow can fail
            Err(_) => u64::MAX,
        };
        if value > u64::from(max) {
            return Err(Error::SampleRange {
                line: line_no,
                value,
                max,
                bits: trace.adc_bits,
            });
        }
        trace.samples.push(value as u16);
    }

    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(trace)
}

fn apply_header(trace: &mut RawTrace, key: &str, value: &str) -> Result<(), String> {
    match key {
        "sample_rate_hz" => {
            let rate: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("sample_rate_hz: not a number: {value:?}"))?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(format!("sample_rate_hz must be positive, got {value}"));
            }
            trace.sample_rate_hz = rate;
        }
        "adc_bits" => {
            let bits: u32 = value
                .trim()
                .parse()
                .map_err(|_| format!("adc_bits: not an integer: {value:?}"))?;
            validate_bits(bits)?;
            trace.adc_bits = bits;
        }
        "port" => trace.port = value.trim().parse()?,
        "label" => trace.label = Some(value.to_string()),
        "trace_id" => trace.trace_id = value.to_string(),
        "captured_gap_s" => {
            let gap: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("captured_gap_s: not a number: {value:?}"))?;
            trace.captured_gap_s = Some(gap);
        }
        other => log::warn!("ignoring unknown trace header key {other:?}"),
    }
    Ok(())
}

/// Serializes a trace; headers always appear in the same order.
pub fn write_trace_file(trace: &RawTrace) -> Vec<u8> {
    use std::fmt::Write as _;

    let mut out = String::with_capacity(160 + trace.samples.len() * 5);
    let _ = writeln!(out, "# sample_rate_hz={}", trace.sample_rate_hz);
    let _ = writeln!(out, "# adc_bits={}", trace.adc_bits);
    let _ = writeln!(out, "# port={}", trace.port);
    if let Some(label) = &trace.label {
        let _ = writeln!(out, "# label={label}");
    }
    let _ = writeln!(out, "# trace_id={}", trace.trace_id);
    if let Some(gap) = trace.captured_gap_s {
        let _ = writeln!(out, "# captured_gap_s={gap}");
    }
    for &s in &trace.samples {
        let _ = writeln!(out, "{s}");
    }
    out.into_bytes()
}

pub fn read_trace(path: &Path) -> Result<RawTrace> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_trace_file(&bytes).map_err(|e| e.in_file(path))
}

pub fn save_trace(path: &Path, trace: &RawTrace) -> Result<()> {
    fs::write(path, write_trace_file(trace)).map_err(|e| Error::io(path, e))
}

/// Incremental decoder for the device's newline-delimited ASCII stream.
///
/// Feed arbitrary chunks with [`push`](Self::push); a line is only interpreted
/// once its terminating `\n` arrives. Malformed, empty or out-of-range lines are
/// counted in [`discarded`](Self::discarded) and skipped.
#[derive(Debug)]
pub struct SerialDecoder {
    max: u32,
    pending: Vec<u8>,
    discarded: usize,
}

impl SerialDecoder {
    pub fn new(expected_bits: u32) -> Self {
        SerialDecoder {
            max: max_count(expected_bits.clamp(1, MAX_ADC_BITS)),
            pending: Vec::new(),
            discarded: 0,
        }
    }

    pub fn push(&mut self, chunk: &[u8], out: &mut Vec<u16>) {
        let mut rest = chunk;
        while let Some(pos) = rest.iter().position(|&b| b == b'\n') {
            let (head, tail) = rest.split_at(pos);
            if self.pending.is_empty() {
                self.decode_line(head, out);
            } else {
                let mut line = std::mem::take(&mut self.pending);
                line.extend_from_slice(head);
                self.decode_line(&line, out);
            }
            rest = &tail[1..];
        }
        self.pending.extend_from_slice(rest);
    }

    /// Ends the stream; an unterminated trailing fragment counts as discarded.
    pub fn finish(mut self) -> usize {
        if !self.pending.is_empty() {
            self.discarded += 1;
            self.pending.clear();
        }
        self.discarded
    }

    pub fn discarded(&self) -> usize {
        self.discarded
    }

    fn decode_line(&mut self, line: &[u8], out: &mut Vec<u16>) {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        match parse_count(line) {
            Some(v) if v <= self.max => out.push(v as u16),
            _ => self.discarded += 1,
        }
    }
}

fn parse_count(digits: &[u8]) -> Option<u32> {
    if digits.is_empty() || digits.len() > 9 {
        return None;
    }
    digits.iter().try_fold(0u32, |acc, &b| {
        b.is_ascii_digit().then(|| acc * 10 + u32::from(b - b'0'))
    })
}

/// Decodes a complete stream dump. Returns the samples and how many lines
/// were dropped.
pub fn decode_serial_stream(bytes: &[u8], expected_bits: u32) -> (Vec<u16>, usize) {
    let mut decoder = SerialDecoder::new(expected_bits);
    let mut samples = Vec::new();
    decoder.push(bytes, &mut samples);
    (samples, decoder.finish())
}

/// Traces on disk, one subdirectory per workload class.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root_path: PathBuf,
    /// Sorted by class name; paths sorted lexicographically within a class.
    pub classes: Vec<(String, Vec<PathBuf>)>,
    pub unknown_paths: Option<Vec<PathBuf>>,
}

impl DatasetManifest {
    pub fn n_traces(&self) -> usize {
        self.classes.iter().map(|(_, p)| p.len()).sum()
    }

    /// `(class, path)` pairs in manifest order.
    pub fn entries(&self) -> Vec<(String, PathBuf)> {
        self.classes
            .iter()
            .flat_map(|(c, paths)| paths.iter().map(move |p| (c.clone(), p.clone())))
            .collect()
    }
}

/// Scans `root` for class directories and validates every trace file in them.
pub fn load_manifest(root: &Path) -> Result<DatasetManifest> {
    let mut classes = Vec::new();
    let mut unknown_paths = None;

    for (name, dir) in sorted_entries(root)?.into_iter().filter(|(_, p)| p.is_dir()) {
        let files: Vec<PathBuf> = sorted_entries(&dir)?
            .into_iter()
            .filter(|(_, p)| p.is_file())
            .map(|(_, p)| p)
            .collect();
        if name == UNKNOWN_DIR {
            unknown_paths = Some(files);
            continue;
        }
        if files.is_empty() {
            return Err(Error::Dataset(format!("class directory {} has no traces", dir.display())));
        }
        classes.push((name, files));
    }

    if classes.is_empty() {
        return Err(Error::Dataset(format!(
            "no known classes under {}",
            root.display()
        )));
    }

    let manifest = DatasetManifest {
        root_path: root.to_path_buf(),
        classes,
        unknown_paths,
    };
    let mut all: Vec<PathBuf> = manifest.entries().into_iter().map(|(_, p)| p).collect();
    all.extend(manifest.unknown_paths.iter().flatten().cloned());
    par::try_map(&all, |p| read_trace(p).map(drop))?;
    Ok(manifest)
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}
