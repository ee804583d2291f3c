//! Versioned, checksummed text serialization of fitted pipelines.
//!
//! Layout:
//!
//! ```text
//! portscope-model
//! format_version=1
//! sha256=<hex digest of everything after this line>
//! <pretty-printed JSON body>
//! ```
//!
//! The version line is read before anything else so an old reader reports
//! the version instead of a checksum or schema failure.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::{PipelineModel, FORMAT_VERSION};

pub const MAGIC: &str = "portscope-model";

fn digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

pub fn save_model(model: &PipelineModel) -> Result<Vec<u8>> {
    model.validate()?;
    let body = serde_json::to_string_pretty(model).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let mut out = format!("{MAGIC}\nformat_version={}\nsha256={}\n", model.format_version, digest(body.as_bytes()));
    out.push_str(&body);
    out.push('\n');
    Ok(out.into_bytes())
}

fn take_line<'a>(rest: &mut &'a [u8], what: &str) -> Result<&'a str> {
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptModel(format!("truncated before {what}")))?;
    let line = std::str::from_utf8(&rest[..end]).map_err(|_| Error::CorruptModel(format!("{what} is not UTF-8")))?;
    *rest = &rest[end + 1..];
    Ok(line)
}

pub fn load_model(bytes: &[u8]) -> Result<PipelineModel> {
    let mut rest = bytes;
    if take_line(&mut rest, "header")? != MAGIC {
        return Err(Error::CorruptModel("not a model document".into()));
    }
    let version_line = take_line(&mut rest, "format version")?;
    let version: u32 = version_line
        .strip_prefix("format_version=")
        .and_then(|v| if v.starts_with('+') { None } else { v.parse().ok() })
        .ok_or_else(|| Error::CorruptModel(format!("bad version line {version_line:?}")))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let sum_line = take_line(&mut rest, "checksum")?;
    let expected = sum_line
        .strip_prefix("sha256=")
        .ok_or_else(|| Error::CorruptModel(format!("bad checksum line {sum_line:?}")))?;
    let body = rest
        .strip_suffix(b"\n")
        .ok_or_else(|| Error::CorruptModel("missing final newline".into()))?;
    if digest(body) != expected {
        return Err(Error::CorruptModel("checksum mismatch".into()));
    }
    let model: PipelineModel = serde_json::from_slice(body).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if model.format_version != version {
        return Err(Error::CorruptModel("body and header versions differ".into()));
    }
    model.validate()?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &PipelineModel) -> Result<()> {
    std::fs::write(path, save_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<PipelineModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    load_model(&bytes).map_err(|e| e.in_file(path))
}

/// Serde adapter for `Vec<f64>` that may hold infinities or NaN, which JSON
/// numbers cannot represent. Non-finite entries become `"inf"`, `"-inf"` or
/// `"nan"`.
pub mod extended_floats {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> = values
            .iter()
            .map(|&v| match v {
                v if v.is_finite() => Repr::Num(v),
                v if v.is_nan() => Repr::Text("nan".into()),
                v if v > 0.0 => Repr::Text("inf".into()),
                _ => Repr::Text("-inf".into()),
            })
            .collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(v) => Ok(v),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(de::Error::custom(format!("invalid float {other:?}"))),
                },
            })
            .collect()
    }
}
