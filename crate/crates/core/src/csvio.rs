//! Feature table CSV: `trace_id,label,<feature names...>`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub fn write_features<W: Write>(out: W, names: &[String], rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["trace_id".to_string(), "label".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for row in rows {
        if row.values.len() != names.len() {
            return Err(Error::Dimension {
                expected: names.len(),
                actual: row.values.len(),
            });
        }
        let mut record = vec![row.trace_id.clone(), row.label.clone().unwrap_or_default()];
        record.extend(row.values.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_features(path: &Path, names: &[String], rows: &[FeatureVector]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(std::io::BufWriter::new(file), names, rows).map_err(|e| e.in_file(path))
}

pub fn read_features<R: Read>(input: R) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "trace_id" || &header[1] != "label" {
        return Err(Error::parse(1, "expected header trace_id,label,<features...>"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::parse(line, format!("{} fields, expected {}", record.len(), header.len())));
        }
        ids.push(record[0].to_string());
        labels.push(record[1].to_string());
        for (j, field) in record.iter().skip(2).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("{}: not a number: {field:?}", names[j])))?;
            data.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::Dataset("feature table has no rows".into()));
    }
    let matrix = Array2::from_shape_vec((ids.len(), names.len()), data).expect("row widths checked");
    LabeledDataset::new(matrix, labels, names, ids)
}

pub fn load_features(path: &Path) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(std::io::BufReader::new(file)).map_err(|e| e.in_file(path))
}
