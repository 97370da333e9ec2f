//! Single-column CSV: one value per row, optional header.
//!
//! A header is recognised only on the first row, and only when that row
//! does not parse as a number.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use tildeq_core::series::WindowedDataset;
use tildeq_core::Series;

use crate::error::{io_err, Error, Result};

pub fn read_series(path: &Path) -> Result<Series> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_series(file, &path.display().to_string())
}

/// Parses a series from any reader; `origin` labels error messages.
pub fn parse_series<R: Read>(reader: R, origin: &str) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut values = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        if record.len() != 1 {
            return Err(parse_err(line, format!("expected one value, found {} fields", record.len())));
        }
        let field = &record[0];
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(parse_err(line, format!("non-finite value {field:?}"))),
            Err(_) if index == 0 => {} // header
            Err(_) => return Err(parse_err(line, format!("not a number: {field:?}"))),
        }
    }
    if values.is_empty() {
        return Err(parse_err(0, "no values".to_string()));
    }
    Ok(Series::new(values)?)
}

pub fn write_series(path: &Path, header: Option<&str>, values: &[f64]) -> Result<()> {
    let mut out = Vec::with_capacity(values.len() * 20);
    write_column(&mut out, header, values).map_err(io_err(path))?;
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_column<W: Write>(mut w: W, header: Option<&str>, values: &[f64]) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(w, "{h}")?;
    }
    for v in values {
        // `{}` prints the shortest representation that parses back exactly
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Writes every item as its input followed by its target, on the original
/// scale. Reloading with a record-per-item preset restores the items.
pub fn write_records(path: &Path, dataset: &WindowedDataset) -> Result<()> {
    let raw = dataset.denormalize()?;
    let values: Vec<f64> = raw
        .items()
        .iter()
        .flat_map(|it| it.input.iter().chain(it.target.iter()).copied())
        .collect();
    write_series(path, Some("value"), &values)
}
