//! Small CSV helpers for series and plot data.

use std::path::Path;

use crate::error::{Error, Result};

/// Shortest round-trip text for a float; non-finite values use `NaN`, `inf`, `-inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        serde_json::to_string(&v).expect("finite float serializes")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::Format(format!("`{s}` is not a number"))),
    }
}

pub fn write_records(path: &Path, header: &[String], records: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Writes equal-length numeric columns.
pub fn write_columns(path: &Path, header: &[String], columns: &[Vec<f64>]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::Shape(format!("{} headers for {} columns", header.len(), columns.len())));
    }
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("columns differ in length".into()));
    }
    let records: Vec<Vec<String>> = (0..n).map(|i| columns.iter().map(|c| fmt_f64(c[i])).collect()).collect();
    write_records(path, header, &records)
}

pub fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = read_records(path)?;
    let mut columns = vec![Vec::with_capacity(rows.len()); header.len()];
    for row in &rows {
        for (c, cell) in columns.iter_mut().zip(row) {
            c.push(parse_f64(cell)?);
        }
    }
    Ok((header, columns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_roundtrips() {
        for v in [0.1, 1e-300, -2.5e17, 0.0, f64::MIN_POSITIVE, 123456.789] {
            assert_eq!(parse_f64(&fmt_f64(v)).unwrap().to_bits(), v.to_bits());
        }
        assert!(parse_f64(&fmt_f64(f64::NAN)).unwrap().is_nan());
    }

    #[test]
    fn columns_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let header = vec!["a".to_string(), "b, quoted".to_string()];
        let cols = vec![vec![1.0, 2.0], vec![0.5, f64::INFINITY]];
        write_columns(&p, &header, &cols).unwrap();
        let (h, c) = read_columns(&p).unwrap();
        assert_eq!(h, header);
        assert_eq!(c, cols);
    }
}
