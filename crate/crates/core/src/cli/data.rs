//! CSV data files: header `u1..um,y1..yp`, one row per sample.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::IoRecord;

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), msg: msg.into() }
}

/// Splits a header into input and output counts, checking the naming.
fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let m = names.iter().take_while(|n| n.starts_with('u')).count();
    let p = names.len() - m;
    for (k, name) in names.iter().enumerate() {
        let expected = if k < m { format!("u{}", k + 1) } else { format!("y{}", k - m + 1) };
        if *name != expected {
            return Err(format_err(path, format!("column {} is '{name}', expected '{expected}'", k + 1)));
        }
    }
    if p == 0 {
        return Err(format_err(path, "no output columns (y1..yp)"));
    }
    Ok((m, p))
}

/// Reads a data file. `inputs`/`outputs`, when given, must agree with the
/// header.
pub fn read_record(path: &Path, inputs: Option<usize>, outputs: Option<usize>) -> Result<IoRecord> {
    let file = std::fs::File::open(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    let (m, p) = parse_header(path, &header)?;
    if inputs.is_some_and(|v| v != m) || outputs.is_some_and(|v| v != p) {
        return Err(format_err(
            path,
            format!(
                "header has {m} inputs and {p} outputs, flags say {} and {}",
                inputs.map_or("-".into(), |v| v.to_string()),
                outputs.map_or("-".into(), |v| v.to_string())
            ),
        ));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        if rec.len() != m + p {
            return Err(format_err(path, format!("row {} has {} fields, expected {}", line + 2, rec.len(), m + p)));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("row {}: '{field}' is not a number", line + 2)))?;
            if !v.is_finite() {
                return Err(format_err(path, format!("row {}: non-finite value", line + 2)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(format_err(path, "no samples"));
    }
    let all = DMatrix::from_row_slice(rows, m + p, &values);
    IoRecord::new(all.columns(0, m).into_owned(), all.columns(m, p).into_owned())
}

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn record_to_csv(rec: &IoRecord) -> Vec<u8> {
    let mut out = Vec::new();
    let mut names: Vec<String> = (1..=rec.m()).map(|j| format!("u{j}")).collect();
    names.extend((1..=rec.p()).map(|j| format!("y{j}")));
    writeln!(out, "{}", names.join(",")).unwrap();
    for k in 0..rec.len() {
        let row: Vec<String> = rec.u.row(k).iter().chain(rec.y.row(k).iter()).map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

/// Writes via a temporary file in the target directory and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let rec = IoRecord::new(
            dmatrix![0.1, -1e-300; 1.0 / 3.0, 2.5e17; std::f64::consts::PI, 0.0],
            dmatrix![-7.0 / 9.0; 1e-17; 123456789.123456789],
        )
        .unwrap();
        write_atomic(&path, &record_to_csv(&rec)).unwrap();
        assert_eq!(read_record(&path, Some(2), Some(1)).unwrap(), rec);
    }

    #[test]
    fn header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "u1,y2\n1,2\n").unwrap();
        assert!(matches!(read_record(&path, None, None), Err(Error::Format { .. })));
        std::fs::write(&path, "u1,y1\n1,2\n").unwrap();
        assert!(read_record(&path, Some(2), None).is_err());
        std::fs::write(&path, "u1,y1\n1\n").unwrap();
        assert!(read_record(&path, None, None).is_err());
        std::fs::write(&path, "y1,y2\n1,2\n3,4\n").unwrap();
        let rec = read_record(&path, None, None).unwrap();
        assert_eq!((rec.m(), rec.p(), rec.len()), (0, 2, 2));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_record(Path::new("/nonexistent/x.csv"), None, None).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
