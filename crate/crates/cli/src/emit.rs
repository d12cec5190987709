//! CSV and JSON artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Writes named columns as CSV: a header row, then one record per point,
/// every float with 17 significant digits.
pub fn emit_csv(columns: &[(&str, &[f64])], path: &Path) -> Result<(), CliError> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    if rows == 0 {
        return Err(CliError::Config(format!("{}: nothing to write", path.display())));
    }
    if columns.iter().any(|c| c.1.len() != rows) {
        return Err(CliError::Config(format!("{}: columns differ in length", path.display())));
    }
    let mut out = columns.iter().map(|c| c.0).collect::<Vec<_>>().join(",");
    out.push('\n');
    for k in 0..rows {
        for (j, (_, col)) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", col[k]).expect("write to string");
        }
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("cannot encode {}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("write to string");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vec<Vec<f64>> {
        text.lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn two_columns_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        emit_csv(&[("x", &[1.0, 2.0, 3.0]), ("y", &[0.5, 0.25, 0.125])], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next(), Some("x,y"));
    }

    #[test]
    fn empty_series_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        assert!(emit_csv(&[("x", &[])], &path).is_err());
        assert!(emit_csv(&[("x", &[1.0]), ("y", &[])], &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn values_survive_a_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let xs = [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1.2345678901234567e-300, 6.02e23, 0.0];
        let ys = [f64::MIN_POSITIVE, f64::MAX, -0.0, 7.0, 1e-17, std::f64::consts::PI];
        emit_csv(&[("x", &xs), ("y", &ys)], &path).unwrap();
        let back = parse(&std::fs::read_to_string(&path).unwrap());
        for (k, row) in back.iter().enumerate() {
            assert_eq!(row[0].to_bits(), xs[k].to_bits());
            assert_eq!(row[1].to_bits(), ys[k].to_bits());
        }
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
