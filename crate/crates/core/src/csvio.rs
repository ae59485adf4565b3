//! Plot-ready CSV files for phase scans and RB datasets.
//!
//! Writers emit a fixed header, `\n` line endings and the shortest decimal
//! form that reads back to the same `f64`, so reading and rewriting a file
//! produced here reproduces it byte for byte.

use std::io::{Read, Write};

use num_complex::Complex;

use crate::error::Error;
use crate::loopback::ScanResult;
use crate::rbfit::{RbDataset, RbPoint};

pub const SCAN_HEADER: [&str; 3] = ["drive_phase_rad", "acc_re", "acc_im"];
pub const RB_HEADER: [&str; 3] = ["m", "survival", "shots"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("{0}")]
    Invalid(#[from] Error),
}

fn write_rows<W: Write>(mut w: W, header: &[&str], rows: impl Iterator<Item = [String; 3]>) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()
}

pub fn write_scan_csv<W: Write>(w: W, scan: &ScanResult<f64>) -> std::io::Result<()> {
    let rows = scan
        .drive_phases()
        .iter()
        .zip(scan.accumulated())
        .map(|(t, z)| [t.to_string(), z.re.to_string(), z.im.to_string()]);
    write_rows(w, &SCAN_HEADER, rows)
}

pub fn write_rb_csv<W: Write>(w: W, data: &RbDataset<f64>) -> std::io::Result<()> {
    let rows = data
        .points
        .iter()
        .map(|p| [p.m.to_string(), p.survival.to_string(), p.shots.to_string()]);
    write_rows(w, &RB_HEADER, rows)
}

/// Yields `(line, fields)` after checking the header.
fn records<R: Read>(r: R, header: &[&str; 3]) -> Result<Vec<(u64, [String; 3])>, CsvError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CsvError::Row { line, message: e.to_string() }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(CsvError::Row { line, message: format!("expected 3 fields, found {}", rec.len()) });
        }
        let fields = [rec[0].to_string(), rec[1].to_string(), rec[2].to_string()];
        if !seen_header {
            if fields.iter().map(String::as_str).ne(header.iter().copied()) {
                return Err(CsvError::Row { line, message: format!("header must be {}", header.join(",")) });
            }
            seen_header = true;
            continue;
        }
        out.push((line, fields));
    }
    if !seen_header {
        return Err(CsvError::Row { line: 1, message: "empty file".into() });
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(line: u64, column: &str, s: &str) -> Result<T, CsvError> {
    s.parse().map_err(|_| CsvError::Row { line, message: format!("{column}: cannot parse {s:?}") })
}

pub fn read_scan_csv<R: Read>(r: R) -> Result<ScanResult<f64>, CsvError> {
    let mut phases = Vec::new();
    let mut values = Vec::new();
    for (line, f) in records(r, &SCAN_HEADER)? {
        let t: f64 = parse(line, SCAN_HEADER[0], &f[0])?;
        let re: f64 = parse(line, SCAN_HEADER[1], &f[1])?;
        let im: f64 = parse(line, SCAN_HEADER[2], &f[2])?;
        if !(t.is_finite() && re.is_finite() && im.is_finite()) {
            return Err(CsvError::Row { line, message: "non-finite value".into() });
        }
        phases.push(t);
        values.push(Complex::new(re, im));
    }
    Ok(ScanResult::new(phases, values)?)
}

pub fn read_rb_csv<R: Read>(r: R, dimension: u32) -> Result<RbDataset<f64>, CsvError> {
    let mut points = Vec::new();
    for (line, f) in records(r, &RB_HEADER)? {
        let p = RbPoint {
            m: parse(line, RB_HEADER[0], &f[0])?,
            survival: parse(line, RB_HEADER[1], &f[1])?,
            shots: parse(line, RB_HEADER[2], &f[2])?,
        };
        RbDataset::new(vec![p], dimension).map_err(|e| CsvError::Row { line, message: e.to_string() })?;
        points.push(p);
    }
    Ok(RbDataset::new(points, dimension)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbfit::{doubling_lengths, gen_synthetic_rb};

    #[test]
    fn scan_round_trip_is_byte_identical() {
        let vals = (0..16)
            .map(|k| Complex::from_polar(1234.5678 + k as f64 * 1e-9, 0.1 * k as f64) * 1e-3)
            .collect();
        let scan = ScanResult::uniform(vals).unwrap();
        let mut a = Vec::new();
        write_scan_csv(&mut a, &scan).unwrap();
        let back = read_scan_csv(a.as_slice()).unwrap();
        assert_eq!(back, scan);
        let mut b = Vec::new();
        write_scan_csv(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("drive_phase_rad,acc_re,acc_im\n"));
    }

    #[test]
    fn rb_round_trip_is_byte_identical() {
        let d = gen_synthetic_rb(0.95, 0.99, &doubling_lengths(256), 1000, 1, 2).unwrap();
        let mut a = Vec::new();
        write_rb_csv(&mut a, &d).unwrap();
        let back = read_rb_csv(a.as_slice(), 2).unwrap();
        assert_eq!(back, d);
        let mut b = Vec::new();
        write_rb_csv(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "m,survival,shots\n2,0.9,100\n4,zero,100\n";
        match read_rb_csv(text.as_bytes(), 2) {
            Err(CsvError::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "m,survival,shots\n2,0.9,100\n4,1.2,100\n";
        match read_rb_csv(text.as_bytes(), 2) {
            Err(CsvError::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("survival"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = "drive_phase_rad,acc_re\n0,1\n";
        assert!(matches!(read_scan_csv(text.as_bytes()), Err(CsvError::Row { line: 1, .. })));
        let text = "a,b,c\n";
        assert!(matches!(read_scan_csv(text.as_bytes()), Err(CsvError::Row { line: 1, .. })));
    }
}
