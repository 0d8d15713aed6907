//! Matrix CSV reading and writing.
//!
//! One matrix per file, one row per line, comma-separated, no header.
//! Floats are printed with 17 significant digits so a write/read round
//! trip reproduces the f64 bit pattern.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::Error;
use crate::Result;

/// Format an f64 with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                write!(w, ",")?;
            }
            write!(w, "{}", format_f64(m[(r, c)]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_matrix_file<P: AsRef<Path>>(path: P, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)?;
    f.flush()?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {}", lineno + 1, e)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} columns, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

pub fn read_matrix_file<P: AsRef<Path>>(path: P) -> Result<DMatrix<f64>> {
    let f = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::Parse(format!("cannot open {}: {}", path.as_ref().display(), e))
    })?;
    read_matrix(BufReader::new(f))
}
