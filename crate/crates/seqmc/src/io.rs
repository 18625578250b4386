//! Plain-text observation I/O.
//!
//! Observations travel as comma-separated rows, one time step per line,
//! one column per observation coordinate. Values are written with Rust's
//! shortest round-trip float formatting, so writing and re-reading a
//! sequence reproduces it bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::ensemble::ObsVec;
use crate::error::{Error, Result};
use crate::Scalar;

/// Reads observations from a CSV file. See [`read_observations`] for the
/// accepted format; a missing or unreadable file is reported with its path.
pub fn read_csv<const DY: usize>(path: impl AsRef<Path>) -> Result<Vec<ObsVec<DY>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::FileNotFound {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    read_observations(BufReader::new(file))
}

/// Reads comma-separated observation rows from any buffered reader.
///
/// Whitespace around values is ignored and blank lines are skipped. Every
/// non-blank line must hold exactly `DY` finite numbers; anything else is
/// an error naming the 1-based line.
pub fn read_observations<const DY: usize, R: BufRead>(reader: R) -> Result<Vec<ObsVec<DY>>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = ObsVec::<DY>::zeros();
        let mut count = 0usize;
        for token in line.split(',') {
            let token = token.trim();
            let value: Scalar = token.parse().map_err(|_| Error::ParseError {
                line: line_no,
                msg: format!("not a number: {token:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::ParseError {
                    line: line_no,
                    msg: format!("non-finite value: {token:?}"),
                });
            }
            if count < DY {
                row[count] = value;
            }
            count += 1;
        }
        if count != DY {
            return Err(Error::DimensionMismatch(format!(
                "line {line_no}: expected {DY} values per row, found {count}"
            )));
        }
        out.push(row);
    }
    Ok(out)
}

/// Formats one row of values as `a, b, c` with round-trip precision.
pub fn format_row(values: &[Scalar]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes one row followed by a newline.
pub fn write_row<W: Write>(writer: &mut W, values: &[Scalar]) -> std::io::Result<()> {
    writeln!(writer, "{}", format_row(values))
}
