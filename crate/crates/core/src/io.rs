//! Reading and writing pair datasets as delimited text.
//!
//! Accepted input: two non-negative integer columns `x, y`, optionally a third
//! `count` column that repeats the pair, an optional header row, and `#`
//! comments. The delimiter (comma, tab or semicolon) is detected from the
//! first non-blank line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::Dataset;
use crate::error::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error(transparent)]
    Data(#[from] Error),
}

fn detect_delimiter(text: &str) -> u8 {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    b"\t;,"
        .iter()
        .copied()
        .max_by_key(|&d| line.bytes().filter(|&b| b == d).count())
        .filter(|&d| line.as_bytes().contains(&d))
        .unwrap_or(b',')
}

fn parse_count(field: &str, row: u64, column: &str) -> Result<u64, LoadError> {
    field.parse::<u64>().map_err(|_| LoadError::Parse {
        row,
        message: format!("{column} must be a non-negative integer, got '{field}'"),
    })
}

/// Parses delimited text into a dataset. Row numbers in errors are 1-based
/// line numbers of the input.
pub fn parse_dataset(text: &str) -> Result<Dataset, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut pairs = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| LoadError::Parse {
            row: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(i as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let is_numeric = |s: &str| s.parse::<f64>().is_ok();
        if i == 0 && !record.iter().all(is_numeric) {
            // header
            width = Some(record.len());
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(LoadError::Parse {
                row,
                message: format!("expected 2 or 3 columns, found {}", record.len()),
            });
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(LoadError::Parse {
                    row,
                    message: format!(
                        "expected {w} columns like the first row, found {}",
                        record.len()
                    ),
                })
            }
            _ => width = Some(record.len()),
        }
        let to_u32 = |field: &str, column: &str| -> Result<u32, LoadError> {
            let v = parse_count(field, row, column)?;
            u32::try_from(v).map_err(|_| LoadError::Parse {
                row,
                message: format!("{column} value {v} is too large"),
            })
        };
        let x = to_u32(&record[0], "x")?;
        let y = to_u32(&record[1], "y")?;
        let reps = match record.get(2) {
            Some(c) => parse_count(c, row, "count")?,
            None => 1,
        };
        pairs.extend(std::iter::repeat_n((x, y), reps as usize));
    }
    let data = Dataset::new(pairs);
    data.require_nonempty()?;
    Ok(data)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text)
}

/// Writes `x,y` rows with a header; the output reads back with
/// [`load_dataset`].
pub fn write_dataset<W: Write>(mut out: W, data: &Dataset) -> std::io::Result<()> {
    writeln!(out, "x,y")?;
    for (x, y) in data.pairs() {
        writeln!(out, "{x},{y}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let d = parse_dataset("x,y\n0,0\n1,2\n").unwrap();
        assert_eq!(d.pairs(), &[(0, 0), (1, 2)]);
    }

    #[test]
    fn grouped_counts_expand() {
        let d = parse_dataset("x,y,count\n0,0,3\n2,1,0\n1,1,1\n").unwrap();
        assert_eq!(d.pairs(), &[(0, 0), (0, 0), (0, 0), (1, 1)]);
    }

    #[test]
    fn negative_entry_names_row() {
        let e = parse_dataset("0,0\n1,-2\n").unwrap_err();
        assert!(matches!(e, LoadError::Parse { row: 2, .. }), "{e}");
        assert!(e.to_string().starts_with("row 2:"));
        let e = parse_dataset("x,y\n1,2.5\n").unwrap_err();
        assert!(matches!(e, LoadError::Parse { row: 2, .. }), "{e}");
    }

    #[test]
    fn delimiters_are_detected() {
        for text in ["3\t4\n5\t6\n", "3;4\n5;6\n", " 3 , 4 \n5,6\n"] {
            assert_eq!(parse_dataset(text).unwrap().pairs(), &[(3, 4), (5, 6)]);
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        for text in ["", "x,y\n", "\n\n", "x,y,count\n1,1,0\n"] {
            assert!(matches!(
                parse_dataset(text),
                Err(LoadError::Data(Error::EmptySample(_)))
            ));
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            parse_dataset("1,2\n1,2,3\n"),
            Err(LoadError::Parse { row: 2, .. })
        ));
        assert!(matches!(
            parse_dataset("1\n"),
            Err(LoadError::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let d = Dataset::new(vec![(0, 1), (7, 3)]);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        assert_eq!(
            parse_dataset(std::str::from_utf8(&buf).unwrap()).unwrap(),
            d
        );
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_dataset("/nonexistent/pairs.csv"),
            Err(LoadError::Io { .. })
        ));
    }
}
