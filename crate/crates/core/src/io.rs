//! CSV formatting shared by every exporter.

use std::io::{self, BufRead, Write};

use crate::INF;

/// 17 significant digits; the `+∞` sentinel prints as `inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v >= INF {
        "inf".to_string()
    } else if v <= -INF {
        "-inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Parses a value written by [`fmt_f64`].
pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(INF),
        "-inf" => Some(-INF),
        other => other.parse().ok(),
    }
}

pub(crate) fn header(prefix: &[&str], axis: &str, n: usize, suffix: &[&str]) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("{axis}{i}")));
    cols.extend(suffix.iter().map(|s| s.to_string()));
    cols.join(",")
}

pub(crate) fn write_row<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let row: Vec<String> = values.into_iter().map(fmt_f64).collect();
    writeln!(w, "{}", row.join(","))
}

/// Reads rows of numbers, skipping a non-numeric header line.
pub fn read_rows<R: BufRead>(r: R) -> io::Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Option<Vec<f64>> = line.split(',').map(parse_f64).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if i == 0 => continue,
            None => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("line {}: not a numeric row", i + 1),
                ))
            }
        }
    }
    Ok(rows)
}
