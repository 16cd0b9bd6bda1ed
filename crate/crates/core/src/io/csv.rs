//! Minimal numeric CSV: one header line, comma-separated finite floats.

use super::fmt_f64;
use crate::error::{Error, Result};

/// Writes a header and numeric rows.
pub fn write_rows<'a, I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses text written by [`write_rows`] with the given header.
///
/// Blank lines are skipped; every other line must have exactly
/// `header.len()` finite numeric fields.
pub fn parse_rows(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::Parse { line: 1, reason: "empty input".into() })?;
    let got: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if got != header {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`, found `{}`", header.join(","), first.trim()),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                reason: format!("not a number: `{}`", f.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: idx + 1, reason: format!("non-finite value `{}`", f.trim()) });
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}
