//! Locale-independent text output shared by the CSV and SVG writers.

pub mod csv;
pub mod svg;

/// Shortest decimal string that parses back to the same `f64`.
///
/// Plain notation in the usual range, exponent notation outside it so that
/// tiny and huge values stay short.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
