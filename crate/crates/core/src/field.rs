//! Nodal fields on logically rectangular grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv, svg};

/// Values on the nodes `(x_i, y_ij)` with `y_ij = bottom_i + η_j (top_i - bottom_i)`.
///
/// Rectangles have constant `bottom` and `top`; the Keldysh domain has a
/// curved top boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub x: Vec<f64>,
    /// Normalized transverse coordinate in `[0, 1]`.
    pub eta: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    /// `values[i * eta.len() + j]`.
    pub values: Vec<f64>,
    pub meta: SolveMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub iterations: usize,
    /// Update or residual norm per iteration.
    pub history: Vec<f64>,
    /// Residual of the final discrete system.
    pub residual: f64,
    /// Set when a safeguard (e.g. an ellipticity clamp) was active in the returned iterate.
    pub unreliable: bool,
    pub notes: Vec<String>,
}

impl Field2D {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.eta.len()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.eta.len() + j
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.bottom[i] + self.eta[j] * (self.top[i] - self.bottom[i])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `x,y,<value_name>`, x-major.
    pub fn to_csv(&self, value_name: &str) -> String {
        let mut rows = Vec::with_capacity(self.values.len());
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                rows.push([self.x[i], self.y(i, j), self.at(i, j)]);
            }
        }
        csv::write_rows(&["x", "y", value_name], rows.iter().map(|r| r.as_slice()))
    }

    /// Heatmap in `(x, η)`; the vertical axis is the normalized coordinate.
    pub fn to_svg(&self, title: &str, value_name: &str) -> String {
        svg::heatmap(title, "x", &format!("normalized y ({value_name})"), &self.x, &self.eta, &self.values)
    }
}

/// Parses `x,y,<value_name>` CSV into rows.
pub fn parse_field_csv(text: &str, value_name: &str) -> Result<Vec<[f64; 3]>> {
    csv::parse_rows(text, &["x", "y", value_name])?
        .into_iter()
        .map(|r| r.try_into().map_err(|_| Error::Parse { line: 0, reason: "bad row width".into() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let f = Field2D {
            x: vec![0.0, 1.0],
            eta: vec![0.0, 0.5, 1.0],
            bottom: vec![-1.0, -1.0],
            top: vec![1.0, 3.0],
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            meta: SolveMeta::default(),
        };
        assert_eq!(f.y(1, 1), 1.0);
        let rows = parse_field_csv(&f.to_csv("w"), "w").unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[4], [1.0, 1.0, 4.0]);
    }
}
