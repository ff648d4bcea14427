use std::path::Path;

use crate::error::{CliError, Result};

const AXES: [&str; 3] = ["x", "y", "z"];

/// Header for full coordinate `index` with a unit suffix, e.g. `n3_y_m`.
pub fn coordinate_name(index: usize, unit: &str) -> String {
    format!("n{}_{}_{unit}", index / 3 + 1, AXES[index % 3])
}

pub fn force_name(element: usize) -> String {
    format!("t_c{}_N", element + 1)
}

pub fn rest_length_name(element: usize) -> String {
    format!("l0_c{}_m", element + 1)
}

/// Shortest round-trip text, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Numeric table written as CSV. The first column is the independent
/// variable (time or substep).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Self {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV bytes. Numbers use the shortest representation that round-trips.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_number(v)))
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<()> {
        let bytes = self.to_csv();
        match path {
            Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
            None => crate::commands::print_stdout(&bytes),
        }
    }
}
