//! Numeric data tables with a missingness mask.

use crate::error::{Error, Result};

/// An `n x d` table of reals stored row-major. Missing cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl DataTable {
    /// Builds a table from rows. `NaN` marks a missing cell; infinities are rejected.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::input(format!(
                    "row {i} has {} cells, expected {d}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| v.is_infinite()) {
                return Err(Error::input(format!("infinite value at ({i}, {j})")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            names,
            n_rows: rows.len(),
            values,
        })
    }

    /// Builds a table with generated column names `V1..Vd`.
    pub fn from_unnamed_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::from_rows(default_names(d), rows)
    }

    pub(crate) fn from_raw(names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_rows * names.len());
        Self {
            names,
            n_rows,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Raw cell value; `NaN` when missing.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.value(i, j);
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let d = self.n_cols();
        self.values[i * d + j] = v;
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.value(i, j).is_nan()
    }

    /// Observed values of column `j`.
    pub fn observed_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).filter_map(|i| self.get(i, j)).collect()
    }

    pub fn missing_count(&self, j: usize) -> usize {
        (0..self.n_rows).filter(|&i| self.is_missing(i, j)).count()
    }

    pub fn total_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// New table keeping the given columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DataTable {
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            values.extend(cols.iter().map(|&j| self.value(i, j)));
        }
        DataTable::from_raw(names, self.n_rows, values)
    }

    /// Applies `f(row, col, value)` to every observed cell.
    pub fn map_observed(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> DataTable {
        let d = self.n_cols();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| if v.is_nan() { v } else { f(k / d, k % d, v) })
            .collect();
        DataTable::from_raw(self.names.clone(), self.n_rows, values)
    }
}

pub(crate) fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("V{j}")).collect()
}

/// Median of a slice; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}
