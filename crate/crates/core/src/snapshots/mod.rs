//! Snapshot matrices: one column per time instance of a discretized field.
//!
//! A [`SnapshotMatrix`] carries its uniform time grid (`t0`, `dt`) so that
//! splitting, shifting and rollouts keep the time metadata consistent.

mod io;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load, load_binary, load_csv, read_binary, save, save_binary, save_csv, write_binary};

/// Trajectory of one field sampled on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    values: Mat<f64>,
    dt: f64,
    t0: f64,
    label: String,
}

impl SnapshotMatrix {
    /// Wraps `values` (rows = degrees of freedom, columns = time instances).
    pub fn new(values: Mat<f64>, dt: f64, t0: f64, label: impl Into<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("snapshot matrix must be non-empty"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(Error::invalid("initial time must be finite"));
        }
        for j in 0..values.ncols() {
            if let Some(i) = values.col_as_slice(j).iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
            }
        }
        Ok(Self {
            values,
            dt,
            t0,
            label: label.into(),
        })
    }

    /// Builds a matrix from a list of equally long columns.
    pub fn from_columns(
        columns: &[Vec<f64>],
        dt: f64,
        t0: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n_dof = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_dof) {
            return Err(Error::dims("columns have different lengths"));
        }
        let values = Mat::from_fn(n_dof, columns.len(), |i, j| columns[j][i]);
        Self::new(values, dt, t0, label)
    }

    pub fn n_dof(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_time(&self) -> usize {
        self.values.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn into_values(self) -> Mat<f64> {
        self.values
    }

    pub fn column(&self, k: usize) -> &[f64] {
        self.values.col_as_slice(k)
    }

    /// Time of column `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Contiguous copy of columns `start..start + count`, with shifted `t0`.
    pub fn columns(&self, start: usize, count: usize) -> Result<Self> {
        if count == 0 || start + count > self.n_time() {
            return Err(Error::invalid(format!(
                "column range {start}..{} outside 0..{}",
                start + count,
                self.n_time()
            )));
        }
        Ok(Self {
            values: self.values.subcols(start, count).to_owned(),
            dt: self.dt,
            t0: self.time(start),
            label: self.label.clone(),
        })
    }

    /// Copy restricted to the given rows, in the given order.
    pub fn rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_dof()) {
            return Err(Error::invalid(format!("row {bad} out of range 0..{}", self.n_dof())));
        }
        let values = Mat::from_fn(rows.len(), self.n_time(), |i, j| self.values[(rows[i], j)]);
        Self::new(values, self.dt, self.t0, self.label.clone())
    }

    /// Columns in reverse chronological order. The time grid is re-labelled
    /// so that column 0 sits at `t0` again.
    pub fn reversed(&self) -> Self {
        Self {
            values: self.values.reverse_cols().to_owned(),
            dt: self.dt,
            t0: self.t0,
            label: self.label.clone(),
        }
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            Mat::from_fn(self.n_dof(), self.n_time(), |i, j| c * self.values[(i, j)]),
            self.dt,
            self.t0,
            self.label.clone(),
        )
    }
}

/// Consecutive-transition view of a snapshot matrix: `x_prime` column `k`
/// is the successor of `x` column `k`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftPair<'a> {
    pub x: MatRef<'a, f64>,
    pub x_prime: MatRef<'a, f64>,
}

impl ShiftPair<'_> {
    pub fn n_dof(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_transitions(&self) -> usize {
        self.x.ncols()
    }
}

pub fn shift_pair(s: &SnapshotMatrix) -> Result<ShiftPair<'_>> {
    let n = s.n_time();
    if n < 2 {
        return Err(Error::invalid(format!(
            "shift pair needs at least 2 columns, got {n}"
        )));
    }
    let v = s.values();
    Ok(ShiftPair {
        x: v.subcols(0, n - 1),
        x_prime: v.subcols(1, n - 1),
    })
}

/// Chronological split: the first `n_train` columns, then the next `n_test`.
pub fn split_train_test(
    s: &SnapshotMatrix,
    n_train: usize,
    n_test: usize,
) -> Result<(SnapshotMatrix, SnapshotMatrix)> {
    if n_train < 2 {
        return Err(Error::invalid(format!("n_train must be at least 2, got {n_train}")));
    }
    if n_test < 1 {
        return Err(Error::invalid("n_test must be at least 1"));
    }
    if n_train + n_test > s.n_time() {
        return Err(Error::invalid(format!(
            "n_train + n_test = {} exceeds the {} available columns",
            n_train + n_test,
            s.n_time()
        )));
    }
    Ok((s.columns(0, n_train)?, s.columns(n_train, n_test)?))
}

/// Per-DOF mean removed from a snapshot matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub mean: Vec<f64>,
    pub applied: bool,
}

impl NormalizationRecord {
    /// Record that leaves data untouched.
    pub fn identity(n_dof: usize) -> Self {
        Self {
            mean: vec![0.0; n_dof],
            applied: false,
        }
    }

    /// Subtracts the mean from a single vector (no-op when not applied).
    pub fn remove(&self, x: &[f64]) -> Vec<f64> {
        if self.applied {
            x.iter().zip(&self.mean).map(|(v, m)| v - m).collect()
        } else {
            x.to_vec()
        }
    }

    /// Adds the mean back to a single vector (no-op when not applied).
    pub fn restore(&self, x: &[f64]) -> Vec<f64> {
        if self.applied {
            x.iter().zip(&self.mean).map(|(v, m)| v + m).collect()
        } else {
            x.to_vec()
        }
    }
}

pub fn demean(s: &SnapshotMatrix) -> (SnapshotMatrix, NormalizationRecord) {
    let n = s.n_time() as f64;
    let v = s.values();
    let mean: Vec<f64> = (0..s.n_dof())
        .map(|i| (0..s.n_time()).map(|j| v[(i, j)]).sum::<f64>() / n)
        .collect();
    let values = Mat::from_fn(s.n_dof(), s.n_time(), |i, j| v[(i, j)] - mean[i]);
    let out = SnapshotMatrix {
        values,
        dt: s.dt,
        t0: s.t0,
        label: s.label.clone(),
    };
    (out, NormalizationRecord { mean, applied: true })
}

/// Inverse of [`demean`].
pub fn remean(s: &SnapshotMatrix, record: &NormalizationRecord) -> Result<SnapshotMatrix> {
    if record.mean.len() != s.n_dof() {
        return Err(Error::dims(format!(
            "normalization mean has length {}, matrix has {} rows",
            record.mean.len(),
            s.n_dof()
        )));
    }
    if !record.applied {
        return Ok(s.clone());
    }
    let v = s.values();
    let values = Mat::from_fn(s.n_dof(), s.n_time(), |i, j| v[(i, j)] + record.mean[i]);
    SnapshotMatrix::new(values, s.dt, s.t0, s.label.clone())
}
