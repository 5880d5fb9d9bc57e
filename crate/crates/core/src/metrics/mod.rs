//! Relative errors, train-size sweeps and timing reports.
//!
//! Norms are plain Euclidean norms of snapshot columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocp::OcpSolution;
use crate::partitioned::{train, TrainConfig};
use crate::snapshots::SnapshotMatrix;

fn norm2(x: impl Iterator<Item = f64>) -> f64 {
    // scaled accumulation so that tiny or huge entries do not under/overflow
    let v: Vec<f64> = x.collect();
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|a| (a / scale).powi(2)).sum::<f64>().sqrt()
}

/// `‖x - x̃‖ / ‖x‖`.
///
/// A zero reference gives `Some(0.0)` when the approximation is zero too and
/// `None` (undefined) otherwise.
pub fn pointwise_relative_error(truth: &[f64], approx: &[f64]) -> Result<Option<f64>> {
    if truth.len() != approx.len() {
        return Err(Error::dims(format!(
            "reference of length {} against approximation of length {}",
            truth.len(),
            approx.len()
        )));
    }
    let num = norm2(truth.iter().zip(approx).map(|(a, b)| a - b));
    let den = norm2(truth.iter().copied());
    if den == 0.0 {
        return Ok((num == 0.0).then_some(0.0));
    }
    Ok(Some(num / den))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Reconstruction,
    PredictionSweep,
}

/// Error values against time indices or train sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub abscissae: Vec<usize>,
    pub values: Vec<f64>,
    pub label: String,
    pub kind: CurveKind,
}

impl ErrorCurve {
    pub fn new(abscissae: Vec<usize>, values: Vec<f64>, label: impl Into<String>, kind: CurveKind) -> Result<Self> {
        if abscissae.len() != values.len() {
            return Err(Error::dims(format!(
                "{} abscissae for {} values",
                abscissae.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("error value {v} is not a finite non-negative number")));
        }
        Ok(Self {
            abscissae,
            values,
            label: label.into(),
            kind,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Arithmetic mean; `None` for an empty curve.
    pub fn mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    /// Mean over the entries whose abscissa lies in `range`.
    pub fn mean_over(&self, range: std::ops::Range<usize>) -> Option<f64> {
        let picked: Vec<f64> = self
            .abscissae
            .iter()
            .zip(&self.values)
            .filter(|(k, _)| range.contains(k))
            .map(|(_, v)| *v)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }

    fn header(&self) -> &'static str {
        match self.kind {
            CurveKind::Reconstruction => "k,E_k",
            CurveKind::PredictionSweep => "train_size,mean_error",
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.header());
        out.push('\n');
        for (k, v) in self.abscissae.iter().zip(&self.values) {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn same_shape(a: &SnapshotMatrix, b: &SnapshotMatrix) -> Result<()> {
    if (a.n_dof(), a.n_time()) != (b.n_dof(), b.n_time()) {
        return Err(Error::dims(format!(
            "reference is {}x{}, approximation is {}x{}",
            a.n_dof(),
            a.n_time(),
            b.n_dof(),
            b.n_time()
        )));
    }
    Ok(())
}

/// `E_k` for every column, abscissae `0..n_time`.
pub fn reconstruction_curve(truth: &SnapshotMatrix, approx: &SnapshotMatrix) -> Result<ErrorCurve> {
    same_shape(truth, approx)?;
    let values = (0..truth.n_time())
        .map(|k| {
            pointwise_relative_error(truth.column(k), approx.column(k))?
                .ok_or(Error::UndefinedError { column: k })
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::new(
        (0..truth.n_time()).collect(),
        values,
        truth.label(),
        CurveKind::Reconstruction,
    )
}

/// Mean of the per-column errors.
pub fn mean_prediction_error(truth_test: &SnapshotMatrix, predicted: &SnapshotMatrix) -> Result<f64> {
    let curve = reconstruction_curve(truth_test, predicted)?;
    curve.mean().ok_or_else(|| Error::invalid("empty test window"))
}

/// Snapshots a sweep works on. `control` is optional; when present its
/// prediction error is swept too.
#[derive(Clone, Copy, Debug)]
pub struct SweepData<'a> {
    pub state: &'a SnapshotMatrix,
    pub adjoint: &'a SnapshotMatrix,
    pub desired: &'a SnapshotMatrix,
    pub control: Option<&'a SnapshotMatrix>,
    pub alpha: f64,
    pub control_dofs: &'a [usize],
    /// End of the control horizon; needed by reversed adjoint models.
    pub final_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub state: ErrorCurve,
    pub adjoint: ErrorCurve,
    pub control: Option<ErrorCurve>,
    /// Fixed test window `[start, start + n_test)` in column indices.
    pub test_start: usize,
    pub n_test: usize,
}

/// Trains on each prefix `0..size` and scores the forecast over the fixed
/// window that follows the largest size.
pub fn sweep_train_size(data: &SweepData<'_>, sizes: &[usize], n_test: usize, config: &TrainConfig) -> Result<SweepResult> {
    if sizes.is_empty() {
        return Err(Error::invalid("no train sizes given"));
    }
    if let Some(w) = sizes.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "train sizes must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    if sizes[0] < 2 {
        return Err(Error::invalid("train sizes must be at least 2"));
    }
    if n_test == 0 {
        return Err(Error::invalid("the test window must not be empty"));
    }
    let n_time = data.state.n_time();
    let test_start = *sizes.last().unwrap_or(&0);
    if test_start + n_test > n_time {
        return Err(Error::invalid(format!(
            "largest train size {test_start} plus {n_test} test columns exceeds the {n_time} snapshots"
        )));
    }
    if let Some(u) = data.control {
        if u.n_time() != n_time || u.n_dof() != data.control_dofs.len() {
            return Err(Error::dims("control snapshots do not match the control DOFs and time axis"));
        }
    }

    let per_size = sizes
        .par_iter()
        .map(|&size| -> Result<[Option<f64>; 3]> {
            let model = train(
                &data.state.columns(0, size)?,
                &data.adjoint.columns(0, size)?,
                &data.desired.columns(0, size)?,
                data.alpha,
                data.control_dofs,
                config,
                data.final_time,
            )?;
            let future = data.desired.columns(size - 1, n_time - size + 1)?;
            let steps = test_start + n_test - (size - 1) - 1;
            let pred = model.predict(
                data.state.column(size - 1),
                data.adjoint.column(size - 1),
                &future,
                steps,
            )?;
            let offset = test_start - size;
            let window = |s: &SnapshotMatrix| s.columns(offset, n_test);
            let ey = mean_prediction_error(&data.state.columns(test_start, n_test)?, &window(&pred.state)?)?;
            let ez = mean_prediction_error(&data.adjoint.columns(test_start, n_test)?, &window(&pred.adjoint)?)?;
            let eu = match data.control {
                Some(u) => Some(mean_prediction_error(&u.columns(test_start, n_test)?, &window(&pred.control)?)?),
                None => None,
            };
            Ok([Some(ey), Some(ez), eu])
        })
        .collect::<Result<Vec<_>>>()?;

    let curve = |i: usize, label: &str| {
        let values = per_size.iter().map(|e| e[i].unwrap_or(f64::NAN)).collect();
        ErrorCurve::new(sizes.to_vec(), values, label, CurveKind::PredictionSweep)
    };
    Ok(SweepResult {
        state: curve(0, "state")?,
        adjoint: curve(1, "adjoint")?,
        control: data.control.map(|_| curve(2, "control")).transpose()?,
        test_start,
        n_test,
    })
}

/// Wall times in seconds and the resulting speedup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub fom_seconds: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub speedup: f64,
}

impl TimingReport {
    pub fn new(fom_seconds: f64, fit_seconds: f64, predict_seconds: f64) -> Result<Self> {
        for (name, v) in [("FOM", fom_seconds), ("fit", fit_seconds), ("predict", predict_seconds)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} duration must be positive, got {v}")));
            }
        }
        Ok(Self {
            fom_seconds,
            fit_seconds,
            predict_seconds,
            speedup: fom_seconds / (fit_seconds + predict_seconds),
        })
    }

    /// Uses the KKT solve time of the FOM run.
    pub fn from_solution(fom: &OcpSolution, fit_seconds: f64, predict_seconds: f64) -> Result<Self> {
        Self::new(fom.solve_time, fit_seconds, predict_seconds)
    }

    pub fn surrogate_seconds(&self) -> f64 {
        self.fit_seconds + self.predict_seconds
    }
}

#[cfg(test)]
mod tests;
