//! Partitioned surrogate of an optimal control solution.
//!
//! State and adjoint get their own DMDc models; the control is never fitted
//! but read off the adjoint through `u = z / alpha` on the control DOFs.
//!
//! The state model is driven by the desired-state trajectory. The adjoint
//! model can be driven by the desired state, the state, both stacked, or
//! nothing, and can be fitted forward in time or on the time-flipped
//! sequence. In reversed mode the adjoint is rolled backward from its
//! terminal value, which is zero at the final time of the problem.
//!
//! Whatever the direction, the input paired with the transition out of time
//! index `k` is the source column at index `k`.

mod io;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::dmdc::{fit_snapshots, DmdcModel, FitOptions, InputMatrix};
use crate::error::{Error, Result};
use crate::snapshots::SnapshotMatrix;

pub use io::{load_partitioned, save_partitioned, PartitionedFile, SourceFiles, PARTITIONED_FORMAT};

/// Exogenous input of the adjoint model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Desired,
    State,
    #[default]
    DesiredAndState,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeDirection {
    Forward,
    #[default]
    Reversed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub state_fit: FitOptions,
    pub adjoint_fit: FitOptions,
    #[serde(default)]
    pub adjoint_inputs: InputSource,
    #[serde(default)]
    pub adjoint_direction: TimeDirection,
    #[serde(default)]
    pub demean_state: bool,
    #[serde(default)]
    pub demean_adjoint: bool,
}

impl TrainConfig {
    /// Fixed output ranks for state and adjoint, defaults otherwise.
    pub fn with_ranks(state: usize, adjoint: usize) -> Self {
        Self {
            state_fit: FitOptions::with_output_rank(state),
            adjoint_fit: FitOptions::with_output_rank(adjoint),
            ..Self::default()
        }
    }

    pub fn adjoint(mut self, inputs: InputSource, direction: TimeDirection) -> Self {
        self.adjoint_inputs = inputs;
        self.adjoint_direction = direction;
        self
    }
}

/// Everything a surrogate run produces. Controls have one row per control DOF.
#[derive(Clone, Debug)]
pub struct Trajectories {
    pub state: SnapshotMatrix,
    pub adjoint: SnapshotMatrix,
    pub control: SnapshotMatrix,
}

/// Last training snapshots, the starting point of forecasts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingTail {
    pub time: f64,
    pub state: Vec<f64>,
    pub adjoint: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PartitionedModel {
    pub(crate) state_model: DmdcModel,
    pub(crate) adjoint_model: DmdcModel,
    pub(crate) alpha: f64,
    pub(crate) control_dofs: Vec<usize>,
    pub(crate) config: TrainConfig,
    pub(crate) n_train: usize,
    pub(crate) final_time: Option<f64>,
    pub(crate) tail: TrainingTail,
}

fn same_time_axis(a: &SnapshotMatrix, b: &SnapshotMatrix) -> bool {
    let tol = 1e-9 * a.dt().abs().max(b.dt().abs());
    (a.dt() - b.dt()).abs() <= tol && (a.t0() - b.t0()).abs() <= 1e-9 * a.dt().max(1.0)
}

/// Stacks the chosen adjoint source over matching chronological columns.
fn source_matrix(kind: InputSource, desired: MatRef<'_, f64>, state: MatRef<'_, f64>) -> Mat<f64> {
    let cols = desired.ncols().min(state.ncols());
    match kind {
        InputSource::Desired => desired.subcols(0, cols).to_owned(),
        InputSource::State => state.subcols(0, cols).to_owned(),
        InputSource::DesiredAndState => {
            let nd = desired.nrows();
            Mat::from_fn(nd + state.nrows(), cols, |i, j| {
                if i < nd {
                    desired[(i, j)]
                } else {
                    state[(i - nd, j)]
                }
            })
        }
        InputSource::None => Mat::zeros(0, cols),
    }
}

fn reversed_cols(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.ncols();
    Mat::from_fn(m.nrows(), n, |i, j| m[(i, n - 1 - j)])
}

/// Fits the partitioned surrogate on `n_time` aligned snapshots.
///
/// `final_time` is the end of the control horizon; reversed adjoint
/// forecasts start from the zero terminal value there, so it is required in
/// that mode (and ignored otherwise).
pub fn train(
    state: &SnapshotMatrix,
    adjoint: &SnapshotMatrix,
    desired: &SnapshotMatrix,
    alpha: f64,
    control_dofs: &[usize],
    config: &TrainConfig,
    final_time: Option<f64>,
) -> Result<PartitionedModel> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let n = state.n_time();
    if adjoint.n_time() != n || desired.n_time() != n {
        return Err(Error::dims(format!(
            "state, adjoint and desired have {}, {} and {} columns",
            n,
            adjoint.n_time(),
            desired.n_time()
        )));
    }
    if !same_time_axis(state, adjoint) || !same_time_axis(state, desired) {
        return Err(Error::invalid("state, adjoint and desired must share dt and t0"));
    }
    if n < 2 {
        return Err(Error::invalid("training needs at least two snapshots"));
    }
    if let Some(bad) = control_dofs.iter().find(|&&d| d >= adjoint.n_dof()) {
        return Err(Error::invalid(format!(
            "control DOF {bad} outside the {}-DOF adjoint",
            adjoint.n_dof()
        )));
    }
    let final_time = match (config.adjoint_direction, final_time) {
        (TimeDirection::Reversed, None) => {
            return Err(Error::invalid("a reversed adjoint model needs the final time"))
        }
        (TimeDirection::Reversed, Some(t)) if t < state.time(n - 1) - 1e-9 * state.dt() => {
            return Err(Error::invalid(format!(
                "final time {t} precedes the last training snapshot"
            )))
        }
        (_, t) => t,
    };

    let state_inputs = InputMatrix::from_snapshots(desired, 0, n - 1)?;
    let source = source_matrix(config.adjoint_inputs, desired.values(), state.values());
    let (adjoint_data, adjoint_source) = match config.adjoint_direction {
        TimeDirection::Forward => (adjoint.clone(), source),
        TimeDirection::Reversed => (adjoint.reversed(), reversed_cols(source.as_ref())),
    };
    let adjoint_inputs = InputMatrix::new(adjoint_source.subcols(0, n - 1).to_owned())?;

    let (state_model, adjoint_model) = rayon::join(
        || fit_snapshots(state, &state_inputs, &config.state_fit, config.demean_state),
        || fit_snapshots(&adjoint_data, &adjoint_inputs, &config.adjoint_fit, config.demean_adjoint),
    );
    let state_model = state_model?;
    let adjoint_model = adjoint_model.map_err(|e| match e {
        Error::RankZero(m) => Error::RankZero(format!("adjoint: {m}")),
        other => other,
    })?;
    Ok(PartitionedModel {
        state_model,
        adjoint_model,
        alpha,
        control_dofs: control_dofs.to_vec(),
        config: config.clone(),
        n_train: n,
        final_time,
        tail: TrainingTail {
            time: state.time(n - 1),
            state: state.column(n - 1).to_vec(),
            adjoint: adjoint.column(n - 1).to_vec(),
        },
    })
}

impl PartitionedModel {
    pub fn state_model(&self) -> &DmdcModel {
        &self.state_model
    }

    pub fn adjoint_model(&self) -> &DmdcModel {
        &self.adjoint_model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn control_dofs(&self) -> &[usize] {
        &self.control_dofs
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn dt(&self) -> f64 {
        self.state_model.dt()
    }

    pub fn final_time(&self) -> Option<f64> {
        self.final_time
    }

    pub fn tail(&self) -> &TrainingTail {
        &self.tail
    }

    /// `u = z / alpha` on the control DOFs.
    pub fn recover_control(&self, adjoint: &[f64]) -> Result<Vec<f64>> {
        if adjoint.len() != self.adjoint_model.n_dof() {
            return Err(Error::dims(format!(
                "adjoint of length {} for a model with {} DOFs",
                adjoint.len(),
                self.adjoint_model.n_dof()
            )));
        }
        Ok(self.control_dofs.iter().map(|&d| adjoint[d] / self.alpha).collect())
    }

    fn control_matrix(&self, adjoint: &SnapshotMatrix) -> Result<SnapshotMatrix> {
        let z = adjoint.values();
        let u = Mat::from_fn(self.control_dofs.len(), z.ncols(), |c, k| {
            z[(self.control_dofs[c], k)] / self.alpha
        });
        SnapshotMatrix::new(u, adjoint.dt(), adjoint.t0(), "control")
    }

    fn check_desired(&self, desired: &SnapshotMatrix, needed: usize) -> Result<()> {
        if desired.n_dof() != self.state_model.n_input() {
            return Err(Error::dims(format!(
                "desired state has {} rows, the state model expects {}",
                desired.n_dof(),
                self.state_model.n_input()
            )));
        }
        if (desired.dt() - self.dt()).abs() > 1e-9 * self.dt() {
            return Err(Error::invalid(format!(
                "desired state dt {} differs from the model dt {}",
                desired.dt(),
                self.dt()
            )));
        }
        if desired.n_time() < needed {
            return Err(Error::invalid(format!(
                "{needed} desired-state columns needed, {} supplied",
                desired.n_time()
            )));
        }
        Ok(())
    }

    /// Adjoint over chronological indices `0..=n_steps` of `source`, anchored
    /// at index 0 (forward) or `n_steps` (reversed).
    fn adjoint_rollout(&self, anchor: &[f64], source: MatRef<'_, f64>, n_steps: usize) -> Result<Mat<f64>> {
        let m = &self.adjoint_model;
        match self.config.adjoint_direction {
            TimeDirection::Forward => {
                let inputs = InputMatrix::new(source.subcols(0, n_steps).to_owned())?;
                Ok(m.rollout(anchor, &inputs, n_steps)?.into_values())
            }
            TimeDirection::Reversed => {
                let flipped = reversed_cols(source.subcols(0, n_steps + 1));
                let inputs = InputMatrix::new(flipped.subcols(0, n_steps).to_owned())?;
                let back = m.rollout(anchor, &inputs, n_steps)?.into_values();
                Ok(reversed_cols(back.as_ref()))
            }
        }
    }

    fn source_columns_needed(&self, n_steps: usize) -> usize {
        match self.config.adjoint_direction {
            TimeDirection::Forward => n_steps,
            TimeDirection::Reversed => n_steps + 1,
        }
    }

    /// Replays a window of `n_steps` transitions.
    ///
    /// `z_boundary` is the adjoint at the first (forward) or last (reversed)
    /// snapshot of the window. Every output has `n_steps + 1` columns and
    /// starts at the desired state's `t0`.
    pub fn reconstruct(
        &self,
        y0: &[f64],
        z_boundary: &[f64],
        desired: &SnapshotMatrix,
        n_steps: usize,
    ) -> Result<Trajectories> {
        self.check_desired(desired, self.source_columns_needed(n_steps))?;
        let d = desired.values();
        let state_inputs = InputMatrix::new(d.subcols(0, n_steps).to_owned())?;
        let state = self.state_model.rollout(y0, &state_inputs, n_steps)?;
        let width = (n_steps + 1).min(desired.n_time());
        let source = source_matrix(
            self.config.adjoint_inputs,
            d.subcols(0, width),
            state.values().subcols(0, width),
        );
        let z = self.adjoint_rollout(z_boundary, source.as_ref(), n_steps)?;
        let (dt, t0) = (desired.dt(), desired.t0());
        let state = SnapshotMatrix::new(state.into_values(), dt, t0, "state")?;
        let adjoint = SnapshotMatrix::new(z, dt, t0, "adjoint")?;
        let control = self.control_matrix(&adjoint)?;
        Ok(Trajectories { state, adjoint, control })
    }

    /// Forecasts `n_steps` snapshots past the training window.
    ///
    /// `future_desired` column 0 is the desired state at the time of the last
    /// training snapshot. Outputs hold the `n_steps` new columns only.
    ///
    /// A forward adjoint starts from `last_adjoint`. A reversed adjoint
    /// ignores it and rolls back from the zero terminal value at the final
    /// time, so `future_desired` must then reach the final time.
    pub fn predict(
        &self,
        last_state: &[f64],
        last_adjoint: &[f64],
        future_desired: &SnapshotMatrix,
        n_steps: usize,
    ) -> Result<Trajectories> {
        if n_steps == 0 {
            return Err(Error::invalid("prediction needs at least one step"));
        }
        // total steps to simulate: up to the final time in reversed mode
        let horizon = match self.config.adjoint_direction {
            TimeDirection::Forward => n_steps,
            TimeDirection::Reversed => {
                let t_end = self.final_time.ok_or_else(|| Error::invalid("model has no final time"))?;
                let steps = ((t_end - future_desired.t0()) / self.dt()).round();
                if steps < n_steps as f64 {
                    return Err(Error::invalid(format!(
                        "{n_steps} steps requested but the final time is {steps} steps away"
                    )));
                }
                steps as usize
            }
        };
        self.check_desired(future_desired, self.source_columns_needed(horizon))?;
        let d = future_desired.values();
        let state_inputs = InputMatrix::new(d.subcols(0, horizon).to_owned())?;
        let state = self.state_model.rollout(last_state, &state_inputs, horizon)?.into_values();
        let width = (horizon + 1).min(future_desired.n_time());
        let source = source_matrix(
            self.config.adjoint_inputs,
            d.subcols(0, width),
            state.as_ref().subcols(0, width),
        );
        let z = match self.config.adjoint_direction {
            TimeDirection::Forward => self.adjoint_rollout(last_adjoint, source.as_ref(), horizon)?,
            TimeDirection::Reversed => {
                let terminal = vec![0.0; self.adjoint_model.n_dof()];
                self.adjoint_rollout(&terminal, source.as_ref(), horizon)?
            }
        };
        let (dt, t0) = (future_desired.dt(), future_desired.t0() + future_desired.dt());
        let state = SnapshotMatrix::new(state.subcols(1, n_steps).to_owned(), dt, t0, "state")?;
        let adjoint = SnapshotMatrix::new(z.subcols(1, n_steps).to_owned(), dt, t0, "adjoint")?;
        let control = self.control_matrix(&adjoint)?;
        Ok(Trajectories { state, adjoint, control })
    }

    /// Forecast from the stored training tail.
    pub fn predict_from_tail(&self, future_desired: &SnapshotMatrix, n_steps: usize) -> Result<Trajectories> {
        if (future_desired.t0() - self.tail.time).abs() > 1e-9 * self.dt().max(1.0) {
            return Err(Error::invalid(format!(
                "future desired state starts at t = {}, the training window ends at t = {}",
                future_desired.t0(),
                self.tail.time
            )));
        }
        self.predict(&self.tail.state, &self.tail.adjoint, future_desired, n_steps)
    }
}

#[cfg(test)]
mod tests;
