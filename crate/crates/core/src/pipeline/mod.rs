//! End-to-end surrogate runs: reconstruction over the whole window, a
//! forecast past a training prefix, an optional train-size sweep, and the
//! files that record them.
//!
//! Error conventions: the state reconstruction mean runs over `k >= 1`
//! (column 0 is the initial condition and is reported separately). Adjoint
//! and control curves stop before the last column, where the terminal
//! condition makes the reference zero.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dmdc::FitOptions;
use crate::error::{Error, Result};
use crate::metrics::{mean_prediction_error, reconstruction_curve, sweep_train_size, ErrorCurve, SweepData, SweepResult, TimingReport};
use crate::ocp::OcpSolution;
use crate::partitioned::{save_partitioned, train, InputSource, PartitionedModel, SourceFiles, TimeDirection, TrainConfig, Trajectories};
use crate::snapshots::{load, save_binary, SnapshotMatrix};

pub const REPORT_FORMAT: &str = "error-report/1";

fn default_ranks() -> [usize; 2] {
    [4, 3]
}

fn default_n_train() -> usize {
    30
}

fn default_n_test() -> usize {
    20
}

/// Knobs of a run, independent of where the data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub alpha: f64,
    pub control_dofs: Vec<usize>,
    /// Output ranks of the state and adjoint fits.
    #[serde(default = "default_ranks")]
    pub ranks: [usize; 2],
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Train sizes of the sweep; empty skips it.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// End of the control horizon. Defaults to the time of the last snapshot.
    #[serde(default)]
    pub final_time: Option<f64>,
    #[serde(default)]
    pub adjoint_inputs: InputSource,
    #[serde(default)]
    pub adjoint_direction: TimeDirection,
    #[serde(default)]
    pub demean_state: bool,
    #[serde(default)]
    pub demean_adjoint: bool,
    /// FOM solve time, for the speedup.
    #[serde(default)]
    pub fom_seconds: Option<f64>,
}

impl PipelineSettings {
    pub fn new(alpha: f64, control_dofs: Vec<usize>) -> Self {
        Self {
            alpha,
            control_dofs,
            ranks: default_ranks(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            sizes: Vec::new(),
            final_time: None,
            adjoint_inputs: InputSource::default(),
            adjoint_direction: TimeDirection::default(),
            demean_state: false,
            demean_adjoint: false,
            fom_seconds: None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            state_fit: FitOptions::with_output_rank(self.ranks[0]),
            adjoint_fit: FitOptions::with_output_rank(self.ranks[1]),
            adjoint_inputs: self.adjoint_inputs,
            adjoint_direction: self.adjoint_direction,
            demean_state: self.demean_state,
            demean_adjoint: self.demean_adjoint,
        }
    }
}

/// Manifest file: snapshot paths (relative to the manifest) plus settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub state: PathBuf,
    pub adjoint: PathBuf,
    pub desired: PathBuf,
    #[serde(default)]
    pub control: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: PipelineSettings,
}

impl PipelineManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Reads the snapshot files, resolving relative paths against `base`.
    pub fn inputs(&self, base: &Path) -> Result<PipelineInputs> {
        let read = |p: &Path| load(base.join(p));
        Ok(PipelineInputs {
            state: read(&self.state)?,
            adjoint: read(&self.adjoint)?,
            desired: read(&self.desired)?,
            control: self.control.as_deref().map(read).transpose()?,
        })
    }

    pub fn sources(&self) -> SourceFiles {
        let s = |p: &Path| Some(p.display().to_string());
        SourceFiles {
            state: s(&self.state),
            adjoint: s(&self.adjoint),
            desired: s(&self.desired),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineInputs {
    pub state: SnapshotMatrix,
    pub adjoint: SnapshotMatrix,
    pub desired: SnapshotMatrix,
    pub control: Option<SnapshotMatrix>,
}

impl PipelineInputs {
    pub fn from_solution(sol: &OcpSolution) -> Self {
        Self {
            state: sol.state.clone(),
            adjoint: sol.adjoint.clone(),
            desired: sol.desired.clone(),
            control: Some(sol.control.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionErrors {
    pub state: ErrorCurve,
    pub adjoint: ErrorCurve,
    pub control: Option<ErrorCurve>,
    pub first_step_state: f64,
    pub state_mean: f64,
    pub adjoint_mean: f64,
    pub control_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrors {
    pub n_train: usize,
    pub test_start: usize,
    pub n_test: usize,
    pub state: f64,
    pub adjoint: f64,
    pub control: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineTiming {
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub speedup: Option<TimingReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub format: String,
    pub n_time: usize,
    pub ranks: [usize; 2],
    /// Ranks actually used by the prediction model (after clamping).
    pub fitted_ranks: [usize; 2],
    pub adjoint_inputs: InputSource,
    pub adjoint_direction: TimeDirection,
    pub reconstruction: ReconstructionErrors,
    pub prediction: PredictionErrors,
    pub sweep: Option<SweepResult>,
    pub timing: PipelineTiming,
}

impl ErrorReport {
    /// The report without wall-clock fields, for reproducibility checks.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let Some(map) = v.as_object_mut() {
            map.remove("timing");
        }
        v
    }
}

/// In-memory result of a run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub report: ErrorReport,
    pub reconstruction: Trajectories,
    pub prediction: Trajectories,
    /// Model trained on the prediction prefix.
    pub model: PartitionedModel,
}

fn validate(inputs: &PipelineInputs, s: &PipelineSettings) -> Result<f64> {
    let n = inputs.state.n_time();
    if s.ranks.contains(&0) {
        return Err(Error::invalid("ranks must be positive"));
    }
    if s.n_train < 2 || s.n_test == 0 || s.n_train + s.n_test > n {
        return Err(Error::invalid(format!(
            "{} training plus {} test columns do not fit in {n} snapshots",
            s.n_train, s.n_test
        )));
    }
    if let Some(u) = &inputs.control {
        if u.n_time() != n || u.n_dof() != s.control_dofs.len() {
            return Err(Error::dims(format!(
                "control snapshots are {}x{}, expected {}x{n}",
                u.n_dof(),
                u.n_time(),
                s.control_dofs.len()
            )));
        }
    }
    let final_time = s.final_time.unwrap_or_else(|| inputs.state.time(n - 1));
    if s.adjoint_direction == TimeDirection::Reversed && final_time < inputs.state.time(n - 1) - 1e-9 * inputs.state.dt() {
        return Err(Error::invalid("final time precedes the last snapshot"));
    }
    Ok(final_time)
}

fn curve_until(truth: &SnapshotMatrix, approx: &SnapshotMatrix, count: usize) -> Result<ErrorCurve> {
    reconstruction_curve(&truth.columns(0, count)?, &approx.columns(0, count)?)
}

/// Runs reconstruction, prediction and the optional sweep.
pub fn execute(inputs: &PipelineInputs, settings: &PipelineSettings) -> Result<PipelineRun> {
    let final_time = validate(inputs, settings)?;
    let config = settings.train_config();
    let (y, z, d) = (&inputs.state, &inputs.adjoint, &inputs.desired);
    let n = y.n_time();

    // reconstruction over the full window
    let full = train(y, z, d, settings.alpha, &settings.control_dofs, &config, Some(final_time))?;
    let z_boundary = match settings.adjoint_direction {
        TimeDirection::Forward => z.column(0),
        TimeDirection::Reversed => z.column(n - 1),
    };
    let rec = full.reconstruct(y.column(0), z_boundary, d, n - 1)?;
    let state_curve = reconstruction_curve(y, &rec.state)?;
    let adjoint_curve = curve_until(z, &rec.adjoint, n - 1)?;
    let control_curve = inputs
        .control
        .as_ref()
        .map(|u| curve_until(u, &rec.control, n - 1))
        .transpose()?;
    let reconstruction = ReconstructionErrors {
        first_step_state: state_curve.values[0],
        state_mean: state_curve.mean_over(1..n).unwrap_or(0.0),
        adjoint_mean: adjoint_curve.mean().unwrap_or(0.0),
        control_mean: control_curve.as_ref().and_then(ErrorCurve::mean),
        state: state_curve.with_label("state"),
        adjoint: adjoint_curve.with_label("adjoint"),
        control: control_curve.map(|c| c.with_label("control")),
    };

    // forecast past the training prefix
    let nt = settings.n_train;
    let clock = Instant::now();
    let model = train(
        &y.columns(0, nt)?,
        &z.columns(0, nt)?,
        &d.columns(0, nt)?,
        settings.alpha,
        &settings.control_dofs,
        &config,
        Some(final_time),
    )?;
    let fit_seconds = clock.elapsed().as_secs_f64();
    let future = d.columns(nt - 1, n - nt + 1)?;
    let clock = Instant::now();
    let pred = model.predict_from_tail(&future, settings.n_test)?;
    let predict_seconds = clock.elapsed().as_secs_f64();
    let window = |s: &SnapshotMatrix| s.columns(nt, settings.n_test);
    let prediction = PredictionErrors {
        n_train: nt,
        test_start: nt,
        n_test: settings.n_test,
        state: mean_prediction_error(&window(y)?, &pred.state)?,
        adjoint: mean_prediction_error(&window(z)?, &pred.adjoint)?,
        control: inputs
            .control
            .as_ref()
            .map(|u| mean_prediction_error(&window(u)?, &pred.control))
            .transpose()?,
    };

    let sweep = if settings.sizes.is_empty() {
        None
    } else {
        let data = SweepData {
            state: y,
            adjoint: z,
            desired: d,
            control: inputs.control.as_ref(),
            alpha: settings.alpha,
            control_dofs: &settings.control_dofs,
            final_time: Some(final_time),
        };
        Some(sweep_train_size(&data, &settings.sizes, settings.n_test, &config)?)
    };

    let speedup = settings
        .fom_seconds
        .map(|fom| TimingReport::new(fom, fit_seconds.max(f64::MIN_POSITIVE), predict_seconds.max(f64::MIN_POSITIVE)))
        .transpose()?;
    let report = ErrorReport {
        format: REPORT_FORMAT.into(),
        n_time: n,
        ranks: settings.ranks,
        fitted_ranks: [model.state_model().rank_output(), model.adjoint_model().rank_output()],
        adjoint_inputs: settings.adjoint_inputs,
        adjoint_direction: settings.adjoint_direction,
        reconstruction,
        prediction,
        sweep,
        timing: PipelineTiming {
            fit_seconds,
            predict_seconds,
            speedup,
        },
    };
    Ok(PipelineRun {
        report,
        reconstruction: rec,
        prediction: pred,
        model,
    })
}

impl PipelineRun {
    /// Writes every artifact under `out` and returns the paths, in order.
    pub fn write(&self, out: &Path, sources: &SourceFiles) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut written = Vec::new();
        for (stage, t) in [("reconstruction", &self.reconstruction), ("prediction", &self.prediction)] {
            for (name, s) in [("state", &t.state), ("adjoint", &t.adjoint), ("control", &t.control)] {
                let path = out.join(format!("{stage}_{name}.snp"));
                save_binary(&s.clone().with_label(format!("{stage}/{name}")), &path)?;
                written.push(path);
            }
        }
        let r = &self.report.reconstruction;
        for c in [Some(&r.state), Some(&r.adjoint), r.control.as_ref()].into_iter().flatten() {
            let path = out.join(format!("reconstruction_{}.csv", c.label));
            c.save_csv(&path)?;
            written.push(path);
        }
        if let Some(sw) = &self.report.sweep {
            for c in [Some(&sw.state), Some(&sw.adjoint), sw.control.as_ref()].into_iter().flatten() {
                let path = out.join(format!("sweep_{}.csv", c.label));
                c.save_csv(&path)?;
                written.push(path);
            }
        }
        let model_path = out.join("model.json");
        save_partitioned(&self.model, sources, &model_path)?;
        written.push(model_path);
        let report_path = out.join("error_report.json");
        let text = serde_json::to_string_pretty(&self.report)?;
        fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
        written.push(report_path);
        Ok(written)
    }
}
