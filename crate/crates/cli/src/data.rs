//! Locating and loading snapshot inputs.

use std::fs;
use std::path::{Path, PathBuf};

use ocpdmd::ocp::OcpDimensions;
use ocpdmd::partitioned::SourceFiles;
use ocpdmd::snapshots::load;
use ocpdmd::{ParabolicOcpConfig, SnapshotMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::DataArgs;

pub const FOM_RECORD: &str = "fom.json";
pub const FOM_FORMAT: &str = "fom-run/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomFiles {
    pub state: String,
    pub control: String,
    pub adjoint: String,
    pub desired: String,
}

/// Summary a `fom` run leaves next to its snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FomRecord {
    pub format: String,
    pub config: ParabolicOcpConfig,
    pub dims: OcpDimensions,
    pub objective: f64,
    pub kkt_residual: f64,
    pub optimality_residual: f64,
    pub alpha: f64,
    pub control_dofs: Vec<usize>,
    pub final_time: f64,
    pub files: FomFiles,
    pub warnings: Vec<String>,
    pub wall_time: f64,
    pub solve_time: f64,
}

impl FomRecord {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(FOM_RECORD);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let rec: FomRecord = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if rec.format != FOM_FORMAT {
            return Err(CliError::usage(format!("{}: unsupported format `{}`", path.display(), rec.format)));
        }
        Ok(rec)
    }
}

/// Inputs after merging `--from` with explicit flags.
#[derive(Clone, Debug, Default)]
pub struct Resolved {
    pub state: Option<PathBuf>,
    pub adjoint: Option<PathBuf>,
    pub desired: Option<PathBuf>,
    pub control: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub control_dofs: Option<Vec<usize>>,
    pub final_time: Option<f64>,
    pub fom_seconds: Option<f64>,
}

impl DataArgs {
    pub fn resolve(&self) -> CliResult<Resolved> {
        let mut r = Resolved::default();
        if let Some(dir) = &self.from {
            let rec = FomRecord::load(dir)?;
            r.state = Some(dir.join(&rec.files.state));
            r.adjoint = Some(dir.join(&rec.files.adjoint));
            r.desired = Some(dir.join(&rec.files.desired));
            r.control = Some(dir.join(&rec.files.control));
            r.alpha = Some(rec.alpha);
            r.control_dofs = Some(rec.control_dofs);
            r.final_time = Some(rec.final_time);
            r.fom_seconds = Some(rec.solve_time);
        }
        let pick = |flag: &Option<PathBuf>, slot: &mut Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        pick(&self.state, &mut r.state);
        pick(&self.adjoint, &mut r.adjoint);
        pick(&self.desired, &mut r.desired);
        pick(&self.control, &mut r.control);
        if self.alpha.is_some() {
            r.alpha = self.alpha;
        }
        if self.control_dofs.is_some() {
            r.control_dofs.clone_from(&self.control_dofs);
        }
        if self.final_time.is_some() {
            r.final_time = self.final_time;
        }
        Ok(r)
    }
}

impl Resolved {
    /// Falls back to the files a model was trained on.
    pub fn with_sources(mut self, sources: &SourceFiles) -> Self {
        let fill = |slot: &mut Option<PathBuf>, src: &Option<String>| {
            if slot.is_none() {
                *slot = src.as_ref().map(PathBuf::from);
            }
        };
        fill(&mut self.state, &sources.state);
        fill(&mut self.adjoint, &sources.adjoint);
        fill(&mut self.desired, &sources.desired);
        self
    }

    pub fn alpha(&self) -> CliResult<f64> {
        let a = self.alpha.ok_or_else(|| CliError::usage("--alpha is required (or --from a FOM run)"))?;
        if !(a.is_finite() && a > 0.0) {
            return Err(CliError::usage(format!("alpha must be positive, got {a}")));
        }
        Ok(a)
    }
}

pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::usage(format!("--{flag} is required (or --from a FOM run)")))
}

pub fn read_snapshots(path: &Path) -> CliResult<SnapshotMatrix> {
    load(path).map_err(CliError::input)
}

/// Absolute form of an input path, for recording in model files.
pub fn absolute(path: &Path) -> String {
    fs::canonicalize(path)
        .unwrap_or_else(|_| path.to_path_buf())
        .display()
        .to_string()
}
