//! Partitioned model files.
//!
//! `dir/name.json` holds both DMDc headers plus the coupling data. The
//! matrices of the two fits are `SNP1` blocks named `name.state.*.snp` and
//! `name.adjoint.*.snp` beside it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PartitionedModel, TrainConfig, TrainingTail};
use crate::dmdc::{read_blocks, write_blocks, DmdcHeader};
use crate::error::{Error, Result};

pub const PARTITIONED_FORMAT: &str = "partitioned-model/1";

/// Where the training snapshots came from, if known.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceFiles {
    pub state: Option<String>,
    pub adjoint: Option<String>,
    pub desired: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionedFile {
    pub format: String,
    pub alpha: f64,
    pub control_dofs: Vec<usize>,
    pub config: TrainConfig,
    pub n_train: usize,
    pub final_time: Option<f64>,
    pub tail: TrainingTail,
    #[serde(default)]
    pub sources: SourceFiles,
    pub state: DmdcHeader,
    pub adjoint: DmdcHeader,
}

fn part_path(path: &Path, part: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    path.with_file_name(format!("{stem}.{part}.json"))
}

pub fn save_partitioned(model: &PartitionedModel, sources: &SourceFiles, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = PartitionedFile {
        format: PARTITIONED_FORMAT.into(),
        alpha: model.alpha,
        control_dofs: model.control_dofs.clone(),
        config: model.config.clone(),
        n_train: model.n_train,
        final_time: model.final_time,
        tail: model.tail.clone(),
        sources: sources.clone(),
        state: write_blocks(&model.state_model, &part_path(path, "state"))?,
        adjoint: write_blocks(&model.adjoint_model, &part_path(path, "adjoint"))?,
    };
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_partitioned(path: impl AsRef<Path>) -> Result<(PartitionedModel, SourceFiles)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PartitionedFile = serde_json::from_str(&text)?;
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        location: "header".into(),
        reason,
    };
    if file.format != PARTITIONED_FORMAT {
        return Err(fail(format!("unsupported model format `{}`", file.format)));
    }
    let state_model = read_blocks(&file.state, &part_path(path, "state"))?;
    let adjoint_model = read_blocks(&file.adjoint, &part_path(path, "adjoint"))?;
    if !(file.alpha.is_finite() && file.alpha > 0.0) {
        return Err(fail(format!("alpha must be positive, got {}", file.alpha)));
    }
    if (state_model.dt() - adjoint_model.dt()).abs() > 1e-12 * state_model.dt().abs() {
        return Err(fail("state and adjoint models have different dt".into()));
    }
    if file.control_dofs.iter().any(|&d| d >= adjoint_model.n_dof()) {
        return Err(fail("control DOF outside the adjoint layout".into()));
    }
    if file.tail.state.len() != state_model.n_dof() || file.tail.adjoint.len() != adjoint_model.n_dof() {
        return Err(fail("stored training tail has the wrong length".into()));
    }
    let model = PartitionedModel {
        state_model,
        adjoint_model,
        alpha: file.alpha,
        control_dofs: file.control_dofs,
        config: file.config,
        n_train: file.n_train,
        final_time: file.final_time,
        tail: file.tail,
    };
    Ok((model, file.sources))
}
