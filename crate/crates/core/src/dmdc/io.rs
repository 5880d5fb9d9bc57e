//! Model files: a JSON header next to `SNP1` blocks for the matrices.
//!
//! For a header at `dir/name.json` the blocks live at
//! `dir/name.basis.snp`, `dir/name.a_reduced.snp`, `dir/name.b_reduced.snp`
//! (absent without inputs) and `dir/name.modes.snp`. Modes are stored with
//! real and imaginary parts interleaved down each column.

use std::fs;
use std::path::{Path, PathBuf};

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::DmdcModel;
use crate::error::{Error, Result};
use crate::numerics::dense_eig;
use crate::snapshots::{load_binary, save_binary, NormalizationRecord, SnapshotMatrix};

pub const MODEL_FORMAT: &str = "dmdc-model/1";

/// Block file names are relative to the header's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmdcBlocks {
    pub basis: String,
    pub a_reduced: String,
    pub b_reduced: Option<String>,
    pub modes: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmdcHeader {
    pub format: String,
    pub label: String,
    pub dt: f64,
    pub t0: f64,
    pub n_dof: usize,
    pub n_input: usize,
    pub rank_omega: usize,
    pub rank_output: usize,
    pub normalization: Option<NormalizationRecord>,
    /// `[re, im]` pairs, for inspection; the loader recomputes them.
    pub eigenvalues: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
    pub blocks: DmdcBlocks,
}

fn sibling(header: &Path, suffix: &str) -> (PathBuf, String) {
    let stem = header
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model");
    let name = format!("{stem}.{suffix}.snp");
    (header.with_file_name(&name), name)
}

fn block(m: &Mat<f64>, model: &DmdcModel, label: &str) -> Result<SnapshotMatrix> {
    SnapshotMatrix::new(m.clone(), model.dt, model.t0, label)
}

/// Writes the blocks and returns the header (without writing it), so that
/// composite files can embed it.
pub(crate) fn write_blocks(model: &DmdcModel, header_path: &Path) -> Result<DmdcHeader> {
    let (basis_path, basis) = sibling(header_path, "basis");
    save_binary(&block(&model.basis, model, "basis")?, basis_path)?;
    let (a_path, a_reduced) = sibling(header_path, "a_reduced");
    save_binary(&block(&model.a_reduced, model, "a_reduced")?, a_path)?;
    let b_reduced = if model.n_input() > 0 {
        let (b_path, b_name) = sibling(header_path, "b_reduced");
        save_binary(&block(&model.b_reduced, model, "b_reduced")?, b_path)?;
        Some(b_name)
    } else {
        None
    };
    let (modes_path, modes) = sibling(header_path, "modes");
    let interleaved = Mat::from_fn(2 * model.n_dof(), model.rank_output(), |i, j| {
        let z = model.modes[(i / 2, j)];
        if i % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    save_binary(&block(&interleaved, model, "modes")?, modes_path)?;
    Ok(DmdcHeader {
        format: MODEL_FORMAT.into(),
        label: model.label.clone(),
        dt: model.dt,
        t0: model.t0,
        n_dof: model.n_dof(),
        n_input: model.n_input(),
        rank_omega: model.rank_omega,
        rank_output: model.rank_output(),
        normalization: model.normalization.clone(),
        eigenvalues: model.eigenvalues().iter().map(|l| [l.re, l.im]).collect(),
        warnings: model.warnings.clone(),
        blocks: DmdcBlocks {
            basis,
            a_reduced,
            b_reduced,
            modes,
        },
    })
}

pub(crate) fn read_blocks(header: &DmdcHeader, header_path: &Path) -> Result<DmdcModel> {
    let fail = |reason: String| Error::Format {
        path: header_path.to_path_buf(),
        location: "header".into(),
        reason,
    };
    if header.format != MODEL_FORMAT {
        return Err(fail(format!("unsupported model format `{}`", header.format)));
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let load = |name: &str, rows: usize, cols: usize| -> Result<Mat<f64>> {
        let s = load_binary(dir.join(name))?;
        if (s.n_dof(), s.n_time()) != (rows, cols) {
            return Err(fail(format!(
                "block {name} is {}x{}, expected {rows}x{cols}",
                s.n_dof(),
                s.n_time()
            )));
        }
        Ok(s.into_values())
    };
    let (n, r, l) = (header.n_dof, header.rank_output, header.n_input);
    let basis = load(&header.blocks.basis, n, r)?;
    let a_reduced = load(&header.blocks.a_reduced, r, r)?;
    let b_reduced = match (&header.blocks.b_reduced, l) {
        (None, 0) => Mat::zeros(r, 0),
        (Some(name), l) if l > 0 => load(name, r, l)?,
        _ => return Err(fail("b_reduced block inconsistent with n_input".into())),
    };
    let raw = load(&header.blocks.modes, 2 * n, r)?;
    let modes = Mat::from_fn(n, r, |i, j| c64::new(raw[(2 * i, j)], raw[(2 * i + 1, j)]));
    if let Some(rec) = &header.normalization {
        if rec.mean.len() != n {
            return Err(fail("normalization mean has the wrong length".into()));
        }
    }
    Ok(DmdcModel {
        eigen: dense_eig(a_reduced.as_ref())?,
        basis,
        a_reduced,
        b_reduced,
        modes,
        rank_omega: header.rank_omega,
        normalization: header.normalization.clone(),
        dt: header.dt,
        t0: header.t0,
        label: header.label.clone(),
        warnings: header.warnings.clone(),
    })
}

pub fn save_model(model: &DmdcModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = write_blocks(model, path)?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_model_header(path: impl AsRef<Path>) -> Result<DmdcHeader> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DmdcModel> {
    let path = path.as_ref();
    let header = read_model_header(path)?;
    read_blocks(&header, path)
}
