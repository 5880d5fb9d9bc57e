use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::assemble::{assemble, DiscreteOperators};
use super::config::ParabolicOcpConfig;
use super::kkt::{assemble_spacetime_kkt, desired_trajectory, initial_state, kkt_dimension, offsets};
use crate::error::{Error, Result};
use crate::numerics::{SparseLu, SparseMatrix};
use crate::snapshots::SnapshotMatrix;

/// Problem sizes of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcpDimensions {
    pub n_y: usize,
    pub n_u: usize,
    pub n_steps: usize,
    pub kkt: usize,
}

/// Trajectories of the optimal triple, `n_steps + 1` columns each.
///
/// The control has one row per control variable. Its last column is zero,
/// like the adjoint's, because no step follows the final time.
#[derive(Clone, Debug)]
pub struct OcpSolution {
    pub state: SnapshotMatrix,
    pub control: SnapshotMatrix,
    pub adjoint: SnapshotMatrix,
    /// Target on the observed DOFs, zero elsewhere.
    pub desired: SnapshotMatrix,
    pub objective: f64,
    pub kkt_residual: f64,
    /// Largest `|alpha u - z|` on the control DOFs, relative to `max |z|`.
    pub optimality_residual: f64,
    pub alpha: f64,
    pub control_dofs: Vec<usize>,
    pub dims: OcpDimensions,
    /// Assembly plus factorization and solve.
    pub wall_time: f64,
    /// Factorization and solve of the space-time system only.
    pub solve_time: f64,
    pub warnings: Vec<String>,
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `|K x - b|_inf / (|K|_inf |x|_inf + |b|_inf)`.
pub fn scaled_residual(k: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let kx = k.mul_vec(x);
    let r = kx.iter().zip(b).fold(0.0_f64, |m, (a, c)| m.max((a - c).abs()));
    let scale = k.norm_inf() * norm_inf(x) + norm_inf(b);
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

pub fn solve_fom(cfg: &ParabolicOcpConfig) -> Result<OcpSolution> {
    let start = Instant::now();
    let ops = assemble(cfg)?;
    let mut sol = solve_assembled(&ops, cfg)?;
    sol.wall_time = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// Solves the optimality system for already assembled operators.
pub fn solve_assembled(ops: &DiscreteOperators, cfg: &ParabolicOcpConfig) -> Result<OcpSolution> {
    let start = Instant::now();
    let (k, rhs) = assemble_spacetime_kkt(ops, cfg)?;
    let solve_start = Instant::now();
    let x = SparseLu::new(&k)?.solve(&rhs)?;
    let solve_time = solve_start.elapsed().as_secs_f64();
    let kkt_residual = scaled_residual(&k, &x, &rhs);

    let (n_y, n_u, n_t) = (ops.n_y, ops.n_u, cfg.n_steps);
    let y0 = initial_state(ops, cfg)?;
    let mut state = Mat::<f64>::zeros(n_y, n_t + 1);
    let mut control = Mat::<f64>::zeros(n_u, n_t + 1);
    let mut adjoint = Mat::<f64>::zeros(n_y, n_t + 1);
    for (i, v) in y0.iter().enumerate() {
        state[(i, 0)] = *v;
    }
    for k in 1..=n_t {
        let (oy, ou, oz) = offsets(ops, k);
        for i in 0..n_y {
            state[(i, k)] = x[oy + i];
            adjoint[(i, k - 1)] = x[oz + i];
        }
        for c in 0..n_u {
            control[(c, k - 1)] = x[ou + c];
        }
    }

    let desired = desired_matrix(ops, cfg)?;
    let objective = objective(ops, cfg, state.as_ref(), control.as_ref(), desired.as_ref());
    let z_scale = (0..=n_t)
        .flat_map(|k| ops.control_dofs.iter().map(move |&d| (d, k)))
        .fold(0.0_f64, |m, (d, k)| m.max(adjoint[(d, k)].abs()));
    let gap = (0..=n_t)
        .flat_map(|k| ops.control_dofs.iter().enumerate().map(move |(c, &d)| (c, d, k)))
        .fold(0.0_f64, |m, (c, d, k)| m.max((cfg.alpha * control[(c, k)] - adjoint[(d, k)]).abs()));
    let optimality_residual = if z_scale > 0.0 { gap / z_scale } else { gap };

    let name = &cfg.name;
    Ok(OcpSolution {
        state: SnapshotMatrix::new(state, cfg.dt, 0.0, format!("{name}/state"))?,
        control: SnapshotMatrix::new(control, cfg.dt, 0.0, format!("{name}/control"))?,
        adjoint: SnapshotMatrix::new(adjoint, cfg.dt, 0.0, format!("{name}/adjoint"))?,
        desired: SnapshotMatrix::new(desired, cfg.dt, 0.0, format!("{name}/desired"))?,
        objective,
        kkt_residual,
        optimality_residual,
        alpha: cfg.alpha,
        control_dofs: ops.control_dofs.clone(),
        dims: OcpDimensions {
            n_y,
            n_u,
            n_steps: n_t,
            kkt: kkt_dimension(ops, n_t),
        },
        wall_time: start.elapsed().as_secs_f64(),
        solve_time,
        warnings: ops.warnings.clone(),
    })
}

/// Target trajectory scattered to full DOF length, `n_steps + 1` columns.
pub fn desired_matrix(ops: &DiscreteOperators, cfg: &ParabolicOcpConfig) -> Result<Mat<f64>> {
    let d = desired_trajectory(ops, cfg)?;
    let mut m = Mat::zeros(ops.n_y, d.len());
    for (k, col) in d.iter().enumerate() {
        for (&dof, v) in ops.obs_dofs.iter().zip(col) {
            m[(dof, k)] = *v;
        }
    }
    Ok(m)
}

/// Discrete cost: tracking over `k = 1..=Nt`, control over `k = 0..Nt-1`,
/// both with weight `dt`.
pub fn objective(
    ops: &DiscreteOperators,
    cfg: &ParabolicOcpConfig,
    state: faer::MatRef<'_, f64>,
    control: faer::MatRef<'_, f64>,
    desired: faer::MatRef<'_, f64>,
) -> f64 {
    let dt = cfg.dt;
    let quad = |m: &SparseMatrix, v: &[f64]| -> f64 {
        m.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    };
    let mut j = 0.0;
    for k in 1..=cfg.n_steps {
        let e: Vec<f64> = (0..ops.n_y).map(|i| state[(i, k)] - desired[(i, k)]).collect();
        j += 0.5 * dt * quad(&ops.obs_mass, &e);
        let u: Vec<f64> = (0..ops.n_u).map(|c| control[(c, k - 1)]).collect();
        j += 0.5 * cfg.alpha * dt * quad(&ops.control_mass, &u);
    }
    j
}

/// Forward implicit Euler for a given control; columns `0..n_steps` of
/// `control` drive the steps. Returns `n_steps + 1` state columns.
pub fn simulate_state(
    ops: &DiscreteOperators,
    cfg: &ParabolicOcpConfig,
    control: faer::MatRef<'_, f64>,
) -> Result<Mat<f64>> {
    let n_t = cfg.n_steps;
    if control.nrows() != ops.n_u || control.ncols() < n_t {
        return Err(Error::dims(format!(
            "control is {}x{}, need {}x{} or wider",
            control.nrows(),
            control.ncols(),
            ops.n_u,
            n_t
        )));
    }
    let step = ops.mass.combine(1.0, &ops.dynamics, cfg.dt)?;
    let lu = SparseLu::new(&step)?;
    let mut y = initial_state(ops, cfg)?;
    let mut out = Mat::zeros(ops.n_y, n_t + 1);
    for (i, v) in y.iter().enumerate() {
        out[(i, 0)] = *v;
    }
    for k in 1..=n_t {
        let u: Vec<f64> = (0..ops.n_u).map(|c| control[(c, k - 1)]).collect();
        let cu = ops.control_coupling.mul_vec(&u);
        let my = ops.mass.mul_vec(&y);
        let f = ops.forcing_at(k as f64 * cfg.dt);
        let rhs: Vec<f64> = (0..ops.n_y).map(|i| my[i] + cfg.dt * (cu[i] + f[i])).collect();
        y = lu.solve(&rhs)?;
        for (i, v) in y.iter().enumerate() {
            out[(i, k)] = *v;
        }
    }
    Ok(out)
}
