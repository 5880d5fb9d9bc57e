//! All-at-once optimality system.
//!
//! Implicit Euler with the control taken at the left end of each step:
//!
//! ```text
//! (M + dt K) y_k - M y_{k-1} - dt C u_{k-1} = dt f        k = 1..Nt
//! ```
//!
//! The multiplier of step `k` is stored as `z_{k-1}`, so `z_{Nt} = 0` and the
//! optimality rows read `alpha N_c u_k = C^T z_k` for `k = 0..Nt-1`. Unknowns
//! are ordered blockwise, block `k` holding `(y_k, u_{k-1}, z_{k-1})`.

use super::assemble::DiscreteOperators;
use super::config::ParabolicOcpConfig;
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Size of one time block, `2 N_y + N_u`.
pub fn block_size(ops: &DiscreteOperators) -> usize {
    2 * ops.n_y + ops.n_u
}

pub fn kkt_dimension(ops: &DiscreteOperators, n_steps: usize) -> usize {
    n_steps * block_size(ops)
}

/// Offsets of `y_k`, `u_{k-1}` and `z_{k-1}` inside the unknown vector, `k >= 1`.
pub fn offsets(ops: &DiscreteOperators, k: usize) -> (usize, usize, usize) {
    let base = (k - 1) * block_size(ops);
    (base, base + ops.n_y, base + ops.n_y + ops.n_u)
}

pub fn initial_state(ops: &DiscreteOperators, cfg: &ParabolicOcpConfig) -> Result<Vec<f64>> {
    match &cfg.y0 {
        None => Ok(vec![0.0; ops.n_y]),
        Some(y0) if y0.len() == ops.n_y && y0.iter().all(|v| v.is_finite()) => Ok(y0.clone()),
        Some(y0) => Err(Error::invalid(format!(
            "initial state must hold {} finite values, got {}",
            ops.n_y,
            y0.len()
        ))),
    }
}

/// Target values on the observed DOFs for `k = 0..=Nt`.
pub fn desired_trajectory(ops: &DiscreteOperators, cfg: &ParabolicOcpConfig) -> Result<Vec<Vec<f64>>> {
    let n_obs = ops.obs_dofs.len();
    (0..=cfg.n_steps)
        .map(|k| {
            let d = cfg.desired_state.sample(k as f64 * cfg.dt, n_obs);
            if d.len() != n_obs {
                return Err(Error::invalid(format!(
                    "desired state has {} values for {n_obs} observed DOFs",
                    d.len()
                )));
            }
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite desired state at step {k}")));
            }
            Ok(d)
        })
        .collect()
}

fn check(ops: &DiscreteOperators) -> Result<()> {
    let (ny, nu) = (ops.n_y, ops.n_u);
    let square = [
        ("mass", &ops.mass),
        ("dynamics", &ops.dynamics),
        ("observation mass", &ops.obs_mass),
    ];
    for (name, m) in square {
        if (m.n_rows(), m.n_cols()) != (ny, ny) {
            return Err(Error::dims(format!("{name} is {}x{}, expected {ny}x{ny}", m.n_rows(), m.n_cols())));
        }
    }
    if (ops.control_coupling.n_rows(), ops.control_coupling.n_cols()) != (ny, nu) {
        return Err(Error::dims("control coupling does not match N_y x N_u"));
    }
    if (ops.control_mass.n_rows(), ops.control_mass.n_cols()) != (nu, nu) {
        return Err(Error::dims("control mass does not match N_u x N_u"));
    }
    if ops.forcing.len() != ny {
        return Err(Error::dims("forcing length differs from N_y"));
    }
    Ok(())
}

/// Assembles the symmetric space-time matrix and its right-hand side.
pub fn assemble_spacetime_kkt(
    ops: &DiscreteOperators,
    cfg: &ParabolicOcpConfig,
) -> Result<(SparseMatrix, Vec<f64>)> {
    check(ops)?;
    let n_t = cfg.n_steps;
    if n_t == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let (dt, alpha) = (cfg.dt, cfg.alpha);
    let y0 = initial_state(ops, cfg)?;
    let desired = desired_trajectory(ops, cfg)?;
    let step = ops.mass.combine(1.0, &ops.dynamics, dt)?;
    let dim = kkt_dimension(ops, n_t);

    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; dim];
    let m_y0 = ops.mass.mul_vec(&y0);
    for k in 1..=n_t {
        let (oy, ou, oz) = offsets(ops, k);
        // observation and step blocks: (dt M_obs) y_k and the (y_k, z_{k-1}) pair
        for (i, j, v) in ops.obs_mass.triplets() {
            t.push((oy + i, oy + j, dt * v));
        }
        for (i, j, v) in step.triplets() {
            t.push((oz + i, oy + j, v));
            t.push((oy + j, oz + i, v));
        }
        for (i, j, v) in ops.control_mass.triplets() {
            t.push((ou + i, ou + j, alpha * dt * v));
        }
        for (i, j, v) in ops.control_coupling.triplets() {
            t.push((oz + i, ou + j, -dt * v));
            t.push((ou + j, oz + i, -dt * v));
        }
        if k > 1 {
            let (py, _, _) = offsets(ops, k - 1);
            for (i, j, v) in ops.mass.triplets() {
                t.push((oz + i, py + j, -v));
                t.push((py + j, oz + i, -v));
            }
        }
        let target = ops.extend_obs(&desired[k]);
        let weighted = ops.obs_mass.mul_vec(&target);
        for i in 0..ops.n_y {
            rhs[oy + i] = dt * weighted[i];
            rhs[oz + i] = dt * ops.forcing_at(k as f64 * dt)[i] + if k == 1 { m_y0[i] } else { 0.0 };
        }
    }
    Ok((SparseMatrix::from_triplets(dim, dim, &t)?, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::presets::tiny;
    use crate::ocp::{assemble, ControlKind};

    #[test]
    fn dimension_formula() {
        for kind in [ControlKind::Distributed, ControlKind::Boundary] {
            let cfg = tiny(kind, 1);
            let ops = assemble(&cfg).unwrap();
            let (k, rhs) = assemble_spacetime_kkt(&ops, &cfg).unwrap();
            assert_eq!(k.n_rows(), 2 * ops.n_y + ops.n_u);
            assert_eq!(rhs.len(), k.n_rows());
        }
        let cfg = tiny(ControlKind::Distributed, 1);
        let ops = assemble(&cfg).unwrap();
        // 2x2 interior, every DOF controlled
        assert_eq!((ops.n_y, ops.n_u), (4, 4));
        assert_eq!(kkt_dimension(&ops, 1), 12);
    }

    #[test]
    fn exact_symmetry() {
        for kind in [ControlKind::Distributed, ControlKind::Boundary] {
            let cfg = tiny(kind, 3);
            let ops = assemble(&cfg).unwrap();
            let (k, _) = assemble_spacetime_kkt(&ops, &cfg).unwrap();
            assert!(k.is_symmetric());
            assert_eq!(k.transpose(), k);
        }
    }

    #[test]
    fn inconsistent_operators() {
        let cfg = tiny(ControlKind::Distributed, 2);
        let mut ops = assemble(&cfg).unwrap();
        ops.forcing.pop();
        assert!(matches!(assemble_spacetime_kkt(&ops, &cfg), Err(Error::DimensionMismatch(_))));
    }
}
