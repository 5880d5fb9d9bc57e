//! Ready-made problems.

use super::config::{
    AdvectionScheme, ControlKind, DesiredState, ParabolicOcpConfig, VelocityField,
};
use crate::error::{Error, Result};

pub const PRESETS: [&str; 2] = ["graetz_analog", "distributed_analog"];

const TOL: f64 = 1e-9;

fn nodes_where(cfg: &ParabolicOcpConfig, keep: impl Fn(usize, usize, f64, f64) -> bool) -> Vec<usize> {
    (0..cfg.n_nodes())
        .filter(|&v| {
            let (x, y) = cfg.coords(v);
            keep(v % cfg.nx, v / cfg.nx, x, y)
        })
        .collect()
}

/// Channel `[0,3] x [0,1]` with a parabolic inflow profile, controlled by
/// the wall flux on `x >= 1` and observed near both walls.
pub fn graetz_analog() -> ParabolicOcpConfig {
    graetz_analog_grid(31, 11)
}

pub fn graetz_analog_grid(nx: usize, ny: usize) -> ParabolicOcpConfig {
    let mut cfg = ParabolicOcpConfig {
        name: "graetz_analog".into(),
        lx: 3.0,
        ly: 1.0,
        nx,
        ny,
        epsilon: 1.0 / 12.0,
        beta: VelocityField::Poiseuille { scale: 1.0 },
        advection: AdvectionScheme::Centered,
        alpha: 1e-2,
        control_kind: ControlKind::Boundary,
        control_region: Vec::new(),
        neumann_region: Vec::new(),
        obs_region: Vec::new(),
        dirichlet_value: 1.0,
        desired_state: DesiredState::Affine { offset: 1.0, slope: 1.0 },
        y0: None,
        dt: 0.02,
        n_steps: 50,
    };
    if nx < 2 || ny < 2 {
        return cfg;
    }
    let (last_i, last_j) = (nx - 1, ny - 1);
    cfg.control_region = nodes_where(&cfg, |_, j, x, _| (j == 0 || j == last_j) && x >= 1.0 - TOL);
    cfg.neumann_region = nodes_where(&cfg, |i, j, _, _| i == last_i && j > 0 && j < last_j);
    cfg.obs_region = nodes_where(&cfg, |_, _, x, y| {
        x >= 1.0 - TOL && (y <= 0.2 + TOL || y >= 0.8 - TOL)
    });
    cfg
}

/// Unit square, homogeneous Dirichlet walls, control and observation on
/// every free node, pulsating target.
pub fn distributed_analog() -> ParabolicOcpConfig {
    distributed_analog_grid(21)
}

pub fn distributed_analog_grid(n: usize) -> ParabolicOcpConfig {
    let mut cfg = ParabolicOcpConfig {
        name: "distributed_analog".into(),
        lx: 1.0,
        ly: 1.0,
        nx: n,
        ny: n,
        epsilon: 1.0,
        beta: VelocityField::Zero,
        advection: AdvectionScheme::Centered,
        alpha: 1e-5,
        control_kind: ControlKind::Distributed,
        control_region: Vec::new(),
        neumann_region: Vec::new(),
        obs_region: Vec::new(),
        dirichlet_value: 0.0,
        desired_state: DesiredState::Pulsed { amplitude: 10.0 },
        y0: None,
        dt: 0.02,
        n_steps: 50,
    };
    let interior = nodes_where(&cfg, |i, j, _, _| i > 0 && j > 0 && i + 1 < n && j + 1 < n);
    cfg.control_region = interior.clone();
    cfg.obs_region = interior;
    cfg
}

/// Smallest admissible problems (2x2 interior nodes) for oracle checks.
pub fn tiny(kind: ControlKind, n_steps: usize) -> ParabolicOcpConfig {
    let mut cfg = match kind {
        ControlKind::Distributed => {
            let mut c = distributed_analog_grid(4);
            c.dirichlet_value = 1.0;
            c.desired_state = DesiredState::Affine { offset: 2.0, slope: -1.0 };
            c
        }
        ControlKind::Boundary => {
            let mut c = graetz_analog_grid(4, 4);
            c.lx = 1.0;
            c.epsilon = 0.5;
            c.beta = VelocityField::Uniform { value: [0.4, 0.1] };
            c.control_region = vec![1, 2, 3];
            c.neumann_region = vec![7, 11];
            c.obs_region = vec![5, 6, 9, 10];
            c
        }
    };
    cfg.name = format!("tiny_{kind:?}").to_lowercase();
    cfg.alpha = 0.1;
    cfg.dt = 0.1;
    cfg.n_steps = n_steps;
    cfg
}

pub fn preset(name: &str) -> Result<ParabolicOcpConfig> {
    match name {
        "graetz_analog" => Ok(graetz_analog()),
        "distributed_analog" => Ok(distributed_analog()),
        other => Err(Error::invalid(format!(
            "unknown preset `{other}` (available: {})",
            PRESETS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::assemble;

    #[test]
    fn graetz_constants() {
        let cfg = graetz_analog();
        assert_eq!(cfg.alpha, 0.01);
        assert_eq!(cfg.epsilon, 1.0 / 12.0);
        assert_eq!(cfg.desired_state.sample(0.5, 4), vec![1.5; 4]);
        assert_eq!(cfg.final_time(), 1.0);
        cfg.validate().unwrap();
        // two walls, x in [1, 3]
        assert_eq!(cfg.control_region.len(), 42);
        assert_eq!(cfg.neumann_region.len(), 9);
        assert_eq!(cfg.obs_region.len(), 21 * 6);
        let ops = assemble(&cfg).unwrap();
        assert_eq!(ops.n_u, 42);
        // left wall and the walls upstream of x = 1 are Dirichlet
        assert_eq!(ops.n_y, 341 - 11 - 18);
        assert!(ops.cell_peclet < 2.0);
        assert!(ops.warnings.is_empty());
    }

    #[test]
    fn graetz_dynamics_are_coercive() {
        let ops = assemble(&graetz_analog()).unwrap();
        let k = ops.dynamics.to_dense();
        let sym = faer::Mat::from_fn(ops.n_y, ops.n_y, |i, j| 0.5 * (k[(i, j)] + k[(j, i)]));
        let eigs = sym.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "{min}");
    }

    #[test]
    fn distributed_constants() {
        let cfg = distributed_analog();
        assert_eq!(cfg.alpha, 1e-5);
        assert!((cfg.desired_state.sample(0.0, 1)[0] - 5.0).abs() < 1e-12);
        assert!((cfg.desired_state.sample(0.25, 1)[0] - 18.75).abs() < 1e-12);
        let ops = assemble(&cfg).unwrap();
        assert_eq!(ops.n_y, 19 * 19);
        assert_eq!(ops.n_u, ops.n_y);
        assert_eq!(ops.control_dofs, (0..ops.n_y).collect::<Vec<_>>());
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("stokes").is_err());
        assert_eq!(preset("graetz_analog").unwrap(), graetz_analog());
    }
}
