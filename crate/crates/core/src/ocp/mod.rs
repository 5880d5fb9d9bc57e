//! Linear-quadratic parabolic control problems and their full-order
//! all-at-once solution.

mod assemble;
mod config;
mod kkt;
mod presets;
mod solve;

pub use assemble::{assemble, DiscreteOperators, PECLET_LIMIT};
pub use config::{AdvectionScheme, ControlKind, DesiredState, ParabolicOcpConfig, VelocityField};
pub use kkt::{assemble_spacetime_kkt, block_size, desired_trajectory, initial_state, kkt_dimension, offsets};
pub use presets::{
    distributed_analog, distributed_analog_grid, graetz_analog, graetz_analog_grid, preset, tiny,
    PRESETS,
};
pub use solve::{
    desired_matrix, objective, scaled_residual, simulate_state, solve_assembled, solve_fom,
    OcpDimensions, OcpSolution,
};
