//! Shared fixtures for the benchmarks.

use ocpdmd::ocp::{graetz_analog, graetz_analog_grid, solve_fom};
use ocpdmd::{OcpSolution, ParabolicOcpConfig};

/// Graetz analog on a coarser grid, so that one FOM solve stays short.
pub fn small_graetz() -> ParabolicOcpConfig {
    graetz_analog_grid(16, 6)
}

/// Full-size Graetz analog solution, the training data of the surrogate benches.
pub fn graetz_solution() -> OcpSolution {
    let cfg = graetz_analog();
    solve_fom(&cfg).expect("graetz analog solves")
}
