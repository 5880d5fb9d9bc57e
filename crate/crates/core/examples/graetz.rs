//! Solves the Graetz analog and prints the surrogate error report.
//!
//! `cargo run --release -p ocpdmd --example graetz`

use ocpdmd::ocp::{preset, solve_fom};
use ocpdmd::pipeline::{execute, PipelineInputs, PipelineSettings};

fn main() -> ocpdmd::Result<()> {
    let sol = solve_fom(&preset("graetz_analog")?)?;
    eprintln!(
        "FOM: n_y = {}, n_u = {}, KKT dimension {}, solve {:.3} s, J = {:.6}",
        sol.dims.n_y, sol.dims.n_u, sol.dims.kkt, sol.solve_time, sol.objective
    );
    let mut settings = PipelineSettings::new(sol.alpha, sol.control_dofs.clone());
    settings.sizes = vec![10, 15, 20, 25, 30];
    settings.fom_seconds = Some(sol.solve_time);
    let run = execute(&PipelineInputs::from_solution(&sol), &settings)?;
    println!("{}", serde_json::to_string_pretty(&run.report)?);
    Ok(())
}
