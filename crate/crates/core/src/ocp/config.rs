use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Advection velocity evaluated at grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityField {
    Zero,
    Uniform { value: [f64; 2] },
    /// `[scale * y (ly - y) / ly, 0]`, which is `[scale * y (1 - y), 0]` on a unit-height channel.
    Poiseuille { scale: f64 },
    /// One `[bx, by]` per grid node, in grid order.
    Nodal { values: Vec<[f64; 2]> },
}

impl VelocityField {
    pub fn at(&self, node: usize, x: f64, y: f64, ly: f64) -> [f64; 2] {
        let _ = x;
        match self {
            VelocityField::Zero => [0.0, 0.0],
            VelocityField::Uniform { value } => *value,
            VelocityField::Poiseuille { scale } => {
                let s = y / ly;
                [scale * ly * s * (1.0 - s), 0.0]
            }
            VelocityField::Nodal { values } => values[node],
        }
    }
}

/// Discretization of the first-order term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    #[default]
    Centered,
    Upwind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Neumann flux on the boundary nodes of the control region.
    Boundary,
    /// Volume source on the control region.
    Distributed,
}

/// Target profile on the observation region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesiredState {
    /// `offset + slope * t` on every observed node.
    Affine { offset: f64, slope: f64 },
    /// `amplitude (1 + t) (1 + cos(4 pi t - pi) / 2)` on every observed node.
    Pulsed { amplitude: f64 },
    /// Column `k` holds the observed values at `t0 + k dt` (nearest sample).
    Tabulated {
        t0: f64,
        dt: f64,
        columns: Vec<Vec<f64>>,
    },
}

impl DesiredState {
    /// Values at time `t` on the `n_obs` observed DOFs.
    pub fn sample(&self, t: f64, n_obs: usize) -> Vec<f64> {
        match self {
            DesiredState::Affine { offset, slope } => vec![offset + slope * t; n_obs],
            DesiredState::Pulsed { amplitude } => {
                vec![amplitude * (1.0 + t) * (1.0 + 0.5 * (4.0 * PI * t - PI).cos()); n_obs]
            }
            DesiredState::Tabulated { t0, dt, columns } => {
                let k = ((t - t0) / dt).round().max(0.0) as usize;
                columns[k.min(columns.len() - 1)].clone()
            }
        }
    }
}

/// A parabolic optimal control problem on a rectangle, discretized on a
/// uniform `nx` × `ny` node grid (boundary nodes included).
///
/// Regions are lists of grid node ids `i + j * nx`. Boundary nodes that are
/// neither in `neumann_region` nor (for boundary control) in
/// `control_region` carry the Dirichlet value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicOcpConfig {
    pub name: String,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    pub epsilon: f64,
    pub beta: VelocityField,
    #[serde(default)]
    pub advection: AdvectionScheme,
    pub alpha: f64,
    pub control_kind: ControlKind,
    pub control_region: Vec<usize>,
    #[serde(default)]
    pub neumann_region: Vec<usize>,
    pub obs_region: Vec<usize>,
    pub dirichlet_value: f64,
    pub desired_state: DesiredState,
    /// Initial state on the DOFs; `None` is the zero (lifted) state.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    pub dt: f64,
    pub n_steps: usize,
}

impl ParabolicOcpConfig {
    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % self.nx, node / self.nx);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = (node % self.nx, node / self.nx);
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.lx, "lx")?;
        positive(self.ly, "ly")?;
        positive(self.epsilon, "epsilon")?;
        positive(self.alpha, "alpha")?;
        positive(self.dt, "dt")?;
        if !self.dirichlet_value.is_finite() {
            return Err(Error::invalid("dirichlet value must be finite"));
        }
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::invalid(format!(
                "grid must have at least 2x2 interior nodes, got {}x{} nodes",
                self.nx, self.ny
            )));
        }
        if self.n_steps < 1 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if self.control_region.is_empty() {
            return Err(Error::invalid("empty control region"));
        }
        if self.obs_region.is_empty() {
            return Err(Error::invalid("empty observation region"));
        }
        let n = self.n_nodes();
        for (name, region) in [
            ("control", &self.control_region),
            ("neumann", &self.neumann_region),
            ("observation", &self.obs_region),
        ] {
            if let Some(bad) = region.iter().find(|&&v| v >= n) {
                return Err(Error::invalid(format!("{name} node {bad} outside the {n}-node grid")));
            }
            let mut sorted = region.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != region.len() {
                return Err(Error::invalid(format!("duplicate nodes in the {name} region")));
            }
        }
        if let Some(bad) = self.neumann_region.iter().find(|&&v| !self.is_boundary(v)) {
            return Err(Error::invalid(format!("neumann node {bad} is not on the boundary")));
        }
        match self.control_kind {
            ControlKind::Boundary => {
                if let Some(bad) = self.control_region.iter().find(|&&v| !self.is_boundary(v)) {
                    return Err(Error::invalid(format!(
                        "boundary control node {bad} is not on the boundary"
                    )));
                }
                if let Some(bad) = self.control_region.iter().find(|v| self.neumann_region.contains(v)) {
                    return Err(Error::invalid(format!(
                        "node {bad} is in both the control and the neumann region"
                    )));
                }
            }
            ControlKind::Distributed => {
                let dirichlet = |v: usize| self.is_boundary(v) && !self.neumann_region.contains(&v);
                if let Some(bad) = self.control_region.iter().find(|&&v| dirichlet(v)) {
                    return Err(Error::invalid(format!(
                        "distributed control node {bad} lies on the Dirichlet boundary"
                    )));
                }
            }
        }
        if let VelocityField::Nodal { values } = &self.beta {
            if values.len() != n {
                return Err(Error::invalid(format!(
                    "nodal velocity has {} entries for {n} nodes",
                    values.len()
                )));
            }
        }
        if let DesiredState::Tabulated { dt, columns, .. } = &self.desired_state {
            if columns.is_empty() || !(*dt > 0.0) {
                return Err(Error::invalid("tabulated desired state needs columns and dt > 0"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desired_profiles() {
        let affine = DesiredState::Affine { offset: 1.0, slope: 1.0 };
        assert_eq!(affine.sample(0.5, 3), vec![1.5; 3]);
        let pulsed = DesiredState::Pulsed { amplitude: 10.0 };
        assert!((pulsed.sample(0.0, 1)[0] - 5.0).abs() < 1e-12);
        assert!((pulsed.sample(0.25, 1)[0] - 18.75).abs() < 1e-12);
        let tab = DesiredState::Tabulated {
            t0: 0.0,
            dt: 0.1,
            columns: vec![vec![1.0], vec![2.0]],
        };
        assert_eq!(tab.sample(0.1000000001, 1), vec![2.0]);
        assert_eq!(tab.sample(5.0, 1), vec![2.0]);
    }

    #[test]
    fn poiseuille_profile() {
        let b = VelocityField::Poiseuille { scale: 1.0 };
        assert_eq!(b.at(0, 0.0, 0.5, 1.0), [0.25, 0.0]);
        assert_eq!(b.at(0, 0.0, 0.0, 1.0), [0.0, 0.0]);
    }
}
