//! Vertex-centered finite volumes on the uniform node grid.
//!
//! Every grid node owns the cell `[x - hx/2, x + hx/2] x [y - hy/2, y + hy/2]`
//! clipped to the rectangle. Diffusion is the two-point flux across cell
//! faces (the 5-point stencil), advection is `area * beta . grad_h y` with
//! centered or upwind differences (one-sided on the grid edges), and the
//! mass matrix is lumped to the cell areas. Dirichlet nodes are removed from
//! the unknowns; their known values move to the right-hand side.

use super::config::{AdvectionScheme, ControlKind, ParabolicOcpConfig};
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Cell Péclet number above which centered advection is flagged.
pub const PECLET_LIMIT: f64 = 2.0;

/// Algebraic operators of the semi-discrete problem
/// `M y' + K y = C u + f` on the free (non-Dirichlet) DOFs.
#[derive(Clone, Debug)]
pub struct DiscreteOperators {
    pub mass: SparseMatrix,
    pub dynamics: SparseMatrix,
    pub control_coupling: SparseMatrix,
    pub obs_mass: SparseMatrix,
    pub control_mass: SparseMatrix,
    /// Dirichlet lift `-K_fd g` on the free DOFs; time independent.
    pub forcing: Vec<f64>,
    pub n_y: usize,
    pub n_u: usize,
    /// Grid node of each DOF.
    pub dof_nodes: Vec<usize>,
    /// DOF of each grid node, `None` on Dirichlet nodes.
    pub node_dofs: Vec<Option<usize>>,
    /// DOF index of each control variable.
    pub control_dofs: Vec<usize>,
    /// Observed DOFs, sorted.
    pub obs_dofs: Vec<usize>,
    pub cell_peclet: f64,
    pub warnings: Vec<String>,
}

impl DiscreteOperators {
    pub fn forcing_at(&self, _t: f64) -> &[f64] {
        &self.forcing
    }

    /// Scatters values on the observed DOFs into a full-length DOF vector.
    pub fn extend_obs(&self, values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_y];
        for (&d, v) in self.obs_dofs.iter().zip(values) {
            full[d] = *v;
        }
        full
    }
}

struct Grid<'a> {
    cfg: &'a ParabolicOcpConfig,
    hx: f64,
    hy: f64,
}

impl Grid<'_> {
    fn width_x(&self, i: usize) -> f64 {
        if i == 0 || i == self.cfg.nx - 1 {
            0.5 * self.hx
        } else {
            self.hx
        }
    }

    fn width_y(&self, j: usize) -> f64 {
        if j == 0 || j == self.cfg.ny - 1 {
            0.5 * self.hy
        } else {
            self.hy
        }
    }

    fn area(&self, node: usize) -> f64 {
        let (i, j) = (node % self.cfg.nx, node / self.cfg.nx);
        self.width_x(i) * self.width_y(j)
    }

    /// Weights of `d/dx` (or `d/dy`) at index `i` of an axis with `n` nodes.
    fn difference(i: usize, n: usize, h: f64, b: f64, scheme: AdvectionScheme) -> [(usize, f64); 2] {
        if i == 0 {
            return [(1, 1.0 / h), (0, -1.0 / h)];
        }
        let forward = [(i + 1, 1.0 / h), (i, -1.0 / h)];
        let backward = [(i, 1.0 / h), (i - 1, -1.0 / h)];
        if i == n - 1 {
            return backward;
        }
        match scheme {
            AdvectionScheme::Centered => [(i + 1, 0.5 / h), (i - 1, -0.5 / h)],
            AdvectionScheme::Upwind if b >= 0.0 => backward,
            AdvectionScheme::Upwind => forward,
        }
    }

    /// Full-grid stiffness triplets (diffusion plus advection).
    fn stiffness(&self) -> Vec<(usize, usize, f64)> {
        let cfg = self.cfg;
        let (nx, ny, eps) = (cfg.nx, cfg.ny, cfg.epsilon);
        let mut t = Vec::with_capacity(9 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let p = cfg.node(i, j);
                if i + 1 < nx {
                    let c = eps * self.width_y(j) / self.hx;
                    let q = cfg.node(i + 1, j);
                    t.extend([(p, p, c), (q, q, c), (p, q, -c), (q, p, -c)]);
                }
                if j + 1 < ny {
                    let c = eps * self.width_x(i) / self.hy;
                    let q = cfg.node(i, j + 1);
                    t.extend([(p, p, c), (q, q, c), (p, q, -c), (q, p, -c)]);
                }
                let (x, y) = cfg.coords(p);
                let [bx, by] = cfg.beta.at(p, x, y, cfg.ly);
                let area = self.area(p);
                if bx != 0.0 {
                    for (k, w) in Self::difference(i, nx, self.hx, bx, cfg.advection) {
                        t.push((p, cfg.node(k, j), area * bx * w));
                    }
                }
                if by != 0.0 {
                    for (k, w) in Self::difference(j, ny, self.hy, by, cfg.advection) {
                        t.push((p, cfg.node(i, k), area * by * w));
                    }
                }
            }
        }
        t
    }

    /// Length of the control boundary inside the cell of a boundary node:
    /// half a spacing for each boundary neighbor that is also controlled.
    fn boundary_weight(&self, node: usize, controlled: &[bool]) -> f64 {
        let cfg = self.cfg;
        let (i, j) = (node % cfg.nx, node / cfg.nx);
        let mut w = 0.0;
        let mut visit = |ii: usize, jj: usize, h: f64| {
            let q = cfg.node(ii, jj);
            if cfg.is_boundary(q) && controlled[q] {
                w += 0.5 * h;
            }
        };
        let on_vertical_edge = i == 0 || i == cfg.nx - 1;
        let on_horizontal_edge = j == 0 || j == cfg.ny - 1;
        if on_horizontal_edge {
            if i > 0 {
                visit(i - 1, j, self.hx);
            }
            if i + 1 < cfg.nx {
                visit(i + 1, j, self.hx);
            }
        }
        if on_vertical_edge {
            if j > 0 {
                visit(i, j - 1, self.hy);
            }
            if j + 1 < cfg.ny {
                visit(i, j + 1, self.hy);
            }
        }
        w
    }
}

pub fn assemble(cfg: &ParabolicOcpConfig) -> Result<DiscreteOperators> {
    cfg.validate()?;
    let grid = Grid {
        cfg,
        hx: cfg.hx(),
        hy: cfg.hy(),
    };
    let n_nodes = cfg.n_nodes();
    let mut controlled = vec![false; n_nodes];
    cfg.control_region.iter().for_each(|&v| controlled[v] = true);
    let mut neumann = vec![false; n_nodes];
    cfg.neumann_region.iter().for_each(|&v| neumann[v] = true);

    let dirichlet = |v: usize| {
        cfg.is_boundary(v)
            && !neumann[v]
            && !(cfg.control_kind == ControlKind::Boundary && controlled[v])
    };
    let mut node_dofs = vec![None; n_nodes];
    let mut dof_nodes = Vec::new();
    for v in 0..n_nodes {
        if !dirichlet(v) {
            node_dofs[v] = Some(dof_nodes.len());
            dof_nodes.push(v);
        }
    }
    let n_y = dof_nodes.len();
    if n_y == 0 {
        return Err(Error::invalid("every node is a Dirichlet node"));
    }

    let mut warnings = Vec::new();
    let mut cell_peclet: f64 = 0.0;
    for v in 0..n_nodes {
        let (x, y) = cfg.coords(v);
        let [bx, by] = cfg.beta.at(v, x, y, cfg.ly);
        if !(bx.is_finite() && by.is_finite()) {
            return Err(Error::invalid(format!("non-finite velocity at node {v}")));
        }
        cell_peclet = cell_peclet.max((bx.abs() * grid.hx).max(by.abs() * grid.hy) / cfg.epsilon);
    }
    if cell_peclet > PECLET_LIMIT && cfg.advection == AdvectionScheme::Centered {
        warnings.push(format!(
            "cell Peclet number {cell_peclet:.3} exceeds {PECLET_LIMIT}; centered advection may oscillate, consider the upwind scheme"
        ));
    }

    let full = grid.stiffness();
    let mut k = Vec::with_capacity(full.len());
    let mut forcing = vec![0.0; n_y];
    for (p, q, v) in full {
        if let Some(r) = node_dofs[p] {
            match node_dofs[q] {
                Some(c) => k.push((r, c, v)),
                None => forcing[r] -= v * cfg.dirichlet_value,
            }
        }
    }
    let dynamics = SparseMatrix::from_triplets(n_y, n_y, &k)?;
    let areas: Vec<f64> = dof_nodes.iter().map(|&v| grid.area(v)).collect();
    let mass = SparseMatrix::from_diagonal(&areas)?;

    let control_dofs: Vec<usize> = cfg
        .control_region
        .iter()
        .map(|&v| node_dofs[v].expect("validated control node is free"))
        .collect();
    let weights: Vec<f64> = match cfg.control_kind {
        ControlKind::Distributed => control_dofs.iter().map(|&d| areas[d]).collect(),
        ControlKind::Boundary => cfg
            .control_region
            .iter()
            .map(|&v| grid.boundary_weight(v, &controlled))
            .collect(),
    };
    if let Some(pos) = weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::invalid(format!(
            "control node {} has no controlled boundary segment; control regions need adjacent boundary nodes",
            cfg.control_region[pos]
        )));
    }
    let n_u = control_dofs.len();
    let coupling: Vec<(usize, usize, f64)> = control_dofs
        .iter()
        .zip(&weights)
        .enumerate()
        .map(|(c, (&d, &w))| (d, c, w))
        .collect();
    let control_coupling = SparseMatrix::from_triplets(n_y, n_u, &coupling)?;
    let control_mass = SparseMatrix::from_diagonal(&weights)?;

    let mut obs_dofs: Vec<usize> = cfg.obs_region.iter().filter_map(|&v| node_dofs[v]).collect();
    obs_dofs.sort_unstable();
    if obs_dofs.is_empty() {
        return Err(Error::invalid("observation region contains only Dirichlet nodes"));
    }
    let dropped = cfg.obs_region.len() - obs_dofs.len();
    if dropped > 0 {
        warnings.push(format!("{dropped} observed Dirichlet nodes are not unknowns and were dropped"));
    }
    let obs: Vec<(usize, usize, f64)> = obs_dofs.iter().map(|&d| (d, d, areas[d])).collect();
    let obs_mass = SparseMatrix::from_triplets(n_y, n_y, &obs)?;

    Ok(DiscreteOperators {
        mass,
        dynamics,
        control_coupling,
        obs_mass,
        control_mass,
        forcing,
        n_y,
        n_u,
        dof_nodes,
        node_dofs,
        control_dofs,
        obs_dofs,
        cell_peclet,
        warnings,
    })
}
