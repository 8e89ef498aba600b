//! Minimization of the energy functional `Phi` and a posteriori checks of
//! the computed critical point.

mod minimize;
mod weak;

use serde::Serialize;

pub use minimize::{
    assemble_phi, minimize_phi, phi_gradient, stationarity, LineSearchStats, SolveOptions, SolveResult, StartSummary,
    StopReason, UNBOUNDED_BELOW,
};
pub use weak::{
    default_radius, estimate_lambda_u, estimate_lambda_u_hierarchical, make_truncation, truncated_test_basis,
    verify_weak_solution, ResidualReport, TruncatedBasis, Truncation,
};

use crate::error::Result;
use crate::fem::{DiscreteField, DualVector, Mesh};
use crate::nonlinearity::{eval_potential, NonlinearitySpec};

/// Relative perturbation sizes used by [`probe_local_minimum`].
pub const PROBE_STEPS: [f64; 2] = [1e-3, 1e-2];

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub holds: bool,
    /// Smallest `Phi(u + t psi_j) - Phi(u)` seen.
    pub worst_change: f64,
    pub probes: usize,
}

/// Checks `Phi(u) <= Phi(u + t psi_j)` for every hat `psi_j` and
/// `t = ±{1e-3, 1e-2} * max(1, ||u||_inf)`, up to a rounding slack.
/// Only the cells in the support of `psi_j` are re-evaluated.
pub fn probe_local_minimum(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    h: &DualVector,
    u: &DiscreteField,
    p: f64,
) -> Result<ProbeReport> {
    h.check(mesh, "solver::probe_local_minimum")?;
    u.check(mesh, "solver::probe_local_minimum")?;
    let phi = assemble_phi(mesh, spec, h, u, p)?;
    let slack = 1e-12 * phi.to_f64().abs().max(1.0);
    let mut cells_of = vec![Vec::new(); mesh.num_vertices()];
    for c in 0..mesh.num_cells() {
        for &v in mesh.cell(c) {
            cells_of[v].push(c);
        }
    }
    let dim = mesh.dim();
    let local = |vv: &[f64], cells: &[usize]| -> Result<f64> {
        let mut e = 0.0;
        for &c in cells {
            let g = mesh.gradient_on(vv, c);
            e += mesh.cell_measure(c) * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p) / p;
            for q in mesh.quadrature_points_of(c) {
                let s = mesh.value_at(vv, q);
                e -= q.weight * eval_potential(spec, &q.x[..dim], s)?.to_f64();
            }
        }
        Ok(e)
    };
    let scale = u.max_abs().max(1.0);
    let mut vv = mesh.vertex_values(u);
    let mut worst = f64::INFINITY;
    let mut probes = 0;
    for (j, &v) in mesh.free_vertices().iter().enumerate() {
        let cells = &cells_of[v];
        let base = local(&vv, cells)?;
        let orig = vv[v];
        for step in PROBE_STEPS {
            for sign in [1.0, -1.0] {
                let t = sign * step * scale;
                vv[v] = orig + t;
                let mut change = local(&vv, cells)? - base - t * h.values()[j];
                if change.is_nan() {
                    change = f64::INFINITY;
                }
                worst = worst.min(change);
                probes += 1;
            }
        }
        vv[v] = orig;
    }
    Ok(ProbeReport {
        holds: worst >= -slack,
        worst_change: worst,
        probes,
    })
}

#[cfg(test)]
mod tests;
