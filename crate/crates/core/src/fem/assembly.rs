//! Element loops for the p-Dirichlet energy, its gradient, L^p integrals and
//! load vectors.
//!
//! Element contributions may be computed in parallel, but they are always
//! reduced sequentially in cell order, so results do not depend on the
//! number of threads.

use rayon::prelude::*;

use super::banded::BandedSpd;
use super::field::{DiscreteField, DualVector};
use super::mesh::Mesh;
use crate::error::{invalid, Error, Result};

/// Below this many cells the element loop runs on the calling thread.
const PARALLEL_CELLS: usize = 4096;

/// Gradients with norm below this contribute nothing to the p-Laplacian.
pub const ZERO_GRADIENT: f64 = 1e-14;

pub(crate) fn map_cells<T: Send>(mesh: &Mesh, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    let n = mesh.num_cells();
    if n >= PARALLEL_CELLS {
        (0..n).into_par_iter().with_min_len(512).map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn check_exponent(op: &'static str, p: f64, strict: bool) -> Result<()> {
    let ok = if strict { p > 1.0 } else { p >= 1.0 };
    if !ok || !p.is_finite() {
        let bound = if strict { "p > 1" } else { "p >= 1" };
        return Err(invalid(op, format!("need finite {bound}, got p = {p}")));
    }
    Ok(())
}

fn norm2(g: [f64; 2]) -> f64 {
    (g[0] * g[0] + g[1] * g[1]).sqrt()
}

/// `(1/p) * integral |grad u|^p`, exact for P1 fields.
pub fn dirichlet_energy(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<f64> {
    const OP: &str = "fem::dirichlet_energy";
    check_exponent(OP, p, true)?;
    u.check(mesh, OP)?;
    let vv = mesh.vertex_values(u);
    let parts = map_cells(mesh, |c| {
        mesh.cell_measure(c) * norm2(mesh.gradient_on(&vv, c)).powf(p)
    });
    Ok(parts.iter().sum::<f64>() / p)
}

/// Gradient of [`dirichlet_energy`]: entry `j` is
/// `integral |grad u|^(p-2) grad u . grad psi_j`.
pub fn plap_residual(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<DualVector> {
    const OP: &str = "fem::plap_residual";
    check_exponent(OP, p, true)?;
    u.check(mesh, OP)?;
    let vv = mesh.vertex_values(u);
    let flux = map_cells(mesh, |c| {
        let g = mesh.gradient_on(&vv, c);
        let n = norm2(g);
        if n < ZERO_GRADIENT {
            [0.0; 2]
        } else {
            let s = mesh.cell_measure(c) * n.powf(p - 2.0);
            [s * g[0], s * g[1]]
        }
    });
    let mut out = vec![0.0; mesh.num_free()];
    for (c, fl) in flux.iter().enumerate() {
        let grads = mesh.basis_gradients(c);
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            if let Some(j) = mesh.dof_of_vertex(v) {
                out[j] += fl[0] * grads[k][0] + fl[1] * grads[k][1];
            }
        }
    }
    Ok(DualVector::new_unchecked(mesh.id(), out))
}

/// `integral |u|^p` by the mesh quadrature rule.
pub fn lp_integral(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<f64> {
    const OP: &str = "fem::lp_integral";
    check_exponent(OP, p, false)?;
    u.check(mesh, OP)?;
    let vv = mesh.vertex_values(u);
    let parts = map_cells(mesh, |c| {
        mesh.quadrature_points_of(c)
            .iter()
            .map(|q| q.weight * mesh.value_at(&vv, q).abs().powf(p))
            .sum::<f64>()
    });
    Ok(parts.iter().sum())
}

/// `sign(s) |s|^e`, zero at `s = 0` for every exponent.
pub fn signed_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(e)
    }
}

/// Entries `integral |u|^(p-2) u psi_j`; `p` times this is the gradient of [`lp_integral`].
pub fn lp_gradient(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<DualVector> {
    const OP: &str = "fem::lp_gradient";
    check_exponent(OP, p, false)?;
    u.check(mesh, OP)?;
    let vv = mesh.vertex_values(u);
    assemble_load(mesh, |q| Ok(signed_pow(mesh.value_at(&vv, q), p - 1.0)))
}

/// Load vector of an L^2 density: entry `j` is `integral g psi_j`.
pub fn load_vector(mesh: &Mesh, g: impl Fn(&[f64]) -> f64 + Sync) -> Result<DualVector> {
    const OP: &str = "fem::load_vector";
    let dim = mesh.dim();
    assemble_load(mesh, |q| {
        let v = g(&q.x[..dim]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                op: OP,
                x: q.x[..dim].to_vec(),
                s: f64::NAN,
            })
        }
    })
}

/// Load vector of `f(x, u(x))`: entry `j` is `integral f(x, u) psi_j`, with
/// `u` evaluated through its P1 interpolant at the quadrature points.
pub fn nonlinear_load(
    mesh: &Mesh,
    u: &DiscreteField,
    f: impl Fn(&[f64], f64) -> Result<f64> + Sync,
) -> Result<DualVector> {
    u.check(mesh, "fem::nonlinear_load")?;
    let vv = mesh.vertex_values(u);
    let dim = mesh.dim();
    assemble_load(mesh, |q| f(&q.x[..dim], mesh.value_at(&vv, q)))
}

pub(crate) fn assemble_load(
    mesh: &Mesh,
    density: impl Fn(&super::mesh::QuadPoint) -> Result<f64> + Sync,
) -> Result<DualVector> {
    let npe = mesh.nodes_per_cell();
    let local = map_cells(mesh, |c| -> Result<[f64; 3]> {
        let mut acc = [0.0; 3];
        for q in mesh.quadrature_points_of(c) {
            let d = density(q)? * q.weight;
            for (k, a) in acc.iter_mut().enumerate().take(npe) {
                *a += d * q.bary[k];
            }
        }
        Ok(acc)
    });
    let mut out = vec![0.0; mesh.num_free()];
    for (c, acc) in local.into_iter().enumerate() {
        let acc = acc?;
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            if let Some(j) = mesh.dof_of_vertex(v) {
                out[j] += acc[k];
            }
        }
    }
    Ok(DualVector::new_unchecked(mesh.id(), out))
}

/// Stiffness matrix on the free vertices with a constant weight per cell:
/// entry `(i, j)` is `sum_c w_c |c| grad psi_i . grad psi_j`.
pub fn weighted_stiffness(mesh: &Mesh, weights: &[f64]) -> BandedSpd {
    let mut bw = 0;
    for c in 0..mesh.num_cells() {
        let dofs: Vec<usize> = mesh.cell(c).iter().filter_map(|&v| mesh.dof_of_vertex(v)).collect();
        for &a in &dofs {
            for &b in &dofs {
                bw = bw.max(a.abs_diff(b));
            }
        }
    }
    let mut k = BandedSpd::zeros(mesh.num_free(), bw);
    for c in 0..mesh.num_cells() {
        let grads = mesh.basis_gradients(c);
        let s = weights[c] * mesh.cell_measure(c);
        let vs = mesh.cell(c);
        for (a, &va) in vs.iter().enumerate() {
            let Some(i) = mesh.dof_of_vertex(va) else { continue };
            for (b, &vb) in vs.iter().enumerate() {
                let Some(j) = mesh.dof_of_vertex(vb) else { continue };
                if j <= i {
                    let e = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1];
                    k.add(i, j, s * e);
                }
            }
        }
    }
    k
}
