use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ext::ExtReal;
use crate::fem::{nonlinear_load, plap_residual, DiscreteField, DualVector, Mesh};
use crate::nonlinearity::{eval_f, NonlinearitySpec};

/// C^1 cutoff equal to 1 on `[-R, R]` and 0 outside `[-2R, 2R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub radius: f64,
}

pub fn make_truncation(radius: f64) -> Result<Truncation> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("solver::make_truncation", format!("radius must be positive, got {radius}")));
    }
    Ok(Truncation { radius })
}

impl Truncation {
    pub fn value(&self, s: f64) -> f64 {
        let t = (s.abs() - self.radius) / self.radius;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * (3.0 - 2.0 * t)
        }
    }

    /// Bounded by `1.5 / R`.
    pub fn derivative(&self, s: f64) -> f64 {
        let t = (s.abs() - self.radius) / self.radius;
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            -6.0 * t * (1.0 - t) / self.radius * s.signum()
        }
    }
}

/// Nodal interpolants of `Theta_R(u) psi_j`. Each is a multiple of the hat
/// function, so only the coefficient is stored.
#[derive(Debug, Clone)]
pub struct TruncatedBasis {
    pub truncation: Truncation,
    pub coefficients: Vec<f64>,
    mesh_id: u64,
}

impl TruncatedBasis {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Number of members that are not identically zero.
    pub fn active(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }

    pub fn member(&self, mesh: &Mesh, j: usize) -> Result<DiscreteField> {
        if mesh.id() != self.mesh_id {
            return Err(Error::MeshMismatch { op: "solver::TruncatedBasis::member" });
        }
        Ok(mesh.hat(j).scaled(self.coefficients[j]))
    }
}

pub fn truncated_test_basis(mesh: &Mesh, u: &DiscreteField, radius: f64) -> Result<TruncatedBasis> {
    let truncation = make_truncation(radius)?;
    u.check(mesh, "solver::truncated_test_basis")?;
    Ok(TruncatedBasis {
        truncation,
        coefficients: u.values().iter().map(|&s| truncation.value(s)).collect(),
        mesh_id: mesh.id(),
    })
}

/// Default truncation radius: twice the sup norm, or 1 for `u = 0`.
pub fn default_radius(u: &DiscreteField) -> f64 {
    let m = u.max_abs();
    if m > 0.0 {
        2.0 * m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub radius: f64,
    pub basis_size: usize,
    pub active_members: usize,
    /// `max_j |r_j|`.
    pub max_residual: f64,
    /// `max_j |r_j|` divided by the element scale, comparable to solver stationarity.
    pub scaled_residual: f64,
    /// `max_j |r_j|` divided by the largest magnitude of any of its three terms.
    pub relative_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Residuals `r_j = integral |grad u|^(p-2) grad u . grad v_j - integral f(x, u) v_j - <h, v_j>`
/// over the truncated basis, with the assembly quadrature.
pub fn verify_weak_solution(
    mesh: &Mesh,
    u: &DiscreteField,
    spec: &NonlinearitySpec,
    h: &DualVector,
    p: f64,
    radius: Option<f64>,
    tol: f64,
) -> Result<ResidualReport> {
    const OP: &str = "solver::verify_weak_solution";
    h.check(mesh, OP)?;
    u.check(mesh, OP)?;
    let radius = radius.unwrap_or_else(|| default_radius(u));
    let basis = truncated_test_basis(mesh, u, radius)?;
    let a = plap_residual(mesh, u, p)?;
    let l = nonlinear_load(mesh, u, |x, s| eval_f(spec, x, s))?;
    let mut residuals = Vec::with_capacity(basis.len());
    let mut max_term = 0.0f64;
    for (j, &c) in basis.coefficients.iter().enumerate() {
        let (aj, lj, hj) = (c * a.values()[j], c * l.values()[j], c * h.values()[j]);
        max_term = max_term.max(aj.abs()).max(lj.abs()).max(hj.abs());
        residuals.push(aj - lj - hj);
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let relative_residual = if max_residual == 0.0 { 0.0 } else { max_residual / max_term };
    Ok(ResidualReport {
        radius,
        basis_size: basis.len(),
        active_members: basis.active(),
        max_residual,
        scaled_residual: max_residual / mesh.element_scale(),
        relative_residual,
        tolerance: tol,
        passed: relative_residual <= tol,
        residuals,
    })
}

/// `sup_j |integral f(x, u) v_j| / ||grad v_j||_p` over the truncated basis,
/// `+inf` when an integrand is not finite.
pub fn estimate_lambda_u(mesh: &Mesh, u: &DiscreteField, spec: &NonlinearitySpec, p: f64, radius: f64) -> Result<ExtReal> {
    Ok(estimate_lambda_u_hierarchical(&[mesh.clone()], u, spec, p, radius)?
        .pop()
        .expect("one level"))
}

/// Same estimate over the union of truncated hat bases of nested meshes
/// `levels[0] ⊂ ... ⊂ levels[last]`, where `u` lives on the finest mesh.
/// Entry `k` is the supremum over levels `0..=k`, so the sequence is
/// nondecreasing.
pub fn estimate_lambda_u_hierarchical(
    levels: &[Mesh],
    u: &DiscreteField,
    spec: &NonlinearitySpec,
    p: f64,
    radius: f64,
) -> Result<Vec<ExtReal>> {
    const OP: &str = "solver::estimate_lambda_u";
    let fine = levels.last().ok_or_else(|| invalid(OP, "need at least one mesh level"))?;
    u.check(fine, OP)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(OP, format!("need 1 < p < inf, got {p}")));
    }
    let trunc = make_truncation(radius)?;
    let vv = fine.vertex_values(u);
    let dim = fine.dim();
    let fu: Vec<f64> = fine
        .quadrature_points()
        .iter()
        .map(|q| spec.f_raw(&q.x[..dim], fine.value_at(&vv, q)))
        .collect();
    if fu.iter().any(|v| !v.is_finite()) {
        return Ok(vec![ExtReal::PosInfinity; levels.len()]);
    }

    let mut out = Vec::with_capacity(levels.len());
    let mut best = 0.0f64;
    for (k, coarse) in levels.iter().enumerate() {
        for j in 0..coarse.num_free() {
            let x = coarse.free_vertex(j);
            let theta = trunc.value(fine.evaluate_at(&vv, x));
            if theta == 0.0 {
                continue;
            }
            let hat = if k + 1 == levels.len() {
                fine.hat(j)
            } else {
                fine.prolongate(coarse, &coarse.hat(j))?
            };
            let hv = fine.vertex_values(&hat);
            let mut num = 0.0;
            for (q, f) in fine.quadrature_points().iter().zip(&fu) {
                let v = fine.value_at(&hv, q);
                if v != 0.0 {
                    num += q.weight * f * v;
                }
            }
            let mut den = 0.0;
            for c in 0..fine.num_cells() {
                let g = fine.gradient_on(&hv, c);
                let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if n > 0.0 {
                    den += fine.cell_measure(c) * n.powf(p);
                }
            }
            // theta cancels in the ratio
            let ratio = num.abs() / den.powf(1.0 / p);
            best = best.max(ratio);
        }
        out.push(ExtReal::Finite(best));
    }
    Ok(out)
}
