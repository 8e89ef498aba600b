//! P1 finite elements on intervals and rectangles: meshes, quadrature, and
//! assembly of the p-Dirichlet energy and its gradient.

mod assembly;
mod banded;
mod field;
mod mesh;
mod quadrature;

pub use assembly::{
    dirichlet_energy, load_vector, lp_gradient, lp_integral, nonlinear_load, plap_residual, signed_pow,
    weighted_stiffness, ZERO_GRADIENT,
};
pub use banded::{BandedSpd, CholeskyFactor};
pub use field::{pairing, DiscreteField, DualVector};
pub use mesh::{build_interval_mesh, build_rectangle_mesh, Layout, Mesh, QuadPoint};
pub use quadrature::{QuadratureRule, RuleNode};

/// Element-wise gradient norms of a field, in cell order.
pub fn gradient_norms(mesh: &Mesh, u: &DiscreteField) -> Vec<f64> {
    let vv = mesh.vertex_values(u);
    (0..mesh.num_cells())
        .map(|c| {
            let g = mesh.gradient_on(&vv, c);
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .collect()
}

/// Sobolev-type preconditioner for descent on p-homogeneous energies:
/// `(p - 1)` times the stiffness matrix weighted by `|grad u|^(p-2)`, with
/// gradient norms clamped below at `1e-3` of their maximum.
pub fn plap_preconditioner(mesh: &Mesh, u: &DiscreteField, p: f64) -> crate::Result<CholeskyFactor> {
    let norms = gradient_norms(mesh, u);
    let gmax = norms.iter().cloned().fold(0.0, f64::max);
    let weights: Vec<f64> = if gmax > 0.0 && p != 2.0 {
        let floor = 1e-3 * gmax;
        norms.iter().map(|&g| (p - 1.0) * g.max(floor).powf(p - 2.0)).collect()
    } else {
        vec![p - 1.0; mesh.num_cells()]
    };
    weighted_stiffness(mesh, &weights).cholesky()
}
