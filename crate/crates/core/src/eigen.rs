//! First eigenpair of the p-Laplacian by descent on the Rayleigh quotient.
//!
//! The iterate is kept on the unit sphere `integral |u|^p = 1`. Search
//! directions are the quotient gradient mapped through the weighted
//! stiffness preconditioner of [`plap_preconditioner`]; for `p = 2` a unit
//! step is exactly one inverse-iteration step. Steps are chosen by Armijo
//! backtracking from 1 with halving.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::fem::{
    dirichlet_energy, lp_gradient, lp_integral, plap_preconditioner, plap_residual, DiscreteField, DualVector,
    Mesh,
};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Relative change of an objective treated as rounding noise.
pub(crate) const ROUNDING: f64 = 1e-13;
/// Consecutive stagnant steps (quotient and residual both flat) needed to stop.
const STALL_STEPS: usize = 5;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub max_iterations: usize,
    /// Stop when the quotient decreases by less than this, relatively, on
    /// several consecutive steps.
    pub rel_tol: f64,
    /// Stop when the eigen-residual falls below this.
    pub residual_tol: f64,
    /// Relative amplitude of a seeded perturbation of the start bubble (0 disables it).
    pub jitter: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            max_iterations: 5000,
            rel_tol: 1e-12,
            residual_tol: 1e-9,
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub p: f64,
    pub lambda1: f64,
    /// Normalized so that `integral |phi1|^p = 1`, positive mean.
    pub phi1: DiscreteField,
    pub iterations: usize,
    /// Largest entry of `plap_residual(phi1) - lambda1 * M(phi1)`, where
    /// `M(phi1)_j = integral |phi1|^(p-2) phi1 psi_j`.
    pub residual: f64,
}

/// `integral |grad u|^p / integral |u|^p`.
pub fn rayleigh_quotient(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<f64> {
    let num = p * dirichlet_energy(mesh, u, p)?;
    let den = lp_integral(mesh, u, p)?;
    if den == 0.0 {
        return Err(invalid("eigen::rayleigh_quotient", "quotient undefined for u = 0"));
    }
    Ok(num / den)
}

/// Residual functional `plap_residual(u) - lambda * M(u)` of the eigenvalue equation.
pub fn eigen_residual(mesh: &Mesh, u: &DiscreteField, p: f64, lambda: f64) -> Result<DualVector> {
    let a = plap_residual(mesh, u, p)?;
    let m = lp_gradient(mesh, u, p)?;
    Ok(a.add_scaled(-lambda, &m))
}

/// Interpolant of the positive bubble `prod_i sin(pi (x_i - a_i) / (b_i - a_i))`.
pub fn bubble(mesh: &Mesh) -> DiscreteField {
    let (lo, hi) = mesh.bounds();
    let dim = mesh.dim();
    mesh.interpolate(|x| {
        (0..dim)
            .map(|i| (PI * (x[i] - lo[i]) / (hi[i] - lo[i])).sin())
            .product()
    })
}

fn normalize(mesh: &Mesh, u: &DiscreteField, p: f64) -> Result<DiscreteField> {
    let l = lp_integral(mesh, u, p)?;
    Ok(u.scaled(l.powf(-1.0 / p)))
}

struct State {
    u: DiscreteField,
    lambda: f64,
    /// `plap_residual - lambda * M`, i.e. the quotient gradient divided by `p`.
    residual: DualVector,
}

fn evaluate(mesh: &Mesh, u: DiscreteField, p: f64) -> Result<State> {
    let lambda = rayleigh_quotient(mesh, &u, p)?;
    let residual = eigen_residual(mesh, &u, p, lambda)?;
    Ok(State { u, lambda, residual })
}

fn finish(mesh: &Mesh, st: State, p: f64, iterations: usize) -> Result<EigenResult> {
    let mut u = st.u;
    if u.values().iter().sum::<f64>() < 0.0 {
        u = u.scaled(-1.0);
    }
    let u = normalize(mesh, &u, p)?;
    let lambda1 = rayleigh_quotient(mesh, &u, p)?;
    let residual = eigen_residual(mesh, &u, p, lambda1)?.max_abs();
    Ok(EigenResult {
        p,
        lambda1,
        phi1: u,
        iterations,
        residual,
    })
}

/// Minimize the Rayleigh quotient over the discrete space.
///
/// Fails with [`Error::EigenNotConverged`] (carrying the last iterate) when
/// neither stopping rule fires within `max_iterations`.
pub fn first_eigenpair(mesh: &Mesh, p: f64, opts: &EigenOptions) -> Result<EigenResult> {
    const OP: &str = "eigen::first_eigenpair";
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(OP, format!("need 1 < p < inf, got {p}")));
    }
    if mesh.num_free() == 0 {
        return Err(invalid(OP, "mesh has no free vertices"));
    }
    let mut start = bubble(mesh);
    if opts.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for v in start.values_mut() {
            *v *= 1.0 + opts.jitter * rng.gen_range(-1.0..1.0);
        }
    }
    let mut st = evaluate(mesh, normalize(mesh, &start, p)?, p)?;
    let mut stalled = 0;

    for it in 0..opts.max_iterations {
        if st.residual.max_abs() < opts.residual_tol {
            return finish(mesh, st, p, it);
        }
        // quotient gradient at the normalized iterate
        let grad: Vec<f64> = st.residual.values().iter().map(|r| p * r).collect();
        let pre = plap_preconditioner(mesh, &st.u, p)?;
        let dir: Vec<f64> = pre.solve(&grad).iter().map(|d| -d / p).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let dir = mesh.field(dir)?;

        let mut t = 1.0;
        let mut accepted = None;
        if slope < 0.0 {
            for _ in 0..MAX_HALVINGS {
                let trial = st.u.add_scaled(t, &dir);
                if lp_integral(mesh, &trial, p)? > 0.0 {
                    let r = rayleigh_quotient(mesh, &trial, p)?;
                    // once the quotient change is rounding noise, the residual decides
                    let ok = if (r - st.lambda).abs() <= ROUNDING * st.lambda {
                        let probe = eigen_residual(mesh, &normalize(mesh, &trial, p)?, p, r)?;
                        probe.max_abs() < st.residual.max_abs()
                    } else {
                        r <= st.lambda + ARMIJO * t * slope
                    };
                    if ok {
                        accepted = Some(trial);
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        let Some(next) = accepted else {
            // no descent left at working precision
            return finish(mesh, st, p, it);
        };
        let next = evaluate(mesh, normalize(mesh, &next, p)?, p)?;
        let decrease = st.lambda - next.lambda;
        let residual_flat = next.residual.max_abs() > 0.9 * st.residual.max_abs();
        st = next;
        if decrease < opts.rel_tol * st.lambda && residual_flat {
            stalled += 1;
            if stalled >= STALL_STEPS {
                return finish(mesh, st, p, it + 1);
            }
        } else {
            stalled = 0;
        }
    }
    let last = finish(mesh, st, p, opts.max_iterations)?;
    Err(Error::EigenNotConverged(Box::new(last)))
}

/// First eigenvalue of the one-dimensional p-Laplacian on an interval of
/// length `len`: `(p - 1) (2 pi / (p sin(pi / p)) / len)^p`.
pub fn interval_lambda1(p: f64, len: f64) -> f64 {
    let pi_p = 2.0 * PI / (p * (PI / p).sin());
    (p - 1.0) * (pi_p / len).powf(p)
}
