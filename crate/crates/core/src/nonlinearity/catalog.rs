use std::f64::consts::PI;

use super::{ComparisonFunction, Growth, NonlinearitySpec, ScalarField, Weight};
use crate::error::{invalid, Result};
use crate::fem::signed_pow;

fn check_p(op: &'static str, p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(op, format!("need 1 < p < inf, got {p}")));
    }
    Ok(())
}

fn check_order(op: &'static str, phi: &ComparisonFunction, p: f64) -> Result<()> {
    if phi.alpha > p {
        return Err(invalid(op, format!("comparison order {} exceeds p = {p}", phi.alpha)));
    }
    Ok(())
}

/// Nonlinearity without growth bound whose potential is nonpositive when `d >= 0`:
///
/// `f = d(x) (sin(pi s / 2) - sign(s) / 2) exp(2 cos(pi s / 2) / pi + (|s| - 1) / 2)` for `|s| >= 1`,
/// `f = d(x) s (10 s^2 - 9) / 2` for `|s| <= 1`.
pub fn paper_example(d: Weight) -> Result<NonlinearitySpec> {
    let autonomous = d.field.is_constant();
    let df = d.field.clone();
    let dp = d.field.clone();
    let f = move |x: &[f64], s: f64| {
        let a = s.abs();
        let core = if a <= 1.0 {
            0.5 * s * (10.0 * s * s - 9.0)
        } else {
            let h = 0.5 * PI * s;
            (h.sin() - 0.5 * s.signum()) * (2.0 * h.cos() / PI + 0.5 * (a - 1.0)).exp()
        };
        let w = df.eval(x);
        if w == 0.0 {
            0.0
        } else {
            w * core
        }
    };
    let potential = move |x: &[f64], s: f64| {
        let a = s.abs();
        let core = if a <= 1.0 {
            -0.25 * s * s * (9.0 - 5.0 * s * s)
        } else {
            -((2.0 * (0.5 * PI * s).cos() / PI).exp() * (0.5 * (a - 1.0)).exp())
        };
        let w = dp.eval(x);
        if w == 0.0 {
            0.0
        } else {
            w * core
        }
    };
    Ok(NonlinearitySpec::new("paper_example", f)
        .with_potential(potential)
        .autonomous(autonomous)
        .with_kinks(vec![1.0])
        .with_weight(d))
}

/// `f = lambda |s|^(p-2) s - beta |s|^(beta-2) s`, `F = lambda |s|^p / p - |s|^beta`, `1 < beta < p`.
pub fn power_perturbation(lambda: f64, beta: f64, p: f64) -> Result<NonlinearitySpec> {
    const OP: &str = "nonlinearity::power_perturbation";
    check_p(OP, p)?;
    if !(beta > 1.0 && beta < p) {
        return Err(invalid(OP, format!("need 1 < beta < p, got beta = {beta}, p = {p}")));
    }
    let f = move |_: &[f64], s: f64| lambda * signed_pow(s, p - 1.0) - beta * signed_pow(s, beta - 1.0);
    Ok(NonlinearitySpec::new("power_perturbation", f)
        .with_split_potential(lambda, p, move |_, s| -s.abs().powf(beta))
        .with_growth(Growth::Polynomial(p))
        .autonomous(true)
        .with_param("lambda", lambda)
        .with_param("beta", beta)
        .with_param("p", p))
}

/// `F = lambda |s|^p / p + eta(x) phi(s)` for a comparison function of order at most `p`.
pub fn eta_phi(eta: Weight, phi: ComparisonFunction, lambda: f64, p: f64) -> Result<NonlinearitySpec> {
    const OP: &str = "nonlinearity::eta_phi";
    check_p(OP, p)?;
    check_order(OP, &phi, p)?;
    let (ef, ep) = (eta.field.clone(), eta.field.clone());
    let f = move |x: &[f64], s: f64| lambda * signed_pow(s, p - 1.0) + ef.eval(x) * phi.derivative(s);
    Ok(NonlinearitySpec::new("eta_phi", f)
        .with_split_potential(lambda, p, move |x, s| ep.eval(x) * phi.value(s))
        .with_growth(Growth::Polynomial(p))
        .autonomous(eta.field.is_constant())
        .with_kinks(phi.kinks())
        .with_param("lambda", lambda)
        .with_param("alpha", phi.alpha)
        .with_param("p", p)
        .with_weight(eta)
        .with_comparison(phi))
}

/// `F = lambda |s|^p / p + eta(x) |s|`.
pub fn eta_linear(eta: Weight, lambda: f64, p: f64) -> Result<NonlinearitySpec> {
    const OP: &str = "nonlinearity::eta_linear";
    check_p(OP, p)?;
    let (ef, ep) = (eta.field.clone(), eta.field.clone());
    let f = move |x: &[f64], s: f64| {
        let sign = if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        };
        lambda * signed_pow(s, p - 1.0) + ef.eval(x) * sign
    };
    Ok(NonlinearitySpec::new("eta_linear", f)
        .with_split_potential(lambda, p, move |x, s| ep.eval(x) * s.abs())
        .with_growth(Growth::Polynomial(p))
        .autonomous(eta.field.is_constant())
        .with_kinks(vec![0.0])
        .with_param("lambda", lambda)
        .with_param("p", p)
        .with_weight(eta))
}

/// `F = (lambda / p + a(x)) |s|^p + (phi(s) |s|^p)^(1/2)` with `a <= 0` smooth
/// and compactly supported.
pub fn example4(a: Weight, phi: ComparisonFunction, lambda: f64, p: f64) -> Result<NonlinearitySpec> {
    const OP: &str = "nonlinearity::example4";
    check_p(OP, p)?;
    check_order(OP, &phi, p)?;
    match a.field {
        ScalarField::Bump { amplitude, .. } if amplitude <= 0.0 => {}
        ScalarField::Constant { value } if value == 0.0 => {}
        _ => {
            return Err(invalid(
                OP,
                "a(x) must be a nonpositive smooth compactly supported bump",
            ))
        }
    }
    let (af, ap) = (a.field.clone(), a.field.clone());
    let root = move |s: f64| (phi.value(s) * s.abs().powf(p)).sqrt();
    let f = move |x: &[f64], s: f64| {
        let lead = (lambda + p * af.eval(x)) * signed_pow(s, p - 1.0);
        let r = root(s);
        let tail = if r == 0.0 {
            0.0
        } else {
            let dg = phi.derivative(s) * s.abs().powf(p) + phi.value(s) * p * signed_pow(s, p - 1.0);
            dg / (2.0 * r)
        };
        lead + tail
    };
    Ok(NonlinearitySpec::new("example4", f)
        .with_split_potential(lambda, p, move |x, s| ap.eval(x) * s.abs().powf(p) + root(s))
        .with_growth(Growth::Polynomial(p))
        .autonomous(a.field.is_constant())
        .with_kinks(phi.kinks())
        .with_param("lambda", lambda)
        .with_param("alpha", phi.alpha)
        .with_param("p", p)
        .with_weight(a)
        .with_comparison(phi))
}

/// `f = mu |s|^(p-2) s`, `F = mu |s|^p / p`.
pub fn scaled_power(mu: f64, p: f64) -> Result<NonlinearitySpec> {
    check_p("nonlinearity::scaled_power", p)?;
    Ok(
        NonlinearitySpec::new("scaled_power", move |_, s| mu * signed_pow(s, p - 1.0))
            .with_split_potential(mu, p, |_, _| 0.0)
            .with_growth(Growth::Polynomial(p))
            .autonomous(true)
            .with_param("mu", mu)
            .with_param("p", p),
    )
}

/// `f = c`, `F = c s`.
pub fn constant(c: f64) -> NonlinearitySpec {
    NonlinearitySpec::new("constant", move |_, _| c)
        .with_potential(move |_, s| c * s)
        .with_growth(Growth::Polynomial(1.0))
        .autonomous(true)
        .with_param("c", c)
}

/// `f = 0`.
pub fn zero() -> NonlinearitySpec {
    NonlinearitySpec::new("zero", |_, _| 0.0)
        .with_potential(|_, _| 0.0)
        .with_growth(Growth::Polynomial(1.0))
        .autonomous(true)
}
