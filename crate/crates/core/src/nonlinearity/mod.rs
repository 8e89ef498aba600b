//! Nonlinearities `f(x, s)`, their potentials `F(x, s)` and the shifted
//! potential `G(x, s) = F(x, s) - lambda1 |s|^p / p`.

mod catalog;
mod comparison;
mod weight;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use catalog::{
    constant, eta_linear, eta_phi, example4, paper_example, power_perturbation, scaled_power, zero,
};
pub use comparison::{ComparisonFunction, ComparisonKind};
pub use weight::{ScalarField, Weight};
pub(crate) use weight::parse_call;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, PotentialValue};
use crate::quad;

/// Pure function of `(x, s)`.
pub type Evaluator = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Absolute tolerance of the quadrature fallback for `F`.
pub const POTENTIAL_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "exponent", rename_all = "snake_case")]
pub enum Growth {
    /// `|f(x, s)| <= a |s|^(q-1) + b(x)` for the given `q`.
    Polynomial(f64),
    /// No polynomial bound.
    Unbounded,
}

/// Closed-form potential split as `(c / p) |s|^p + remainder(x, s)`.
///
/// Keeping the `|s|^p` part separate lets `G` be formed without
/// cancellation when `c` equals the eigenvalue.
#[derive(Clone)]
pub struct Potential {
    pub resonant: Option<(f64, f64)>,
    pub remainder: Evaluator,
}

/// A Carathéodory nonlinearity with metadata. Cheap to clone and share.
#[derive(Clone)]
pub struct NonlinearitySpec {
    pub name: String,
    f: Evaluator,
    potential: Option<Potential>,
    pub growth: Growth,
    pub autonomous: bool,
    /// Values of `|s|` where `f` is not smooth.
    pub kinks: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub weight: Option<Weight>,
    pub comparison: Option<ComparisonFunction>,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("closed_form", &self.potential.is_some())
            .field("growth", &self.growth)
            .field("autonomous", &self.autonomous)
            .field("kinks", &self.kinks)
            .field("params", &self.params)
            .field("weight", &self.weight)
            .field("comparison", &self.comparison)
            .finish()
    }
}

impl NonlinearitySpec {
    /// A spec with no potential, no growth bound and no kinks; adjust with the builder methods.
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        NonlinearitySpec {
            name: name.into(),
            f: Arc::new(f),
            potential: None,
            growth: Growth::Unbounded,
            autonomous: false,
            kinks: Vec::new(),
            params: BTreeMap::new(),
            weight: None,
            comparison: None,
        }
    }

    pub fn with_potential(mut self, potential: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.potential = Some(Potential {
            resonant: None,
            remainder: Arc::new(potential),
        });
        self
    }

    /// Potential `(c / p) |s|^p + remainder(x, s)`.
    pub fn with_split_potential(
        mut self,
        c: f64,
        p: f64,
        remainder: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.potential = Some(Potential {
            resonant: Some((c, p)),
            remainder: Arc::new(remainder),
        });
        self
    }

    pub fn with_growth(mut self, growth: Growth) -> Self {
        self.growth = growth;
        self
    }

    pub fn autonomous(mut self, yes: bool) -> Self {
        self.autonomous = yes;
        self
    }

    pub fn with_kinks(mut self, kinks: Vec<f64>) -> Self {
        self.kinks = kinks;
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn with_comparison(mut self, phi: ComparisonFunction) -> Self {
        self.comparison = Some(phi);
        self
    }

    /// Drop the closed-form potential, forcing quadrature in [`eval_potential`].
    pub fn without_potential(mut self) -> Self {
        self.potential = None;
        self
    }

    pub fn has_closed_form(&self) -> bool {
        self.potential.is_some()
    }

    pub fn potential(&self) -> Option<&Potential> {
        self.potential.as_ref()
    }

    /// Raw evaluator value, possibly non-finite.
    pub fn f_raw(&self, x: &[f64], s: f64) -> f64 {
        (self.f)(x, s)
    }

    /// Whether `|s|` lies within `tol` of a declared kink.
    pub fn near_kink(&self, s: f64, tol: f64) -> bool {
        self.kinks.iter().any(|k| (s.abs() - k).abs() < tol)
    }
}

/// `f(x, s)`; non-finite values are an error naming the point.
pub fn eval_f(spec: &NonlinearitySpec, x: &[f64], s: f64) -> Result<f64> {
    let v = (spec.f)(x, s);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            op: "nonlinearity::eval_f",
            x: x.to_vec(),
            s,
        })
    }
}

fn ext(op: &'static str, x: &[f64], s: f64, v: f64) -> Result<ExtReal> {
    ExtReal::from_f64(v).ok_or_else(|| Error::NonFinite { op, x: x.to_vec(), s })
}

fn resonant_term(c: f64, p: f64, s: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * s.abs().powf(p) / p
    }
}

/// `F(x, s) = integral_0^s f(x, t) dt`, closed form when available, else
/// adaptive quadrature split at the declared kinks. Infinite closed-form
/// values become sentinels.
pub fn eval_potential(spec: &NonlinearitySpec, x: &[f64], s: f64) -> Result<PotentialValue> {
    const OP: &str = "nonlinearity::eval_potential";
    if s == 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    match &spec.potential {
        Some(pot) => {
            let r = ext(OP, x, s, (pot.remainder)(x, s))?;
            let lead = match pot.resonant {
                Some((c, p)) => ext(OP, x, s, resonant_term(c, p, s))?,
                None => ExtReal::Finite(0.0),
            };
            sum(OP, x, s, lead, r)
        }
        None => potential_by_quadrature(spec, x, s).map(ExtReal::Finite),
    }
}

fn sum(op: &'static str, x: &[f64], s: f64, a: ExtReal, b: ExtReal) -> Result<ExtReal> {
    match (a, b) {
        (ExtReal::PosInfinity, ExtReal::NegInfinity) | (ExtReal::NegInfinity, ExtReal::PosInfinity) => {
            Err(Error::NonFinite { op, x: x.to_vec(), s })
        }
        _ => Ok(a + b),
    }
}

/// `F(x, s)` by adaptive Gauss–Kronrod quadrature of `f`, ignoring any closed form.
pub fn potential_by_quadrature(spec: &NonlinearitySpec, x: &[f64], s: f64) -> Result<f64> {
    const OP: &str = "nonlinearity::potential_by_quadrature";
    let sign = s.signum();
    let mut cuts = vec![0.0];
    let mut inner: Vec<f64> = spec.kinks.iter().copied().filter(|&k| k > 0.0 && k < s.abs()).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner.into_iter().map(|k| sign * k));
    cuts.push(s);
    let mut total = 0.0;
    let mut bad = None;
    for w in cuts.windows(2) {
        let r = quad::integrate(
            |t| {
                let v = (spec.f)(x, t);
                if !v.is_finite() && bad.is_none() {
                    bad = Some(t);
                }
                v
            },
            w[0],
            w[1],
            POTENTIAL_ABS_TOL / (cuts.len() - 1) as f64,
            1e-13,
        );
        if let Some(t) = bad {
            return Err(Error::NonFinite {
                op: OP,
                x: x.to_vec(),
                s: t,
            });
        }
        if !r.converged {
            return Err(Error::Quadrature {
                op: OP,
                estimate: r.value,
                error: r.error,
            });
        }
        total += r.value;
    }
    Ok(total)
}

/// `G(x, s) = F(x, s) - lambda1 |s|^p / p`. When the potential carries a
/// `(c / p) |s|^p` part with the same `p`, the coefficients are subtracted
/// before multiplying so that resonant specs produce `G` exactly.
pub fn eval_shifted_potential(
    spec: &NonlinearitySpec,
    x: &[f64],
    s: f64,
    lambda1: f64,
    p: f64,
) -> Result<PotentialValue> {
    const OP: &str = "nonlinearity::eval_shifted_potential";
    if s == 0.0 {
        return Ok(ExtReal::Finite(0.0));
    }
    if let Some(Potential {
        resonant: Some((c, q)),
        remainder,
    }) = &spec.potential
    {
        if *q == p {
            let r = ext(OP, x, s, remainder(x, s))?;
            let lead = ext(OP, x, s, resonant_term(c - lambda1, p, s))?;
            return sum(OP, x, s, lead, r);
        }
    }
    let f = eval_potential(spec, x, s)?;
    let shift = ext(OP, x, s, -resonant_term(lambda1, p, s))?;
    sum(OP, x, s, f, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn specs() -> Vec<NonlinearitySpec> {
        let eta = Weight::bounded(ScalarField::parse("step(0.2, 0.5, -1)").unwrap());
        let a = Weight::bounded(ScalarField::parse("bump(0.5, 0.25, -1)").unwrap());
        let phi = ComparisonFunction::power(1.5).unwrap();
        vec![
            paper_example(Weight::bounded(ScalarField::constant(1.0))).unwrap(),
            paper_example(Weight::bounded(ScalarField::parse("affine(1, 2)").unwrap())).unwrap(),
            power_perturbation(9.87, 1.5, 2.0).unwrap(),
            power_perturbation(30.0, 2.2, 3.0).unwrap(),
            eta_phi(eta.clone(), phi, 9.87, 2.0).unwrap(),
            eta_phi(eta.clone(), ComparisonFunction::power_log(1.2).unwrap(), 9.87, 2.0).unwrap(),
            eta_linear(eta, 9.87, 2.0).unwrap(),
            example4(a, phi, 9.87, 2.0).unwrap(),
            scaled_power(-3.0, 1.5).unwrap(),
            constant(2.0),
            zero(),
        ]
    }

    #[test]
    fn potential_vanishes_at_zero() {
        for spec in specs() {
            assert_eq!(eval_potential(&spec, &[0.3], 0.0).unwrap(), ExtReal::Finite(0.0));
        }
    }

    #[test]
    fn closed_form_potential_differentiates_to_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-6;
        for spec in specs() {
            let mut checked = 0;
            while checked < 100 {
                let x = [rng.gen_range(0.0..1.0)];
                let s: f64 = rng.gen_range(-4.0..4.0);
                if spec.near_kink(s, 1e-3) {
                    continue;
                }
                let fp = eval_potential(&spec, &x, s + eps).unwrap().to_f64();
                let fm = eval_potential(&spec, &x, s - eps).unwrap().to_f64();
                let fd = (fp - fm) / (2.0 * eps);
                let f = eval_f(&spec, &x, s).unwrap();
                assert!(
                    (fd - f).abs() <= 1e-5 * f.abs().max(1.0),
                    "{}: s={s} fd={fd} f={f}",
                    spec.name
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for spec in specs() {
            for s in [-3.7, -1.0, -0.2, 0.6, 1.0, 2.5, 6.0] {
                let x = [0.37];
                let closed = eval_potential(&spec, &x, s).unwrap().to_f64();
                let q = potential_by_quadrature(&spec, &x, s).unwrap();
                assert!((closed - q).abs() < 1e-8 * closed.abs().max(1.0), "{}: {closed} vs {q}", spec.name);
            }
        }
    }

    #[test]
    fn shifted_potential_is_exact_for_resonant_specs() {
        let lambda1 = 9.869604401089358;
        let eta = Weight::bounded(ScalarField::constant(-0.7));
        let phi = ComparisonFunction::power(1.5).unwrap();
        let spec = eta_phi(eta, phi, lambda1, 2.0).unwrap();
        for s in [-1e6, -3.0, 0.5, 1e9] {
            let g = eval_shifted_potential(&spec, &[0.5], s, lambda1, 2.0).unwrap().to_f64();
            let expect = -0.7 * phi.value(s);
            assert!((g - expect).abs() <= 1e-12 * expect.abs());
        }
        let pp = power_perturbation(lambda1, 1.4, 2.0).unwrap();
        let g = eval_shifted_potential(&pp, &[0.1], -5.0, lambda1, 2.0).unwrap().to_f64();
        assert!((g + 5f64.powf(1.4)).abs() < 1e-12);
    }

    #[test]
    fn infinite_potential_becomes_sentinel() {
        let spec = paper_example(Weight::bounded(ScalarField::constant(1.0))).unwrap();
        assert_eq!(eval_potential(&spec, &[0.5], 5000.0).unwrap(), ExtReal::NegInfinity);
        assert!(matches!(eval_f(&spec, &[0.5], 5000.0), Err(Error::NonFinite { .. })));
        let g = eval_shifted_potential(&spec, &[0.5], 5000.0, 9.8, 2.0).unwrap();
        assert_eq!(g, ExtReal::NegInfinity);
    }

    #[test]
    fn quadrature_errors_on_non_finite_integrand() {
        let spec = NonlinearitySpec::new("singular", |_, s| 1.0 / (s - 0.5));
        assert!(potential_by_quadrature(&spec, &[0.0], 0.5).is_err());
    }
}
