use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::checks::{check_class_membership, check_f0, verify_comparison_function, WeightClass};
use super::limsup::{estimate_limsup, Direction, LimsupEstimate, LimsupGrid};
use super::Verdict;
use crate::eigen::EigenResult;
use crate::error::{invalid, Result};
use crate::ext::{ExtReal, IntegralAccumulator};
use crate::fem::{pairing, DualVector, Mesh};
use crate::nonlinearity::{
    eta_linear, eta_phi, eval_shifted_potential, example4, ComparisonFunction, NonlinearitySpec, ScalarField, Weight,
};

/// Strict inequalities must hold by at least this much.
pub const STRICT_MARGIN: f64 = 1e-9;
/// A set has positive measure when its share of the quadrature weight exceeds this.
pub const MEASURE_FRACTION: f64 = 1e-6;
/// Slack allowed when comparing pointwise estimates with a declared bound.
pub const UNIFORM_SLACK: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TheoremOptions {
    pub grid: LimsupGrid,
    /// Radius for the `(f_0)` check; `None` skips it.
    pub f0_radius: Option<f64>,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        TheoremOptions {
            grid: LimsupGrid::default(),
            f0_radius: Some(10.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubHypothesis {
    pub name: String,
    pub verdict: Verdict,
    pub evidence: BTreeMap<String, ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SubHypothesis {
    fn new(name: &str, verdict: Verdict) -> Self {
        SubHypothesis {
            name: name.to_string(),
            verdict,
            evidence: BTreeMap::new(),
            note: None,
        }
    }

    fn with(mut self, key: &str, v: impl Into<ExtReal>) -> Self {
        self.evidence.insert(key.to_string(), v.into());
        self
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.note = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub theorem: String,
    pub hypotheses: Vec<SubHypothesis>,
    pub overall: Verdict,
}

impl HypothesisReport {
    fn new(theorem: &str, hypotheses: Vec<SubHypothesis>) -> Self {
        let overall = Verdict::all(hypotheses.iter().map(|h| h.verdict));
        HypothesisReport {
            theorem: theorem.to_string(),
            hypotheses,
            overall,
        }
    }

    pub fn get(&self, name: &str) -> Option<&SubHypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }
}

struct Sample {
    x: Vec<f64>,
    weight: f64,
    phi1: f64,
}

fn samples(mesh: &Mesh, eigen: &EigenResult) -> Result<Vec<Sample>> {
    eigen.phi1.check(mesh, "conditions::check_theorem")?;
    let dim = mesh.dim();
    let vv = mesh.vertex_values(&eigen.phi1);
    let total = mesh.total_measure();
    Ok(mesh
        .quadrature_points()
        .iter()
        .map(|q| Sample {
            x: q.x[..dim].to_vec(),
            weight: q.weight / total,
            phi1: mesh.value_at(&vv, q).max(0.0),
        })
        .collect())
}

/// Per-sample estimates of `limsup G(x, s) / denom(s)` as `s -> +inf` and `s -> -inf`.
type Pointwise = Vec<[LimsupEstimate; 2]>;

fn pointwise(
    spec: &NonlinearitySpec,
    pts: &[Sample],
    lambda1: f64,
    p: f64,
    denom: impl Fn(f64) -> f64 + Sync,
    grid: LimsupGrid,
) -> Result<Pointwise> {
    let at = |x: &[f64]| -> Result<[LimsupEstimate; 2]> {
        let one = |dir| {
            estimate_limsup(
                |s| Ok(eval_shifted_potential(spec, x, s, lambda1, p)?.to_f64() / denom(s)),
                dir,
                grid,
            )
        };
        Ok([one(Direction::PlusInfinity)?, one(Direction::MinusInfinity)?])
    };
    if spec.autonomous {
        let e = at(&pts[0].x)?;
        Ok(vec![e; pts.len()])
    } else {
        pts.par_iter().map(|s| at(&s.x)).collect()
    }
}

fn dir_name(d: usize) -> &'static str {
    if d == 0 {
        "+"
    } else {
        "-"
    }
}

fn extreme(est: &Pointwise, d: usize, want_max: bool) -> ExtReal {
    let vals = est.iter().map(|e| e[d].value);
    if want_max {
        vals.fold(ExtReal::NegInfinity, |a, b| if b > a { b } else { a })
    } else {
        vals.fold(ExtReal::PosInfinity, |a, b| if b < a { b } else { a })
    }
}

fn unconverged_fraction(est: &Pointwise, pts: &[Sample], d: usize) -> f64 {
    est.iter()
        .zip(pts)
        .filter(|(e, _)| !e[d].converged)
        .fold(0.0, |acc, (_, s)| acc + s.weight)
}

/// `estimate <= bound(x) + slack` almost everywhere, both directions.
fn ae_at_most(name: &str, est: &Pointwise, pts: &[Sample], bound: impl Fn(&Sample) -> f64) -> SubHypothesis {
    let mut bad = 0.0;
    let mut unknown = 0.0;
    for (e, s) in est.iter().zip(pts) {
        for d in e.iter() {
            if !d.converged {
                unknown += s.weight;
            } else if d.value > ExtReal::Finite(bound(s) + STRICT_MARGIN) {
                bad += s.weight;
            }
        }
    }
    let verdict = if bad > MEASURE_FRACTION {
        Verdict::Fails
    } else if unknown > 0.0 {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    SubHypothesis::new(name, verdict)
        .with("max_estimate_plus", extreme(est, 0, true))
        .with("max_estimate_minus", extreme(est, 1, true))
        .with("violating_fraction", bad)
        .with("unconverged_fraction", unknown)
}

/// `|{x : estimate < 0}| > 0` in each direction separately.
fn strict_negative_set(name: &str, est: &Pointwise, pts: &[Sample]) -> SubHypothesis {
    let mut verdicts = Vec::new();
    let mut h = SubHypothesis::new(name, Verdict::Holds);
    for d in 0..2 {
        let mut sure = 0.0;
        let mut maybe = 0.0;
        for (e, s) in est.iter().zip(pts) {
            let ed = &e[d];
            if ed.value < ExtReal::Finite(-STRICT_MARGIN) {
                if ed.converged {
                    sure += s.weight;
                } else {
                    maybe += s.weight;
                }
            } else if !ed.converged {
                maybe += s.weight;
            }
        }
        verdicts.push(if sure > MEASURE_FRACTION {
            Verdict::Holds
        } else if sure + maybe > MEASURE_FRACTION {
            Verdict::Inconclusive
        } else {
            Verdict::Fails
        });
        h = h.with(&format!("strict_fraction_{}", dir_name(d)), sure);
    }
    h.verdict = Verdict::all(verdicts);
    h
}

/// `integral estimate(x) * phi1(x)^alpha dx` per direction, with the
/// extended-real convention for divergent parts.
fn weighted_integrals(est: &Pointwise, pts: &[Sample], alpha: f64, total: f64) -> [ExtReal; 2] {
    let mut out = [ExtReal::Finite(0.0); 2];
    for (d, o) in out.iter_mut().enumerate() {
        let mut acc = IntegralAccumulator::default();
        for (e, s) in est.iter().zip(pts) {
            acc.add(e[d].value, s.weight * total * s.phi1.powf(alpha));
        }
        *o = acc.value();
    }
    out
}

/// `G^± <= eta` uniformly for some `eta` in the class. A declared weight is
/// used when the estimates stay below it; otherwise the sampled envelope,
/// which is bounded whenever no estimate is `+inf`, serves as `eta`.
#[allow(clippy::too_many_arguments)]
fn uniform_bound(
    name: &str,
    spec: &NonlinearitySpec,
    est: &Pointwise,
    pts: &[Sample],
    alpha: f64,
    p: f64,
    dim: usize,
    class: WeightClass,
) -> SubHypothesis {
    let mut infinite = 0.0;
    for (e, s) in est.iter().zip(pts) {
        if e.iter().any(|d| d.converged && d.value == ExtReal::PosInfinity) {
            infinite += s.weight;
        }
    }
    let unknown = unconverged_fraction(est, pts, 0) + unconverged_fraction(est, pts, 1);
    let base = SubHypothesis::new(name, Verdict::Holds)
        .with("max_estimate_plus", extreme(est, 0, true))
        .with("max_estimate_minus", extreme(est, 1, true))
        .with("infinite_fraction", infinite)
        .with("unconverged_fraction", unknown);
    if infinite > MEASURE_FRACTION {
        let mut h = base.note("estimate is +inf on a set of positive measure");
        h.verdict = Verdict::Fails;
        return h;
    }
    let pending = if unknown > 0.0 {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    let declared = spec.weight.as_ref().filter(|w| {
        est.iter().zip(pts).all(|(e, s)| {
            e.iter()
                .all(|d| !d.converged || d.value <= ExtReal::Finite(w.eval(&s.x) + UNIFORM_SLACK))
        })
    });
    let (weight, note) = match declared {
        Some(w) => (w.clone(), "bounded by the declared weight"),
        None => (
            Weight::bounded(ScalarField::constant(0.0)),
            "bounded by the sampled envelope (essentially bounded)",
        ),
    };
    let m = check_class_membership(Some(&weight), alpha, p, dim, class);
    let mut h = base.with("weight_exponent", weight.exponent).note(note);
    if let Some(t) = m.threshold {
        h = h.with("class_threshold", t);
    }
    h.verdict = m.verdict.and(pending);
    h
}

fn f0_part(spec: &NonlinearitySpec, mesh: &Mesh, opts: &TheoremOptions) -> Result<Option<SubHypothesis>> {
    let Some(r) = opts.f0_radius else {
        return Ok(None);
    };
    let rep = check_f0(spec, r, mesh)?;
    Ok(Some(
        SubHypothesis::new("f0", rep.verdict)
            .with("radius", r)
            .with("integral", ExtReal::from_f64(rep.value).unwrap_or(ExtReal::PosInfinity)),
    ))
}

/// Hypotheses of the coercivity theorem with exponent `alpha = p`:
/// `(G1)` `G^±_p <= 0` a.e., and `(G1')` `{G^+_p < 0}`, `{G^-_p < 0}` of positive measure.
pub fn check_theorem_g1(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    eigen: &EigenResult,
    opts: &TheoremOptions,
) -> Result<HypothesisReport> {
    let pts = samples(mesh, eigen)?;
    let p = eigen.p;
    let est = pointwise(spec, &pts, eigen.lambda1, p, |s| s.abs().powf(p), opts.grid)?;
    let mut hs: Vec<SubHypothesis> = f0_part(spec, mesh, opts)?.into_iter().collect();
    hs.push(ae_at_most("G1", &est, &pts, |_| 0.0));
    hs.push(strict_negative_set("G1'", &est, &pts));
    Ok(HypothesisReport::new("G1", hs))
}

/// Hypotheses of the comparison-function theorem: `phi` is a comparison
/// function, `(G2)` `G^±_phi <= eta` uniformly with `eta` in `X_alpha`, and
/// `(G2')` `integral G^±_phi phi1^alpha < 0`.
pub fn check_theorem_g2(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    eigen: &EigenResult,
    phi: Option<ComparisonFunction>,
    opts: &TheoremOptions,
) -> Result<HypothesisReport> {
    let phi = phi
        .or(spec.comparison)
        .ok_or_else(|| invalid("conditions::check_theorem_g2", "no comparison function given"))?;
    let pts = samples(mesh, eigen)?;
    let p = eigen.p;
    let alpha = phi.alpha;
    let cmp = verify_comparison_function(&phi, p)?;
    let mut hs: Vec<SubHypothesis> = f0_part(spec, mesh, opts)?.into_iter().collect();
    hs.push(
        SubHypothesis::new("comparison", cmp.verdict)
            .with("order", alpha)
            .note(cmp.function.clone()),
    );
    let est = pointwise(spec, &pts, eigen.lambda1, p, |s| phi.value(s), opts.grid)?;
    hs.push(uniform_bound("G2", spec, &est, &pts, alpha, p, mesh.dim(), WeightClass::X));
    let ints = weighted_integrals(&est, &pts, alpha, mesh.total_measure());
    let unknown = unconverged_fraction(&est, &pts, 0) + unconverged_fraction(&est, &pts, 1) > 0.0;
    let negative = ints.iter().all(|i| *i < ExtReal::Finite(-STRICT_MARGIN));
    let verdict = if unknown {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(negative)
    };
    hs.push(
        SubHypothesis::new("G2'", verdict)
            .with("integral_plus", ints[0])
            .with("integral_minus", ints[1]),
    );
    Ok(HypothesisReport::new("G2", hs))
}

/// Hypotheses of the Landesman–Lazer type theorem: `(G3)` `G^±_1 <= eta`
/// uniformly with `eta` in `Y_1`, and `(G3')`
/// `integral G^-_1 phi1 < <h, phi1> < -integral G^+_1 phi1`.
pub fn check_theorem_g3(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    eigen: &EigenResult,
    h: &DualVector,
    opts: &TheoremOptions,
) -> Result<HypothesisReport> {
    let pts = samples(mesh, eigen)?;
    let p = eigen.p;
    let est = pointwise(spec, &pts, eigen.lambda1, p, f64::abs, opts.grid)?;
    let mut hs: Vec<SubHypothesis> = f0_part(spec, mesh, opts)?.into_iter().collect();
    hs.push(uniform_bound("G3", spec, &est, &pts, 1.0, p, mesh.dim(), WeightClass::Y));
    let ints = weighted_integrals(&est, &pts, 1.0, mesh.total_measure());
    let hphi = pairing(h, &eigen.phi1)?;
    let unknown = unconverged_fraction(&est, &pts, 0) + unconverged_fraction(&est, &pts, 1) > 0.0;
    let lower = ints[1] < ExtReal::Finite(hphi - STRICT_MARGIN);
    let upper = ExtReal::Finite(hphi) < -ints[0] + ExtReal::Finite(-STRICT_MARGIN);
    let verdict = if unknown {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(lower && upper)
    };
    hs.push(
        SubHypothesis::new("G3'", verdict)
            .with("integral_plus", ints[0])
            .with("integral_minus", ints[1])
            .with("h_phi1", hphi),
    );
    Ok(HypothesisReport::new("G3", hs))
}

#[derive(Debug, Clone, Serialize)]
pub struct IncomparabilityRow {
    pub example: String,
    pub description: String,
    pub verdicts: [Verdict; 3],
    pub reports: [HypothesisReport; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct IncomparabilityTable {
    pub p: f64,
    pub lambda1: f64,
    pub alpha: f64,
    pub rows: Vec<IncomparabilityRow>,
}

impl IncomparabilityTable {
    /// Whether each example satisfies exactly its own theorem (rows ordered G2, G3, G1).
    pub fn is_diagonal(&self) -> bool {
        let expected = [[false, true, false], [false, false, true], [true, false, false]];
        self.rows.len() == 3
            && self.rows.iter().zip(expected).all(|(r, e)| {
                r.verdicts
                    .iter()
                    .zip(e)
                    .all(|(v, want)| *v == Verdict::from_bool(want))
            })
    }
}

/// Run the three separating examples through the three theorem checks.
///
/// With `alpha = (1 + p) / 2` and `phi = |s|^alpha`, on the bounding box `[lo, hi]`:
/// - `F = lambda1 |s|^p / p + eta phi(s)`, `eta` = 0.5 on the first fifth of the box, -1 elsewhere;
/// - `F = lambda1 |s|^p / p + eta |s|`, `eta = -1`, `h = 0`;
/// - `F = (lambda1 / p + a) |s|^p + (phi(s) |s|^p)^(1/2)`, `a` a negative bump
///   at the centre with radius a quarter of the box width.
pub fn incomparability_suite(mesh: &Mesh, eigen: &EigenResult, opts: &TheoremOptions) -> Result<IncomparabilityTable> {
    let p = eigen.p;
    let lambda1 = eigen.lambda1;
    let alpha = 0.5 * (1.0 + p);
    let phi = ComparisonFunction::power(alpha)?;
    let (lo, hi) = mesh.bounds();
    let width = hi[0] - lo[0];
    let eta2 = Weight::bounded(ScalarField::Step {
        at: lo[0] + 0.2 * width,
        left: 0.5,
        right: -1.0,
    });
    let eta3 = Weight::bounded(ScalarField::constant(-1.0));
    let radius = 0.25 * if mesh.dim() == 2 { width.min(hi[1] - lo[1]) } else { width };
    let a = Weight::bounded(ScalarField::Bump {
        center: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
        radius,
        amplitude: -1.0,
    });
    let examples = [
        ("example2", "eta(x) phi(s) perturbation", eta_phi(eta2, phi, lambda1, p)?),
        ("example3", "eta(x) |s| perturbation", eta_linear(eta3, lambda1, p)?),
        ("example4", "(lambda1/p + a(x)) |s|^p + (phi(s)|s|^p)^(1/2)", example4(a, phi, lambda1, p)?),
    ];
    let h = mesh.zero_dual();
    let mut rows = Vec::with_capacity(3);
    for (name, desc, spec) in examples {
        let g1 = check_theorem_g1(mesh, &spec, eigen, opts)?;
        let g2 = check_theorem_g2(mesh, &spec, eigen, Some(phi), opts)?;
        let g3 = check_theorem_g3(mesh, &spec, eigen, &h, opts)?;
        rows.push(IncomparabilityRow {
            example: name.to_string(),
            description: desc.to_string(),
            verdicts: [g1.overall, g2.overall, g3.overall],
            reports: [g1, g2, g3],
        });
    }
    Ok(IncomparabilityTable {
        p,
        lambda1,
        alpha,
        rows,
    })
}
