use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::limsup::{estimate_limsup, Direction, LimsupEstimate, LimsupGrid};
use super::Verdict;
use crate::error::{invalid, Result};
use crate::ext::ExtReal;
use crate::fem::Mesh;
use crate::nonlinearity::{eval_potential, eval_shifted_potential, ComparisonFunction, NonlinearitySpec, Weight};

/// Points `x` and the largest `|s|` probed by [`check_growth`].
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub points: Vec<Vec<f64>>,
    pub s_max: f64,
    pub s_samples: usize,
}

impl SampleBox {
    /// Mesh vertices as `x` samples with `|s|` up to 1000.
    pub fn from_mesh(mesh: &Mesh) -> SampleBox {
        let dim = mesh.dim();
        SampleBox {
            points: (0..mesh.num_vertices()).map(|v| mesh.vertex(v)[..dim].to_vec()).collect(),
            s_max: 1000.0,
            s_samples: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub verdict: Verdict,
    pub q: f64,
    /// Fitted `a` in `|f| <= a |s|^(q-1) + b`.
    pub a: f64,
    /// `sup |f|` over `|s| <= 1`.
    pub b: f64,
    pub ratio_first: f64,
    pub ratio_last: f64,
}

/// Test `|f(x, s)| <= a |s|^(q-1) + b(x)` on a geometric grid in `|s|`.
///
/// Fails when `max_x |f| / (|s|^(q-1) + 1)` over the last tenth of the grid
/// exceeds `1e6` times its value over the first tenth, or when `f`
/// overflows.
pub fn check_growth(spec: &NonlinearitySpec, q: f64, sample: &SampleBox) -> Result<GrowthReport> {
    if !(q > 1.0) {
        return Err(invalid("conditions::check_growth", format!("need q > 1, got {q}")));
    }
    let m = sample.s_samples.max(20);
    let ln_max = sample.s_max.max(2.0).ln();
    let ss: Vec<f64> = (0..m).map(|i| (ln_max * i as f64 / (m - 1) as f64).exp()).collect();
    let mut ratios = Vec::with_capacity(m);
    let mut overflow = false;
    let mut b: f64 = 0.0;
    let mut a: f64 = 0.0;
    let small: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for x in &sample.points {
        for &s in &small {
            b = b.max(spec.f_raw(x, s).abs()).max(spec.f_raw(x, -s).abs());
        }
    }
    for &s in &ss {
        let mut worst: f64 = 0.0;
        for x in &sample.points {
            for v in [spec.f_raw(x, s), spec.f_raw(x, -s)] {
                if !v.is_finite() {
                    overflow = true;
                }
                worst = worst.max(v.abs());
            }
        }
        let base = s.powf(q - 1.0);
        ratios.push(worst / (base + 1.0));
        a = a.max((worst - b).max(0.0) / base);
    }
    let w = (m / 10).max(1);
    let first = ratios[..w].iter().cloned().fold(0.0, f64::max);
    let last = ratios[m - w..].iter().cloned().fold(0.0, f64::max);
    let unbounded = overflow || !last.is_finite() || last > 1e6 * first.max(f64::MIN_POSITIVE);
    Ok(GrowthReport {
        verdict: if unbounded { Verdict::Fails } else { Verdict::Holds },
        q,
        a,
        b,
        ratio_first: first,
        ratio_last: last,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct F0Report {
    pub verdict: Verdict,
    pub radius: f64,
    /// `integral sup_{|s| <= R} |f(x, s)| dx` on the mesh and its refinements.
    pub values: Vec<f64>,
    pub value: f64,
}

const F0_GRID: usize = 2001;

fn sup_envelope(spec: &NonlinearitySpec, x: &[f64], r: f64) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..F0_GRID {
        let s = -r + 2.0 * r * i as f64 / (F0_GRID - 1) as f64;
        let v = spec.f_raw(x, s).abs();
        if !v.is_finite() {
            return f64::INFINITY;
        }
        m = m.max(v);
    }
    m
}

fn f0_integral(spec: &NonlinearitySpec, mesh: &Mesh, r: f64, shared: Option<f64>) -> f64 {
    let dim = mesh.dim();
    let parts: Vec<f64> = mesh
        .quadrature_points()
        .par_iter()
        .map(|q| q.weight * shared.unwrap_or_else(|| sup_envelope(spec, &q.x[..dim], r)))
        .collect();
    parts.iter().sum()
}

/// Check `integral sup_{|s| <= R} |f(., s)| < inf` with the supremum over
/// 2001 equally spaced `s` values. The integral is recomputed on two nested
/// refinements; positive increments that fail to shrink indicate divergence.
pub fn check_f0(spec: &NonlinearitySpec, radius: f64, mesh: &Mesh) -> Result<F0Report> {
    if !(radius > 0.0) {
        return Err(invalid("conditions::check_f0", format!("need R > 0, got {radius}")));
    }
    let shared = spec.autonomous.then(|| sup_envelope(spec, &[0.0, 0.0][..mesh.dim()], radius));
    let mut values = Vec::with_capacity(3);
    let mut m = mesh.clone();
    for level in 0..3 {
        if level > 0 {
            m = m.refine();
        }
        values.push(f0_integral(spec, &m, radius, shared));
    }
    let finite = values.iter().all(|v| v.is_finite() && *v < 1e300);
    let d1 = values[1] - values[0];
    let d2 = values[2] - values[1];
    // log-type divergence keeps the increments constant; O(h) convergence halves them
    let growing = d2 > 1e-9 * values[2].abs().max(1.0) && d2 >= 0.9 * d1;
    let verdict = if finite && !growing {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    Ok(F0Report {
        verdict,
        radius,
        value: values[2],
        values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomCheck {
    pub axiom: &'static str,
    pub verdict: Verdict,
    pub evidence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub function: String,
    pub order: f64,
    pub axioms: Vec<AxiomCheck>,
    pub verdict: Verdict,
}

/// Check the four comparison-function axioms on sample grids:
/// (i) `phi / |s|^p -> 0`, (ii) `phi / |s| -> inf`, (iii)
/// `phi(r t) / phi(t) -> r^alpha` for random `r` in `[0.1, 10]`, (iv)
/// `phi(t s) / phi(t) <= a |s|^beta + b` with `beta = alpha + 0.5` and a fit
/// that does not grow with `t` over `[10, 1e6]`.
pub fn verify_comparison_function(phi: &ComparisonFunction, p: f64) -> Result<ComparisonReport> {
    let grid = LimsupGrid::default();
    let mut axioms = Vec::with_capacity(4);

    let e = estimate_limsup(|s| Ok(phi.value(s) / s.abs().powf(p)), Direction::PlusInfinity, grid)?;
    let v = match e.value {
        ExtReal::Finite(v) if v.abs() <= 1e-6 => Verdict::Holds,
        _ if !e.converged => Verdict::Inconclusive,
        _ => Verdict::Fails,
    };
    axioms.push(AxiomCheck {
        axiom: "(i) phi(s)/|s|^p -> 0",
        verdict: v,
        evidence: e.value.to_f64(),
    });

    let e = estimate_limsup(|s| Ok(phi.value(s) / s.abs()), Direction::PlusInfinity, grid)?;
    let v = match e.value {
        ExtReal::PosInfinity => Verdict::Holds,
        _ if !e.converged => Verdict::Inconclusive,
        _ => Verdict::Fails,
    };
    axioms.push(AxiomCheck {
        axiom: "(ii) phi(s)/|s| -> inf",
        verdict: v,
        evidence: e.value.to_f64(),
    });

    // (iii): worst relative error over random ratios, tracked along t = 2^k
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let rs: Vec<f64> = (0..20).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
    let (k_first, k_last) = (20, 40);
    let errs: Vec<f64> = (k_first..=k_last)
        .map(|k| {
            let t = 2f64.powi(k);
            rs.iter()
                .map(|&r| {
                    let target = r.powf(phi.alpha);
                    ((phi.value(r * t) / phi.value(t)) - target).abs() / target
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let last = errs[errs.len() - 1];
    let k_mid = (k_first + k_last) / 2;
    let mid = errs[(k_mid - k_first) as usize];
    let decreasing = errs.windows(2).all(|w| w[1] <= w[0]);
    let v = if last <= 1e-6 {
        Verdict::Holds
    } else if decreasing && last <= 1.05 * mid * k_mid as f64 / k_last as f64 {
        // decays at least like 1 / log t, as for logarithmic factors
        Verdict::Holds
    } else if decreasing {
        Verdict::Inconclusive
    } else {
        Verdict::Fails
    };
    axioms.push(AxiomCheck {
        axiom: "(iii) phi(r t)/phi(t) -> r^alpha",
        verdict: v,
        evidence: last,
    });

    let beta = phi.alpha + 0.5;
    let ss: Vec<f64> = (0..=120).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0)).collect();
    let fit = |t_hi: f64| -> (f64, f64) {
        let ts: Vec<f64> = (0..=40)
            .map(|i| 10f64.powf(1.0 + (t_hi.log10() - 1.0) * i as f64 / 40.0))
            .collect();
        let mut b: f64 = 1.0;
        let mut a: f64 = 0.0;
        for &t in &ts {
            let base = phi.value(t);
            for &s in ss.iter().filter(|&&s| s <= 1.0) {
                b = b.max(phi.value(t * s) / base);
            }
        }
        for &t in &ts {
            let base = phi.value(t);
            for &s in ss.iter().filter(|&&s| s > 1.0) {
                a = a.max((phi.value(t * s) / base - b).max(0.0) / s.powf(beta));
            }
        }
        (a, b)
    };
    let (a_half, _) = fit(1e3);
    let (a_full, b_full) = fit(1e6);
    let ok = a_full.is_finite() && b_full.is_finite() && a_full <= 1.1 * a_half + 1e-12;
    axioms.push(AxiomCheck {
        axiom: "(iv) phi(ts)/phi(t) <= a|s|^beta + b",
        verdict: if ok { Verdict::Holds } else { Verdict::Fails },
        evidence: a_full,
    });

    let verdict = Verdict::all(axioms.iter().map(|a| a.verdict));
    Ok(ComparisonReport {
        function: phi.to_string(),
        order: phi.alpha,
        axioms,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightClass {
    X,
    Y,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    pub class: WeightClass,
    pub alpha: f64,
    /// `(p* / alpha)'` when `p < N`.
    pub threshold: Option<f64>,
    pub exponent: Option<f64>,
}

/// Decide membership of a weight in `X_alpha` / `Y_alpha` from its declared
/// Lebesgue exponent `q`: `p > N` needs `q >= 1`, `p = N` needs `q > 1`, and
/// `p < N` needs `q > (p*/alpha)'` (`X`) or `q >= (p*/alpha)'` (`Y`).
pub fn check_class_membership(
    weight: Option<&Weight>,
    alpha: f64,
    p: f64,
    n: usize,
    class: WeightClass,
) -> MembershipReport {
    let nf = n as f64;
    let threshold = (p < nf).then(|| {
        let pstar = nf * p / (nf - p);
        let r = pstar / alpha;
        r / (r - 1.0)
    });
    let exponent = weight.map(|w| w.exponent);
    let verdict = match exponent {
        None => Verdict::Inconclusive,
        Some(q) => {
            let ok = if p > nf {
                q >= 1.0
            } else if p == nf {
                q > 1.0
            } else {
                let t = threshold.expect("p < N");
                match class {
                    WeightClass::X => q > t,
                    WeightClass::Y => q >= t * (1.0 - 1e-12),
                }
            };
            Verdict::from_bool(ok)
        }
    };
    MembershipReport {
        verdict,
        class,
        alpha,
        threshold,
        exponent,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub verdict: Verdict,
    pub lambda1: f64,
    /// Largest estimate of `limsup p F(x, s) / |s|^p` over the sampled `x`, both directions.
    pub worst: ExtReal,
}

/// Strict coercivity: `limsup_{s -> ±inf} p F(x, s) / |s|^p < lambda1` at
/// every sampled `x`, with margin `1e-9`.
pub fn check_coercivity(
    spec: &NonlinearitySpec,
    lambda1: f64,
    p: f64,
    points: &[Vec<f64>],
    grid: LimsupGrid,
) -> Result<CoercivityReport> {
    let mut worst = ExtReal::NegInfinity;
    let mut verdicts = Vec::new();
    for x in points {
        for dir in [Direction::PlusInfinity, Direction::MinusInfinity] {
            let e = estimate_limsup(
                |s| Ok(p * eval_potential(spec, x, s)?.to_f64() / s.abs().powf(p)),
                dir,
                grid,
            )?;
            if e.value > worst {
                worst = e.value;
            }
            verdicts.push(if !e.converged {
                Verdict::Inconclusive
            } else {
                Verdict::from_bool(e.value < ExtReal::Finite(lambda1 - 1e-9))
            });
        }
    }
    Ok(CoercivityReport {
        verdict: Verdict::all(verdicts),
        lambda1,
        worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct G0Report {
    pub verdict: Verdict,
    pub plus: LimsupEstimate,
    pub minus: LimsupEstimate,
}

/// `lim_{s -> ±inf} G(s) / |s| = -inf` for an autonomous spec.
pub fn check_g0(spec: &NonlinearitySpec, lambda1: f64, p: f64, grid: LimsupGrid) -> Result<G0Report> {
    if !spec.autonomous {
        return Err(invalid("conditions::check_g0", "spec is not autonomous"));
    }
    let x = [0.0, 0.0];
    let est = |dir| {
        estimate_limsup(
            |s| Ok(eval_shifted_potential(spec, &x, s, lambda1, p)?.to_f64() / s.abs()),
            dir,
            grid,
        )
    };
    let plus = est(Direction::PlusInfinity)?;
    let minus = est(Direction::MinusInfinity)?;
    let one = |e: &LimsupEstimate| {
        if e.value == ExtReal::NegInfinity && e.converged {
            Verdict::Holds
        } else if e.converged {
            Verdict::Fails
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(G0Report {
        verdict: one(&plus).and(one(&minus)),
        plus,
        minus,
    })
}
