use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigen::ROUNDING;
use crate::error::{invalid, Error, Result};
use crate::ext::{ExtReal, IntegralAccumulator};
use crate::fem::{
    dirichlet_energy, nonlinear_load, pairing, plap_preconditioner, plap_residual, DiscreteField, DualVector, Mesh,
};
use crate::nonlinearity::{eval_f, eval_potential, NonlinearitySpec};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Consecutive steps with negligible decrease and flat stationarity needed to stop.
const STALL_STEPS: usize = 5;
/// Values of `Phi` below this are taken as evidence that it is unbounded below.
pub const UNBOUNDED_BELOW: f64 = -1e12;

/// `Phi(u) = (1/p) integral |grad u|^p - integral F(x, u) - <h, u>`.
///
/// The potential is integrated by the mesh quadrature as `integral (-F)`;
/// when both its positive and negative parts diverge that integral is
/// `+inf`, so `Phi = +inf`.
pub fn assemble_phi(mesh: &Mesh, spec: &NonlinearitySpec, h: &DualVector, u: &DiscreteField, p: f64) -> Result<ExtReal> {
    let energy = dirichlet_energy(mesh, u, p)?;
    let hu = pairing(h, u)?;
    let vv = mesh.vertex_values(u);
    let dim = mesh.dim();
    let mut acc = IntegralAccumulator::default();
    for q in mesh.quadrature_points() {
        let s = mesh.value_at(&vv, q);
        acc.add(-eval_potential(spec, &q.x[..dim], s)?, q.weight);
    }
    Ok(acc.value() + ExtReal::Finite(energy - hu))
}

/// Gradient of [`assemble_phi`]: `plap_residual(u) - load(f(x, u)) - h`.
pub fn phi_gradient(mesh: &Mesh, spec: &NonlinearitySpec, h: &DualVector, u: &DiscreteField, p: f64) -> Result<DualVector> {
    let a = plap_residual(mesh, u, p)?;
    let l = nonlinear_load(mesh, u, |x, s| eval_f(spec, x, s))?;
    h.check(mesh, "solver::phi_gradient")?;
    Ok(a.add_scaled(-1.0, &l).add_scaled(-1.0, h))
}

/// `max_j |g_j|` divided by the mean element measure.
pub fn stationarity(mesh: &Mesh, g: &DualVector) -> f64 {
    g.max_abs() / mesh.element_scale()
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Converged when the scaled stationarity falls below this.
    pub stationarity_tol: f64,
    /// Stop after repeated steps that lower `Phi` by less than this times
    /// `max(1, |Phi|)` without improving stationarity.
    pub decrease_tol: f64,
    /// Random starts in addition to the start at `u = 0`.
    pub random_starts: usize,
    /// Nodal amplitude of random starts.
    pub start_amplitude: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 2000,
            stationarity_tol: 1e-8,
            decrease_tol: 1e-14,
            random_starts: 5,
            start_amplitude: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Stationary,
    Stagnation,
    LineSearchFailed,
    MaxIterations,
    /// `Phi` is `+inf` at the start point.
    InfiniteStart,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LineSearchStats {
    pub steps: usize,
    pub backtracks: usize,
    pub min_step: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    /// `None` for the start at `u = 0`.
    pub seed: Option<u64>,
    pub phi_value: ExtReal,
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub minimizer: DiscreteField,
    pub phi_value: ExtReal,
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub line_search: LineSearchStats,
    /// Every start, in the order run; the result is the best converged one.
    pub starts: Vec<StartSummary>,
    pub best_start: usize,
}

struct Run {
    u: DiscreteField,
    phi: ExtReal,
    stationarity: f64,
    iterations: usize,
    stop: StopReason,
    stats: LineSearchStats,
}

fn unbounded(phi: ExtReal) -> Option<Error> {
    match phi {
        ExtReal::NegInfinity => Some(Error::Unbounded { value: f64::NEG_INFINITY }),
        ExtReal::Finite(v) if v < UNBOUNDED_BELOW => Some(Error::Unbounded { value: v }),
        _ => None,
    }
}

fn descend(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    h: &DualVector,
    p: f64,
    start: DiscreteField,
    opts: &SolveOptions,
) -> Result<Run> {
    let mut stats = LineSearchStats {
        min_step: 1.0,
        ..Default::default()
    };
    let mut u = start;
    let mut phi = assemble_phi(mesh, spec, h, &u, p)?;
    if let Some(e) = unbounded(phi) {
        return Err(e);
    }
    if phi == ExtReal::PosInfinity {
        return Ok(Run {
            u,
            phi,
            stationarity: f64::INFINITY,
            iterations: 0,
            stop: StopReason::InfiniteStart,
            stats,
        });
    }
    let mut g = phi_gradient(mesh, spec, h, &u, p)?;
    let mut stat = stationarity(mesh, &g);
    let mut stalled = 0;
    for it in 0..opts.max_iterations {
        if stat < opts.stationarity_tol {
            return Ok(Run {
                u,
                phi,
                stationarity: stat,
                iterations: it,
                stop: StopReason::Stationary,
                stats,
            });
        }
        let pre = plap_preconditioner(mesh, &u, p)?;
        let dir: Vec<f64> = pre.solve(g.values()).iter().map(|d| -d).collect();
        let slope: f64 = g.values().iter().zip(&dir).map(|(a, b)| a * b).sum();
        let dir = mesh.field(dir)?;
        let current = phi.finite().expect("finite Phi during descent");

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = u.add_scaled(t, &dir);
            let value = assemble_phi(mesh, spec, h, &trial, p)?;
            if let Some(e) = unbounded(value) {
                return Err(e);
            }
            if let ExtReal::Finite(v) = value {
                // once the change of Phi is rounding noise, stationarity decides
                let ok = if (v - current).abs() <= ROUNDING * current.abs().max(1.0) {
                    stationarity(mesh, &phi_gradient(mesh, spec, h, &trial, p)?) < stat
                } else {
                    v <= current + ARMIJO * t * slope
                };
                if ok {
                    accepted = Some((trial, v));
                    break;
                }
            }
            stats.backtracks += 1;
            t *= 0.5;
        }
        let Some((next, value)) = accepted else {
            stats.failures += 1;
            return Ok(Run {
                u,
                phi,
                stationarity: stat,
                iterations: it,
                stop: StopReason::LineSearchFailed,
                stats,
            });
        };
        stats.steps += 1;
        stats.min_step = stats.min_step.min(t);
        let decrease = current - value;
        u = next;
        phi = ExtReal::Finite(value);
        g = phi_gradient(mesh, spec, h, &u, p)?;
        let previous = stat;
        stat = stationarity(mesh, &g);
        let improved = stat < 0.9 * previous;
        if decrease < opts.decrease_tol * value.abs().max(1.0) && !improved {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= STALL_STEPS && stat >= opts.stationarity_tol {
            return Ok(Run {
                u,
                phi,
                stationarity: stat,
                iterations: it + 1,
                stop: StopReason::Stagnation,
                stats,
            });
        }
    }
    let stop = if stat < opts.stationarity_tol {
        StopReason::Stationary
    } else {
        StopReason::MaxIterations
    };
    Ok(Run {
        u,
        phi,
        stationarity: stat,
        iterations: opts.max_iterations,
        stop,
        stats,
    })
}

/// Minimize `Phi` by steepest descent in the preconditioned Sobolev metric
/// with Armijo backtracking, from `u = 0` and from seeded random starts.
///
/// The returned minimizer is the best converged start ("best found"; no
/// claim of global optimality). `converged` means the scaled stationarity
/// is below `stationarity_tol`.
pub fn minimize_phi(
    mesh: &Mesh,
    spec: &NonlinearitySpec,
    h: &DualVector,
    p: f64,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    const OP: &str = "solver::minimize_phi";
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(OP, format!("need 1 < p < inf, got {p}")));
    }
    h.check(mesh, OP)?;
    let mut starts = vec![(None, mesh.zero_field())];
    for k in 0..opts.random_starts {
        let seed = opts.seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..mesh.num_free())
            .map(|_| opts.start_amplitude * rng.gen_range(-1.0..1.0))
            .collect();
        starts.push((Some(seed), mesh.field(vals)?));
    }

    let mut runs = Vec::with_capacity(starts.len());
    let mut summaries = Vec::with_capacity(starts.len());
    for (seed, u0) in starts {
        let run = descend(mesh, spec, h, p, u0, opts)?;
        summaries.push(StartSummary {
            seed,
            phi_value: run.phi,
            stationarity: run.stationarity,
            iterations: run.iterations,
            converged: run.stationarity < opts.stationarity_tol,
            stop: run.stop,
        });
        runs.push(run);
    }
    let rank = |i: usize| (!summaries[i].converged, summaries[i].phi_value.to_f64());
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            let (ca, pa) = rank(a);
            let (cb, pb) = rank(b);
            ca.cmp(&cb).then(pa.total_cmp(&pb))
        })
        .expect("at least one start");
    let mut line_search = LineSearchStats {
        min_step: 1.0,
        ..Default::default()
    };
    for r in &runs {
        line_search.steps += r.stats.steps;
        line_search.backtracks += r.stats.backtracks;
        line_search.failures += r.stats.failures;
        line_search.min_step = line_search.min_step.min(r.stats.min_step);
    }
    let run = runs.swap_remove(best);
    Ok(SolveResult {
        minimizer: run.u,
        phi_value: run.phi,
        stationarity: run.stationarity,
        iterations: run.iterations,
        converged: summaries[best].converged,
        stop: run.stop,
        line_search,
        starts: summaries,
        best_start: best,
    })
}
