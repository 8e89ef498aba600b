use serde::Serialize;

use crate::error::{invalid, Result};
use crate::ext::ExtReal;

/// Magnitude beyond which samples are reported as infinite.
pub const SENTINEL_THRESHOLD: f64 = 1e12;
/// Relative agreement of the last two tail maxima required for convergence.
pub const TAIL_TOLERANCE: f64 = 1e-3;

const TREND_WINDOW: usize = 6;
const CONSTANT_TOL: f64 = 1e-12;
const MAX_GEOMETRIC_RATIO: f64 = 0.97;
const RATIO_SPREAD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PlusInfinity,
    MinusInfinity,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::PlusInfinity => 1.0,
            Direction::MinusInfinity => -1.0,
        }
    }
}

/// Geometric sample grid `s_k = ±radius * 2^k`, `k = 0..=levels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimsupGrid {
    pub radius: f64,
    pub levels: usize,
}

impl Default for LimsupGrid {
    fn default() -> Self {
        LimsupGrid {
            radius: 1.0,
            levels: 40,
        }
    }
}

/// How the tail of the sampled sequence was classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Tail constant to rounding.
    Constant,
    /// Differences shrink geometrically; the value is the extrapolated limit.
    Geometric,
    /// Differences of one sign that do not shrink; the value is a sentinel.
    Divergent,
    /// Monotone run past the sentinel threshold.
    Saturated,
    /// No recognised pattern; the value is the tail maximum.
    TailMax,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimsupEstimate {
    pub value: ExtReal,
    pub direction: Direction,
    pub grid: LimsupGrid,
    pub trend: Trend,
    pub converged: bool,
    /// Maximum over the last half of the samples.
    pub tail_max: ExtReal,
    #[serde(skip)]
    pub samples: Vec<ExtReal>,
}

fn clamp(v: f64) -> Option<ExtReal> {
    if v.is_nan() {
        None
    } else if v > SENTINEL_THRESHOLD {
        Some(ExtReal::PosInfinity)
    } else if v < -SENTINEL_THRESHOLD {
        Some(ExtReal::NegInfinity)
    } else {
        Some(ExtReal::Finite(v))
    }
}

fn max_of(v: &[ExtReal]) -> ExtReal {
    v.iter().copied().fold(ExtReal::NegInfinity, |a, b| if b > a { b } else { a })
}

fn close(a: ExtReal, b: ExtReal, tol: f64) -> bool {
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-12),
        _ => a == b,
    }
}

/// Estimate `limsup g(s)` as `s` tends to `±inf` along the geometric grid.
///
/// The last samples are classified as constant, geometrically converging
/// (limit extrapolated from the difference ratio), or diverging (sentinel).
/// Otherwise the tail maximum is reported and `converged` requires the tail
/// maxima of the last two grid lengths to agree to [`TAIL_TOLERANCE`].
pub fn estimate_limsup(
    mut g: impl FnMut(f64) -> Result<f64>,
    direction: Direction,
    grid: LimsupGrid,
) -> Result<LimsupEstimate> {
    const OP: &str = "conditions::estimate_limsup";
    if !(grid.radius > 0.0 && grid.radius.is_finite()) {
        return Err(invalid(OP, format!("radius must be positive, got {}", grid.radius)));
    }
    if grid.levels < 8 {
        return Err(invalid(OP, format!("need at least 8 levels, got {}", grid.levels)));
    }
    let mut samples = Vec::with_capacity(grid.levels + 1);
    for k in 0..=grid.levels {
        let s = direction.sign() * grid.radius * 2f64.powi(k as i32);
        let v = g(s)?;
        samples.push(clamp(v).ok_or_else(|| invalid(OP, format!("NaN sample at s = {s}")))?);
    }
    Ok(classify(samples, direction, grid))
}

fn classify(samples: Vec<ExtReal>, direction: Direction, grid: LimsupGrid) -> LimsupEstimate {
    let n = samples.len();
    let tail_max = max_of(&samples[n / 2..]);
    let prev_tail_max = max_of(&samples[(n - 1) / 2..n - 1]);
    let window = &samples[n - TREND_WINDOW..];
    let make = |value: ExtReal, trend: Trend, converged: bool| LimsupEstimate {
        value,
        direction,
        grid,
        trend,
        converged,
        tail_max,
        samples: samples.clone(),
    };

    // monotone run into a sentinel
    let last = window[window.len() - 1];
    if last == ExtReal::PosInfinity && window.windows(2).all(|w| w[1] >= w[0]) {
        return make(ExtReal::PosInfinity, Trend::Saturated, true);
    }
    if last == ExtReal::NegInfinity && window.windows(2).all(|w| w[1] <= w[0]) {
        return make(ExtReal::NegInfinity, Trend::Saturated, true);
    }
    if let Some(vals) = window.iter().map(|v| v.finite()).collect::<Option<Vec<f64>>>() {
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let d: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        if d.iter().all(|x| x.abs() <= CONSTANT_TOL * scale) {
            return make(ExtReal::Finite(vals[vals.len() - 1]), Trend::Constant, true);
        }
        let same_sign = d.iter().all(|&x| x > 0.0) || d.iter().all(|&x| x < 0.0);
        if same_sign {
            let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo >= 1.0 - 1e-6 {
                let value = if d[0] > 0.0 {
                    ExtReal::PosInfinity
                } else {
                    ExtReal::NegInfinity
                };
                return make(value, Trend::Divergent, true);
            }
            if hi <= MAX_GEOMETRIC_RATIO && hi - lo <= RATIO_SPREAD {
                let rho = ratios[ratios.len() - 1];
                let last = vals[vals.len() - 1] + d[d.len() - 1] * rho / (1.0 - rho);
                let value = clamp(last).expect("finite extrapolation");
                return make(value, Trend::Geometric, true);
            }
        }
    }
    let converged = close(tail_max, prev_tail_max, TAIL_TOLERANCE);
    make(tail_max, Trend::TailMax, converged)
}
