use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Closed-form function of `x` used for densities and coefficient weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant { value: f64 },
    /// `c0 + c1 * x + c2 * y`
    Affine { c0: f64, c1: f64, c2: f64 },
    /// `left` for `x < at`, `right` otherwise (first coordinate).
    Step { at: f64, left: f64, right: f64 },
    /// Smooth compactly supported bump with peak `amplitude` at `center`,
    /// `amplitude * exp(1 - 1 / (1 - (r / radius)^2))` for `r < radius`.
    Bump {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

impl ScalarField {
    pub fn constant(value: f64) -> ScalarField {
        ScalarField::Constant { value }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            ScalarField::Constant { value } => value,
            ScalarField::Affine { c0, c1, c2 } => c0 + c1 * x[0] + c2 * x.get(1).copied().unwrap_or(0.0),
            ScalarField::Step { at, left, right } => {
                if x[0] < at {
                    left
                } else {
                    right
                }
            }
            ScalarField::Bump {
                center,
                radius,
                amplitude,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (radius * radius);
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the function is independent of `x`.
    pub fn is_constant(&self) -> bool {
        match *self {
            ScalarField::Constant { .. } => true,
            ScalarField::Affine { c1, c2, .. } => c1 == 0.0 && c2 == 0.0,
            ScalarField::Step { left, right, .. } => left == right,
            ScalarField::Bump { amplitude, .. } => amplitude == 0.0,
        }
    }

    /// Parse `1.5`, `const(c)`, `affine(c0, c1[, c2])`, `step(at, left, right)`,
    /// `bump(cx, r, A)` or `bump(cx, cy, r, A)`.
    pub fn parse(text: &str) -> Result<ScalarField> {
        const OP: &str = "nonlinearity::ScalarField::parse";
        let text = text.trim().trim_matches('"');
        if let Ok(v) = text.parse::<f64>() {
            return finite(v).map(ScalarField::constant);
        }
        let (name, args) = parse_call(text).ok_or_else(|| invalid(OP, format!("cannot parse field `{text}`")))?;
        let wrong = |n: &str| invalid(OP, format!("`{name}` expects {n} arguments, got {}", args.len()));
        match (name, args.len()) {
            ("const", 1) => Ok(ScalarField::constant(args[0])),
            ("affine", 2) => Ok(ScalarField::Affine {
                c0: args[0],
                c1: args[1],
                c2: 0.0,
            }),
            ("affine", 3) => Ok(ScalarField::Affine {
                c0: args[0],
                c1: args[1],
                c2: args[2],
            }),
            ("step", 3) => Ok(ScalarField::Step {
                at: args[0],
                left: args[1],
                right: args[2],
            }),
            ("bump", 3 | 4) => {
                let (center, radius, amplitude) = if args.len() == 3 {
                    ([args[0], 0.0], args[1], args[2])
                } else {
                    ([args[0], args[1]], args[2], args[3])
                };
                if !(radius > 0.0) {
                    return Err(invalid(OP, "bump radius must be positive"));
                }
                Ok(ScalarField::Bump {
                    center,
                    radius,
                    amplitude,
                })
            }
            ("const", _) => Err(wrong("1")),
            ("affine", _) => Err(wrong("2 or 3")),
            ("step", _) => Err(wrong("3")),
            ("bump", _) => Err(wrong("3 or 4")),
            _ => Err(invalid(OP, format!("unknown field `{name}`"))),
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid("nonlinearity::ScalarField::parse", "non-finite constant"))
    }
}

/// Split `name(a, b, ...)` into the name and numeric arguments.
pub(crate) fn parse_call(text: &str) -> Option<(&str, Vec<f64>)> {
    let open = text.find('(')?;
    let inner = text[open + 1..].strip_suffix(')')?;
    let name = text[..open].trim();
    if inner.trim().is_empty() {
        return Some((name, Vec::new()));
    }
    let args = inner
        .split(',')
        .map(|a| a.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()?;
    Some((name, args))
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScalarField::Constant { value } => write!(f, "{value}"),
            ScalarField::Affine { c0, c1, c2 } => write!(f, "affine({c0}, {c1}, {c2})"),
            ScalarField::Step { at, left, right } => write!(f, "step({at}, {left}, {right})"),
            ScalarField::Bump {
                center,
                radius,
                amplitude,
            } => write!(f, "bump({}, {}, {radius}, {amplitude})", center[0], center[1]),
        }
    }
}

/// A coefficient function together with its declared Lebesgue exponent
/// (`f64::INFINITY` for bounded functions).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weight {
    pub field: ScalarField,
    pub exponent: f64,
}

impl Weight {
    /// Bounded weight; all catalog fields are bounded, so the declared class is `L^inf`.
    pub fn bounded(field: ScalarField) -> Weight {
        Weight {
            field,
            exponent: f64::INFINITY,
        }
    }

    pub fn with_exponent(field: ScalarField, exponent: f64) -> Result<Weight> {
        if !(exponent >= 1.0) {
            return Err(invalid("nonlinearity::Weight", format!("exponent must be >= 1, got {exponent}")));
        }
        Ok(Weight { field, exponent })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.field.eval(x)
    }
}
