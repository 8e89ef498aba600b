use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    /// `|s|^alpha`
    Power,
    /// `|s|^alpha |log |s||`
    PowerLog,
}

/// Even, nonnegative comparison function of a declared order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonFunction {
    pub kind: ComparisonKind,
    pub alpha: f64,
}

impl ComparisonFunction {
    pub fn power(alpha: f64) -> Result<ComparisonFunction> {
        Self::new(ComparisonKind::Power, alpha)
    }

    pub fn power_log(alpha: f64) -> Result<ComparisonFunction> {
        Self::new(ComparisonKind::PowerLog, alpha)
    }

    fn new(kind: ComparisonKind, alpha: f64) -> Result<ComparisonFunction> {
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(invalid("conditions::ComparisonFunction", format!("order must be >= 1, got {alpha}")));
        }
        Ok(ComparisonFunction { kind, alpha })
    }

    pub fn order(&self) -> f64 {
        self.alpha
    }

    pub fn value(&self, s: f64) -> f64 {
        let a = s.abs();
        match self.kind {
            ComparisonKind::Power => a.powf(self.alpha),
            ComparisonKind::PowerLog => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(self.alpha) * a.ln().abs()
                }
            }
        }
    }

    /// Derivative in `s`; at kinks (`s = 0`, and `|s| = 1` for the log
    /// kind) the right derivative of `|s|` is used.
    pub fn derivative(&self, s: f64) -> f64 {
        let a = s.abs();
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let d = match self.kind {
            ComparisonKind::Power => {
                if a == 0.0 {
                    if self.alpha == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.alpha * a.powf(self.alpha - 1.0)
                }
            }
            ComparisonKind::PowerLog => {
                if a == 0.0 {
                    0.0
                } else {
                    let l = a.ln();
                    let sl = if l < 0.0 { -1.0 } else { 1.0 };
                    a.powf(self.alpha - 1.0) * (self.alpha * l.abs() + sl)
                }
            }
        };
        sign * d
    }

    /// Values of `|s|` where the function is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            ComparisonKind::Power if self.alpha == 1.0 => vec![0.0],
            ComparisonKind::Power => vec![],
            ComparisonKind::PowerLog => vec![0.0, 1.0],
        }
    }
}

impl fmt::Display for ComparisonFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ComparisonKind::Power => write!(f, "|s|^{}", self.alpha),
            ComparisonKind::PowerLog => write!(f, "|s|^{} |log|s||", self.alpha),
        }
    }
}
