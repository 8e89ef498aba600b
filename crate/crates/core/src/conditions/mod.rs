//! Numerical audit of growth, coercivity and nonresonance hypotheses.
//!
//! Limits at infinity are estimated on geometric grids and carry a
//! convergence flag. Verdicts are three-valued; a definite failure of any
//! part makes a conjunction fail even when other parts are inconclusive.

mod checks;
mod limsup;
mod theorems;

use std::fmt;

use serde::Serialize;

pub use crate::nonlinearity::{ComparisonFunction, ComparisonKind};
pub use checks::{
    check_class_membership, check_coercivity, check_f0, check_g0, check_growth, verify_comparison_function,
    AxiomCheck, CoercivityReport, ComparisonReport, F0Report, G0Report, GrowthReport, MembershipReport, SampleBox,
    WeightClass,
};
pub use limsup::{estimate_limsup, Direction, LimsupEstimate, LimsupGrid, Trend, SENTINEL_THRESHOLD, TAIL_TOLERANCE};
pub use theorems::{
    check_theorem_g1, check_theorem_g2, check_theorem_g3, incomparability_suite, HypothesisReport,
    IncomparabilityRow, IncomparabilityTable, SubHypothesis, TheoremOptions, MEASURE_FRACTION, STRICT_MARGIN,
    UNIFORM_SLACK,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Verdict {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    /// Three-valued conjunction.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fails, _) | (_, Verdict::Fails) => Verdict::Fails,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Holds,
        }
    }

    pub fn all(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
        vs.into_iter().fold(Verdict::Holds, Verdict::and)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}
