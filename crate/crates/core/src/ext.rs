use std::fmt;
use std::ops::{Add, Neg};

use serde::{Serialize, Serializer};

/// Extended real number. Potentials and the energy functional may take
/// infinite values; the sentinels carry the sign.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

/// Value of a potential `F(x, s)` or of an integral of one.
pub type PotentialValue = ExtReal;

impl ExtReal {
    /// Map an `f64` (possibly infinite) to an extended real. NaN maps to `None`.
    pub fn from_f64(v: f64) -> Option<ExtReal> {
        if v.is_nan() {
            None
        } else if v == f64::INFINITY {
            Some(ExtReal::PosInfinity)
        } else if v == f64::NEG_INFINITY {
            Some(ExtReal::NegInfinity)
        } else {
            Some(ExtReal::Finite(v))
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInfinity => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInfinity => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Multiply by a nonnegative finite weight; `0 * inf` is taken as 0.
    pub fn weighted(self, w: f64) -> ExtReal {
        debug_assert!(w >= 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v * w),
            _ if w == 0.0 => ExtReal::Finite(0.0),
            other => other,
        }
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            ExtReal::NegInfinity => ExtReal::PosInfinity,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInfinity => ExtReal::NegInfinity,
        }
    }
}

/// Sum of extended reals. `inf + (-inf)` has no value; callers decide how to
/// resolve it (see [`IntegralAccumulator`]), so it panics here.
impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtReal::from_f64(a + b).expect("finite sum"),
            (PosInfinity, NegInfinity) | (NegInfinity, PosInfinity) => {
                panic!("undefined sum inf - inf")
            }
            (PosInfinity, _) | (_, PosInfinity) => PosInfinity,
            (NegInfinity, _) | (_, NegInfinity) => NegInfinity,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> ExtReal {
        ExtReal::from_f64(v).expect("NaN is not an extended real")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInfinity => write!(f, "-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::NegInfinity => s.serialize_str("-inf"),
            ExtReal::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

/// Accumulates an integral of an extended-real integrand by its positive and
/// negative parts. When both parts diverge the integral is `+inf`.
#[derive(Debug, Default, Clone, Copy)]
pub struct IntegralAccumulator {
    positive: f64,
    negative: f64,
}

impl IntegralAccumulator {
    pub fn add(&mut self, v: ExtReal, weight: f64) {
        match v.weighted(weight) {
            ExtReal::Finite(x) if x >= 0.0 => self.positive += x,
            ExtReal::Finite(x) => self.negative -= x,
            ExtReal::PosInfinity => self.positive = f64::INFINITY,
            ExtReal::NegInfinity => self.negative = f64::INFINITY,
        }
    }

    pub fn value(&self) -> ExtReal {
        match (self.positive.is_finite(), self.negative.is_finite()) {
            (true, true) => ExtReal::Finite(self.positive - self.negative),
            (false, true) => ExtReal::PosInfinity,
            (true, false) => ExtReal::NegInfinity,
            (false, false) => ExtReal::PosInfinity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_negation() {
        assert!(ExtReal::NegInfinity < ExtReal::Finite(-1e300));
        assert!(ExtReal::Finite(1e300) < ExtReal::PosInfinity);
        assert_eq!(-ExtReal::PosInfinity, ExtReal::NegInfinity);
        assert_eq!(ExtReal::from_f64(f64::NAN), None);
    }

    #[test]
    fn accumulator_convention() {
        let mut acc = IntegralAccumulator::default();
        acc.add(ExtReal::Finite(2.0), 0.5);
        acc.add(ExtReal::Finite(-3.0), 1.0);
        assert_eq!(acc.value(), ExtReal::Finite(-2.0));
        acc.add(ExtReal::NegInfinity, 1.0);
        assert_eq!(acc.value(), ExtReal::NegInfinity);
        acc.add(ExtReal::PosInfinity, 1.0);
        assert_eq!(acc.value(), ExtReal::PosInfinity);
        let mut zero_weight = IntegralAccumulator::default();
        zero_weight.add(ExtReal::PosInfinity, 0.0);
        assert_eq!(zero_weight.value(), ExtReal::Finite(0.0));
    }
}
