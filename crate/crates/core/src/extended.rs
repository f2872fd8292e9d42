//! Extended reals and closed intervals on the extended line.

use std::cmp::Ordering;
use std::fmt;

/// A point of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Maps `±inf` floats onto the infinite variants. NaN is rejected.
    pub fn from_f64(v: f64) -> Option<Self> {
        if v.is_nan() {
            None
        } else if v == f64::INFINITY {
            Some(ExtReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Some(ExtReal::NegInf)
        } else {
            Some(ExtReal::Finite(v))
        }
    }

    /// Lossy view as an IEEE float, for plotting and comparisons only.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn cmp_f64(self, x: f64) -> Ordering {
        match self {
            ExtReal::NegInf => Ordering::Less,
            ExtReal::PosInf => Ordering::Greater,
            ExtReal::Finite(v) => v.partial_cmp(&x).unwrap_or(Ordering::Equal),
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::Finite(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "+inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// A closed interval `[lo, hi]`; infinite ends are open by necessity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl Interval {
    pub fn new(lo: ExtReal, hi: ExtReal) -> Self {
        Interval { lo, hi }
    }

    pub fn real_line() -> Self {
        Interval::new(ExtReal::NegInf, ExtReal::PosInf)
    }

    pub fn contains(&self, x: f64) -> bool {
        !x.is_nan()
            && self.lo.cmp_f64(x) != Ordering::Greater
            && self.hi.cmp_f64(x) != Ordering::Less
    }

    /// Euclidean projection onto the interval.
    pub fn project(&self, x: f64) -> f64 {
        let mut p = x;
        if let ExtReal::Finite(lo) = self.lo {
            p = p.max(lo);
        }
        if let ExtReal::Finite(hi) = self.hi {
            p = p.min(hi);
        }
        p
    }

    pub fn distance(&self, x: f64) -> f64 {
        (self.project(x) - x).abs()
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = max_ext(self.lo, other.lo);
        let hi = min_ext(self.hi, other.hi);
        match (lo, hi) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) if a > b => None,
            (ExtReal::PosInf, _) | (_, ExtReal::NegInf) => None,
            _ => Some(Interval { lo, hi }),
        }
    }
}

fn max_ext(a: ExtReal, b: ExtReal) -> ExtReal {
    match (a, b) {
        (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
        (ExtReal::NegInf, x) | (x, ExtReal::NegInf) => x,
        (ExtReal::Finite(x), ExtReal::Finite(y)) => ExtReal::Finite(x.max(y)),
    }
}

fn min_ext(a: ExtReal, b: ExtReal) -> ExtReal {
    match (a, b) {
        (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
        (ExtReal::PosInf, x) | (x, ExtReal::PosInf) => x,
        (ExtReal::Finite(x), ExtReal::Finite(y)) => ExtReal::Finite(x.min(y)),
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo.is_finite() { '[' } else { '(' };
        let close = if self.hi.is_finite() { ']' } else { ')' };
        write!(f, "{open}{}, {}{close}", self.lo, self.hi)
    }
}
