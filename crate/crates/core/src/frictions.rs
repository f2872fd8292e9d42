//! Margin payment functions, portfolio constraint sets, and the convex
//! conjugate `sup_{pi in K} [g(pi) - pi * zeta]` with its effective domain.
//!
//! Every supported margin function is concave and piecewise linear with
//! `g(0) = 0`, so the conjugate is evaluated exactly: the supremum of a
//! concave piecewise-linear function over an interval is attained at a
//! breakpoint or at an end of the interval, and it is infinite exactly when
//! an unbounded end of `K` has a slope pointing uphill.

use std::fmt;

use crate::error::{Error, Result};
use crate::extended::{ExtReal, Interval};

/// Closed convex portfolio constraint set `K = [a, b]` with `0 in K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet(Interval);

impl ConstraintSet {
    pub fn new(lo: ExtReal, hi: ExtReal) -> Result<Self> {
        if lo == ExtReal::PosInf || hi == ExtReal::NegInf {
            return Err(Error::InvalidParameter(format!(
                "constraint set [{lo}, {hi}] is empty"
            )));
        }
        if lo.cmp_f64(0.0).is_gt() || hi.cmp_f64(0.0).is_lt() {
            return Err(Error::InvalidParameter(format!(
                "constraint set [{lo}, {hi}] must contain 0"
            )));
        }
        if let (Some(a), Some(b)) = (lo.finite(), hi.finite()) {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidParameter("NaN constraint bound".into()));
            }
        }
        Ok(ConstraintSet(Interval::new(lo, hi)))
    }

    /// `[lo, hi]` with `None` meaning unbounded on that side.
    pub fn from_bounds(lo: Option<f64>, hi: Option<f64>) -> Result<Self> {
        let lo = lo.map_or(ExtReal::NegInf, ExtReal::Finite);
        let hi = hi.map_or(ExtReal::PosInf, ExtReal::Finite);
        Self::new(lo, hi)
    }

    /// `[0, +inf)`: short selling prohibited.
    pub fn long_only() -> Self {
        ConstraintSet(Interval::new(ExtReal::Finite(0.0), ExtReal::PosInf))
    }

    /// `(-inf, 1]`: borrowing from the money account prohibited.
    pub fn no_borrowing() -> Self {
        ConstraintSet(Interval::new(ExtReal::NegInf, ExtReal::Finite(1.0)))
    }

    pub fn unconstrained() -> Self {
        ConstraintSet(Interval::real_line())
    }

    pub fn interval(&self) -> Interval {
        self.0
    }

    pub fn lo(&self) -> ExtReal {
        self.0.lo
    }

    pub fn hi(&self) -> ExtReal {
        self.0.hi
    }

    pub fn contains(&self, pi: f64) -> bool {
        self.0.contains(pi)
    }
}

impl fmt::Display for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Margin payment function `g(pi)` of one regime. Rates are absolute; the
/// lending rate `r` of the regime is passed at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginModel {
    Frictionless,
    /// `g(pi) = -(R - r)(pi - 1)^+`.
    DifferentialRates { borrow_rate: f64 },
    /// `g(pi) = (r - r_L) pi^-`.
    ShortRebate { loan_fee: f64 },
    /// Continuous, concave, `g(0) = 0`, slope `slopes[j]` between
    /// `breakpoints[j - 1]` and `breakpoints[j]`.
    PiecewiseLinearConcave {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

/// Breakpoints and slopes of a concave piecewise-linear function through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Pieces {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl Pieces {
    pub fn eval(&self, pi: f64) -> f64 {
        let n = self.slopes.len();
        let bound = |j: isize| -> f64 {
            if j < 0 {
                f64::NEG_INFINITY
            } else if j as usize >= self.breakpoints.len() {
                f64::INFINITY
            } else {
                self.breakpoints[j as usize]
            }
        };
        let (from, to, sign) = if pi >= 0.0 {
            (0.0, pi, 1.0)
        } else {
            (pi, 0.0, -1.0)
        };
        let mut acc = 0.0;
        for j in 0..n {
            let a = bound(j as isize - 1).max(from);
            let b = bound(j as isize).min(to);
            if b > a {
                acc += self.slopes[j] * (b - a);
            }
        }
        sign * acc
    }

    /// Slope on `(pi, pi + dt)`.
    pub fn right_slope(&self, pi: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|b| *b <= pi)]
    }

    /// Slope on `(pi - dt, pi)`.
    pub fn left_slope(&self, pi: f64) -> f64 {
        self.slopes[self.breakpoints.partition_point(|b| *b < pi)]
    }

    fn first_slope(&self) -> f64 {
        self.slopes[0]
    }

    fn last_slope(&self) -> f64 {
        *self.slopes.last().expect("at least one slope")
    }
}

impl MarginModel {
    pub fn validate(&self, lending_rate: f64) -> Result<()> {
        match self {
            MarginModel::Frictionless => Ok(()),
            MarginModel::DifferentialRates { borrow_rate } => {
                if !borrow_rate.is_finite() || *borrow_rate < lending_rate {
                    Err(Error::InvalidParameter(format!(
                        "borrowing rate {borrow_rate} must be finite and at least the lending rate {lending_rate}"
                    )))
                } else {
                    Ok(())
                }
            }
            MarginModel::ShortRebate { loan_fee } => {
                if !loan_fee.is_finite() || *loan_fee < lending_rate {
                    Err(Error::InvalidParameter(format!(
                        "stock loan fee {loan_fee} must be finite and at least the lending rate {lending_rate}"
                    )))
                } else {
                    Ok(())
                }
            }
            MarginModel::PiecewiseLinearConcave {
                breakpoints,
                slopes,
            } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        slopes.len()
                    )));
                }
                if breakpoints.iter().chain(slopes).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "breakpoints and slopes must be finite".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                if slopes.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidParameter(
                        "slopes must be nonincreasing for a concave margin function".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarginModel::Frictionless => "frictionless",
            MarginModel::DifferentialRates { .. } => "differential_rates",
            MarginModel::ShortRebate { .. } => "short_rebate",
            MarginModel::PiecewiseLinearConcave { .. } => "piecewise_linear_concave",
        }
    }

    pub fn pieces(&self, lending_rate: f64) -> Pieces {
        match self {
            MarginModel::Frictionless => Pieces {
                breakpoints: vec![],
                slopes: vec![0.0],
            },
            MarginModel::DifferentialRates { borrow_rate } => Pieces {
                breakpoints: vec![1.0],
                slopes: vec![0.0, -(borrow_rate - lending_rate)],
            },
            MarginModel::ShortRebate { loan_fee } => Pieces {
                breakpoints: vec![0.0],
                slopes: vec![loan_fee - lending_rate, 0.0],
            },
            MarginModel::PiecewiseLinearConcave {
                breakpoints,
                slopes,
            } => Pieces {
                breakpoints: breakpoints.clone(),
                slopes: slopes.clone(),
            },
        }
    }

    /// Margin payment `g(pi)`.
    pub fn g(&self, lending_rate: f64, pi: f64) -> f64 {
        match self {
            MarginModel::Frictionless => 0.0,
            MarginModel::DifferentialRates { borrow_rate } => {
                -(borrow_rate - lending_rate) * (pi - 1.0).max(0.0)
            }
            MarginModel::ShortRebate { loan_fee } => (lending_rate - loan_fee) * (-pi).max(0.0),
            MarginModel::PiecewiseLinearConcave { .. } => self.pieces(lending_rate).eval(pi),
        }
    }
}

/// Free-function form of [`MarginModel::g`].
pub fn margin_g(model: &MarginModel, lending_rate: f64, pi: f64) -> f64 {
    model.g(lending_rate, pi)
}

/// `sup_{pi in K} [g(pi) - pi * zeta]`, `+inf` outside the effective domain.
pub fn conjugate_gk(
    model: &MarginModel,
    lending_rate: f64,
    k: &ConstraintSet,
    zeta: f64,
) -> ExtReal {
    if zeta.is_nan() {
        return ExtReal::PosInf;
    }
    match model {
        MarginModel::DifferentialRates { borrow_rate } if *k == ConstraintSet::long_only() => {
            let spread = borrow_rate - lending_rate;
            if zeta >= 0.0 {
                ExtReal::Finite(0.0)
            } else if zeta >= -spread {
                ExtReal::Finite(-zeta)
            } else {
                ExtReal::PosInf
            }
        }
        MarginModel::ShortRebate { loan_fee } if *k == ConstraintSet::no_borrowing() => {
            let spread = loan_fee - lending_rate;
            if zeta <= 0.0 {
                ExtReal::Finite(-zeta)
            } else if zeta <= spread {
                ExtReal::Finite(0.0)
            } else {
                ExtReal::PosInf
            }
        }
        _ => conjugate_piecewise(&model.pieces(lending_rate), k, zeta),
    }
}

/// Conjugate by breakpoint enumeration; valid for any concave piecewise-linear `g`.
pub fn conjugate_piecewise(pieces: &Pieces, k: &ConstraintSet, zeta: f64) -> ExtReal {
    if k.hi() == ExtReal::PosInf && pieces.last_slope() - zeta > 0.0 {
        return ExtReal::PosInf;
    }
    if k.lo() == ExtReal::NegInf && pieces.first_slope() - zeta < 0.0 {
        return ExtReal::PosInf;
    }
    let mut best = 0.0_f64; // pi = 0 is always admissible
    let mut consider = |pi: f64| {
        let v = pieces.eval(pi) - pi * zeta;
        if v > best {
            best = v;
        }
    };
    if let Some(a) = k.lo().finite() {
        consider(a);
    }
    if let Some(b) = k.hi().finite() {
        consider(b);
    }
    for &b in &pieces.breakpoints {
        if k.contains(b) {
            consider(b);
        }
    }
    ExtReal::Finite(best)
}

/// `{zeta : conjugate < inf}` as a closed interval.
pub fn effective_domain(model: &MarginModel, lending_rate: f64, k: &ConstraintSet) -> Interval {
    let pieces = model.pieces(lending_rate);
    let lo = if k.hi() == ExtReal::PosInf {
        ExtReal::Finite(pieces.last_slope())
    } else {
        ExtReal::NegInf
    };
    let hi = if k.lo() == ExtReal::NegInf {
        ExtReal::Finite(pieces.first_slope())
    } else {
        ExtReal::PosInf
    };
    Interval::new(lo, hi)
}

/// Superdifferential of `g - indicator_K` at `pi` as `[lower, upper]`,
/// with infinite ends contributed by the normal cone of `K`.
pub fn superdifferential(pieces: &Pieces, k: &ConstraintSet, pi: f64) -> (f64, f64) {
    let mut lower = pieces.right_slope(pi);
    let mut upper = pieces.left_slope(pi);
    if k.hi().finite() == Some(pi) {
        lower = f64::NEG_INFINITY;
    }
    if k.lo().finite() == Some(pi) {
        upper = f64::INFINITY;
    }
    (lower, upper)
}
