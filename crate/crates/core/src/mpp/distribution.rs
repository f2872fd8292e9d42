use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::quadrature::{self, QuadResult, DEFAULT_TOLERANCE};

/// Law of a single mark `Y`.
///
/// `ExponentialNegative { rate }` is the law of `-Z` with `Z ~ Exp(rate)`,
/// i.e. density `rate * exp(rate * y)` on `y <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpDistribution {
    ExponentialPositive { rate: f64 },
    ExponentialNegative { rate: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
    Tabulated(Tabulated),
}

/// A density sampled on a grid and integrated by the trapezoid rule on that
/// same grid. The trapezoid weights are the atoms of the law: expectations
/// and sampling both use them, so nothing is re-interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    points: Vec<f64>,
    density: Vec<f64>,
    masses: Vec<f64>,
    cdf: Vec<f64>,
}

const TABULATED_NORMALIZATION: f64 = 1e-9;

impl Tabulated {
    pub fn new(points: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != density.len() {
            return Err(Error::InvalidParameter(format!(
                "tabulated law needs at least two (y, density) pairs of equal length, got {} and {}",
                points.len(),
                density.len()
            )));
        }
        if points.iter().chain(&density).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated law contains a non-finite value".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        if let Some(d) = density.iter().find(|d| **d < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tabulated density must be nonnegative, found {d}"
            )));
        }
        let n = points.len();
        let mut masses = vec![0.0; n];
        for k in 0..n - 1 {
            let half = 0.5 * (points[k + 1] - points[k]);
            masses[k] += half * density[k];
            masses[k + 1] += half * density[k + 1];
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > TABULATED_NORMALIZATION {
            return Err(Error::InvalidParameter(format!(
                "tabulated density integrates to {total} by the trapezoid rule, expected 1"
            )));
        }
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cdf.push(acc);
        }
        Ok(Tabulated {
            points,
            density,
            masses,
            cdf,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Trapezoid weights attached to each grid point.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.masses.iter().copied())
            .filter(|(_, m)| *m > 0.0)
    }
}

/// Support `[lo, hi]` of a mark law. Finite ends are attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: ExtReal,
    pub hi: ExtReal,
}

impl JumpDistribution {
    pub fn exponential_positive(rate: f64) -> Result<Self> {
        let d = JumpDistribution::ExponentialPositive { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential_negative(rate: f64) -> Result<Self> {
        let d = JumpDistribution::ExponentialNegative { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn two_point(low: f64, high: f64, p_high: f64) -> Result<Self> {
        let d = JumpDistribution::TwoPoint { low, high, p_high };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `y`.
    pub fn degenerate(y: f64) -> Result<Self> {
        Self::two_point(y, y, 1.0)
    }

    pub fn tabulated(points: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        Ok(JumpDistribution::Tabulated(Tabulated::new(points, density)?))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpDistribution::ExponentialPositive { rate }
            | JumpDistribution::ExponentialNegative { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential rate must be positive and finite, got {rate}"
                    )));
                }
            }
            JumpDistribution::TwoPoint { low, high, p_high } => {
                if !(low.is_finite() && high.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "two-point marks must be finite".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&p_high) {
                    return Err(Error::InvalidParameter(format!(
                        "two-point probability must lie in [0, 1], got {p_high}"
                    )));
                }
                if low > high {
                    return Err(Error::InvalidParameter(format!(
                        "two-point marks out of order: {low} > {high}"
                    )));
                }
            }
            JumpDistribution::Tabulated(_) => {}
        }
        Ok(())
    }

    pub fn support(&self) -> Support {
        match *self {
            JumpDistribution::ExponentialPositive { .. } => Support {
                lo: ExtReal::Finite(0.0),
                hi: ExtReal::PosInf,
            },
            JumpDistribution::ExponentialNegative { .. } => Support {
                lo: ExtReal::NegInf,
                hi: ExtReal::Finite(0.0),
            },
            JumpDistribution::TwoPoint { low, high, p_high } => {
                let lo = if p_high < 1.0 { low } else { high };
                let hi = if p_high > 0.0 { high } else { low };
                Support {
                    lo: ExtReal::Finite(lo),
                    hi: ExtReal::Finite(hi),
                }
            }
            JumpDistribution::Tabulated(ref t) => {
                let mut atoms = t.atoms().map(|(y, _)| y);
                let first = atoms.next().unwrap_or(t.points[0]);
                let last = atoms.last().unwrap_or(first);
                Support {
                    lo: ExtReal::Finite(first),
                    hi: ExtReal::Finite(last),
                }
            }
        }
    }

    /// Decay rate of the density as `y -> +inf`, when the support is unbounded above.
    pub fn upper_tail_rate(&self) -> Option<f64> {
        match *self {
            JumpDistribution::ExponentialPositive { rate } => Some(rate),
            _ => None,
        }
    }

    /// Decay rate of the density as `y -> -inf`, when the support is unbounded below.
    pub fn lower_tail_rate(&self) -> Option<f64> {
        match *self {
            JumpDistribution::ExponentialNegative { rate } => Some(rate),
            _ => None,
        }
    }

    /// Open interval of `s` on which `E[exp(sY)]` is finite.
    pub fn mgf_domain(&self) -> (ExtReal, ExtReal) {
        let lo = self
            .lower_tail_rate()
            .map_or(ExtReal::NegInf, |r| ExtReal::Finite(-r));
        let hi = self
            .upper_tail_rate()
            .map_or(ExtReal::PosInf, ExtReal::Finite);
        (lo, hi)
    }

    pub fn in_mgf_domain(&self, s: f64) -> bool {
        let (lo, hi) = self.mgf_domain();
        s.is_finite() && lo.cmp_f64(s).is_lt() && hi.cmp_f64(s).is_gt()
    }

    /// Moment generating function `E[exp(sY)]`.
    pub fn mgf(&self, s: f64) -> Result<f64> {
        if !self.in_mgf_domain(s) {
            let (lo, hi) = self.mgf_domain();
            return Err(Error::MgfDomain {
                s,
                domain: format!("({lo}, {hi})"),
            });
        }
        Ok(match *self {
            JumpDistribution::ExponentialPositive { rate } => rate / (rate - s),
            JumpDistribution::ExponentialNegative { rate } => rate / (rate + s),
            JumpDistribution::TwoPoint { low, high, p_high } => {
                (1.0 - p_high) * (s * low).exp() + p_high * (s * high).exp()
            }
            JumpDistribution::Tabulated(ref t) => {
                t.atoms().map(|(y, m)| m * (s * y).exp()).sum()
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpDistribution::ExponentialPositive { rate } => 1.0 / rate,
            JumpDistribution::ExponentialNegative { rate } => -1.0 / rate,
            JumpDistribution::TwoPoint { low, high, p_high } => {
                (1.0 - p_high) * low + p_high * high
            }
            JumpDistribution::Tabulated(ref t) => t.atoms().map(|(y, m)| m * y).sum(),
        }
    }

    /// `E[phi(Y)]` at the default absolute tolerance.
    pub fn expect<F: Fn(f64) -> f64>(&self, phi: F) -> Result<f64> {
        self.expect_with_tolerance(phi, DEFAULT_TOLERANCE)
            .map(|r| r.value)
    }

    /// `E[phi(Y)]`: adaptive quadrature for the exponential laws, the exact
    /// weighted sum for the atomic ones.
    pub fn expect_with_tolerance<F: Fn(f64) -> f64>(
        &self,
        phi: F,
        tolerance: f64,
    ) -> Result<QuadResult> {
        let exact = |value: f64| {
            if value.is_finite() {
                Ok(QuadResult {
                    value,
                    error: 0.0,
                    panels: 0,
                })
            } else {
                Err(Error::Divergent(format!(
                    "integrand is not finite on the support: {value}"
                )))
            }
        };
        match *self {
            JumpDistribution::ExponentialPositive { rate } => quadrature::integrate_upper(
                |y| weighted(&phi, y, rate * (-rate * y).exp()),
                0.0,
                1.0 / rate,
                tolerance,
            ),
            JumpDistribution::ExponentialNegative { rate } => quadrature::integrate_upper(
                |z| weighted(&phi, -z, rate * (-rate * z).exp()),
                0.0,
                1.0 / rate,
                tolerance,
            ),
            JumpDistribution::TwoPoint { low, high, p_high } => {
                let mut v = 0.0;
                if p_high < 1.0 {
                    v += (1.0 - p_high) * phi(low);
                }
                if p_high > 0.0 {
                    v += p_high * phi(high);
                }
                exact(v)
            }
            JumpDistribution::Tabulated(ref t) => exact(t.atoms().map(|(y, m)| m * phi(y)).sum()),
        }
    }

    /// `E[phi(Y)]` for `phi` given as `(sign, ln |phi|)`. The density is
    /// folded into the exponent so that integrands growing almost as fast
    /// as the density decays stay finite.
    pub fn expect_signed_log<F: Fn(f64) -> (f64, f64)>(&self, phi: F, tolerance: f64) -> Result<QuadResult> {
        let term = |y: f64, log_density: f64| {
            let (sign, log_abs) = phi(y);
            if sign == 0.0 || log_abs == f64::NEG_INFINITY {
                0.0
            } else {
                sign * (log_abs + log_density).exp()
            }
        };
        match *self {
            JumpDistribution::ExponentialPositive { rate } => {
                quadrature::integrate_upper(|y| term(y, rate.ln() - rate * y), 0.0, 1.0 / rate, tolerance)
            }
            JumpDistribution::ExponentialNegative { rate } => {
                quadrature::integrate_upper(|z| term(-z, rate.ln() - rate * z), 0.0, 1.0 / rate, tolerance)
            }
            _ => self.expect_with_tolerance(
                |y| {
                    let (sign, log_abs) = phi(y);
                    if sign == 0.0 {
                        0.0
                    } else {
                        sign * log_abs.exp()
                    }
                },
                tolerance,
            ),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDistribution::ExponentialPositive { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng)
            }
            JumpDistribution::ExponentialNegative { rate } => {
                -Exp::new(rate).expect("validated rate").sample(rng)
            }
            JumpDistribution::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
            JumpDistribution::Tabulated(ref t) => {
                let total = *t.cdf.last().expect("nonempty grid");
                let u = rng.random::<f64>() * total;
                let k = t.cdf.partition_point(|c| *c <= u).min(t.points.len() - 1);
                t.points[k]
            }
        }
    }
}

// The density factor is evaluated first so that far-tail nodes, where it
// underflows, never evaluate a possibly overflowing integrand.
fn weighted<F: Fn(f64) -> f64>(phi: &F, y: f64, density: f64) -> f64 {
    if density == 0.0 {
        0.0
    } else {
        phi(y) * density
    }
}

impl fmt::Display for JumpDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpDistribution::ExponentialPositive { rate } => write!(f, "Exp+({rate})"),
            JumpDistribution::ExponentialNegative { rate } => write!(f, "Exp-({rate})"),
            JumpDistribution::TwoPoint { low, high, p_high } => {
                write!(f, "TwoPoint({low} w.p. {}, {high} w.p. {p_high})", 1.0 - p_high)
            }
            JumpDistribution::Tabulated(t) => write!(f, "Tabulated({} points)", t.points.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all() -> Vec<JumpDistribution> {
        vec![
            JumpDistribution::exponential_positive(10.0).unwrap(),
            JumpDistribution::exponential_negative(10.0).unwrap(),
            JumpDistribution::two_point(-0.2, 0.3, 0.4).unwrap(),
            JumpDistribution::tabulated(vec![-0.1, 0.0, 0.1], vec![0.0, 10.0, 0.0]).unwrap(),
        ]
    }

    #[test]
    fn mgf_at_zero_is_one() {
        for d in all() {
            assert!((d.mgf(0.0).unwrap() - 1.0).abs() < 1e-12, "{d}");
            assert!((d.expect(|_| 1.0).unwrap() - 1.0).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn closed_form_mgf_values() {
        let pos = JumpDistribution::exponential_positive(10.0).unwrap();
        let neg = JumpDistribution::exponential_negative(10.0).unwrap();
        assert!((pos.mgf(1.0).unwrap() - 10.0 / 9.0).abs() < 1e-15);
        assert!((neg.mgf(1.0).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        // quadrature cross-check
        let q = pos.expect(|y| y.exp()).unwrap();
        assert!((q - 10.0 / 9.0).abs() < 1e-10);
        let q = pos.expect(|y| y.exp_m1()).unwrap();
        assert!((q - 1.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn mgf_domain_is_enforced() {
        let pos = JumpDistribution::exponential_positive(10.0).unwrap();
        assert!(matches!(pos.mgf(10.0), Err(Error::MgfDomain { .. })));
        assert!(pos.mgf(-1e6).is_ok());
        let neg = JumpDistribution::exponential_negative(10.0).unwrap();
        assert!(matches!(neg.mgf(-10.5), Err(Error::MgfDomain { .. })));
        assert!(neg.mgf(1e3).is_ok());
    }

    #[test]
    fn supports() {
        let neg = JumpDistribution::exponential_negative(3.0).unwrap();
        assert_eq!(neg.support().hi, ExtReal::Finite(0.0));
        assert_eq!(neg.support().lo, ExtReal::NegInf);
        let point = JumpDistribution::degenerate(0.1).unwrap();
        assert_eq!(point.support().lo, ExtReal::Finite(0.1));
        assert_eq!(point.support().hi, ExtReal::Finite(0.1));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(JumpDistribution::exponential_positive(0.0).is_err());
        assert!(JumpDistribution::exponential_negative(f64::NAN).is_err());
        assert!(JumpDistribution::two_point(0.0, 1.0, 1.5).is_err());
        assert!(JumpDistribution::tabulated(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(JumpDistribution::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(JumpDistribution::tabulated(vec![0.0, 1.0], vec![-1.0, 3.0]).is_err());
    }

    #[test]
    fn tabulated_samples_from_trapezoid_atoms() {
        let d = JumpDistribution::tabulated(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 0.5);
        }
        assert_eq!(d.support().lo, ExtReal::Finite(0.5));
    }

    #[test]
    fn degenerate_sampling() {
        let d = JumpDistribution::degenerate(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..50).all(|_| d.sample(&mut rng) == 0.1));
    }
}
