use crate::error::{Error, Result};

/// A right-continuous, piecewise-linear function `L` on `[0, horizon]`.
///
/// Piece `k` covers `[knots[k], knots[k + 1])` and starts at `level[k]`
/// (the value right after any jump at `knots[k]`) with slope `slope[k]`.
/// The last piece ends at the horizon. Processes are stored as `exp(L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPath {
    knots: Vec<f64>,
    level: Vec<f64>,
    slope: Vec<f64>,
    horizon: f64,
}

impl LogPath {
    /// A linear function `level + slope * t`.
    pub fn linear(level: f64, slope: f64, horizon: f64) -> Self {
        LogPath {
            knots: vec![0.0],
            level: vec![level],
            slope: vec![slope],
            horizon,
        }
    }

    /// Builds the path from `L(0) = start`, knots in `(0, horizon]` with the
    /// jump of `L` at each knot, and the slope on each piece.
    ///
    /// `knots` must be strictly increasing; `slopes.len() == knots.len() + 1`.
    pub fn from_pieces(
        start: f64,
        knots: &[f64],
        jumps: &[f64],
        slopes: &[f64],
        horizon: f64,
    ) -> Result<Self> {
        if jumps.len() != knots.len() || slopes.len() != knots.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} knots need {} jumps and {} slopes, got {} and {}",
                knots.len(),
                knots.len(),
                knots.len() + 1,
                jumps.len(),
                slopes.len()
            )));
        }
        let mut all_knots = Vec::with_capacity(knots.len() + 1);
        let mut level = Vec::with_capacity(knots.len() + 1);
        all_knots.push(0.0);
        level.push(start);
        let mut prev = 0.0;
        let mut value = start;
        for (k, (&t, &jump)) in knots.iter().zip(jumps).enumerate() {
            if !(t > prev && t <= horizon) {
                return Err(Error::InvalidParameter(format!(
                    "knots must be strictly increasing in (0, {horizon}], found {t} after {prev}"
                )));
            }
            value += slopes[k] * (t - prev) + jump;
            all_knots.push(t);
            level.push(value);
            prev = t;
        }
        Ok(LogPath {
            knots: all_knots,
            level,
            slope: slopes.to_vec(),
            horizon,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Knot times, starting with 0.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn piece_end(&self, k: usize) -> f64 {
        self.knots.get(k + 1).copied().unwrap_or(self.horizon)
    }

    /// `L(t)`, right-continuous.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s <= t).max(1) - 1;
        self.level[k] + self.slope[k] * (t - self.knots[k])
    }

    /// `L(t-)`; equals `L(0)` at `t = 0`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s < t).max(1) - 1;
        self.level[k] + self.slope[k] * (t - self.knots[k])
    }

    pub fn terminal(&self) -> f64 {
        self.value(self.horizon)
    }

    /// Iterates `(start, end, level at start, slope)` over pieces clipped to `[0, t]`.
    fn pieces_until(&self, t: f64) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.knots.len()).filter_map(move |k| {
            let a = self.knots[k];
            let b = self.piece_end(k).min(t);
            (b > a).then_some((a, b, self.level[k], self.slope[k]))
        })
    }

    /// `int_0^t L(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.pieces_until(t)
            .map(|(a, b, l, s)| {
                let d = b - a;
                d * (l + 0.5 * s * d)
            })
            .sum()
    }

    /// `int_0^t exp(alpha L(s)) ds`, exact on every piece.
    pub fn integral_exp(&self, alpha: f64, t: f64) -> f64 {
        self.pieces_until(t)
            .map(|(a, b, l, s)| exp_segment(alpha * l, alpha * s, b - a))
            .sum()
    }

    /// `int_0^t exp(alpha L(s)) * w(s) ds` for a piecewise weight: `weight(k)`
    /// is constant on piece `k`. Used for integrals against regime-dependent rates.
    pub fn integral_exp_weighted<W: Fn(usize) -> f64>(&self, alpha: f64, t: f64, weight: W) -> f64 {
        (0..self.knots.len())
            .filter_map(|k| {
                let a = self.knots[k];
                let b = self.piece_end(k).min(t);
                (b > a).then(|| weight(k) * exp_segment(alpha * self.level[k], alpha * self.slope[k], b - a))
            })
            .sum()
    }

    /// Pointwise `a * self + b * other`; knots are merged.
    pub fn combine(&self, a: f64, other: &LogPath, b: f64) -> LogPath {
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut level = Vec::with_capacity(knots.len());
        let mut slope = Vec::with_capacity(knots.len());
        for &t in &knots {
            level.push(a * self.value(t) + b * other.value(t));
            let ks = self.knots.partition_point(|&s| s <= t) - 1;
            let ko = other.knots.partition_point(|&s| s <= t) - 1;
            slope.push(a * self.slope[ks] + b * other.slope[ko]);
        }
        LogPath {
            knots,
            level,
            slope,
            horizon: self.horizon.min(other.horizon),
        }
    }

    /// Slope of the piece containing `t` (right-continuous).
    pub fn slope_at(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s <= t).max(1) - 1;
        self.slope[k]
    }
}

/// `int_0^d exp(c + s u) du`.
fn exp_segment(c: f64, s: f64, d: f64) -> f64 {
    let x = s * d;
    if x.abs() < 1e-300 {
        c.exp() * d
    } else {
        c.exp() * x.exp_m1() / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LogPath {
        LogPath::from_pieces(0.5, &[0.25, 0.75], &[0.1, -0.3], &[1.0, -2.0, 0.5], 1.0).unwrap()
    }

    #[test]
    fn values_and_left_limits() {
        let p = sample();
        assert_eq!(p.value(0.0), 0.5);
        assert!((p.left_limit(0.25) - 0.75).abs() < 1e-15);
        assert!((p.value(0.25) - 0.85).abs() < 1e-15);
        assert!((p.value(0.5) - 0.35).abs() < 1e-15);
        assert!((p.left_limit(0.75) + 0.15).abs() < 1e-15);
        assert!((p.terminal() - (-0.45 + 0.125)).abs() < 1e-15);
        assert_eq!(p.slope_at(0.8), 0.5);
    }

    #[test]
    fn integrals_match_quadrature() {
        let p = sample();
        let q = crate::quadrature::integrate(|t| p.value(t), 0.0, 0.6, 1e-13);
        // the integrand has a kink, so compare with a tolerance that allows for it
        assert!((p.integral(0.6) - q.unwrap().value).abs() < 1e-9);
        for alpha in [-1.5, 0.0, 0.5, 2.0] {
            let mut exact = 0.0;
            let n = 200_000;
            let h = 1.0 / n as f64;
            for i in 0..n {
                exact += (alpha * p.value((i as f64 + 0.5) * h)).exp() * h;
            }
            assert!((p.integral_exp(alpha, 1.0) - exact).abs() < 1e-8, "alpha {alpha}");
        }
    }

    #[test]
    fn combination_is_pointwise() {
        let p = sample();
        let q = LogPath::from_pieces(0.0, &[0.5], &[0.2], &[0.3, 0.1], 1.0).unwrap();
        let c = p.combine(1.0, &q, -2.0);
        for t in [0.0, 0.1, 0.25, 0.5, 0.6, 0.75, 0.99, 1.0] {
            assert!((c.value(t) - (p.value(t) - 2.0 * q.value(t))).abs() < 1e-14, "{t}");
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(LogPath::from_pieces(0.0, &[0.5, 0.5], &[0.0, 0.0], &[0.0; 3], 1.0).is_err());
        assert!(LogPath::from_pieces(0.0, &[0.5], &[0.0], &[0.0], 1.0).is_err());
    }
}
