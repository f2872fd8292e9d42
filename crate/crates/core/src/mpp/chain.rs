use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::mpp::JumpDistribution;
use crate::rng::{self, Stream};

/// Regime label of the two-state chain.
pub type Regime = usize;

/// Intensity matrix `[[-l0, l0], [l1, -l1]]` of a two-state chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorMatrix {
    lambda0: f64,
    lambda1: f64,
}

impl GeneratorMatrix {
    /// Zero rates are allowed and make the corresponding state absorbing.
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self> {
        for (i, l) in [lambda0, lambda1].into_iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lambda{i} must be finite and nonnegative, got {l}"
                )));
            }
        }
        Ok(GeneratorMatrix { lambda0, lambda1 })
    }

    /// Leaving rate of state `i`.
    pub fn rate(&self, i: Regime) -> f64 {
        if i == 0 {
            self.lambda0
        } else {
            self.lambda1
        }
    }

    /// `(lambda0 + lambda1) / 2`.
    pub fn mean_rate(&self) -> f64 {
        0.5 * (self.lambda0 + self.lambda1)
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[-self.lambda0, self.lambda0], [self.lambda1, -self.lambda1]]
    }

    /// Stationary law `(l1, l0) / (l0 + l1)`.
    pub fn stationary(&self) -> Result<[f64; 2]> {
        let total = self.lambda0 + self.lambda1;
        if total <= 0.0 {
            return Err(Error::DegenerateGenerator);
        }
        Ok([self.lambda1 / total, self.lambda0 / total])
    }

    /// Transition probability `P(eps(s) = j | eps(0) = i)`.
    pub fn transition(&self, i: Regime, j: Regime, s: f64) -> Result<f64> {
        let stat = self.stationary()?;
        let delta = if i == j { 1.0 } else { 0.0 };
        let decay = (-2.0 * self.mean_rate() * s).exp();
        Ok(stat[j] + (delta - stat[j]) * decay)
    }
}

/// A realized path of the two-state chain on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    initial: Regime,
    times: Vec<f64>,
    horizon: f64,
}

impl RegimePath {
    pub fn new(initial: Regime, times: Vec<f64>, horizon: f64) -> Result<Self> {
        if initial > 1 {
            return Err(Error::InvalidParameter(format!(
                "regime must be 0 or 1, got {initial}"
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t <= horizon) {
                return Err(Error::InvalidParameter(format!(
                    "jump times must be strictly increasing in (0, {horizon}], found {t} after {prev}"
                )));
            }
            prev = t;
        }
        Ok(RegimePath {
            initial,
            times,
            horizon,
        })
    }

    pub fn initial(&self) -> Regime {
        self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jump_count(&self) -> usize {
        self.times.len()
    }

    /// State right before the `n`-th jump (0-based).
    pub fn state_before(&self, n: usize) -> Regime {
        self.initial ^ (n & 1)
    }

    /// State on the `k`-th inter-jump segment, i.e. after `k` jumps.
    pub fn state_after(&self, k: usize) -> Regime {
        self.initial ^ (k & 1)
    }

    /// Right-continuous state at time `t`.
    pub fn state_at(&self, t: f64) -> Regime {
        let jumps = self.times.partition_point(|&s| s <= t);
        self.state_after(jumps)
    }

    /// Inter-jump segments `(start, end, state)` covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, Regime)> + '_ {
        let n = self.times.len();
        (0..=n).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.times[k - 1] };
            let end = if k == n { self.horizon } else { self.times[k] };
            (start, end, self.state_after(k))
        })
    }

    /// Time spent in each state on `[0, horizon]`.
    pub fn occupation(&self) -> [f64; 2] {
        let mut occ = [0.0; 2];
        for (a, b, i) in self.segments() {
            occ[i] += b - a;
        }
        occ
    }
}

/// A regime path together with one mark per jump, drawn from the law of the
/// pre-jump state.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPath {
    regime: RegimePath,
    marks: Vec<f64>,
}

impl MarkedPointPath {
    pub fn new(regime: RegimePath, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != regime.jump_count() {
            return Err(Error::InvalidParameter(format!(
                "{} marks for {} jump times",
                marks.len(),
                regime.jump_count()
            )));
        }
        if marks.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter("marks must be finite".into()));
        }
        Ok(MarkedPointPath { regime, marks })
    }

    pub fn regime(&self) -> &RegimePath {
        &self.regime
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn horizon(&self) -> f64 {
        self.regime.horizon
    }

    /// `(time, mark, pre-jump state)` for every jump.
    pub fn events(&self) -> impl Iterator<Item = (f64, f64, Regime)> + '_ {
        self.regime
            .times
            .iter()
            .zip(&self.marks)
            .enumerate()
            .map(|(n, (&t, &y))| (t, y, self.regime.state_before(n)))
    }
}

/// Simulates the chain on `[0, horizon]` from the chain stream of `(seed, path 0)`.
pub fn simulate_regime_chain(
    q: &GeneratorMatrix,
    initial: Regime,
    horizon: f64,
    seed: u64,
) -> Result<RegimePath> {
    let mut rng = rng::stream(seed, 0, Stream::Chain);
    simulate_regime_chain_with(q, initial, horizon, &mut rng)
}

/// Simulates the chain with holding times `Exp(lambda_i)` in state `i`.
pub fn simulate_regime_chain_with<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    initial: Regime,
    horizon: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if initial > 1 {
        return Err(Error::InvalidParameter(format!(
            "regime must be 0 or 1, got {initial}"
        )));
    }
    let mut times = Vec::new();
    let mut state = initial;
    let mut t = 0.0;
    loop {
        let rate = q.rate(state);
        if rate == 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > horizon {
            break;
        }
        times.push(t);
        state ^= 1;
    }
    Ok(RegimePath {
        initial,
        times,
        horizon,
    })
}

/// Draws one mark per jump from the marks stream of `(seed, path 0)`.
pub fn simulate_marks(
    path: RegimePath,
    dists: &[JumpDistribution; 2],
    seed: u64,
) -> Result<MarkedPointPath> {
    let mut rng = rng::stream(seed, 0, Stream::Marks);
    simulate_marks_with(path, dists, &mut rng)
}

pub fn simulate_marks_with<R: Rng + ?Sized>(
    path: RegimePath,
    dists: &[JumpDistribution; 2],
    rng: &mut R,
) -> Result<MarkedPointPath> {
    let marks = (0..path.jump_count())
        .map(|n| dists[path.state_before(n)].sample(rng))
        .collect();
    MarkedPointPath::new(path, marks)
}

/// Simulates path number `index` of a Monte Carlo run with base `seed`.
pub fn simulate_path(
    q: &GeneratorMatrix,
    dists: &[JumpDistribution; 2],
    initial: Regime,
    horizon: f64,
    seed: u64,
    index: u64,
) -> Result<MarkedPointPath> {
    let mut chain = rng::stream(seed, index, Stream::Chain);
    let mut marks = rng::stream(seed, index, Stream::Marks);
    let regime = simulate_regime_chain_with(q, initial, horizon, &mut chain)?;
    simulate_marks_with(regime, dists, &mut marks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_state_never_jumps() {
        let q = GeneratorMatrix::new(0.0, 3.0).unwrap();
        let p = simulate_regime_chain(&q, 0, 1.0, 11).unwrap();
        assert_eq!(p.jump_count(), 0);
        assert_eq!(p.state_at(0.7), 0);
    }

    #[test]
    fn nonpositive_horizon_is_rejected() {
        let q = GeneratorMatrix::new(1.0, 1.0).unwrap();
        assert!(simulate_regime_chain(&q, 0, 0.0, 1).is_err());
        assert!(simulate_regime_chain(&q, 0, -2.0, 1).is_err());
        assert!(GeneratorMatrix::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn seeds_determine_paths() {
        let q = GeneratorMatrix::new(1.0, 2.0).unwrap();
        let a = simulate_regime_chain(&q, 1, 5.0, 42).unwrap();
        let b = simulate_regime_chain(&q, 1, 5.0, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn states_alternate_and_segments_cover_horizon() {
        let p = RegimePath::new(1, vec![0.2, 0.5, 0.9], 1.0).unwrap();
        assert_eq!(p.state_at(0.0), 1);
        assert_eq!(p.state_at(0.2), 0);
        assert_eq!(p.state_at(0.6), 1);
        assert_eq!(p.state_before(0), 1);
        assert_eq!(p.state_before(1), 0);
        let segs: Vec<_> = p.segments().collect();
        assert_eq!(segs.len(), 4);
        assert_eq!(segs[3], (0.9, 1.0, 0));
        let occ = p.occupation();
        assert!((occ[0] + occ[1] - 1.0).abs() < 1e-15);
        assert!(RegimePath::new(0, vec![0.5, 0.5], 1.0).is_err());
        assert!(RegimePath::new(0, vec![1.5], 1.0).is_err());
    }

    #[test]
    fn marks_use_pre_jump_state() {
        let dists = [
            JumpDistribution::degenerate(0.1).unwrap(),
            JumpDistribution::degenerate(-0.3).unwrap(),
        ];
        let p = RegimePath::new(0, vec![0.1, 0.2, 0.3], 1.0).unwrap();
        let m = simulate_marks(p, &dists, 5).unwrap();
        assert_eq!(m.marks(), &[0.1, -0.3, 0.1]);
        let empty = RegimePath::new(0, vec![], 1.0).unwrap();
        assert!(simulate_marks(empty, &dists, 5).unwrap().marks().is_empty());
    }

    #[test]
    fn transition_probabilities_are_stochastic() {
        let q = GeneratorMatrix::new(0.7, 1.9).unwrap();
        for s in [0.0, 0.3, 4.0] {
            for i in 0..2 {
                let total = q.transition(i, 0, s).unwrap() + q.transition(i, 1, s).unwrap();
                assert!((total - 1.0).abs() < 1e-15);
            }
        }
        assert_eq!(q.transition(0, 0, 0.0).unwrap(), 1.0);
        assert!(GeneratorMatrix::new(0.0, 0.0).unwrap().stationary().is_err());
    }
}
