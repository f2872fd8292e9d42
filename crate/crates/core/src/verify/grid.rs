use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frictions::ConstraintSet;
use crate::market::MarketModel;
use crate::mpp::MarkedPointPath;
use crate::policy::Utility;
use crate::verify::{map_paths, pairwise_sum, McConfig, McEstimate, Scenario};

/// Grid `{n * step : n integer} ∩ [lo, hi]`, intersected with `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Regress the utility samples on zero-mean compensated jump sums.
    pub control_variates: bool,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        GridSpec {
            lo,
            hi,
            step,
            control_variates: true,
        }
    }
}

pub fn grid_points(spec: &GridSpec, k: &ConstraintSet) -> Result<Vec<f64>> {
    if !(spec.step.is_finite() && spec.step > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {}", spec.step)));
    }
    if !(spec.lo.is_finite() && spec.hi.is_finite() && spec.lo <= spec.hi) {
        return Err(Error::InvalidParameter(format!("grid range [{}, {}] is empty", spec.lo, spec.hi)));
    }
    let first = (spec.lo / spec.step - 1e-9).ceil() as i64;
    let last = (spec.hi / spec.step + 1e-9).floor() as i64;
    Ok((first..=last)
        .map(|n| n as f64 * spec.step)
        .filter(|&pi| k.contains(pi))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub pi: f64,
    pub estimate: Option<McEstimate>,
    /// Why the point was not evaluated.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub points: Vec<GridPoint>,
    pub argmax: f64,
    pub best: McEstimate,
    /// Number of control variates used in the regression.
    pub control_variates: usize,
}

/// What a constant-weight objective needs from one path.
struct PathSummary {
    occupation: [f64; 2],
    /// `f(Y_n)`.
    factors: Vec<f64>,
    controls: Vec<f64>,
}

/// Zero-mean functionals of the marked point process:
/// `N_T - int lambda`, `sum (f^k - E f^k)` and
/// `sum f_m^a A^b(tau_m-) - int A^b lambda E f^a` with `A^b(s) = sum_{tau_n < s} f_n^b`.
#[derive(Debug, Clone)]
struct Controls {
    intensity: [f64; 2],
    /// `E_i[f^k]` for `k = 0..=4`.
    moments: [[f64; 5]; 2],
    powers: Vec<u32>,
    cross: Vec<(u32, u32)>,
}

impl Controls {
    fn new(model: &MarketModel) -> Result<Self> {
        let mut moments = [[1.0; 5]; 2];
        let usable = |k: u32| (0..2).all(|i| model.regime(i).has_jump_moment(k));
        let mut powers = Vec::new();
        for k in 1..=3u32 {
            if usable(2 * k) {
                powers.push(k);
            }
        }
        let mut cross = Vec::new();
        for (a, b) in [(1u32, 1u32), (2, 1), (1, 2)] {
            if usable(2 * a) && usable(2 * b) {
                cross.push((a, b));
            }
        }
        for (i, row) in moments.iter_mut().enumerate() {
            let p = model.regime(i);
            for (k, m) in row.iter_mut().enumerate().skip(1) {
                if p.intensity > 0.0 && p.has_jump_moment(k as u32) {
                    *m = p.jump_moment(k as i32)?;
                }
            }
        }
        Ok(Controls {
            intensity: [model.regime(0).intensity, model.regime(1).intensity],
            moments,
            powers,
            cross,
        })
    }

    fn count(&self) -> usize {
        1 + self.powers.len() + self.cross.len()
    }

    fn evaluate(&self, path: &MarkedPointPath, factors: &[f64]) -> Vec<f64> {
        let regime = path.regime();
        let occ = regime.occupation();
        let pre: Vec<usize> = path.events().map(|(_, _, i)| i).collect();
        let mut out = Vec::with_capacity(self.count());
        let expected: f64 = (0..2).map(|i| occ[i] * self.intensity[i]).sum();
        out.push(factors.len() as f64 - expected);
        for &k in &self.powers {
            let s: f64 = factors
                .iter()
                .zip(&pre)
                .map(|(f, &i)| f.powi(k as i32) - self.moments[i][k as usize])
                .sum();
            out.push(s);
        }
        for &(a, b) in &self.cross {
            let mut running = 0.0;
            let mut jumps = 0.0;
            for &f in factors {
                jumps += f.powi(a as i32) * running;
                running += f.powi(b as i32);
            }
            // A^b is constant on each segment between jumps
            let mut compensator = 0.0;
            let mut level = 0.0;
            for (n, (s, t, i)) in regime.segments().enumerate() {
                if n > 0 {
                    level += factors[n - 1].powi(b as i32);
                }
                compensator += level * self.intensity[i] * self.moments[i][a as usize] * (t - s);
            }
            out.push(jumps - compensator);
        }
        out
    }
}

/// Regression-adjusted mean `mean(y) - beta . mean(X)` with `beta` from the
/// centred normal equations.
struct Regression {
    means: Vec<f64>,
    centred: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl Regression {
    fn new(controls: &[Vec<f64>], m: usize) -> Result<Self> {
        let n = controls.len();
        let means: Vec<f64> = (0..m)
            .map(|j| pairwise_sum(&controls.iter().map(|c| c[j]).collect::<Vec<_>>()) / n as f64)
            .collect();
        let centred = DMatrix::from_fn(n, m, |r, j| controls[r][j] - means[j]);
        let gram = centred.tr_mul(&centred);
        let eps = 1e-12 * gram.norm();
        let pinv = gram
            .pseudo_inverse(eps)
            .map_err(|e| Error::InvalidModel(format!("control-variate covariance: {e}")))?;
        Ok(Regression { means, centred, pinv })
    }

    fn adjust(&self, samples: &[f64], seed: u64) -> McEstimate {
        let n = samples.len();
        let m = self.means.len();
        let mean = pairwise_sum(samples) / n as f64;
        let y = DVector::from_iterator(n, samples.iter().map(|v| v - mean));
        let beta = &self.pinv * self.centred.tr_mul(&y);
        let shift: f64 = beta.iter().zip(&self.means).map(|(b, x)| b * x).sum();
        let residuals = &y - &self.centred * &beta;
        let squares: Vec<f64> = residuals.iter().map(|e| e * e).collect();
        let dof = n.saturating_sub(m + 1).max(1) as f64;
        McEstimate {
            mean: mean - shift,
            stderr: (pairwise_sum(&squares) / dof / n as f64).sqrt(),
            paths: n,
            seed,
            ruined: 0,
        }
    }
}

fn summarize(model: &MarketModel, controls: Option<&Controls>, path: &MarkedPointPath) -> PathSummary {
    let factors: Vec<f64> = path
        .events()
        .map(|(_, y, i)| model.regime(i).transform.f(y))
        .collect();
    PathSummary {
        occupation: path.regime().occupation(),
        controls: controls.map(|c| c.evaluate(path, &factors)).unwrap_or_default(),
        factors,
    }
}

/// Reason a constant weight cannot be held, if any.
fn infeasibility(model: &MarketModel, pi: f64) -> Option<String> {
    (0..2).find_map(|i| {
        let p = model.regime(i);
        let range = p.feasible_range();
        (p.intensity > 0.0 && !range.contains(pi))
            .then(|| format!("1 + pi f(y) > 0 requires pi in {range} (regime {i})"))
    })
}

/// Expected utility of terminal wealth (no consumption) for each constant
/// weight on the grid, all evaluated on the same simulated paths.
pub fn grid_search_constant_portfolio(
    scenario: &Scenario,
    utility: Utility,
    grid: &GridSpec,
    mc: McConfig,
) -> Result<GridSearch> {
    utility.validate()?;
    let model = &scenario.model;
    let pis = grid_points(grid, &scenario.constraint)?;
    if pis.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "grid [{}, {}] step {} has no point in K = {}",
            grid.lo, grid.hi, grid.step, scenario.constraint
        )));
    }
    let controls = if grid.control_variates {
        Some(Controls::new(model)?)
    } else {
        None
    };
    let summaries = map_paths(scenario, mc, |path| Ok(summarize(model, controls.as_ref(), path)))?;
    let regression = match &controls {
        Some(c) if summaries.len() > c.count() + 1 => {
            let rows: Vec<Vec<f64>> = summaries.iter().map(|s| s.controls.clone()).collect();
            Some(Regression::new(&rows, c.count())?)
        }
        _ => None,
    };
    let x = scenario.wealth;
    let points: Vec<GridPoint> = pis
        .par_iter()
        .map(|&pi| {
            if let Some(reason) = infeasibility(model, pi) {
                return GridPoint {
                    pi,
                    estimate: None,
                    skipped: Some(reason),
                };
            }
            let slopes = [model.regime(0).wealth_slope(pi), model.regime(1).wealth_slope(pi)];
            let samples: Vec<f64> = summaries
                .iter()
                .map(|s| {
                    let jumps: f64 = s.factors.iter().map(|f| (pi * f).ln_1p()).sum();
                    let log_v = s.occupation[0] * slopes[0] + s.occupation[1] * slopes[1] + jumps;
                    match utility {
                        Utility::Log => x.ln() + log_v,
                        Utility::Power { gamma } => (gamma * (x.ln() + log_v)).exp() / gamma,
                    }
                })
                .collect();
            let estimate = match &regression {
                Some(r) => r.adjust(&samples, mc.seed),
                None => McEstimate::from_samples(&samples, mc.seed),
            };
            GridPoint {
                pi,
                estimate: Some(estimate),
                skipped: None,
            }
        })
        .collect();
    let (argmax, best) = points
        .iter()
        .filter_map(|p| p.estimate.map(|e| (p.pi, e)))
        .fold(None, |acc: Option<(f64, McEstimate)>, (pi, e)| match acc {
            Some((_, b)) if b.mean >= e.mean => acc,
            _ => Some((pi, e)),
        })
        .ok_or_else(|| Error::Infeasible("every grid point is infeasible".into()))?;
    Ok(GridSearch {
        points,
        argmax,
        best,
        control_variates: regression.as_ref().map_or(0, |r| r.means.len()),
    })
}
