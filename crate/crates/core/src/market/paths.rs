use std::fmt;
use std::io;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::{LogPath, MarketModel};
use crate::mpp::{MarkedPointPath, Regime};
use crate::quadrature;

/// Uniform reporting points added to the jump times of a [`WealthPath`].
pub const DEFAULT_REPORT_POINTS: usize = 256;

/// Deterministic portfolio proportion process.
#[derive(Debug, Clone, PartialEq)]
pub enum PortfolioRule {
    /// `pi_t = weights[eps(t-)]`.
    PerRegime([f64; 2]),
    /// Step function of time: `weights[k]` on `[breaks[k - 1], breaks[k])`.
    Schedule { breaks: Vec<f64>, weights: Vec<f64> },
}

impl PortfolioRule {
    pub fn constant(pi: f64) -> Self {
        PortfolioRule::PerRegime([pi, pi])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PortfolioRule::PerRegime(w) => {
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("portfolio weights must be finite".into()));
                }
            }
            PortfolioRule::Schedule { breaks, weights } => {
                if weights.len() != breaks.len() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "{} schedule breaks need {} weights, got {}",
                        breaks.len(),
                        breaks.len() + 1,
                        weights.len()
                    )));
                }
                if breaks.iter().chain(weights).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("schedule must be finite".into()));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.first().is_some_and(|b| *b <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "schedule breaks must be positive and strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Weight in force on `[t, t + dt)` in regime `regime`.
    pub fn weight(&self, t: f64, regime: Regime) -> f64 {
        match self {
            PortfolioRule::PerRegime(w) => w[regime],
            PortfolioRule::Schedule { breaks, weights } => {
                weights[breaks.partition_point(|b| *b <= t)]
            }
        }
    }

    /// Predictable weight `pi_t` used for a jump at `t` from pre-jump regime `regime`.
    pub fn weight_before(&self, t: f64, regime: Regime) -> f64 {
        match self {
            PortfolioRule::PerRegime(w) => w[regime],
            PortfolioRule::Schedule { breaks, weights } => {
                weights[breaks.partition_point(|b| *b < t)]
            }
        }
    }

    fn breaks(&self) -> &[f64] {
        match self {
            PortfolioRule::PerRegime(_) => &[],
            PortfolioRule::Schedule { breaks, .. } => breaks,
        }
    }
}

/// Consumption rate process.
#[derive(Clone)]
pub enum ConsumptionRule {
    None,
    /// `c_t = c`.
    Constant(f64),
    /// `c_t = k V_t^{1,pi,0}`; the log-optimal rule has `k = x / (T + 1)`.
    Proportional(f64),
    /// `c_t = c(t)`, deterministic and nonnegative.
    Deterministic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ConsumptionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConsumptionRule::None => write!(f, "None"),
            ConsumptionRule::Constant(c) => write!(f, "Constant({c})"),
            ConsumptionRule::Proportional(k) => write!(f, "Proportional({k})"),
            ConsumptionRule::Deterministic(_) => write!(f, "Deterministic(..)"),
        }
    }
}

impl ConsumptionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConsumptionRule::Constant(c) | ConsumptionRule::Proportional(c)
                if !(c.is_finite() && c >= 0.0) =>
            {
                Err(Error::InvalidParameter(format!(
                    "consumption rate must be finite and nonnegative, got {c}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `c_t` given the gross wealth log-path.
    pub fn rate(&self, gross: &LogPath, t: f64) -> f64 {
        match self {
            ConsumptionRule::None => 0.0,
            ConsumptionRule::Constant(c) => *c,
            ConsumptionRule::Proportional(k) => k * gross.value(t).exp(),
            ConsumptionRule::Deterministic(c) => c(t),
        }
    }

    /// `int_0^t c_s / V_s^{1,pi,0} ds`.
    pub fn consumed(&self, gross: &LogPath, t: f64) -> Result<f64> {
        Ok(match self {
            ConsumptionRule::None => 0.0,
            ConsumptionRule::Constant(c) => c * gross.integral_exp(-1.0, t),
            ConsumptionRule::Proportional(k) => k * t,
            ConsumptionRule::Deterministic(c) => {
                let knots = gross.knots();
                let mut total = 0.0;
                for (k, &a) in knots.iter().enumerate() {
                    let b = knots.get(k + 1).copied().unwrap_or(gross.horizon()).min(t);
                    if b <= a {
                        break;
                    }
                    let rate = c(a);
                    if !(rate.is_finite() && rate >= 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "consumption rate must be nonnegative, got {rate} at t = {a}"
                        )));
                    }
                    let tol = quadrature::DEFAULT_TOLERANCE / knots.len() as f64;
                    total += quadrature::integrate(|s| c(s) * (-gross.value(s)).exp(), a, b, tol)?
                        .value;
                }
                total
            }
        })
    }

    /// First time the consumed amount reaches `x`, if before the horizon.
    pub fn ruin_time(&self, x: f64, gross: &LogPath) -> Result<Option<f64>> {
        let horizon = gross.horizon();
        if let ConsumptionRule::Proportional(k) = self {
            return Ok((*k > 0.0 && x / k <= horizon).then(|| x / k));
        }
        if self.consumed(gross, horizon)? < x {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0.0, horizon);
        while hi - lo > 1e-13 * horizon.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.consumed(gross, mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(hi))
    }
}

fn merged_knots(path: &MarkedPointPath, extra: &[f64]) -> Vec<(f64, Option<usize>)> {
    let times = path.regime().times();
    let horizon = path.horizon();
    let mut out = Vec::with_capacity(times.len() + extra.len());
    let (mut i, mut j) = (0, 0);
    let extra: Vec<f64> = extra.iter().copied().filter(|&b| b > 0.0 && b < horizon).collect();
    while i < times.len() || j < extra.len() {
        let ti = times.get(i).copied().unwrap_or(f64::INFINITY);
        let tj = extra.get(j).copied().unwrap_or(f64::INFINITY);
        if ti <= tj {
            out.push((ti, Some(i)));
            i += 1;
            if ti == tj {
                j += 1;
            }
        } else {
            out.push((tj, None));
            j += 1;
        }
    }
    out
}

/// `ln V^{1,pi,0}` along the path.
pub fn gross_wealth_log(
    model: &MarketModel,
    portfolio: &PortfolioRule,
    path: &MarkedPointPath,
) -> Result<LogPath> {
    let knots = merged_knots(path, portfolio.breaks());
    let regime = path.regime();
    let marks = path.marks();
    let mut times = Vec::with_capacity(knots.len());
    let mut jumps = Vec::with_capacity(knots.len());
    let mut slopes = Vec::with_capacity(knots.len() + 1);
    let state0 = regime.initial();
    slopes.push(model.regime(state0).wealth_slope(portfolio.weight(0.0, state0)));
    for &(t, jump) in &knots {
        let mut log_jump = 0.0;
        if let Some(n) = jump {
            let pre = regime.state_before(n);
            let params = model.regime(pre);
            let pi = portfolio.weight_before(t, pre);
            let y = marks[n];
            log_jump = params.transform.log_factor(pi, y).ok_or(Error::Bankruptcy {
                index: n,
                time: t,
                mark: y,
                factor: 1.0 + pi * params.transform.f(y),
            })?;
        }
        let state = regime.state_at(t);
        times.push(t);
        jumps.push(log_jump);
        slopes.push(model.regime(state).wealth_slope(portfolio.weight(t, state)));
    }
    LogPath::from_pieces(0.0, &times, &jumps, &slopes, path.horizon())
}

/// `V^{1,pi,0}` along the path.
pub fn gross_wealth_path(
    model: &MarketModel,
    portfolio: &PortfolioRule,
    path: &MarkedPointPath,
) -> Result<LogPath> {
    gross_wealth_log(model, portfolio, path)
}

/// `ln S` along the path, from `S_0 = s0`.
pub fn stock_path(model: &MarketModel, path: &MarkedPointPath, s0: f64) -> Result<LogPath> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::InvalidParameter(format!("s0 must be positive, got {s0}")));
    }
    let regime = path.regime();
    let mut slopes = Vec::with_capacity(regime.jump_count() + 1);
    let mut jumps = Vec::with_capacity(regime.jump_count());
    slopes.push(model.regime(regime.initial()).drift);
    for (n, (t, y, pre)) in path.events().enumerate() {
        let params = model.regime(pre);
        let log_jump = params.transform.log_factor(1.0, y).ok_or_else(|| {
            Error::InvalidModel(format!(
                "mark {n} at t = {t}: f({y}) = {} <= -1",
                params.transform.f(y)
            ))
        })?;
        jumps.push(log_jump);
        slopes.push(model.regime(pre ^ 1).drift);
    }
    LogPath::from_pieces(s0.ln(), regime.times(), &jumps, &slopes, path.horizon())
}

/// Reporting grid with the stock, gross wealth, consumption factor and wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub times: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub stock: Vec<f64>,
    pub gross: Vec<f64>,
    pub xi: Vec<f64>,
    pub wealth: Vec<f64>,
    /// First time `xi` reaches 0; wealth is 0 from then on.
    pub ruin_time: Option<f64>,
}

impl WealthPath {
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "t,regime,S,V1pi0,xi,V")?;
        for k in 0..self.times.len() {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k], self.regimes[k], self.stock[k], self.gross[k], self.xi[k], self.wealth[k]
            )?;
        }
        Ok(())
    }
}

/// Wealth `V = xi V^{1,pi,0}` with `xi_t = x - int_0^t c_s / V_s^{1,pi,0} ds`.
/// Fails with [`Error::Ruin`] if consumption exhausts wealth before the horizon.
pub fn wealth_path(
    x: f64,
    model: &MarketModel,
    portfolio: &PortfolioRule,
    consumption: &ConsumptionRule,
    path: &MarkedPointPath,
) -> Result<WealthPath> {
    let w = wealth_path_unchecked(x, 1.0, model, portfolio, consumption, path, DEFAULT_REPORT_POINTS)?;
    match w.ruin_time {
        Some(time) => Err(Error::Ruin { time }),
        None => Ok(w),
    }
}

/// As [`wealth_path`], but reports ruin in the result instead of failing.
pub fn wealth_path_unchecked(
    x: f64,
    s0: f64,
    model: &MarketModel,
    portfolio: &PortfolioRule,
    consumption: &ConsumptionRule,
    path: &MarkedPointPath,
    points: usize,
) -> Result<WealthPath> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParameter(format!("initial wealth must be positive, got {x}")));
    }
    portfolio.validate()?;
    consumption.validate()?;
    let horizon = path.horizon();
    let gross = gross_wealth_log(model, portfolio, path)?;
    let stock = stock_path(model, path, s0)?;
    let ruin_time = consumption.ruin_time(x, &gross)?;

    let n = points.max(2);
    let mut times: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { horizon } else { horizon * k as f64 / (n - 1) as f64 })
        .chain(path.regime().times().iter().copied())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut out = WealthPath {
        regimes: Vec::with_capacity(times.len()),
        stock: Vec::with_capacity(times.len()),
        gross: Vec::with_capacity(times.len()),
        xi: Vec::with_capacity(times.len()),
        wealth: Vec::with_capacity(times.len()),
        times,
        ruin_time,
    };
    for &t in &out.times {
        let v1 = gross.value(t).exp();
        let xi = if ruin_time.is_some_and(|r| t >= r) {
            0.0
        } else {
            (x - consumption.consumed(&gross, t)?).max(0.0)
        };
        out.regimes.push(path.regime().state_at(t));
        out.stock.push(stock.value(t).exp());
        out.gross.push(v1);
        out.xi.push(xi);
        out.wealth.push(xi * v1);
    }
    Ok(out)
}
