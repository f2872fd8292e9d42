//! Optimal log-utility value in the two-regime model.
//!
//! [`value_corollary`] evaluates the closed form with `d_bar` as defined below;
//! [`value_semianalytic`] integrates the expected log-wealth drift under the
//! chain's transition probabilities. The two differ in the overall sign of
//! the drift bracket and in one factor `1 +- 1/(2 lambda)`; the Monte Carlo
//! check in `verify` sides with the semi-analytic form.

use crate::error::{Error, Result};
use crate::frictions::ConstraintSet;
use crate::market::MarketModel;
use crate::mpp::Regime;
use crate::policy::{optimal_portfolio, verify_conjugacy, CONJUGACY_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeValueInputs {
    /// Leaving rates `(lambda_0, lambda_1)`.
    pub lambda: [f64; 2],
    pub pi_bar: [f64; 2],
    /// `E_i[ln(1 + pi_i f(Y))]`.
    pub eta: [f64; 2],
    pub zeta: [f64; 2],
    /// `pi mu + (1 - pi) r + lambda eta`, without the margin payment.
    pub d_bar: [f64; 2],
    /// `g_i(pi_i)`, the margin payment left out of `d_bar`.
    pub margin_term: [f64; 2],
    pub horizon: f64,
    pub wealth: f64,
}

impl RegimeValueInputs {
    /// `(lambda_0 + lambda_1) / 2`.
    pub fn mean_rate(&self) -> f64 {
        0.5 * (self.lambda[0] + self.lambda[1])
    }

    /// Drift of `E[ln V^{1,pi,0}]` in regime `i`: `d_bar + g(pi)`.
    pub fn log_drift(&self, i: Regime) -> f64 {
        self.d_bar[i] + self.margin_term[i]
    }

    fn check(&self) -> Result<f64> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.wealth.is_finite() && self.wealth > 0.0) {
            return Err(Error::InvalidParameter(format!("initial wealth must be positive, got {}", self.wealth)));
        }
        let lam = self.mean_rate();
        if lam.is_nan() || lam <= 0.0 {
            return Err(Error::DegenerateGenerator);
        }
        Ok(lam)
    }

    fn head(&self) -> f64 {
        let t1 = self.horizon + 1.0;
        t1 * self.wealth.ln() - t1 * t1.ln()
    }
}

fn check_start(start: Regime) -> Result<()> {
    if start > 1 {
        return Err(Error::InvalidParameter(format!("regime must be 0 or 1, got {start}")));
    }
    Ok(())
}

/// Closed-form value, term by term, in terms of `d_bar`.
pub fn value_corollary(inputs: &RegimeValueInputs, start: Regime) -> Result<f64> {
    check_start(start)?;
    let lam = inputs.check()?;
    let two_lam = 2.0 * lam;
    let t = inputs.horizon;
    let [l0, l1] = inputs.lambda;
    let [d0, d1] = inputs.d_bar;
    let bracket = t + (1.0 - (-two_lam * t).exp()) * (1.0 + 1.0 / two_lam);
    let weight = if start == 0 { l0 } else { -l1 };
    let inner = (l1 * d0 + l0 * d1) * (t + 0.5 * t * t) + weight * (d0 - d1) / two_lam * bracket;
    Ok(inputs.head() - inner / two_lam)
}

/// `(T + 1) ln(x / (T + 1)) + int_0^T D(t) dt + D(T)` with
/// `D(t) = int_0^t E[d(eps(s)) | eps(0) = start] ds`, integrated in closed form.
pub fn value_semianalytic(inputs: &RegimeValueInputs, start: Regime) -> Result<f64> {
    check_start(start)?;
    let lam = inputs.check()?;
    let two_lam = 2.0 * lam;
    let t = inputs.horizon;
    let [l0, l1] = inputs.lambda;
    let d = [inputs.log_drift(0), inputs.log_drift(1)];
    let stationary = (l1 * d[0] + l0 * d[1]) / two_lam;
    let excess = d[start] - stationary;
    let decay = -(-two_lam * t).exp_m1();
    let transient = excess / two_lam * (t + decay * (1.0 - 1.0 / two_lam));
    Ok(inputs.head() + stationary * (t + 0.5 * t * t) + transient)
}

/// Inputs for given weights `pi_bar`, checking the three conditions of the
/// closed form: finite `eta`, `zeta` in the effective domain, and conjugacy.
pub fn regime_inputs_for(
    model: &MarketModel,
    k: &ConstraintSet,
    pi_bar: [f64; 2],
    wealth: f64,
    horizon: f64,
) -> Result<RegimeValueInputs> {
    let mut failures = Vec::new();
    let mut eta = [0.0; 2];
    let mut zeta = [0.0; 2];
    let mut d_bar = [0.0; 2];
    let mut margin_term = [0.0; 2];
    for i in 0..2 {
        let p = model.regime(i);
        let pi = pi_bar[i];
        if !k.contains(pi) {
            failures.push(format!("regime {i}: pi = {pi} is outside K = {k}"));
            continue;
        }
        let feasible = p.feasible_range();
        if !feasible.contains(pi) {
            let support = p.jumps.support();
            let y = if pi > 0.0 { support.lo } else { support.hi };
            failures.push(format!(
                "regime {i}: 1 + pi f(y) <= 0 at support point y = {y} for pi = {pi}"
            ));
            continue;
        }
        let t = p.transform;
        let e = if p.intensity == 0.0 || pi == 0.0 {
            Ok(0.0)
        } else {
            p.jumps.expect(|y| (pi * t.f(y)).ln_1p())
        };
        match e {
            Ok(v) if v.is_finite() => eta[i] = v,
            Ok(v) => failures.push(format!("regime {i}: (i) eta = {v} is not finite")),
            Err(err) => failures.push(format!("regime {i}: (i) eta diverges: {err}")),
        }
        match crate::policy::h_value(p, 0.0, pi) {
            Ok(h) => {
                zeta[i] = p.rate - h;
                match verify_conjugacy(&p.margin, p.rate, k, pi, zeta[i]) {
                    Ok(res) if res <= CONJUGACY_TOLERANCE => {}
                    Ok(res) => failures.push(format!("regime {i}: (iii) conjugacy residual {res}")),
                    Err(err) => failures.push(format!("regime {i}: (ii) {err}")),
                }
            }
            Err(err) => failures.push(format!("regime {i}: (ii) zeta undefined: {err}")),
        }
        d_bar[i] = pi * p.drift + (1.0 - pi) * p.rate + p.intensity * eta[i];
        margin_term[i] = p.margin.g(p.rate, pi);
    }
    if !failures.is_empty() {
        return Err(Error::Conditions(failures.join("; ")));
    }
    Ok(RegimeValueInputs {
        lambda: [model.regime(0).intensity, model.regime(1).intensity],
        pi_bar,
        eta,
        zeta,
        d_bar,
        margin_term,
        horizon,
        wealth,
    })
}

/// Inputs at the log-optimal weights of each regime.
pub fn regime_inputs(model: &MarketModel, k: &ConstraintSet, wealth: f64, horizon: f64) -> Result<RegimeValueInputs> {
    let mut pi_bar = [0.0; 2];
    for (i, slot) in pi_bar.iter_mut().enumerate() {
        *slot = optimal_portfolio(model.regime(i), 0.0, k)
            .map_err(|e| Error::Conditions(format!("regime {i}: no log-optimal weight: {e}")))?
            .pi;
    }
    regime_inputs_for(model, k, pi_bar, wealth, horizon)
}
