use crate::error::{Error, Result};
use crate::market::{gross_wealth_log, wealth_path, ConsumptionRule, LogPath, PortfolioRule};
use crate::mpp::MarkedPointPath;
use crate::policy::{PhiSpec, Policy, Utility};
use crate::quadrature::{self, DEFAULT_TOLERANCE};
use crate::verify::state_price::StatePrice;
use crate::verify::{estimate, map_paths, McConfig, McEstimate, Scenario};

/// `int_0^end c(s) exp(L(s)) ds` by quadrature, split at the knots of `L`.
fn integrate_against<C: Fn(f64) -> f64>(c: C, log: &LogPath, end: f64) -> Result<f64> {
    let knots = log.knots();
    let tol = DEFAULT_TOLERANCE / knots.len() as f64;
    let mut total = 0.0;
    for (k, &a) in knots.iter().enumerate() {
        let b = knots.get(k + 1).copied().unwrap_or(log.horizon()).min(end);
        if b <= a {
            break;
        }
        total += quadrature::integrate(|s| c(s) * log.value(s).exp(), a, b, tol)?.value;
    }
    Ok(total)
}

/// `E[H_T exp(int_0^T (r + conj(zeta^phi)) ds)]`, which is 1 for a true
/// exponential martingale factor.
pub fn martingale_factor(scenario: &Scenario, phi: PhiSpec, mc: McConfig) -> Result<McEstimate> {
    let model = &scenario.model;
    let sp = StatePrice::new(model, &scenario.constraint, phi)?;
    estimate(scenario, mc, |path| {
        let h = sp.log_path(model, path)?;
        let discount: f64 = path
            .regime()
            .segments()
            .map(|(a, b, i)| sp.discount_rate(i).unwrap_or(f64::NAN) * (b - a))
            .sum();
        Ok((h.log.terminal() + discount).exp())
    })
}

/// Maximum of `|H_t V_t^{1,pi,0} - 1|` over jump times and a uniform grid,
/// for `H` built from `phi = 1 / (1 + pi f)` of a log-optimal policy.
pub fn state_price_inverse_check(scenario: &Scenario, policy: &Policy, mc: McConfig) -> Result<f64> {
    let model = &scenario.model;
    let sp = StatePrice::new(model, &scenario.constraint, policy.phi())?;
    let portfolio = policy.portfolio();
    let horizon = scenario.horizon;
    let devs = map_paths(scenario, mc, |path| {
        let h = sp.log_path(model, path)?;
        let v = gross_wealth_log(model, &portfolio, path)?;
        let sum = h.log.combine(1.0, &v, 1.0);
        let uniform = (0..=64).map(|k| horizon * k as f64 / 64.0);
        let times = path.regime().times().iter().copied().chain(uniform);
        Ok(times.map(|t| sum.value(t).exp_m1().abs()).fold(0.0, f64::max))
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// `E[H_T V_T + int_0^T H_s c_s ds] - x` for an arbitrary pair `(pi, c)`
/// against the state price of `phi`. Consumption stops at ruin.
pub fn budget_check(
    scenario: &Scenario,
    portfolio: &PortfolioRule,
    consumption: &ConsumptionRule,
    phi: PhiSpec,
    mc: McConfig,
) -> Result<McEstimate> {
    portfolio.validate()?;
    consumption.validate()?;
    let model = &scenario.model;
    let x = scenario.wealth;
    let sp = StatePrice::new(model, &scenario.constraint, phi)?;
    estimate(scenario, mc, |path| {
        let h = sp.log_path(model, path)?.log;
        let gross = gross_wealth_log(model, portfolio, path)?;
        let ruin = consumption.ruin_time(x, &gross)?;
        let end = ruin.unwrap_or(scenario.horizon);
        let xi = if ruin.is_some() {
            0.0
        } else {
            x - consumption.consumed(&gross, scenario.horizon)?
        };
        let terminal = xi * (h.terminal() + gross.terminal()).exp();
        let consumed = match consumption {
            ConsumptionRule::None => 0.0,
            ConsumptionRule::Constant(c) => c * h.integral_exp(1.0, end),
            ConsumptionRule::Proportional(k) => k * h.combine(1.0, &gross, 1.0).integral_exp(1.0, end),
            ConsumptionRule::Deterministic(c) => integrate_against(|s| c(s), &h, end)?,
        };
        Ok(terminal + consumed - x)
    })
}

fn primal_sample(
    scenario: &Scenario,
    portfolio: &PortfolioRule,
    consumption: &ConsumptionRule,
    utility: Utility,
    path: &MarkedPointPath,
) -> Result<f64> {
    let x = scenario.wealth;
    let horizon = scenario.horizon;
    let gross = gross_wealth_log(&scenario.model, portfolio, path)?;
    let ruin = consumption.ruin_time(x, &gross)?;
    if ruin.is_some() && utility == Utility::Log {
        return Ok(f64::NEG_INFINITY);
    }
    let end = ruin.unwrap_or(horizon);
    let running = match (utility, consumption) {
        (_, ConsumptionRule::None) => 0.0,
        (Utility::Log, ConsumptionRule::Constant(c)) => end * c.ln(),
        (Utility::Log, ConsumptionRule::Proportional(k)) => end * k.ln() + gross.integral(end),
        (Utility::Log, ConsumptionRule::Deterministic(c)) => {
            quadrature::integrate(|t| c(t).ln(), 0.0, end, DEFAULT_TOLERANCE)?.value
        }
        (Utility::Power { gamma }, ConsumptionRule::Constant(c)) => end * c.powf(gamma) / gamma,
        (Utility::Power { gamma }, ConsumptionRule::Proportional(k)) => {
            k.powf(gamma) / gamma * gross.integral_exp(gamma, end)
        }
        (Utility::Power { gamma }, ConsumptionRule::Deterministic(c)) => {
            quadrature::integrate(|t| c(t).powf(gamma) / gamma, 0.0, end, DEFAULT_TOLERANCE)?.value
        }
    };
    let terminal = match (ruin, utility) {
        (Some(_), _) => 0.0,
        (None, Utility::Log) => (x - consumption.consumed(&gross, horizon)?).ln() + gross.terminal(),
        (None, Utility::Power { gamma }) => {
            let v = (x - consumption.consumed(&gross, horizon)?) * gross.terminal().exp();
            v.powf(gamma) / gamma
        }
    };
    Ok(running + terminal)
}

/// `J(x; pi, c) = E[int_0^T U(c_t) dt + U(V_T)]`, the running term in closed
/// form between jumps. Without consumption only the terminal term is counted.
/// Log utility scores a ruined path as `-inf`.
pub fn mc_expected_utility(
    scenario: &Scenario,
    portfolio: &PortfolioRule,
    consumption: &ConsumptionRule,
    utility: Utility,
    mc: McConfig,
) -> Result<McEstimate> {
    utility.validate()?;
    portfolio.validate()?;
    consumption.validate()?;
    estimate(scenario, mc, |path| primal_sample(scenario, portfolio, consumption, utility, path))
}

/// Per-path evaluation of the dual functional `L(x; phi)`.
struct Dual {
    sp: StatePrice,
    utility: Utility,
    /// `ln kappa` for power utility.
    log_kappa: f64,
}

impl Dual {
    fn new(scenario: &Scenario, phi: PhiSpec, utility: Utility) -> Result<Self> {
        utility.validate()?;
        let model = &scenario.model;
        let sp = StatePrice::new(model, &scenario.constraint, phi)?;
        let log_kappa = match utility {
            Utility::Log => 0.0,
            Utility::Power { gamma } => {
                if !model.is_single_regime() {
                    return Err(Error::Assumption(
                        "the power-utility dual needs deterministic coefficients".into(),
                    ));
                }
                let p = gamma / (gamma - 1.0);
                let params = model.regime(0);
                let discount = sp.discount_rate(0).ok_or_else(|| Error::OutsideDomain {
                    zeta: sp.zeta()[0],
                    domain: crate::frictions::effective_domain(&params.margin, params.rate, &scenario.constraint)
                        .to_string(),
                    at: Some(0.0),
                })?;
                let jump = if params.intensity == 0.0 {
                    0.0
                } else {
                    params.intensity * (phi.moment(params, 0, p)? - p * sp.compensator()[0])
                };
                scenario.horizon * (-p * discount + jump)
            }
        };
        Ok(Dual {
            sp,
            utility,
            log_kappa,
        })
    }

    fn sample(&self, scenario: &Scenario, path: &MarkedPointPath) -> Result<f64> {
        let h = self.sp.log_path(&scenario.model, path)?.log;
        let x = scenario.wealth;
        let horizon = scenario.horizon;
        Ok(match self.utility {
            Utility::Log => {
                // c = x / ((T + 1) H_t) and G = x / ((T + 1) H_T)
                (horizon + 1.0) * (x / (horizon + 1.0)).ln() - h.integral(horizon) - h.terminal()
            }
            Utility::Power { gamma } => {
                // G = (x / kappa) H_T^(1 / (gamma - 1)), no consumption
                let log_g = x.ln() - self.log_kappa + h.terminal() / (gamma - 1.0);
                (gamma * log_g).exp() / gamma
            }
        })
    }
}

/// Monte Carlo estimate of `L(x; phi)` for the closed-form dual candidates:
/// log utility with consumption, power utility without.
pub fn dual_functional(scenario: &Scenario, phi: PhiSpec, utility: Utility, mc: McConfig) -> Result<McEstimate> {
    let dual = Dual::new(scenario, phi, utility)?;
    estimate(scenario, mc, |path| dual.sample(scenario, path))
}

/// Primal and dual values of a policy on common paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub primal: McEstimate,
    pub dual: McEstimate,
    /// Paired estimate of `J - L`.
    pub difference: McEstimate,
}

impl GapReport {
    /// `sqrt(se_J^2 + se_L^2)`.
    pub fn combined_stderr(&self) -> f64 {
        self.primal.stderr.hypot(self.dual.stderr)
    }
}

/// `J(x; pi, c)` against `L(x; phi)` for the policy's own `phi`.
pub fn duality_gap(scenario: &Scenario, policy: &Policy, mc: McConfig) -> Result<GapReport> {
    let dual = Dual::new(scenario, policy.phi(), policy.utility)?;
    let portfolio = policy.portfolio();
    let pairs = map_paths(scenario, mc, |path| {
        let j = primal_sample(scenario, &portfolio, &policy.consumption, policy.utility, path)?;
        let l = dual.sample(scenario, path)?;
        Ok((j, l))
    })?;
    let primal: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let dual: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(GapReport {
        primal: McEstimate::from_samples(&primal, mc.seed),
        dual: McEstimate::from_samples(&dual, mc.seed),
        difference: McEstimate::from_samples(&diff, mc.seed),
    })
}

/// Maximum over paths and reporting points of
/// `|V_t - x V_t^{1,pi,0} (1 - t / (T + 1))| / (x V_t^{1,pi,0})` for the
/// policy's weights and its consumption rule.
pub fn wealth_identity_check(scenario: &Scenario, policy: &Policy, mc: McConfig) -> Result<f64> {
    let x = scenario.wealth;
    let horizon = scenario.horizon;
    let portfolio = policy.portfolio();
    let devs = map_paths(scenario, mc, |path| {
        let w = wealth_path(x, &scenario.model, &portfolio, &policy.consumption, path)?;
        let mut worst: f64 = 0.0;
        for k in 0..w.times.len() {
            let base = x * w.gross[k];
            let target = base * (1.0 - w.times[k] / (horizon + 1.0));
            worst = worst.max((w.wealth[k] - target).abs() / base);
        }
        Ok(worst)
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}
