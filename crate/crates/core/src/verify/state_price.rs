use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::frictions::{conjugate_gk, effective_domain, ConstraintSet};
use crate::market::{LogPath, MarketModel};
use crate::mpp::MarkedPointPath;
use crate::policy::PhiSpec;

/// Per-regime coefficients of the state-price process
/// `H = exp(-int [r + conj(zeta) + lambda E(phi - 1)]) prod phi(Y_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePrice {
    phi: PhiSpec,
    zeta: [f64; 2],
    conjugate: [ExtReal; 2],
    compensator: [f64; 2],
    rate: [f64; 2],
    intensity: [f64; 2],
    domain: [String; 2],
}

/// Tolerance for the compensator integrals, tighter than the default so that
/// `H V^{1,pi,0} = 1` can be checked to 1e-10.
const COMPENSATOR_TOLERANCE: f64 = 1e-13;

impl StatePrice {
    pub fn new(model: &MarketModel, k: &ConstraintSet, phi: PhiSpec) -> Result<Self> {
        let mut zeta = [0.0; 2];
        let mut conjugate = [ExtReal::PosInf; 2];
        let mut compensator = [0.0; 2];
        let mut domain = [String::new(), String::new()];
        for i in 0..2 {
            let p = model.regime(i);
            zeta[i] = phi.zeta(p, i)?;
            conjugate[i] = conjugate_gk(&p.margin, p.rate, k, zeta[i]);
            domain[i] = effective_domain(&p.margin, p.rate, k).to_string();
            compensator[i] = if phi.pi[i] == 0.0 || p.intensity == 0.0 {
                0.0
            } else {
                let t = p.transform;
                let (pi, e) = (phi.pi[i], phi.gamma - 1.0);
                p.jumps
                    .expect_with_tolerance(|y| (e * (pi * t.f(y)).ln_1p()).exp_m1(), COMPENSATOR_TOLERANCE)?
                    .value
            };
        }
        Ok(StatePrice {
            phi,
            zeta,
            conjugate,
            compensator,
            rate: [model.regime(0).rate, model.regime(1).rate],
            intensity: [model.regime(0).intensity, model.regime(1).intensity],
            domain,
        })
    }

    pub fn phi(&self) -> &PhiSpec {
        &self.phi
    }

    /// `zeta^phi` per regime.
    pub fn zeta(&self) -> [f64; 2] {
        self.zeta
    }

    /// `conj(zeta^phi)` per regime.
    pub fn conjugate(&self) -> [ExtReal; 2] {
        self.conjugate
    }

    /// `E_i[phi(Y) - 1]`.
    pub fn compensator(&self) -> [f64; 2] {
        self.compensator
    }

    /// `r_i + conj(zeta_i)`: the part of the drift removed in the martingale factor.
    pub fn discount_rate(&self, i: usize) -> Option<f64> {
        self.conjugate[i].finite().map(|c| self.rate[i] + c)
    }

    fn jumps(&self, model: &MarketModel, path: &MarkedPointPath) -> Result<Vec<f64>> {
        path.events()
            .enumerate()
            .map(|(n, (t, y, pre))| {
                self.phi.log_phi(model.regime(pre), pre, y).ok_or_else(|| {
                    Error::Infeasible(format!(
                        "phi is not positive at mark {n} (t = {t}, y = {y})"
                    ))
                })
            })
            .collect()
    }

    fn slopes<F: Fn(usize) -> Result<f64>>(&self, path: &MarkedPointPath, slope: F) -> Result<Vec<f64>> {
        let regime = path.regime();
        (0..=regime.jump_count()).map(|k| slope(regime.state_after(k))).collect()
    }

    /// `ln H` along the path. Fails with the first time the path enters a
    /// regime whose `zeta` lies outside the effective domain.
    pub fn log_path(&self, model: &MarketModel, path: &MarkedPointPath) -> Result<StatePricePath> {
        let regime = path.regime();
        let slopes = self.slopes(path, |i| {
            let Some(d) = self.discount_rate(i) else {
                let at = if regime.initial() == i { 0.0 } else { regime.times()[0] };
                return Err(Error::OutsideDomain {
                    zeta: self.zeta[i],
                    domain: self.domain[i].clone(),
                    at: Some(at),
                });
            };
            Ok(-(d + self.intensity[i] * self.compensator[i]))
        })?;
        let jumps = self.jumps(model, path)?;
        let log = LogPath::from_pieces(0.0, regime.times(), &jumps, &slopes, path.horizon())?;
        Ok(StatePricePath { log })
    }

    /// `ln` of the pure-jump exponential martingale `prod phi exp(-int lambda E(phi - 1))`.
    pub fn martingale_log(&self, model: &MarketModel, path: &MarkedPointPath) -> Result<LogPath> {
        let slopes = self.slopes(path, |i| Ok(-self.intensity[i] * self.compensator[i]))?;
        let jumps = self.jumps(model, path)?;
        LogPath::from_pieces(0.0, path.regime().times(), &jumps, &slopes, path.horizon())
    }
}

/// State-price density along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePricePath {
    pub log: LogPath,
}

impl StatePricePath {
    pub fn value(&self, t: f64) -> f64 {
        self.log.value(t).exp()
    }

    pub fn terminal(&self) -> f64 {
        self.log.terminal().exp()
    }
}

/// Builds `H^phi` for one path.
pub fn simulate_state_price(
    model: &MarketModel,
    k: &ConstraintSet,
    phi: PhiSpec,
    path: &MarkedPointPath,
) -> Result<StatePricePath> {
    StatePrice::new(model, k, phi)?.log_path(model, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frictions::MarginModel;
    use crate::market::{JumpTransform, RegimeMarketParams};
    use crate::mpp::{JumpDistribution, RegimePath};

    fn model() -> MarketModel {
        MarketModel::single(RegimeMarketParams {
            rate: 0.045,
            drift: -0.05,
            intensity: 1.0,
            jumps: JumpDistribution::exponential_positive(10.0).unwrap(),
            transform: JumpTransform::Exponential,
            margin: MarginModel::DifferentialRates { borrow_rate: 0.05 },
        })
        .unwrap()
    }

    #[test]
    fn unit_phi_without_jumps_is_discounting() {
        // With h(0) < r, zeta = r - h(0) > 0 and conj(zeta) = 0 on K = [0, 1].
        let mut p = model().regime(0).clone();
        p.margin = MarginModel::Frictionless;
        p.drift = -0.1;
        let m = MarketModel::single(p).unwrap();
        let k = ConstraintSet::from_bounds(Some(0.0), Some(1.0)).unwrap();
        let path = MarkedPointPath::new(RegimePath::new(0, vec![], 1.0).unwrap(), vec![]).unwrap();
        let h = simulate_state_price(&m, &k, PhiSpec::unit(), &path).unwrap();
        assert!((h.terminal() - (-0.045f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exit_from_domain_reports_time() {
        let m = model();
        let k = ConstraintSet::long_only();
        // phi = 1 gives zeta = r - h(0) = -0.0161 < -(R - r)
        let path = MarkedPointPath::new(RegimePath::new(0, vec![0.3], 1.0).unwrap(), vec![0.1]).unwrap();
        let err = simulate_state_price(&m, &k, PhiSpec::unit(), &path).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { at: Some(t), .. } if t == 0.0), "{err}");
    }
}
