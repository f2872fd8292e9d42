//! TOML run configuration and its conversion into library types.
//!
//! Every table rejects unknown keys. Validation failures carry the dotted
//! path of the offending field, e.g. `model.regimes[0].borrow_rate`.

use std::fmt;
use std::path::{Path, PathBuf};

use jumpdual::verify::{McConfig, Scenario};
use jumpdual::{ConstraintSet, JumpDistribution, JumpTransform, MarginModel, MarketModel, RegimeMarketParams, Utility};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    pub wealth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub utility: UtilityConfig,
    pub constraint: ConstraintConfig,
    #[serde(default)]
    pub mc: McBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub initial_regime: usize,
    /// One entry for a single-regime market, two for regime switching.
    pub regimes: Vec<RegimeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub rate: f64,
    pub drift: f64,
    pub intensity: f64,
    /// Borrowing rate `R`, required by the `differential_rates` margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub borrow_rate: Option<f64>,
    /// Stock loan rate `r_L`, required by the `short_rebate` margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loan_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
    #[serde(default)]
    pub transform: TransformConfig,
    pub jumps: JumpConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformConfig {
    #[default]
    Exponential,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpConfig {
    ExponentialPositive { rate: f64 },
    ExponentialNegative { rate: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
    Tabulated { points: Vec<f64>, density: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityConfig {
    Log,
    Power { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    Frictionless,
    DifferentialRates,
    ShortRebate,
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    /// Missing bounds are infinite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub margin: MarginKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> usize {
    100_000
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock {
            paths: default_paths(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Parse(String),
    Field { path: String, message: String },
}

impl ConfigError {
    fn field(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Field {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
            ConfigError::Parse(msg) => write!(f, "malformed config: {msg}"),
            ConfigError::Field { path, message } => write!(f, "{path}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// 0 selects log utility.
    pub gamma: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub wealth: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// A validated configuration in library terms.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub utility: Utility,
    pub mc: McConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(g) = o.gamma {
            self.utility = if g == 0.0 {
                UtilityConfig::Log
            } else {
                UtilityConfig::Power { gamma: g }
            };
        }
        if let Some(n) = o.paths {
            self.mc.paths = n;
        }
        if let Some(s) = o.seed {
            self.mc.seed = s;
        }
        if let Some(t) = o.horizon {
            self.horizon = t;
        }
        if let Some(x) = o.wealth {
            self.wealth = x;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ConfigError::field("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.wealth.is_finite() && self.wealth > 0.0) {
            return Err(ConfigError::field("wealth", format!("must be positive, got {}", self.wealth)));
        }
        let utility = match self.utility {
            UtilityConfig::Log => Utility::Log,
            UtilityConfig::Power { gamma } => Utility::power(gamma).map_err(|e| ConfigError::field("utility.gamma", e))?,
        };
        let constraint = ConstraintSet::from_bounds(self.constraint.lower, self.constraint.upper)
            .map_err(|e| ConfigError::field("constraint", e))?;
        let regimes = &self.model.regimes;
        if regimes.is_empty() || regimes.len() > 2 {
            return Err(ConfigError::field(
                "model.regimes",
                format!("expected one or two regimes, got {}", regimes.len()),
            ));
        }
        if self.model.initial_regime > 1 {
            return Err(ConfigError::field(
                "model.initial_regime",
                format!("must be 0 or 1, got {}", self.model.initial_regime),
            ));
        }
        let params = regimes
            .iter()
            .enumerate()
            .map(|(i, r)| r.resolve(&format!("model.regimes[{i}]"), self.constraint.margin))
            .collect::<Result<Vec<_>, _>>()?;
        let model = if params.len() == 1 {
            MarketModel::single(params[0].clone())
        } else {
            MarketModel::new([params[0].clone(), params[1].clone()])
        }
        .map_err(|e| ConfigError::field("model", e))?;
        if self.mc.paths == 0 {
            return Err(ConfigError::field("mc.paths", "must be at least 1"));
        }
        Ok(Resolved {
            scenario: Scenario {
                model,
                constraint,
                horizon: self.horizon,
                wealth: self.wealth,
                initial_regime: self.model.initial_regime,
            },
            utility,
            mc: McConfig {
                paths: self.mc.paths,
                seed: self.mc.seed,
            },
        })
    }
}

impl RegimeConfig {
    fn resolve(&self, at: &str, margin: MarginKind) -> Result<RegimeMarketParams, ConfigError> {
        for (name, v) in [("rate", self.rate), ("drift", self.drift)] {
            if !v.is_finite() {
                return Err(ConfigError::field(format!("{at}.{name}"), format!("must be finite, got {v}")));
            }
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(ConfigError::field(
                format!("{at}.intensity"),
                format!("must be finite and nonnegative, got {}", self.intensity),
            ));
        }
        let used: &[&str] = match margin {
            MarginKind::Frictionless => &[],
            MarginKind::DifferentialRates => &["borrow_rate"],
            MarginKind::ShortRebate => &["loan_rate"],
            MarginKind::PiecewiseLinear => &["breakpoints", "slopes"],
        };
        let present = [
            ("borrow_rate", self.borrow_rate.is_some()),
            ("loan_rate", self.loan_rate.is_some()),
            ("breakpoints", self.breakpoints.is_some()),
            ("slopes", self.slopes.is_some()),
        ];
        for (name, is_set) in present {
            let wanted = used.contains(&name);
            if is_set && !wanted {
                return Err(ConfigError::field(
                    format!("{at}.{name}"),
                    format!("not used by the {} margin", margin_name(margin)),
                ));
            }
            if !is_set && wanted {
                return Err(ConfigError::field(
                    format!("{at}.{name}"),
                    format!("required by the {} margin", margin_name(margin)),
                ));
            }
        }
        let (margin, margin_field) = match margin {
            MarginKind::Frictionless => (MarginModel::Frictionless, "margin"),
            MarginKind::DifferentialRates => (
                MarginModel::DifferentialRates {
                    borrow_rate: self.borrow_rate.unwrap_or_default(),
                },
                "borrow_rate",
            ),
            MarginKind::ShortRebate => (
                MarginModel::ShortRebate {
                    loan_fee: self.loan_rate.unwrap_or_default(),
                },
                "loan_rate",
            ),
            MarginKind::PiecewiseLinear => (
                MarginModel::PiecewiseLinearConcave {
                    breakpoints: self.breakpoints.clone().unwrap_or_default(),
                    slopes: self.slopes.clone().unwrap_or_default(),
                },
                "slopes",
            ),
        };
        margin
            .validate(self.rate)
            .map_err(|e| ConfigError::field(format!("{at}.{margin_field}"), e))?;
        let jumps = self.jumps.resolve().map_err(|e| ConfigError::field(format!("{at}.jumps"), e))?;
        let params = RegimeMarketParams {
            rate: self.rate,
            drift: self.drift,
            intensity: self.intensity,
            jumps,
            transform: match self.transform {
                TransformConfig::Exponential => JumpTransform::Exponential,
                TransformConfig::Identity => JumpTransform::Identity,
            },
            margin,
        };
        params.validate().map_err(|e| ConfigError::field(at, e))?;
        Ok(params)
    }
}

impl JumpConfig {
    fn resolve(&self) -> jumpdual::Result<JumpDistribution> {
        match self {
            JumpConfig::ExponentialPositive { rate } => JumpDistribution::exponential_positive(*rate),
            JumpConfig::ExponentialNegative { rate } => JumpDistribution::exponential_negative(*rate),
            JumpConfig::TwoPoint { low, high, p_high } => JumpDistribution::two_point(*low, *high, *p_high),
            JumpConfig::Tabulated { points, density } => JumpDistribution::tabulated(points.clone(), density.clone()),
        }
    }
}

pub fn margin_name(kind: MarginKind) -> &'static str {
    match kind {
        MarginKind::Frictionless => "frictionless",
        MarginKind::DifferentialRates => "differential_rates",
        MarginKind::ShortRebate => "short_rebate",
        MarginKind::PiecewiseLinear => "piecewise_linear",
    }
}
