//! The five subcommands. Each prints a human-readable report to `out` and
//! writes its CSV files under the output directory.

use std::io::Write;
use std::path::PathBuf;

use jumpdual::frictions::effective_domain;
use jumpdual::market::{wealth_path_unchecked, DEFAULT_REPORT_POINTS};
use jumpdual::mpp::simulate_path;
use jumpdual::policy::{h_value, optimal_policy, optimal_portfolio, verify_conjugacy, CONJUGACY_TOLERANCE};
use jumpdual::regime_value::{regime_inputs, value_corollary, value_semianalytic};
use jumpdual::verify::{
    budget_check, duality_gap, grid_search_constant_portfolio, martingale_factor, state_price_inverse_check,
    wealth_identity_check, GridSpec, McConfig, McEstimate, Scenario,
};
use jumpdual::{Error, MarginModel, PortfolioSolution, RegimeMarketParams, Utility};

use crate::config::{Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{config_hash, num, output_dir, CsvFile, Provenance};

/// Exponents plotted in the `h` figures.
pub const FIGURE_GAMMAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];
pub const FIGURE_PI_POINTS: usize = 500;
pub const FIGURE_GAMMA_POINTS: usize = 200;
pub const FIGURE_GAMMA_MAX: f64 = 0.99;

/// Paths used by the pathwise (deterministic-tolerance) checks.
const PATHWISE_PATHS: usize = 1000;
const PATHWISE_TOLERANCE: f64 = 1e-10;
const GRID_STEP: f64 = 0.01;
const GRID_HALF_WIDTH: f64 = 2.0;

/// A parsed, overridden and validated configuration.
pub struct Context {
    pub config: RunConfig,
    pub resolved: Resolved,
    pub hash: String,
    pub output_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let resolved = config.resolve()?;
        Ok(Context {
            hash: config_hash(&config),
            output_dir: output_dir(&config),
            config,
            resolved,
        })
    }

    fn scenario(&self) -> &Scenario {
        &self.resolved.scenario
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance {
            command: command.to_string(),
            config_sha256: self.hash.clone(),
            seed: self.resolved.mc.seed,
        }
    }

    /// Regimes to report: one when both share the same parameters.
    fn regime_count(&self) -> usize {
        if self.scenario().model.is_single_regime() {
            1
        } else {
            2
        }
    }
}

fn labelled(i: usize, e: Error) -> Error {
    match e {
        Error::Range { target, low, high } => Error::Infeasible(format!(
            "regime {i}: target {target} lies outside the attainable h-range [{low}, {high}]"
        )),
        Error::Infeasible(m) => Error::Infeasible(format!("regime {i}: {m}")),
        Error::Assumption(m) => Error::Assumption(format!("regime {i}: {m}")),
        other => other,
    }
}

fn case_label(sol: &PortfolioSolution) -> String {
    sol.case.map_or_else(|| "generic".to_string(), |c| c.to_string())
}

pub fn optimize(ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let s = ctx.scenario();
    let utility = ctx.resolved.utility;
    writeln!(out, "utility: {utility}; K = {}; margin: {}", s.constraint, s.model.regime(0).margin.name())?;
    for i in 0..ctx.regime_count() {
        let p = s.model.regime(i);
        let sol = optimal_portfolio(p, utility.gamma(), &s.constraint).map_err(|e| labelled(i, e))?;
        writeln!(
            out,
            "regime {i}: pi_hat = {:.10}, case = {}, zeta_hat = {:.10}, h(pi_hat) = {:.10}, conjugacy residual = {:.3e}",
            sol.pi,
            case_label(&sol),
            sol.zeta,
            sol.h,
            sol.residual
        )?;
    }
    if matches!(utility, Utility::Power { .. }) && ctx.regime_count() == 2 {
        writeln!(
            out,
            "note: power-utility optimality needs identical regimes; the weights above solve each regime on its own"
        )?;
    }
    Ok(())
}

pub fn value(ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    if ctx.resolved.utility != Utility::Log {
        return Err(crate::config::ConfigError::Field {
            path: "utility.kind".into(),
            message: "the value command evaluates the log-utility value; set kind = \"log\" or pass --gamma 0".into(),
        }
        .into());
    }
    let s = ctx.scenario();
    let inputs = regime_inputs(&s.model, &s.constraint, s.wealth, s.horizon)?;
    writeln!(
        out,
        "pi_bar = [{:.10}, {:.10}]; T = {}; x = {}",
        inputs.pi_bar[0], inputs.pi_bar[1], s.horizon, s.wealth
    )?;
    for start in 0..2 {
        let semi = value_semianalytic(&inputs, start)?;
        let corollary = value_corollary(&inputs, start)?;
        let scenario = Scenario {
            initial_regime: start,
            ..s.clone()
        };
        let policy = optimal_policy(&scenario.model, Utility::Log, &scenario.constraint, s.wealth, s.horizon)?;
        let mc = jumpdual::verify::mc_expected_utility(
            &scenario,
            &policy.portfolio(),
            &policy.consumption,
            Utility::Log,
            ctx.resolved.mc,
        )?;
        writeln!(
            out,
            "start regime {start}: semi-analytic = {semi:.10}, corollary = {corollary:.10} (difference {:+.3e}), \
             monte carlo = {:.10} +- {:.3e} ({} paths, seed {}; {:+.2} se from semi-analytic)",
            corollary - semi,
            mc.mean,
            mc.stderr,
            mc.paths,
            mc.seed,
            (mc.mean - semi) / mc.stderr.max(f64::MIN_POSITIVE)
        )?;
    }
    Ok(())
}

pub fn simulate(ctx: &Context, count: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let s = ctx.scenario();
    let policy = optimal_policy(&s.model, ctx.resolved.utility, &s.constraint, s.wealth, s.horizon)?;
    let portfolio = policy.portfolio();
    let q = s.model.generator();
    let dists = s.model.distributions();
    let dir = ctx.output_dir.join("simulate");
    let prov = ctx.provenance("simulate");
    let mut ruined = 0;
    for index in 0..count {
        let path = simulate_path(&q, &dists, s.initial_regime, s.horizon, ctx.resolved.mc.seed, index as u64)?;
        let w = wealth_path_unchecked(
            s.wealth,
            1.0,
            &s.model,
            &portfolio,
            &policy.consumption,
            &path,
            DEFAULT_REPORT_POINTS,
        )?;
        let mut csv = CsvFile::create(
            &dir.join(format!("path_{index:05}.csv")),
            &prov,
            &["t", "regime", "S", "V1pi0", "xi", "V"],
        )?;
        for k in 0..w.times.len() {
            csv.row([
                num(Some(w.times[k])),
                w.regimes[k].to_string(),
                num(Some(w.stock[k])),
                num(Some(w.gross[k])),
                num(Some(w.xi[k])),
                num(Some(w.wealth[k])),
            ])?;
        }
        if let Some(t) = w.ruin_time {
            ruined += 1;
            csv.footnote(format!("consumption exhausted wealth at t = {t:.16e}"));
        }
        csv.finish()?;
    }
    writeln!(
        out,
        "wrote {count} path(s) to {} (weights [{:.10}, {:.10}], {ruined} ruined)",
        dir.display(),
        policy.weights()[0],
        policy.weights()[1]
    )?;
    Ok(())
}

/// Default plotting window of the `h` figures for each margin model.
fn figure_pi_range(ctx: &Context) -> (f64, f64) {
    let s = ctx.scenario();
    match s.model.regime(s.initial_regime).margin {
        MarginModel::DifferentialRates { .. } => (0.0, 3.0),
        MarginModel::ShortRebate { .. } => (-10.0, 1.0),
        _ => (
            s.constraint.lo().to_f64().max(-GRID_HALF_WIDTH),
            s.constraint.hi().to_f64().min(GRID_HALF_WIDTH),
        ),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

pub fn figures(
    ctx: &Context,
    id: u8,
    pi_min: Option<f64>,
    pi_max: Option<f64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = ctx.scenario();
    let params = s.model.regime(s.initial_regime);
    let path = ctx.output_dir.join(format!("figure{id}.csv"));
    let prov = ctx.provenance(&format!("figures {id}"));
    match id {
        1 | 3 => {
            let (lo, hi) = figure_pi_range(ctx);
            let (lo, hi) = (pi_min.unwrap_or(lo), pi_max.unwrap_or(hi));
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(crate::config::ConfigError::Field {
                    path: "--pi-min/--pi-max".into(),
                    message: format!("need a finite window with min < max, got [{lo}, {hi}]"),
                }
                .into());
            }
            let written = h_figure(params, lo, hi, &path, &prov)?;
            writeln!(out, "wrote {} ({FIGURE_PI_POINTS} points on [{lo}, {hi}])", written.display())?;
            Ok(())
        }
        2 | 4 => {
            let (written, failures) = pi_hat_figure(params, s, &path, &prov)?;
            writeln!(
                out,
                "wrote {} ({FIGURE_GAMMA_POINTS} points on [0, {FIGURE_GAMMA_MAX}])",
                written.display()
            )?;
            if failures.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(failures))
            }
        }
        _ => Err(crate::config::ConfigError::Field {
            path: "figure".into(),
            message: format!("must be 1, 2, 3 or 4, got {id}"),
        }
        .into()),
    }
}

fn h_figure(params: &RegimeMarketParams, lo: f64, hi: f64, path: &std::path::Path, prov: &Provenance) -> Result<PathBuf, CliError> {
    let mut columns = vec!["pi".to_string()];
    columns.extend(FIGURE_GAMMAS.iter().map(|g| format!("h_gamma{g}")));
    let header: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = CsvFile::create(path, prov, &header)?;
    let feasible = params.feasible_range();
    let mut empty = 0;
    for pi in linspace(lo, hi, FIGURE_PI_POINTS) {
        let mut row = vec![num(Some(pi))];
        for &g in &FIGURE_GAMMAS {
            let v = if feasible.contains(pi) {
                h_value(params, g, pi).ok().filter(|v| v.is_finite())
            } else {
                None
            };
            empty += usize::from(v.is_none());
            row.push(num(v));
        }
        csv.row(&row)?;
    }
    if empty > 0 {
        csv.footnote(format!(
            "{empty} empty cell(s): pi outside {feasible}, where 1 + pi f(Y) > 0 fails on the support, or h diverges"
        ));
    }
    Ok(csv.finish()?)
}

fn pi_hat_figure(
    params: &RegimeMarketParams,
    s: &Scenario,
    path: &std::path::Path,
    prov: &Provenance,
) -> Result<(PathBuf, Vec<String>), CliError> {
    let mut csv = CsvFile::create(path, prov, &["gamma", "pi_hat"])?;
    let domain = effective_domain(&params.margin, params.rate, &s.constraint);
    let mut empty = Vec::new();
    let mut failures = Vec::new();
    for gamma in linspace(0.0, FIGURE_GAMMA_MAX, FIGURE_GAMMA_POINTS) {
        let pi_hat = match optimal_portfolio(params, gamma, &s.constraint) {
            Ok(sol) => {
                let residual = verify_conjugacy(&params.margin, params.rate, &s.constraint, sol.pi, sol.zeta);
                match residual {
                    Ok(r) if r <= CONJUGACY_TOLERANCE && domain.contains(sol.zeta) => Some(sol.pi),
                    Ok(r) => {
                        failures.push(format!("gamma {gamma}: conjugacy residual {r:e}, zeta {}", sol.zeta));
                        None
                    }
                    Err(e) => {
                        failures.push(format!("gamma {gamma}: {e}"));
                        None
                    }
                }
            }
            Err(e) if e.is_infeasibility() => {
                empty.push(format!("{gamma}: {e}"));
                None
            }
            Err(e) => return Err(e.into()),
        };
        csv.row([num(Some(gamma)), num(pi_hat)])?;
    }
    if !empty.is_empty() {
        csv.footnote(format!("{} empty cell(s), no optimal weight at gamma {}", empty.len(), empty.join("; ")));
    }
    if !failures.is_empty() {
        csv.footnote(format!("conjugacy check failed: {}", failures.join("; ")));
    }
    Ok((csv.finish()?, failures))
}

/// One line of the verification report.
struct Check {
    name: String,
    estimate: f64,
    stderr: Option<f64>,
    tolerance: String,
    pass: bool,
    note: String,
}

impl Check {
    fn pathwise(name: &str, worst: f64, paths: usize) -> Self {
        Check {
            name: name.into(),
            estimate: worst,
            stderr: None,
            tolerance: format!("<= {PATHWISE_TOLERANCE:e}"),
            pass: worst <= PATHWISE_TOLERANCE,
            note: format!("max over {paths} paths"),
        }
    }

    /// `|mean - target| <= 3 se + floor`.
    fn statistical(name: &str, e: &McEstimate, target: f64, floor: f64) -> Self {
        Check {
            name: name.into(),
            estimate: e.mean,
            stderr: Some(e.stderr),
            tolerance: format!("|x - {target}| <= 3 se + {floor:e}"),
            pass: e.agrees_with(target, 3.0, floor),
            note: format!("{} paths, seed {}", e.paths, e.seed),
        }
    }
}

pub fn verify(ctx: &Context, out: &mut dyn Write) -> Result<(), CliError> {
    let s = ctx.scenario();
    let utility = ctx.resolved.utility;
    let McConfig { paths, seed } = ctx.resolved.mc;
    let mc = |offset: u64| McConfig {
        paths,
        seed: seed.wrapping_add(offset),
    };
    let pathwise = McConfig {
        paths: paths.min(PATHWISE_PATHS),
        seed,
    };
    let floor = 1e-12 * s.wealth;
    let mut checks = Vec::new();
    let mut skipped = Vec::new();

    let policy = optimal_policy(&s.model, utility, &s.constraint, s.wealth, s.horizon)?;
    for (i, sol) in policy.solutions.iter().enumerate().take(ctx.regime_count()) {
        let domain = effective_domain(&s.model.regime(i).margin, s.model.regime(i).rate, &s.constraint);
        checks.push(Check {
            name: format!("conjugacy regime {i}"),
            estimate: sol.residual,
            stderr: None,
            tolerance: format!("<= {CONJUGACY_TOLERANCE:e}, zeta in {domain}"),
            pass: sol.residual <= CONJUGACY_TOLERANCE && domain.contains(sol.zeta),
            note: format!("pi_hat {:.10}, case {}, zeta {:.10}", sol.pi, case_label(sol), sol.zeta),
        });
    }
    if utility == Utility::Log {
        let dev = wealth_identity_check(s, &policy, pathwise)?;
        checks.push(Check::pathwise("wealth identity", dev, pathwise.paths));
        let dev = state_price_inverse_check(s, &policy, pathwise)?;
        checks.push(Check::pathwise("state price = 1 / V1", dev, pathwise.paths));
    }
    let m = martingale_factor(s, policy.phi(), mc(1))?;
    checks.push(Check::statistical("martingale factor", &m, 1.0, 0.0));
    let b = budget_check(s, &policy.portfolio(), &policy.consumption, policy.phi(), mc(2))?;
    checks.push(Check::statistical("budget equality", &b, 0.0, floor));
    let gap = duality_gap(s, &policy, mc(3))?;
    let mut c = Check::statistical("duality gap J - L", &gap.difference, 0.0, 1e-12 * gap.primal.mean.abs().max(1.0));
    c.note = format!("J = {:.10}, L = {:.10}; {}", gap.primal.mean, gap.dual.mean, c.note);
    checks.push(c);

    if ctx.regime_count() == 1 {
        let lo = s.constraint.lo().to_f64().max(-GRID_HALF_WIDTH);
        let hi = s.constraint.hi().to_f64().min(GRID_HALF_WIDTH);
        let grid = GridSpec::new(lo, hi, GRID_STEP);
        let search = grid_search_constant_portfolio(s, utility, &grid, mc(4))?;
        let pi_hat = policy.solutions[0].pi;
        // Off the window, the concave objective peaks at the end nearest pi_hat.
        let target = pi_hat.clamp(lo, hi);
        let miss = (search.argmax - target).abs();
        checks.push(Check {
            name: "grid-search argmax".into(),
            estimate: search.argmax,
            stderr: Some(search.best.stderr),
            tolerance: format!("within {GRID_STEP} of {target:.10}"),
            pass: miss <= GRID_STEP + 1e-9,
            note: if target == pi_hat {
                format!("pi_hat {pi_hat:.10} on [{lo}, {hi}]")
            } else {
                format!("pi_hat {pi_hat:.10} lies outside [{lo}, {hi}]; compared against the nearest end")
            },
        });
    } else {
        skipped.push("grid-search argmax: regimes differ, a single constant weight is not the optimum");
    }

    let mut csv = CsvFile::create(
        &ctx.output_dir.join("verify.csv"),
        &ctx.provenance("verify"),
        &["check", "estimate", "stderr", "tolerance", "pass", "note"],
    )?;
    let mut failed = Vec::new();
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        let se = c.stderr.map(|v| format!(" (se {v:.2e})")).unwrap_or_default();
        writeln!(out, "{status}  {}: {:.10e}{se}, {}; {}", c.name, c.estimate, c.tolerance, c.note)?;
        csv.row([
            c.name.clone(),
            num(Some(c.estimate)),
            num(c.stderr),
            c.tolerance.clone(),
            c.pass.to_string(),
            c.note.clone(),
        ])?;
        if !c.pass {
            failed.push(c.name.clone());
        }
    }
    for s in skipped {
        writeln!(out, "skip  {s}")?;
    }
    let path = csv.finish()?;
    writeln!(out, "wrote {}", path.display())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed))
    }
}
