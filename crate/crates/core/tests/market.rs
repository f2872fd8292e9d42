mod common;

use common::*;
use jumpdual::market::{
    gross_wealth_log, stock_path, wealth_path, wealth_path_unchecked, ConsumptionRule, PortfolioRule,
};
use jumpdual::mpp::simulate_path;
use jumpdual::verify::{estimate, McConfig};
use jumpdual::{Error, MarginModel, MarkedPointPath, MarketModel, RegimePath};
use proptest::prelude::*;

fn one_mark(t: f64, y: f64) -> MarkedPointPath {
    MarkedPointPath::new(RegimePath::new(0, vec![t], 1.0).unwrap(), vec![y]).unwrap()
}

fn no_marks() -> MarkedPointPath {
    MarkedPointPath::new(RegimePath::new(0, vec![], 1.0).unwrap(), vec![]).unwrap()
}

#[test]
fn stock_without_jumps_grows_at_drift() {
    let m = MarketModel::single(fig1()).unwrap();
    let s = stock_path(&m, &no_marks(), 2.0).unwrap();
    assert!((s.terminal().exp() - 2.0 * (-0.05f64).exp()).abs() < 1e-14);
}

#[test]
fn exponential_mark_multiplies_stock_by_exp_y() {
    let m = MarketModel::single(fig1()).unwrap();
    let s = stock_path(&m, &one_mark(0.4, 0.3), 1.0).unwrap();
    assert!((s.value(0.4) - s.left_limit(0.4) - 0.3).abs() < 1e-15);
}

#[test]
fn mean_stock_matches_compensator_identity() {
    let s = single(fig1(), jumpdual::ConstraintSet::long_only());
    let e = estimate(&s, McConfig { paths: 100_000, seed: 1 }, |p| {
        Ok(stock_path(&s.model, p, 1.0)?.terminal().exp())
    })
    .unwrap();
    let expected = (-0.05 + (10.0 / 9.0 - 1.0f64)).exp();
    assert!(e.agrees_with(expected, 3.0, 0.0), "{} +- {} vs {expected}", e.mean, e.stderr);
}

#[test]
fn gross_wealth_special_cases() {
    let m = MarketModel::single(fig1()).unwrap();
    let cash = gross_wealth_log(&m, &PortfolioRule::constant(0.0), &one_mark(0.5, 0.2)).unwrap();
    assert!((cash.terminal() - 0.045).abs() < 1e-15);
    let pi = 1.5;
    let v = gross_wealth_log(&m, &PortfolioRule::constant(pi), &no_marks()).unwrap();
    let g = MarginModel::DifferentialRates { borrow_rate: 0.05 }.g(0.045, pi);
    assert!((v.terminal() - (0.045 + g + pi * (-0.05 - 0.045))).abs() < 1e-15);
    // full stock holding tracks S
    let p = one_mark(0.3, 0.25);
    let v = gross_wealth_log(&m, &PortfolioRule::constant(1.0), &p).unwrap();
    let s = stock_path(&m, &p, 1.0).unwrap();
    assert!((v.terminal() - s.terminal()).abs() < 1e-15);
}

#[test]
fn bankrupting_jump_is_reported() {
    let m = MarketModel::single(fig3()).unwrap();
    let err = gross_wealth_log(&m, &PortfolioRule::constant(2.0), &one_mark(0.6, -1.0)).unwrap_err();
    assert!(matches!(err, Error::Bankruptcy { index: 0, .. }), "{err}");
}

#[test]
fn log_optimal_consumption_scales_wealth() {
    let m = MarketModel::single(fig1()).unwrap();
    let path = one_mark(0.5, 0.1);
    let x = 3.0;
    let rule = PortfolioRule::constant(0.746);
    let w = wealth_path(x, &m, &rule, &ConsumptionRule::Proportional(x / 2.0), &path).unwrap();
    assert!((w.wealth[0] - x).abs() < 1e-15);
    let last = w.times.len() - 1;
    assert!((w.wealth[last] - x * w.gross[last] / 2.0).abs() < 1e-12 * w.wealth[last]);
    let zero = wealth_path(x, &m, &rule, &ConsumptionRule::None, &path).unwrap();
    for k in 0..zero.times.len() {
        assert!((zero.wealth[k] - x * zero.gross[k]).abs() <= 1e-15 * zero.wealth[k]);
    }
}

#[test]
fn heavy_consumption_ruins() {
    let m = MarketModel::single(fig1()).unwrap();
    let err = wealth_path(1.0, &m, &PortfolioRule::constant(0.5), &ConsumptionRule::Constant(2.0), &no_marks())
        .unwrap_err();
    assert!(matches!(err, Error::Ruin { time } if time > 0.4 && time < 0.6), "{err}");
}

#[test]
fn csv_has_header_and_one_row_per_point() {
    let m = MarketModel::single(fig1()).unwrap();
    let w = wealth_path_unchecked(1.0, 1.0, &m, &PortfolioRule::constant(0.5), &ConsumptionRule::None, &one_mark(0.5, 0.1), 11)
        .unwrap();
    let mut out = Vec::new();
    w.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("t,regime,S,V1pi0,xi,V\n"));
    assert_eq!(text.lines().count(), 1 + w.times.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refinement_does_not_move_shared_points(seed in 0u64..1000, pi in 0.0f64..1.0, c in 0.0f64..0.5) {
        let m = MarketModel::new([fig1(), calm()]).unwrap();
        let path = simulate_path(&m.generator(), &m.distributions(), 0, 1.0, seed, 0).unwrap();
        let rule = PortfolioRule::constant(pi);
        let cons = ConsumptionRule::Constant(c);
        let coarse = wealth_path_unchecked(1.0, 1.0, &m, &rule, &cons, &path, 5).unwrap();
        let fine = wealth_path_unchecked(1.0, 1.0, &m, &rule, &cons, &path, 9).unwrap();
        for (k, t) in coarse.times.iter().enumerate() {
            let j = fine.times.iter().position(|s| s == t).unwrap();
            prop_assert_eq!(coarse.wealth[k], fine.wealth[j]);
        }
        for k in 0..fine.times.len() {
            let v = fine.xi[k] * fine.gross[k];
            prop_assert!((fine.wealth[k] - v).abs() <= 1e-12 * v.abs().max(f64::MIN_POSITIVE));
        }
        let free = wealth_path_unchecked(1.0, 1.0, &m, &rule, &ConsumptionRule::None, &path, 9).unwrap();
        prop_assert!(free.wealth.iter().all(|&v| v > 0.0));
    }
}
