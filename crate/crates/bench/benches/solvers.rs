use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use jumpdual::frictions::conjugate_gk;
use jumpdual::policy::{h_inverse, h_value, h_value_quadrature, optimal_portfolio};
use jumpdual::{ConstraintSet, JumpDistribution, JumpTransform, MarginModel, RegimeMarketParams};

fn fig1() -> RegimeMarketParams {
    RegimeMarketParams {
        rate: 0.045,
        drift: -0.05,
        intensity: 1.0,
        jumps: JumpDistribution::exponential_positive(10.0).unwrap(),
        transform: JumpTransform::Exponential,
        margin: MarginModel::DifferentialRates { borrow_rate: 0.05 },
    }
}

fn fig3() -> RegimeMarketParams {
    RegimeMarketParams {
        rate: 0.03,
        drift: 0.07,
        intensity: 1.0,
        jumps: JumpDistribution::exponential_negative(10.0).unwrap(),
        transform: JumpTransform::Exponential,
        margin: MarginModel::ShortRebate { loan_fee: 0.05 },
    }
}

fn bench_h(c: &mut Criterion) {
    let p = fig1();
    c.bench_function("h_value mgf shortcut", |b| b.iter(|| h_value(&p, black_box(0.5), black_box(1.0))));
    c.bench_function("h_value quadrature", |b| {
        b.iter(|| h_value_quadrature(&p, black_box(0.5), black_box(1.3)))
    });
    let k = ConstraintSet::long_only();
    c.bench_function("h_inverse", |b| b.iter(|| h_inverse(&p, black_box(0.5), black_box(0.05), &k)));
}

fn bench_optimizers(c: &mut Criterion) {
    let (p1, k1) = (fig1(), ConstraintSet::long_only());
    let (p3, k3) = (fig3(), ConstraintSet::no_borrowing());
    c.bench_function("optimal_portfolio differential rates", |b| {
        b.iter(|| optimal_portfolio(&p1, black_box(0.5), &k1))
    });
    c.bench_function("optimal_portfolio short rebate", |b| {
        b.iter(|| optimal_portfolio(&p3, black_box(0.5), &k3))
    });
    c.bench_function("optimal_portfolio generic", |b| {
        b.iter(|| optimal_portfolio(&p1, black_box(0.5), &ConstraintSet::unconstrained()))
    });
    c.bench_function("conjugate_gk", |b| {
        b.iter(|| conjugate_gk(&p1.margin, p1.rate, &k1, black_box(0.047)))
    });
}

criterion_group!(benches, bench_h, bench_optimizers);
criterion_main!(benches);
