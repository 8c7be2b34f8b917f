//! Independent oracles: quadrature, bisection and distributional checks that
//! share no code path with the closed forms under test.

use mvexpectile::expectile::{self_term, solve_multivariate_expectile, univariate_expectile};
use mvexpectile::quad::{integrate, integrate_power_tail};
use mvexpectile::simulation::{draw_sample, median};
use mvexpectile::{Dependence, ExpectileProblem, Family, MarginSpec};

fn margins() -> Vec<MarginSpec> {
    vec![
        MarginSpec::pareto(2.0, 10.0).unwrap(),
        MarginSpec::pareto(3.5, 1.0).unwrap(),
        MarginSpec::burr(4.0, 10.0, 0.75).unwrap(),
        MarginSpec::burr(1.5, 2.0, 2.0).unwrap(),
        MarginSpec::student(1.0, 2.0).unwrap(),
        MarginSpec::student(2.0, 3.5).unwrap(),
        MarginSpec::new(
            Family::Pareto {
                shape: 2.5,
                scale: 3.0,
            },
            -4.0,
            2.0,
        )
        .unwrap(),
    ]
}

/// Plain bisection on a decreasing function.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn partial_moments_match_quadrature() {
    for m in margins() {
        let theta = m.tail_index();
        let lower = m.support_lower();
        let span = m.scale_multiplier() * 50.0;
        for i in 0..12 {
            let x = if lower.is_finite() {
                lower + m.scale_multiplier() * (0.01 + 3.0 * i as f64)
            } else {
                -span + 2.0 * span * i as f64 / 11.0
            };
            // E[(X - x)_+] = ∫_x^∞ P(X > t) dt.
            let upper = integrate_power_tail(|t| m.survival(t), x, theta, 1e-12).value;
            let closed = m.upper_partial_moment(x);
            assert!(
                (closed / upper - 1.0).abs() < 1e-9,
                "{m:?} x={x}: {closed} vs {upper}"
            );
            // E[(x - X)_+] = ∫_{-∞}^x P(X <= t) dt.
            let lower_pm = if lower.is_finite() {
                integrate(|t| m.cdf(t), lower, x, 0.0, 1e-13, 2000).value
            } else {
                integrate_power_tail(|s| m.cdf(-s), -x, theta, 1e-12).value
            };
            let closed = m.lower_partial_moment(x);
            assert!(
                (closed - lower_pm).abs() <= 1e-9 * closed.abs().max(1e-3),
                "{m:?} x={x}: {closed} vs {lower_pm}"
            );
        }
    }
}

#[test]
fn means_match_quadrature() {
    for m in margins() {
        let lower = m.support_lower();
        let theta = m.tail_index();
        let quad = if lower.is_finite() {
            lower + integrate_power_tail(|t| m.survival(t), lower, theta, 1e-12).value
        } else {
            m.location() + integrate_power_tail(|t| m.survival(t), m.location(), theta, 1e-12).value
                - integrate_power_tail(|s| m.cdf(-s), -m.location(), theta, 1e-12).value
        };
        assert!(
            (m.mean() - quad).abs() <= 1e-9 * quad.abs().max(1.0),
            "{m:?}"
        );
    }
}

#[test]
fn pseudo_inverse_matches_numeric_quantile() {
    let pairs = [
        (
            MarginSpec::pareto(2.0, 15.0).unwrap(),
            MarginSpec::pareto(2.0, 10.0).unwrap(),
        ),
        (
            MarginSpec::burr(4.0, 15.0, 0.75).unwrap(),
            MarginSpec::burr(4.0, 10.0, 0.75).unwrap(),
        ),
        (
            MarginSpec::student(2.0, 2.0).unwrap(),
            MarginSpec::student(1.0, 2.0).unwrap(),
        ),
    ];
    for (mi, mj) in pairs {
        for &x in &[0.5, 3.0, 40.0, 1e4] {
            // Survival keeps relative precision in the far tail.
            let q = mj.survival(x);
            let oracle = bisect(|y| mi.survival(y) - q, -1e9, 1e9);
            let mu = mi.pseudo_inverse_match(&mj, x);
            assert!(
                (mu / oracle - 1.0).abs() < 1e-8,
                "{mi:?} x={x}: {mu} vs {oracle}"
            );
        }
    }
}

#[test]
fn univariate_expectile_matches_bisection() {
    for m in margins() {
        for &alpha in &[0.1, 0.5, 0.9, 0.999] {
            let oracle = bisect(|x| self_term(alpha, &m, x), -1e6, 1e8);
            let e = univariate_expectile(&m, alpha, 1e-14).unwrap();
            assert!(
                (e - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
                "{m:?} α={alpha}"
            );
        }
    }
}

#[test]
fn symmetric_independent_pair_matches_scalar_oracle() {
    let m = MarginSpec::pareto(2.0, 10.0).unwrap();
    let alpha = 0.99;
    let scalar = |x: f64| {
        let (u, l, s) = (
            m.upper_partial_moment(x),
            m.lower_partial_moment(x),
            m.survival(x),
        );
        alpha * u - (1.0 - alpha) * l + alpha * s * u - (1.0 - alpha) * (1.0 - s) * l
    };
    let oracle = bisect(scalar, 0.0, 1e6);
    let prob = ExpectileProblem::l1(vec![m.clone(), m], Dependence::Independent, alpha).unwrap();
    let sol = solve_multivariate_expectile(&prob, 1e-10, 100).unwrap();
    for x in sol.point {
        assert!((x / oracle - 1.0).abs() < 1e-9, "{x} vs {oracle}");
    }
}

#[test]
fn comonotonic_identical_margins_reduce_to_univariate() {
    for m in margins() {
        for &alpha in &[0.3, 0.5, 0.95, 0.9999] {
            let oracle = bisect(|x| self_term(alpha, &m, x), -1e6, 1e8);
            let prob =
                ExpectileProblem::l1(vec![m.clone(); 3], Dependence::Comonotonic, alpha).unwrap();
            let sol = solve_multivariate_expectile(&prob, 1e-10, 100).unwrap();
            for x in sol.point {
                assert!(
                    (x - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
                    "{m:?} α={alpha}"
                );
            }
        }
    }
}

#[test]
fn burr_univariate_expectile_asymptotics() {
    let m = MarginSpec::burr(4.0, 10.0, 0.75).unwrap();
    let alpha = 1.0 - 1e-6;
    let ratio = univariate_expectile(&m, alpha, 1e-14).unwrap() / m.quantile(alpha).unwrap();
    let target = 2f64.powf(-1.0 / 3.0);
    assert!((ratio / target - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn samples_pass_kolmogorov_smirnov() {
    let n = 20_000;
    let critical = 1.63 / (n as f64).sqrt();
    let ms = margins();
    let sample = draw_sample(&ms, Dependence::Independent, n, 99).unwrap();
    for (j, m) in ms.iter().enumerate() {
        let mut col = sample.column(j);
        col.sort_by(f64::total_cmp);
        let d = col
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = m.cdf(x);
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < critical, "{m:?}: D={d}");
    }
}

#[test]
fn pareto_sample_mean() {
    let m = vec![MarginSpec::pareto(2.0, 10.0).unwrap()];
    let means = (0..100).map(|seed| {
        let s = draw_sample(&m, Dependence::Independent, 100_000, seed).unwrap();
        s.column(0).iter().sum::<f64>() / 100_000.0
    });
    let med = median(means);
    assert!((med / 10.0 - 1.0).abs() < 0.03, "median mean {med}");
}
