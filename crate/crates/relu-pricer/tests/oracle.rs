use proptest::prelude::*;

use relu_pricer::calculus::identity_net;
use relu_pricer::market::MarketParams;
use relu_pricer::oracle::{
    box_probe_points, exceedance, finite_difference, mc_price, normal_cdf, normal_quantile, price_integral,
    sample_points, sup_error_report, ApproxReport, PriceOracle, Sobol, MC_BATCH, SOBOL_MAX_DIM,
};
use relu_pricer::primitives::square_net;
use relu_pricer::Error;

/// Undiscounted call `E[(S_T − K)^+]` under the normalized model, in closed form.
fn call_closed_form(x: f64, k: f64) -> f64 {
    let d1 = ((x / k).ln() + 1.0) / 1.0;
    x * 0.5f64.exp() * normal_cdf(d1) - k * normal_cdf(d1 - 1.0)
}

#[test]
fn cdf_values() {
    assert_eq!(normal_cdf(0.0), 0.5);
    assert_eq!(normal_cdf(40.0), 1.0);
    assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() <= 1e-15);
    assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() <= 1e-15);
    // Lower tail keeps relative precision.
    let tail = normal_cdf(-30.0);
    assert!((tail - 4.906_713_927_148_187e-198).abs() <= 1e-12 * tail);
}

#[test]
fn cdf_symmetry() {
    for i in 0..1000 {
        let z = -8.0 + 16.0 * i as f64 / 999.0;
        assert!((normal_cdf(z) + normal_cdf(-z) - 1.0).abs() <= 1e-15, "z = {z}");
    }
}

#[test]
fn quantile_inverts_cdf() {
    assert_eq!(normal_quantile(0.5), 0.0);
    for u in [1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-9] {
        let z = normal_quantile(u);
        assert!((normal_cdf(z) - u).abs() <= 1e-12 * u.min(1.0 - u).max(1e-3), "u = {u}");
    }
}

#[test]
fn zero_strike_is_forward_price() {
    let params = MarketParams::uniform(1, 0.0, (0.5, 2.0), 1).unwrap();
    for x in [0.5, 1.0, 1.7] {
        let v = price_integral(&[x], &params).unwrap();
        let exact = 0.5f64.exp() * x;
        assert!((v - exact).abs() <= 1e-8 * exact, "x = {x}: {v} vs {exact}");
    }
}

#[test]
fn one_asset_matches_closed_form() {
    for (x, k) in [(1.0, 1.0), (0.9, 1.2), (1.1, 0.5), (2.0, 3.0)] {
        let params = MarketParams::uniform(1, k, (0.5, 2.5), 1).unwrap();
        let v = price_integral(&[x], &params).unwrap();
        let exact = call_closed_form(x, k);
        assert!((v - exact).abs() <= 1e-8, "x = {x}, K = {k}: {v} vs {exact}");
    }
}

#[test]
fn price_monotone_in_spot() {
    let params = MarketParams::uniform(2, 1.0, (0.5, 2.0), 1).unwrap();
    let mut prev = 0.0;
    for i in 0..20 {
        let s = 0.5 + 1.5 * i as f64 / 19.0;
        let v = price_integral(&[s, 1.0], &params).unwrap();
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn adding_an_asset_never_lowers_the_price() {
    let mut x = vec![1.0];
    let mut prev = price_integral(&x, &MarketParams::uniform(1, 1.0, (0.5, 2.0), 1).unwrap()).unwrap();
    for d in 2..=6 {
        x.push(0.6 + 0.1 * d as f64);
        let v = price_integral(&x, &MarketParams::uniform(d, 1.0, (0.5, 2.0), 1).unwrap()).unwrap();
        assert!(v >= prev - 1e-10, "d = {d}");
        prev = v;
    }
}

#[test]
fn price_rejects_bad_points() {
    let params = MarketParams::uniform(2, 1.0, (0.5, 2.0), 1).unwrap();
    assert!(matches!(price_integral(&[1.0], &params), Err(Error::DimensionMismatch(_))));
    assert!(matches!(price_integral(&[1.0, 0.0], &params), Err(Error::DomainError(_))));
    assert!(matches!(price_integral(&[1.0, f64::NAN], &params), Err(Error::DomainError(_))));
}

#[test]
fn exceedance_is_a_tail_probability() {
    let params = MarketParams::uniform(3, 1.0, (0.5, 2.0), 1).unwrap();
    let x = [0.8, 1.0, 1.3];
    let mut prev = 1.0;
    for i in 0..200 {
        let v = exceedance(i as f64 * 0.1, &x, &params);
        assert!((0.0..=1.0).contains(&v) && v <= prev);
        prev = v;
    }
    assert!(exceedance(1e6, &x, &params) < 1e-12);
}

#[test]
fn oracle_agrees_with_pointwise_integral() {
    let params = MarketParams::uniform(3, 1.0, (0.9, 1.1), 2).unwrap();
    let oracle = PriceOracle::new(&params, 0.9, 1.1).unwrap();
    assert_eq!(box_probe_points(3, 0.9, 1.1).len(), 9);
    for x in sample_points(3, 0.9, 1.1, 20, 7) {
        let a = oracle.price(&x).unwrap();
        let b = price_integral(&x, &params).unwrap();
        assert!((a - b).abs() <= 2e-8, "{x:?}: {a} vs {b}");
    }
}

#[test]
fn mc_degenerate_volatility() {
    let params = MarketParams { vol: 1e-12, ..MarketParams::uniform(2, 1.0, (0.5, 2.0), 1).unwrap() };
    let x = [1.2, 0.7];
    let est = mc_price(&x, &params, 1000, 1).unwrap();
    let exact = 1.2 * 0.5f64.exp() - 1.0;
    assert!((est.mean - exact).abs() <= 1e-9);
    assert!(est.std_error <= 1e-9);
}

#[test]
fn mc_is_deterministic() {
    let params = MarketParams::uniform(2, 1.0, (0.5, 2.0), 1).unwrap();
    let paths = MC_BATCH + 1234;
    let a = mc_price(&[1.0, 1.1], &params, paths, 42).unwrap();
    let b = mc_price(&[1.0, 1.1], &params, paths, 42).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    let c = mc_price(&[1.0, 1.1], &params, paths, 43).unwrap();
    assert_ne!(a.mean, c.mean);
    assert!(matches!(mc_price(&[1.0, 1.1], &params, 0, 1), Err(Error::InvalidArity(0))));
}

#[test]
fn mc_agrees_with_integral() {
    for (d, x) in [(1, vec![1.0]), (2, vec![0.9, 1.2]), (4, vec![1.0, 0.95, 1.05, 1.1])] {
        let params = MarketParams::uniform(d, 1.0, (0.5, 2.0), 1).unwrap();
        let est = mc_price(&x, &params, 400_000, 9).unwrap();
        let exact = price_integral(&x, &params).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "d = {d}: {} ± {} vs {exact}", est.mean, est.std_error);
    }
}

#[test]
fn finite_difference_examples() {
    assert!((finite_difference(|t| t * t, 1.3, 2, 1e-3).unwrap() - 2.0).abs() <= 1e-6);
    assert!((finite_difference(f64::sin, 0.0, 1, 1e-3).unwrap() - 1.0).abs() <= 1e-12);
    let d3 = finite_difference(f64::exp, 0.4, 3, 1e-2).unwrap();
    assert!((d3 - 0.4f64.exp()).abs() <= 1e-8);
    let d4 = finite_difference(f64::cos, 0.2, 4, 1e-2).unwrap();
    assert!((d4 - 0.2f64.cos()).abs() <= 1e-6);
    assert_eq!(finite_difference(f64::sin, 0.0, 0, 1e-3).unwrap(), 0.0);
    assert_eq!(finite_difference(f64::sin, 0.0, 5, 1e-3), Err(Error::OrderUnsupported(5)));
}

#[test]
fn sobol_stratifies_dyadic_intervals() {
    assert!(Sobol::new(0).is_err());
    assert!(Sobol::new(SOBOL_MAX_DIM + 1).is_err());
    let mut s = Sobol::new(SOBOL_MAX_DIM).unwrap();
    assert_eq!(s.next_point(), vec![0.0; SOBOL_MAX_DIM]);
    assert_eq!(s.next_point(), vec![0.5; SOBOL_MAX_DIM]);
    for m in [1u32, 4, 8] {
        let count = 1usize << m;
        let mut s = Sobol::new(SOBOL_MAX_DIM).unwrap();
        let pts: Vec<Vec<f64>> = (0..count).map(|_| s.next_point()).collect();
        for j in 0..SOBOL_MAX_DIM {
            let mut seen = vec![false; count];
            for p in &pts {
                seen[(p[j] * count as f64) as usize] = true;
            }
            assert!(seen.iter().all(|&b| b), "dimension {j}, 2^{m} points");
        }
    }
}

#[test]
fn sample_points_shape() {
    let pts = sample_points(3, 0.9, 1.1, 100, 5);
    assert_eq!(pts.len(), 100 + 8);
    assert!(pts.iter().all(|p| p.len() == 3 && p.iter().all(|v| (0.9..=1.1).contains(v))));
    assert_eq!(pts, sample_points(3, 0.9, 1.1, 100, 5));
    assert_ne!(pts, sample_points(3, 0.9, 1.1, 100, 6));
    let wide = sample_points(12, 0.9, 1.1, 10, 5);
    assert_eq!(wide.len(), 10 + (1 << 12));
}

#[test]
fn sup_error_examples() {
    let id = identity_net(1, 2);
    let report = sup_error_report(&id, |x| x[0], (0.0, 1.0), 1000, 1, 1e-12).unwrap();
    assert_eq!(report.sup_error, 0.0);
    assert!(report.passed);

    let eps = 2f64.powi(-8);
    let sq = square_net(eps).unwrap();
    let report = sup_error_report(&sq, |x| x[0] * x[0], (0.0, 1.0), 10_000, 3, eps).unwrap();
    assert!(report.sup_error <= eps && report.sup_error > 0.0);
    assert!(report.passed);
    assert_eq!(report.sample_count, 10_002);
    assert_eq!(report.network_metrics, sq.metrics());
    let err = (sq.realize_scalar(&report.argmax_point).unwrap() - report.argmax_point[0].powi(2)).abs();
    assert_eq!(err, report.sup_error);

    let again = sup_error_report(&sq, |x| x[0] * x[0], (0.0, 1.0), 10_000, 3, eps).unwrap();
    assert_eq!(report, again);
    let failing = sup_error_report(&sq, |x| x[0] * x[0], (0.0, 1.0), 10_000, 3, eps / 100.0).unwrap();
    assert!(!failing.passed);

    assert!(matches!(sup_error_report(&identity_net(2, 2), |_| 0.0, (0.0, 1.0), 10, 1, 1.0), Err(Error::DimensionMismatch(_))));
    assert!(matches!(sup_error_report(&sq, |_| 0.0, (0.0, 1.0), 0, 1, 1.0), Err(Error::InvalidArity(0))));
}

#[test]
fn report_serializations() {
    let sq = square_net(0.01).unwrap();
    let report = sup_error_report(&sq, |x| x[0] * x[0], (0.0, 1.0), 100, 3, 0.01).unwrap();
    let back: ApproxReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
    let row = report.to_csv_row();
    assert_eq!(row.split(',').count(), ApproxReport::CSV_HEADER.split(',').count());
    assert!(row.starts_with("1,102,3,0.01,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_monotone(a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(normal_cdf(lo) <= normal_cdf(hi));
    }

    #[test]
    fn call_price_within_no_arbitrage_bounds(x in 0.5..2.0f64, k in 0.1..3.0f64) {
        let params = MarketParams::uniform(1, k, (0.5, 2.0), 1).unwrap();
        let v = price_integral(&[x], &params).unwrap();
        let forward = x * 0.5f64.exp();
        prop_assert!(v >= (forward - k).max(0.0) - 1e-9 && v <= forward + 1e-9);
        prop_assert!((v - call_closed_form(x, k)).abs() <= 1e-8);
    }
}
