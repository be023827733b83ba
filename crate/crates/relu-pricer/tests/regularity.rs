use proptest::prelude::*;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relu_pricer::oracle::{default_fd_step, finite_difference, normal_cdf};
use relu_pricer::regularity::{
    alpha_coeffs, cdf_derivative_bound, cdf_log_derivative, f_d_derivative_bound, factorial_bound, gamma_coeffs,
    h_derivative_bound, h_derivatives, ln_cdf_derivative_bound, ln_f_d_derivative_bound, log_power_thresholds,
    MAX_ALPHA_ORDER, MAX_BOUND_ORDER, MAX_COEFF_ORDER,
};
use relu_pricer::Error;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn f(t: f64) -> f64 {
    normal_cdf(t.ln())
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

#[test]
fn gamma_examples() {
    let g = gamma_coeffs(5).unwrap();
    assert_eq!(g.get(1, 0), 1);
    assert_eq!((g.get(2, 0), g.get(2, 1)), (-1, -1));
    assert!(g.row(5).iter().map(|v| v.abs()).sum::<i128>() <= 384);
    assert_eq!(gamma_coeffs(MAX_COEFF_ORDER + 1).unwrap_err(), Error::OrderTooLarge(MAX_COEFF_ORDER + 1));
}

#[test]
fn alpha_examples() {
    let a = alpha_coeffs(4).unwrap();
    assert_eq!(a.get(1, 1), -1);
    assert_eq!((a.get(2, 1), a.get(2, 2)), (2, 1));
    assert!(a.row(4).iter().map(|v| v.abs()).max().unwrap() <= 192);
    assert_eq!(alpha_coeffs(MAX_ALPHA_ORDER + 1).unwrap_err(), Error::OrderTooLarge(MAX_ALPHA_ORDER + 1));
}

#[test]
fn coefficient_growth() {
    let g = gamma_coeffs(15).unwrap();
    let a = alpha_coeffs(15).unwrap();
    for m in 1..=15 {
        let two = 1i128 << (m - 1);
        assert_eq!(g.row(m).len(), m);
        assert!(g.row(m).iter().map(|v| v.abs()).sum::<i128>() <= factorial(m - 1) * two, "gamma row {m}");
        assert_eq!(a.row(m).len(), m);
        assert!(a.row(m).iter().map(|v| v.abs()).max().unwrap() <= two * factorial(m), "alpha row {m}");
    }
}

#[test]
fn log_derivative_examples() {
    assert!((cdf_log_derivative(1, 1.0).unwrap() - FRAC_1_SQRT_2PI).abs() <= 1e-15);
    assert_eq!(cdf_log_derivative(0, 1.0).unwrap(), 0.5);
    let fd = finite_difference(f, 0.7, 3, default_fd_step(3)).unwrap();
    let v = cdf_log_derivative(3, 0.7).unwrap();
    assert!((v - fd).abs() <= 1e-6 * v.abs(), "{v} vs {fd}");
    assert!(matches!(cdf_log_derivative(2, 0.0), Err(Error::DomainError(_))));
    assert!(matches!(cdf_log_derivative(2, -1.0), Err(Error::DomainError(_))));
}

#[test]
fn log_derivatives_match_finite_differences() {
    for n in 1..=4 {
        for t in [0.5, 1.0, 2.0] {
            let v = cdf_log_derivative(n, t).unwrap();
            let fd = finite_difference(f, t, n, default_fd_step(n)).unwrap();
            assert!((v - fd).abs() / v.abs().max(1.0) <= 1e-6, "n = {n}, t = {t}: {v} vs {fd}");
        }
    }
}

#[test]
fn h_examples() {
    assert!((h_derivatives(0, 1.5, 1.0, 0.5).unwrap()[0] - 0.5).abs() <= 1e-16);
    let d1 = h_derivatives(1, 1.0, 0.0, 1.0).unwrap()[1];
    assert!((d1 + FRAC_1_SQRT_2PI).abs() <= 1e-15);
    assert!(matches!(h_derivatives(2, 0.0, 1.0, 1.0), Err(Error::DomainError(_))));
}

#[test]
fn h_matches_finite_differences() {
    for (k, c) in [(1.0, 0.5), (0.0, 1.0), (2.0, 3.0)] {
        let h = |x: f64| normal_cdf(((k + c) / x).ln());
        for x in [0.8, 1.2] {
            let vals = h_derivatives(4, x, k, c).unwrap();
            assert!((vals[0] - h(x)).abs() <= 1e-14 * h(x));
            for n in 1..=4 {
                let fd = finite_difference(h, x, n, default_fd_step(n)).unwrap();
                assert!((vals[n] - fd).abs() <= 1e-6 * vals[n].abs(), "K = {k}, c = {c}, x = {x}, n = {n}: {} vs {fd}", vals[n]);
            }
        }
    }
}

#[test]
fn derivative_bound_examples() {
    // sup_t |f'(t)| = e^{1/2}/√(2π), attained at t = e^{−1}.
    let sup1 = FRAC_1_SQRT_2PI * 0.5f64.exp();
    let b1 = cdf_derivative_bound(1).unwrap();
    assert!(b1 >= sup1 && b1 >= 0.5);
    for n in 1..=10 {
        let b = cdf_derivative_bound(n).unwrap();
        assert!(b.is_finite() && b >= factorial_bound(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bounds: Vec<f64> = (1..=6).map(|n| cdf_derivative_bound(n).unwrap()).collect();
    for _ in 0..1000 {
        let t = uniform(&mut rng, 1e-9, 10.0);
        for n in 1..=6 {
            assert!(cdf_log_derivative(n, t).unwrap().abs() <= bounds[n - 1], "n = {n}, t = {t}");
        }
    }
}

#[test]
fn bounds_stay_finite_in_log_domain() {
    let mut prev = 0.0;
    for n in (1..=MAX_BOUND_ORDER).step_by(37) {
        let ln = ln_cdf_derivative_bound(n).unwrap();
        assert!(ln.is_finite() && ln >= prev, "order {n}");
        prev = ln;
    }
    assert!(ln_cdf_derivative_bound(MAX_BOUND_ORDER + 1).is_err());
    assert!(ln_f_d_derivative_bound(64, 4, 0.9).unwrap().is_finite());
}

#[test]
fn h_bound_examples() {
    let (n, a, b, k, c) = (3, 0.9, 1.1, 1.0, 2.0);
    let bound = h_derivative_bound(n, a, b, k, c).unwrap();
    let mut measured: f64 = 0.0;
    for i in 0..1000 {
        let x = a + (b - a) * i as f64 / 999.0;
        for v in h_derivatives(n, x, k, c).unwrap() {
            measured = measured.max(v.abs());
        }
    }
    assert!(bound >= measured);
    assert!(h_derivative_bound(n, a, b, k, 10.0).unwrap() >= h_derivative_bound(n, a, b, k, 1.0).unwrap());
    assert_eq!(h_derivative_bound(n, 1.1, 0.9, k, c), Err(Error::InvalidInterval(1.1, 0.9)));
}

#[test]
fn f_d_bound_examples() {
    let (d, a, k) = (2, 0.9, 1.0);
    let s2 = f_d_derivative_bound(2, d, a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let c = uniform(&mut rng, 0.05, 5.0);
        let x: Vec<f64> = (0..d).map(|_| uniform(&mut rng, a, 1.1)).collect();
        let big_f = |c: f64| 1.0 - x.iter().map(|xi| normal_cdf(((k + c) / xi).ln())).product::<f64>();
        let fd = finite_difference(big_f, c, 2, default_fd_step(2)).unwrap();
        assert!(fd.abs() <= s2, "c = {c}: {fd} > {s2}");
    }
    for n in 1..=6 {
        let one = f_d_derivative_bound(n, 3, 0.9).unwrap();
        let two = f_d_derivative_bound(n, 6, 0.9).unwrap();
        assert!((two - 2f64.powi(n as i32) * one).abs() <= 1e-12 * two);
    }
    let b = f_d_derivative_bound(1, 1, 1.0).unwrap();
    assert_eq!(b, 1.0);
    assert!(b >= FRAC_1_SQRT_2PI);
}

#[test]
fn log_power_helper() {
    for r in [1.0, 2.0, 3.0] {
        let (lo, hi) = log_power_thresholds(r);
        for i in 0..200 {
            let s = lo * 10f64.powf(-(i as f64) / 20.0);
            assert!(s.ln().abs() <= s.powf(-1.0 / r), "r = {r}, t = {s}");
            let t = hi * 10f64.powf(i as f64 / 20.0);
            assert!(t.ln() <= t.powf(1.0 / r), "r = {r}, t = {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn base_value_is_the_cdf(x in 0.5..2.0f64, k in 0.0..3.0f64, c in 0.01..5.0f64) {
        let h0 = h_derivatives(0, x, k, c).unwrap()[0];
        let expected = normal_cdf(((k + c) / x).ln());
        prop_assert!((h0 - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn f_d_bounds_are_finite(n in 1usize..12, d in 1usize..16, a in 0.1..2.0f64) {
        match f_d_derivative_bound(n, d, a) {
            Ok(s) => prop_assert!(s.is_finite() && s >= 0.0),
            Err(e) => prop_assert!(matches!(e, Error::Overflow(_))),
        }
        prop_assert!(ln_f_d_derivative_bound(n, d, a).unwrap().is_finite());
    }

    #[test]
    fn h_bound_dominates_samples(n in 1usize..6, x in 0.9..1.1f64, k in 0.0..2.0f64, c in 0.01..20.0f64) {
        let bound = h_derivative_bound(n, 0.9, 1.1, k, c).unwrap();
        for v in h_derivatives(n, x, k, c).unwrap() {
            prop_assert!(v.abs() <= bound);
        }
    }
}
