//! Reference evaluators: normal CDF, the semi-explicit price integral, Monte
//! Carlo prices, finite differences and sup-error reports.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::network::{NetworkMetrics, NeuralNetwork};
use crate::par;
use crate::quadrature::{practical_rule_family, PracticalOptions, QuadratureRule};

/// Accuracy targeted by [`price_integral`] and [`PriceOracle`].
pub const PRICE_TOLERANCE: f64 = 1e-8;

/// Standard normal distribution function `Φ(z) = ½ erfc(−z/√2)`.
///
/// The complementary error function keeps full relative precision in the
/// lower tail, so no separate reflection is needed for `z < 0`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`normal_cdf`] on `(0, 1)`.
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
}

/// `c ↦ 1 − Π_i Φ((ln((c + K_i)/x_i) − (μ − σ²/2)T)/(σ√T))`, the probability
/// that the payoff exceeds `c`.
pub fn exceedance(c: f64, x: &[f64], params: &MarketParams) -> f64 {
    let drift = params.log_drift();
    let vol = params.log_vol();
    let prod: f64 = x
        .iter()
        .zip(&params.strikes)
        .map(|(&xi, &k)| normal_cdf((((c + k) / xi).ln() - drift) / vol))
        .product();
    1.0 - prod
}

fn check_point(x: &[f64], params: &MarketParams) -> Result<()> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch(format!("point has {} coordinates, model has {}", x.len(), params.dim())));
    }
    if let Some(&v) = x.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::DomainError(format!("spot {v} must be positive")));
    }
    Ok(())
}

fn quadrature_options(params: &MarketParams) -> PracticalOptions {
    let scale = params.strikes.iter().fold(1.0f64, |m, &k| m.max(k));
    PracticalOptions { initial_limit: scale, max_cells: 1 << 20, ..PracticalOptions::default() }
}

/// Price `u(0, x) = ∫₀^∞ P(payoff > c) dc` to about [`PRICE_TOLERANCE`].
pub fn price_integral(x: &[f64], params: &MarketParams) -> Result<f64> {
    check_point(x, params)?;
    let g = |c: f64| exceedance(c, x, params);
    let rule = practical_rule_family(&[&g], PRICE_TOLERANCE, &quadrature_options(params))?;
    Ok(rule.apply(g))
}

/// Price oracle with one quadrature rule planned for a whole box of spots,
/// for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PriceOracle {
    params: MarketParams,
    rule: QuadratureRule,
}

impl PriceOracle {
    /// Plan on the corners and center of `[lo, hi]^d`.
    pub fn new(params: &MarketParams, lo: f64, hi: f64) -> Result<Self> {
        params.validate()?;
        let points = box_probe_points(params.dim(), lo, hi);
        for p in &points {
            check_point(p, params)?;
        }
        let closures: Vec<_> = points.iter().map(|p| move |c: f64| exceedance(c, p, params)).collect();
        let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = closures.iter().map(|g| g as _).collect();
        let rule = practical_rule_family(&refs, PRICE_TOLERANCE, &quadrature_options(params))?;
        Ok(Self { params: params.clone(), rule })
    }

    pub fn price(&self, x: &[f64]) -> Result<f64> {
        check_point(x, &self.params)?;
        Ok(self.rule.apply(|c| exceedance(c, x, &self.params)))
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }
}

/// Corners of `[lo, hi]^d` (at most `2^12` of them) followed by the center.
pub fn box_probe_points(d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let corners = 1usize << d.min(12);
    let mut pts: Vec<Vec<f64>> =
        (0..corners).map(|m| (0..d).map(|i| if (m >> i) & 1 == 1 { hi } else { lo }).collect()).collect();
    pts.push(vec![0.5 * (lo + hi); d]);
    pts
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: u64,
    pub seed: u64,
}

/// Paths per RNG substream.
pub const MC_BATCH: u64 = 1 << 16;

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Plain Monte Carlo price of the maximum option.
///
/// Each batch of [`MC_BATCH`] paths draws from ChaCha8 stream `b` of the
/// master seed, with normals by inverse transform, so the estimate depends
/// only on `(paths, seed)` and not on the thread count.
pub fn mc_price(x: &[f64], params: &MarketParams, paths: u64, seed: u64) -> Result<McEstimate> {
    check_point(x, params)?;
    if paths == 0 {
        return Err(Error::InvalidArity(0));
    }
    let drift = params.log_drift();
    let vol = params.log_vol();
    let batches = paths.div_ceil(MC_BATCH) as usize;
    let sums = par::map_range(batches, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let count = MC_BATCH.min(paths - b as u64 * MC_BATCH);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let mut best = 0.0f64;
            for (&xi, &k) in x.iter().zip(&params.strikes) {
                let z = normal_quantile(unit_open(&mut rng));
                best = best.max(xi * (drift + vol * z).exp() - k);
            }
            s1 += best;
            s2 += best * best;
        }
        (s1, s2)
    });
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = paths as f64;
    let mean = s1 / n;
    let var = if paths > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), paths, seed })
}

const FD1: [f64; 7] = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
const FD2: [f64; 7] = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
const FD3: [f64; 9] = [
    -7.0 / 240.0,
    3.0 / 10.0,
    -169.0 / 120.0,
    61.0 / 30.0,
    0.0,
    -61.0 / 30.0,
    169.0 / 120.0,
    -3.0 / 10.0,
    7.0 / 240.0,
];
const FD4: [f64; 9] = [
    7.0 / 240.0,
    -2.0 / 5.0,
    169.0 / 60.0,
    -122.0 / 15.0,
    91.0 / 8.0,
    -122.0 / 15.0,
    169.0 / 60.0,
    -2.0 / 5.0,
    7.0 / 240.0,
];

/// Steps used by the regularity checks: small enough for the truncation
/// error, large enough that cancellation stays below `1e−6` relative.
pub const FD_STEPS: [f64; 4] = [1e-3, 1e-3, 3e-3, 1e-2];

/// Default step for [`finite_difference`] of the given order (1 to 4).
pub fn default_fd_step(order: usize) -> f64 {
    FD_STEPS[order.clamp(1, 4) - 1]
}

/// Sixth-order central difference estimate of the `order`‑th derivative.
pub fn finite_difference(f: impl Fn(f64) -> f64, t: f64, order: usize, step: f64) -> Result<f64> {
    let stencil: &[f64] = match order {
        0 => return Ok(f(t)),
        1 => &FD1,
        2 => &FD2,
        3 => &FD3,
        4 => &FD4,
        _ => return Err(Error::OrderUnsupported(order)),
    };
    let half = (stencil.len() / 2) as i32;
    let s: f64 = stencil
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| c * f(t + (i as i32 - half) as f64 * step))
        .sum();
    Ok(s / step.powi(order as i32))
}

/// Number of dimensions with built-in Sobol direction numbers.
pub const SOBOL_MAX_DIM: usize = 10;

// (degree s, polynomial a, initial m_1..m_s) for dimensions 2..=10.
const SOBOL_PARAMS: [(u32, u32, &[u32]); 9] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
];

/// Base-2 Sobol sequence (Gray-code order, 32 bits) with an optional
/// digital shift.
#[derive(Clone, Debug)]
pub struct Sobol {
    directions: Vec<[u32; 32]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u32,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        Self::scrambled(dim, None)
    }

    /// Digital shift drawn from `seed` when given.
    pub fn scrambled(dim: usize, seed: Option<u64>) -> Result<Self> {
        if dim == 0 || dim > SOBOL_MAX_DIM {
            return Err(Error::DimensionMismatch(format!("Sobol dimension {dim} outside 1..={SOBOL_MAX_DIM}")));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; 32];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (31 - i);
        }
        directions.push(first);
        for &(s, a, m) in SOBOL_PARAMS.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; 32];
            for i in 0..s {
                v[i] = m[i] << (31 - i);
            }
            for i in s..32 {
                let mut x = v[i - s] ^ (v[i - s] >> s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        x ^= v[i - k];
                    }
                }
                v[i] = x;
            }
            directions.push(v);
        }
        let shift = match seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..dim).map(|_| rng.next_u32()).collect()
            }
            None => vec![0; dim],
        };
        Ok(Self { directions, state: vec![0; dim], shift, index: 0 })
    }

    /// Next point in `[0, 1)^dim`; the unshifted sequence starts at the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        let scale = 1.0 / 4_294_967_296.0;
        let out = self.state.iter().zip(&self.shift).map(|(&x, &s)| (x ^ s) as f64 * scale).collect();
        let c = self.index.trailing_ones() as usize;
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c.min(31)];
        }
        self.index = self.index.wrapping_add(1);
        out
    }
}

/// Most box corners included by [`sample_points`].
pub const MAX_CORNERS: usize = 1 << 20;

/// Deterministic sample set in `[lo, hi]^d`: `⌈samples/2⌉` shifted Sobol
/// points (uniform random beyond [`SOBOL_MAX_DIM`]), the remaining samples
/// uniform random, then the box corners.
pub fn sample_points(d: usize, lo: f64, hi: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let map = |u: f64| lo + (hi - lo) * u;
    let low_disc = samples.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut pts = Vec::with_capacity(samples + (1 << d.min(20)));
    if d <= SOBOL_MAX_DIM {
        let mut sobol = Sobol::scrambled(d, Some(seed)).expect("dimension checked");
        for _ in 0..low_disc {
            pts.push(sobol.next_point().into_iter().map(map).collect());
        }
    } else {
        for _ in 0..low_disc {
            pts.push((0..d).map(|_| map(unit_open(&mut rng))).collect());
        }
    }
    for _ in low_disc..samples {
        pts.push((0..d).map(|_| map(unit_open(&mut rng))).collect());
    }
    let corners = if d >= 20 { MAX_CORNERS } else { (1usize << d).min(MAX_CORNERS) };
    for m in 0..corners {
        pts.push((0..d).map(|i| if i < usize::BITS as usize && (m >> i) & 1 == 1 { hi } else { lo }).collect());
    }
    pts
}

/// Outcome of comparing a network against a reference on a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub sup_error: f64,
    pub argmax_point: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
    pub network_metrics: NetworkMetrics,
    pub target_eps: f64,
    pub passed: bool,
}

impl ApproxReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str = "dim_in,sample_count,seed,target_eps,sup_error,M,L,passed";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.network_metrics.dim_in,
            self.sample_count,
            self.seed,
            self.target_eps,
            self.sup_error,
            self.network_metrics.size,
            self.network_metrics.depth,
            self.passed
        )
    }
}

/// Sup of `|net(x) − reference(x)|` over [`sample_points`] of `[lo, hi]^d`.
pub fn sup_error_report(
    net: &NeuralNetwork,
    reference: impl Fn(&[f64]) -> f64 + Sync + Send,
    domain: (f64, f64),
    samples: usize,
    seed: u64,
    target_eps: f64,
) -> Result<ApproxReport> {
    if samples == 0 {
        return Err(Error::InvalidArity(0));
    }
    if net.dim_out() != 1 {
        return Err(Error::DimensionMismatch(format!("network has {} outputs", net.dim_out())));
    }
    let pts = sample_points(net.dim_in(), domain.0, domain.1, samples, seed);
    let errs = par::map_slice(&pts, |p| net.realize_scalar(p).map(|v| (v - reference(p)).abs()));
    let mut sup_error = 0.0;
    let mut arg = 0;
    for (i, e) in errs.into_iter().enumerate() {
        let e = e?;
        if e > sup_error || e.is_nan() {
            sup_error = e;
            arg = i;
            if e.is_nan() {
                break;
            }
        }
    }
    Ok(ApproxReport {
        sup_error,
        argmax_point: pts[arg].clone(),
        sample_count: pts.len(),
        seed,
        network_metrics: net.metrics(),
        target_eps,
        passed: sup_error <= target_eps,
    })
}
