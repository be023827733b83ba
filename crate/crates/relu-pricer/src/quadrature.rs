//! Composite Gauss–Legendre quadrature on `[0, N]`, its a-priori error bound,
//! the truncation level and node count budgets, and an adaptive planner.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Largest supported number of Gauss points per cell.
pub const MAX_GAUSS_ORDER: usize = 64;

/// Nodes and positive weights of a composite rule on `[0, N]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub upper_limit: f64,
    pub order: usize,
    pub cells: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_j g(c_j)`, accumulated in node order.
    pub fn apply(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&c, &w)| w * g(c)).sum()
    }

    /// Same value as [`apply`](Self::apply) with node evaluations fanned out;
    /// the final sum is still taken in node order.
    pub fn apply_par(&self, g: impl Fn(f64) -> f64 + Sync + Send) -> f64 {
        let vals = par::map_slice(&self.nodes, |&c| g(c));
        vals.iter().zip(&self.weights).map(|(v, w)| w * v).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights on `[−1, 1]`.
///
/// Roots are found by Newton iteration from Chebyshev seeds, stopping once a
/// step falls below `1e−15` (at most 100 iterations).
pub fn gauss_legendre_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_GAUSS_ORDER {
        return Err(Error::OrderUnsupported(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Composite rule with `n` Gauss points on each of `M` equal cells of `[0, N]`.
pub fn composite_rule(n: usize, cells: usize, upper: f64) -> Result<QuadratureRule> {
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::InvalidLimit(upper));
    }
    if cells == 0 {
        return Err(Error::InvalidArity(0));
    }
    let (gx, gw) = gauss_legendre_rule(n)?;
    let h = upper / cells as f64;
    let mut nodes = Vec::with_capacity(n * cells);
    let mut weights = Vec::with_capacity(n * cells);
    for k in 0..cells {
        let left = k as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(left + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Ok(QuadratureRule { nodes, weights, upper_limit: upper, order: n, cells })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `S/(2n)! · N^{2n+1} M^{−2n}`, bounding the composite error for an
/// integrand with `sup|g^{(2n)}| ≤ S`.
pub fn quad_error_bound(n: usize, cells: usize, upper: f64, sup_deriv_2n: f64) -> f64 {
    if sup_deriv_2n == 0.0 {
        return 0.0;
    }
    let two_n = 2 * n;
    let ln = sup_deriv_2n.ln() - ln_factorial(two_n) + (two_n + 1) as f64 * upper.ln()
        - two_n as f64 * (cells as f64).ln();
    ln.exp()
}

/// `2e^{2(n+1)} (b+1)^{1+1/n} d^{1/n} ε^{−1/n}`: beyond this level the tail
/// of `c ↦ F_d(c, x)` integrates to at most `ε`.
pub fn truncation_level(n: usize, b: f64, d: usize, eps: f64) -> f64 {
    let nf = n as f64;
    2.0 * (2.0 * (nf + 1.0)).exp() * (b + 1.0).powf(1.0 + 1.0 / nf) * (d as f64).powf(1.0 / nf) * eps.powf(-1.0 / nf)
}

/// `ln` of the bracket inside the node count, so callers can inspect budgets
/// far beyond integer range.
pub fn ln_quad_count_argument(n: usize, d: usize, eps: f64, s_2n: f64, b: f64) -> f64 {
    ln_quad_count_argument_from_ln(n, d, eps, s_2n.ln(), b)
}

/// [`ln_quad_count_argument`] taking `ln S` instead of `S`.
pub fn ln_quad_count_argument_from_ln(n: usize, d: usize, eps: f64, ln_s_2n: f64, b: f64) -> f64 {
    let upper = truncation_level(n, b, d, eps / 2.0);
    let two_n = 2 * n;
    let ln = (two_n + 1) as f64 * upper.ln() + ln_s_2n + two_n as f64 * (d as f64).ln() + (2.0 / eps).ln()
        - ln_factorial(two_n);
    ln / two_n as f64
}

/// `Q = n ⌈((2n)!⁻¹ N^{2n+1} S d^{2n} 2/ε)^{1/(2n)}⌉` with `N` the truncation
/// level at `ε/2`; `s_2n` bounds the `2n`‑th derivative of the one-asset
/// integrand and is scaled by `d^{2n}` here.
pub fn quad_count(n: usize, d: usize, eps: f64, s_2n: f64, b: f64) -> Result<u64> {
    let cells = ln_quad_count_argument(n, d, eps, s_2n, b).exp().ceil();
    let limit = (1u64 << 53) as f64 / n as f64;
    if !(cells <= limit) {
        return Err(Error::Overflow(format!("node count for n = {n}, d = {d}, eps = {eps}")));
    }
    Ok(n as u64 * cells as u64)
}

/// Planner settings for [`practical_rule`] and [`practical_rule_family`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PracticalOptions {
    /// Gauss points per cell.
    pub order: usize,
    /// Smallest truncation level; candidates are `initial_limit · 2^k`.
    pub initial_limit: f64,
    pub max_doublings: usize,
    /// Largest cell count of a returned rule.
    pub max_cells: usize,
    /// Cells used to integrate the tail segment `[N/2, N]`.
    pub tail_cells: usize,
    /// Widest cell of a returned rule, so that coarse rules cannot step over
    /// the bulk of the integrand.
    pub max_cell_width: f64,
}

impl Default for PracticalOptions {
    fn default() -> Self {
        Self { order: 6, initial_limit: 1.0, max_doublings: 30, max_cells: 1 << 16, tail_cells: 32, max_cell_width: 4.0 }
    }
}

fn segment(order: usize, cells: usize, lo: f64, hi: f64, g: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let (gx, gw) = gauss_legendre_rule(order).expect("validated order");
    let h = (hi - lo) / cells as f64;
    let mut s = 0.0;
    for k in 0..cells {
        let left = lo + k as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            s += 0.5 * h * w * g(left + 0.5 * h * (x + 1.0));
        }
    }
    s
}

/// Adaptive rule for a single integrand; see [`practical_rule_family`].
pub fn practical_rule(
    integrand: &(dyn Fn(f64) -> f64 + Sync),
    eps: f64,
    options: &PracticalOptions,
) -> Result<QuadratureRule> {
    practical_rule_family(&[integrand], eps, options)
}

/// One rule serving every integrand of a family.
///
/// Truncation levels `N = N₀2^k` are admissible once the segment `[N/2, N]`
/// integrates below `ε/8` for every integrand. Candidates are scanned by cell
/// count `M` first and level second. A candidate is accepted when, for every
/// integrand, the step `|Q_{2M} − Q_M|` is at most half the previous step
/// `|Q_M − Q_{M/2}|` and the step plus the tail stays within `ε/4`; the rule
/// with `2M` cells is returned. Under halving steps the error of `Q_{2M}` is
/// at most the last step. Cells wider than `max_cell_width` are never used,
/// so coarse rules cannot step over the bulk of the integrand. Acceptance
/// only gets easier as `ε` grows, so the node count never increases with `ε`.
pub fn practical_rule_family(
    integrands: &[&(dyn Fn(f64) -> f64 + Sync)],
    eps: f64,
    options: &PracticalOptions,
) -> Result<QuadratureRule> {
    if !(eps > 0.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    if integrands.is_empty() {
        return Err(Error::EmptyFactorList);
    }
    let n = options.order;
    gauss_legendre_rule(n)?;
    if !(options.initial_limit > 0.0) {
        return Err(Error::InvalidLimit(options.initial_limit));
    }
    let levels: Vec<(f64, f64)> = (0..=options.max_doublings)
        .map(|k| {
            let upper = options.initial_limit * 2f64.powi(k as i32);
            let tails = par::map_slice(integrands, |g| segment(n, options.tail_cells, upper / 2.0, upper, *g).abs());
            (upper, tails.into_iter().fold(0.0, f64::max))
        })
        .filter(|&(_, tail)| tail < eps / 8.0)
        .collect();
    if levels.is_empty() {
        return Err(Error::ConvergenceFailure(format!("no truncation level up to 2^{} has a tail below {}", options.max_doublings, eps / 8.0)));
    }
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut values = |cells: usize, li: usize, upper: f64| -> Vec<f64> {
        cache
            .entry((cells, li))
            .or_insert_with(|| par::map_slice(integrands, |g| segment(n, cells, 0.0, upper, *g)))
            .clone()
    };
    let mut cells = 2;
    while 2 * cells <= options.max_cells {
        for (li, &(upper, tail)) in levels.iter().enumerate() {
            if upper > options.max_cell_width * (2 * cells) as f64 {
                continue;
            }
            let coarse = values(cells / 2, li, upper);
            let mid = values(cells, li, upper);
            let fine = values(2 * cells, li, upper);
            let mut est = 0.0f64;
            let mut contracting = true;
            for ((c, m), f) in coarse.iter().zip(&mid).zip(&fine) {
                let step = (f - m).abs();
                contracting &= 2.0 * step <= (m - c).abs() || step <= 1e-14 * (1.0 + f.abs());
                est = est.max(step);
            }
            if contracting && est + tail <= eps / 4.0 {
                return composite_rule(n, 2 * cells, upper);
            }
        }
        cells *= 2;
    }
    Err(Error::ConvergenceFailure(format!("error estimate above {} with {} cells", eps / 4.0, options.max_cells)))
}
