//! Factor networks for `x ↦ Φ(ln((K+c)/x))`, their tensor products
//! approximating `F_d(c, ·)`, and the assembled price network
//! `Γ = Σ_w ⊙ 𝒫(Ψ_1, …, Ψ_Q) ⊙ ∇_{d,Q}`.
//!
//! Synthesis always uses the normalized model `μ = σ²/2`, `σ = T = 1`, in
//! which `u(0, x) = ∫₀^∞ F_d(c, x) dc`.

use serde::{Deserialize, Serialize};

use crate::calculus::{concat_chain, concat_owned, fanout_net, parallel_owned, scalar_affine_net, weighted_sum_net, zero_net};
use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::network::{NetworkMetrics, NeuralNetwork};
use crate::oracle::{box_probe_points, normal_cdf};
use crate::par;
use crate::primitives::{smooth_net, tensor_product_net, SmoothFunctionOracle};
use crate::quadrature::{
    composite_rule, ln_quad_count_argument_from_ln, practical_rule_family, truncation_level, PracticalOptions,
    QuadratureRule,
};
use crate::regularity::{h_derivatives, ln_f_d_derivative_bound, ln_h_derivative_bound, MAX_ALPHA_ORDER};
use crate::shape::{self, Shape};

/// Default weight budget for built price networks.
pub const DEFAULT_BUDGET: f64 = 1e8;

/// Grid points used by [`NormPolicy::Sampled`].
pub const NORM_GRID: usize = 2001;

const NORM_INFLATION: f64 = 1.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Worst-case a priori constants: quadrature of order `4n`,
    /// derivative bounds from [`regularity`](crate::regularity).
    PaperConstants,
    /// An adaptively planned rule and sampled factor norms.
    Practical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisMode {
    pub variant: Variant,
    pub eps: f64,
}

impl SynthesisMode {
    pub fn practical(eps: f64) -> Self {
        Self { variant: Variant::Practical, eps }
    }

    pub fn paper(eps: f64) -> Self {
        Self { variant: Variant::PaperConstants, eps }
    }
}

/// How the factor networks bound `max_k sup |h^{(k)}|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPolicy {
    /// [`h_derivative_bound`](crate::regularity::h_derivative_bound).
    Analytic,
    /// Maximum over [`NORM_GRID`] points of `[a,b]`, inflated by 1%.
    Sampled,
}

/// Smoothness order and norm policy for the factor networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSettings {
    pub smoothness: usize,
    pub norm: NormPolicy,
}

impl FactorSettings {
    /// Order `2n²` with the analytic norm bound.
    pub fn analytic(n: usize) -> Self {
        Self { smoothness: 2 * n * n, norm: NormPolicy::Analytic }
    }

    /// Order `2n²` with the sampled norm.
    pub fn sampled(n: usize) -> Self {
        Self { smoothness: 2 * n * n, norm: NormPolicy::Sampled }
    }
}

/// Options for [`synthesize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceOptions {
    /// Largest admissible predicted `M(Γ)`.
    pub budget: f64,
    /// Planner settings for practical mode.
    pub quadrature: PracticalOptions,
    /// Overrides the factor settings of the chosen mode.
    pub factor: Option<FactorSettings>,
}

impl Default for PriceOptions {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, quadrature: PracticalOptions::default(), factor: None }
    }
}

fn check_strike(strike: f64) -> Result<()> {
    if strike >= 0.0 && strike.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("strike {strike} must be finite and nonnegative")))
    }
}

fn check_level(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError(format!("level c = {c} must be positive")))
    }
}

/// `F_d(c, x) = 1 − Π_i Φ(ln((K_i + c)/x_i))` for `x ∈ [a,b]^d`.
pub fn f_d_eval(c: f64, x: &[f64], params: &MarketParams) -> Result<f64> {
    check_level(c)?;
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch(format!("point has {} coordinates, model has {}", x.len(), params.dim())));
    }
    let (a, b) = params.domain;
    if let Some(&v) = x.iter().find(|v| !(**v >= a && **v <= b)) {
        return Err(Error::DomainError(format!("spot {v} outside [{a}, {b}]")));
    }
    let prod: f64 = x.iter().zip(&params.strikes).map(|(&xi, &k)| normal_cdf(((k + c) / xi).ln())).product();
    Ok(1.0 - prod)
}

/// `Φ_{ε,c,K}` with order `2n²` and the analytic norm bound.
pub fn cdf_factor_net(eps: f64, c: f64, strike: f64, params: &MarketParams) -> Result<NeuralNetwork> {
    cdf_factor_net_with(eps, c, strike, params, FactorSettings::analytic(params.smoothness))
}

fn factor_norm(settings: FactorSettings, domain: (f64, f64), strike: f64, c: f64) -> Result<f64> {
    let (a, b) = domain;
    let s = settings.smoothness;
    match settings.norm {
        NormPolicy::Analytic => {
            let ln = ln_h_derivative_bound(s, a, b, strike, c)?;
            let v = ln.exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Overflow(format!("factor norm of order {s}")))
            }
        }
        NormPolicy::Sampled => {
            let mut best = 0.0f64;
            for i in 0..NORM_GRID {
                let x = a + (b - a) * i as f64 / (NORM_GRID - 1) as f64;
                for v in h_derivatives(s, x, strike, c)? {
                    best = best.max(v.abs());
                }
            }
            Ok(best * NORM_INFLATION)
        }
    }
}

/// `Φ_{ε,c,K}`: approximates `h(x) = Φ(ln((K+c)/x))` on `[a,b]` within `ε`.
pub fn cdf_factor_net_with(
    eps: f64,
    c: f64,
    strike: f64,
    params: &MarketParams,
    settings: FactorSettings,
) -> Result<NeuralNetwork> {
    check_strike(strike)?;
    check_level(c)?;
    let s = settings.smoothness;
    let norm = factor_norm(settings, params.domain, strike, c)?;
    let f = SmoothFunctionOracle::new(s, params.domain, norm, move |k, x| {
        h_derivatives(k, x, strike, c).map(|v| v[k]).unwrap_or(f64::NAN)
    })?;
    smooth_net(&f, eps)
}

/// `Ψ^d_{ε,c}`: approximates `F_d(c, ·)` on `[a,b]^d` within `ε` as
/// `λ ⊙ Π ⊙ 𝒫(Φ_1, …, Φ_d)` with `λ(t) = 1 − t` and inner accuracy `ε/(3d)`.
pub fn factor_tensor_net(eps: f64, c: f64, params: &MarketParams) -> Result<NeuralNetwork> {
    factor_tensor_net_with(eps, c, params, FactorSettings::analytic(params.smoothness))
}

pub fn factor_tensor_net_with(
    eps: f64,
    c: f64,
    params: &MarketParams,
    settings: FactorSettings,
) -> Result<NeuralNetwork> {
    if !(eps > 0.0) {
        return Err(Error::InvalidTolerance(eps));
    }
    check_level(c)?;
    let d = params.dim();
    if eps > 2.0 {
        return Ok(zero_net(d));
    }
    let inner = eps / (3.0 * d as f64);
    let mut built: Vec<(f64, NeuralNetwork)> = Vec::new();
    let mut factors = Vec::with_capacity(d);
    for &k in &params.strikes {
        let net = match built.iter().find(|(kk, _)| *kk == k) {
            Some((_, net)) => net.clone(),
            None => {
                let net = cdf_factor_net_with(inner, c, k, params, settings)?;
                built.push((k, net.clone()));
                net
            }
        };
        factors.push(net);
    }
    let tensor = tensor_product_net(inner, factors, 1.0)?;
    Ok(concat_owned(scalar_affine_net(-1.0, 1.0), tensor))
}

/// `Σ_w ⊙ 𝒫(nets) ⊙ ∇_{d,Q}`: realizes `x ↦ Σ_j w_j nets_j(x)`.
pub fn assemble(weights: &[f64], nets: Vec<NeuralNetwork>, d: usize) -> Result<NeuralNetwork> {
    if weights.len() != nets.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} networks", weights.len(), nets.len())));
    }
    if nets.is_empty() {
        return Err(Error::EmptyFactorList);
    }
    if let Some(n) = nets.iter().find(|n| n.dim_in() != d || n.dim_out() != 1) {
        return Err(Error::DimensionMismatch(format!("node network {} -> {}, expected {d} -> 1", n.dim_in(), n.dim_out())));
    }
    let q = nets.len();
    concat_chain(vec![weighted_sum_net(weights)?, parallel_owned(nets)?, fanout_net(d, q)])
}

/// Predicted or measured sizes of a price network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBudget {
    pub variant: Variant,
    pub eps: f64,
    /// Truncation level of the quadrature.
    pub n_trunc: f64,
    /// Number of quadrature nodes.
    pub q: f64,
    pub predicted_m_bound: f64,
    pub predicted_l_bound: f64,
    /// Accuracy of each node network.
    pub node_eps: f64,
    /// Order of the factor networks.
    pub factor_smoothness: usize,
}

/// Quadrature order of the worst-case constant mode: `4n`.
pub fn paper_quadrature_order(n: usize) -> usize {
    4 * n
}

/// Truncation level and node count of the worst-case constant mode, as floats so that
/// astronomically large budgets remain representable.
pub fn paper_quadrature_counts(params: &MarketParams, eps: f64) -> Result<(f64, f64)> {
    let nq = paper_quadrature_order(params.smoothness);
    let d = params.dim();
    let b = params.domain.1;
    let n_trunc = truncation_level(nq, b, d, eps / 4.0);
    let ln_s = ln_f_d_derivative_bound(2 * nq, 1, params.domain.0)?;
    let q = nq as f64 * ln_quad_count_argument_from_ln(nq, d, eps / 2.0, ln_s, b).exp().ceil();
    Ok((n_trunc, q))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(eps))
    }
}

fn worst_case_budget(params: &MarketParams, eps: f64) -> Result<SizeBudget> {
    let n = params.smoothness;
    let d = params.dim();
    let settings = FactorSettings::analytic(paper_quadrature_order(n));
    let s = settings.smoothness;
    let (n_trunc, q) = paper_quadrature_counts(params, eps)?;
    let node_eps = eps / (2.0 * n_trunc);
    let ln_node = node_eps.ln();
    let k_max = params.strikes.iter().fold(0.0f64, |m, &k| m.max(k));
    let (a, b) = params.domain;
    let shape = match ln_h_derivative_bound(s, a, b, k_max, n_trunc) {
        Ok(ln_norm) => {
            let factor = shape::smooth(s, params.domain, ln_node - (3.0 * d as f64).ln(), ln_norm);
            shape::price(shape::factor_tensor(ln_node, factor, d), q, d)
        }
        Err(_) => Shape::unbounded(d as f64, 1.0),
    };
    let (m, l) = if shape.is_finite() && q.is_finite() {
        (shape.size, shape.depth as f64)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(SizeBudget {
        variant: Variant::PaperConstants,
        eps,
        n_trunc,
        q,
        predicted_m_bound: m,
        predicted_l_bound: l,
        node_eps,
        factor_smoothness: s,
    })
}

/// The planned rule and per-node accuracy of practical mode.
struct PracticalPlan {
    rule: QuadratureRule,
    node_eps: f64,
    settings: FactorSettings,
}

fn practical_plan(params: &MarketParams, eps: f64, options: &PriceOptions) -> Result<PracticalPlan> {
    let (a, b) = params.domain;
    let points = box_probe_points(params.dim(), a, b);
    let closures: Vec<_> = points.iter().map(|p| move |c: f64| exceedance_normalized(c, p, params)).collect();
    let refs: Vec<&(dyn Fn(f64) -> f64 + Sync)> = closures.iter().map(|g| g as _).collect();
    let rule = practical_rule_family(&refs, eps / 2.0, &options.quadrature)?;
    let node_eps = eps / (2.0 * rule.weight_sum());
    let settings = match options.factor {
        Some(s) => s,
        None => cheapest_factor_order(params, node_eps / (3.0 * params.dim() as f64), rule.nodes[0])?,
    };
    Ok(PracticalPlan { rule, node_eps, settings })
}

/// Extra factor orders tried above `2n²` by practical mode.
pub const EXTRA_FACTOR_ORDERS: usize = 6;

/// Sampled-norm factor settings of order in `2n² ..= 2n² + EXTRA_FACTOR_ORDERS`
/// whose factor networks at level `c` are predicted to be smallest.
fn cheapest_factor_order(params: &MarketParams, factor_eps: f64, c: f64) -> Result<FactorSettings> {
    let base = FactorSettings::sampled(params.smoothness);
    let top = (base.smoothness + EXTRA_FACTOR_ORDERS).min(MAX_ALPHA_ORDER);
    let mut strikes = params.strikes.clone();
    strikes.sort_by(f64::total_cmp);
    strikes.dedup();
    let mut best = (f64::INFINITY, base);
    for order in base.smoothness..=top {
        let settings = FactorSettings { smoothness: order, norm: NormPolicy::Sampled };
        let mut size = 0.0;
        for &k in &strikes {
            let norm = factor_norm(settings, params.domain, k, c)?;
            size += shape::smooth(order, params.domain, factor_eps.ln(), norm.ln()).size;
        }
        if size < best.0 {
            best = (size, settings);
        }
    }
    Ok(best.1)
}

fn exceedance_normalized(c: f64, x: &[f64], params: &MarketParams) -> f64 {
    let prod: f64 = x.iter().zip(&params.strikes).map(|(&xi, &k)| normal_cdf(((k + c) / xi).ln())).product();
    1.0 - prod
}

/// Largest shape among the node networks at the first and last node, which
/// [`shape::price`] extrapolates to all `Q` nodes.
fn probe_nodes(params: &MarketParams, plan: &PracticalPlan) -> Result<Shape> {
    let nodes = &plan.rule.nodes;
    let ends = if nodes.len() > 1 { vec![nodes[0], nodes[nodes.len() - 1]] } else { vec![nodes[0]] };
    let mut worst: Option<Shape> = None;
    for c in ends {
        let s = Shape::of(&factor_tensor_net_with(plan.node_eps, c, params, plan.settings)?);
        worst = Some(match worst {
            None => s,
            Some(w) => Shape {
                depth: w.depth.max(s.depth),
                size: w.size.max(s.size),
                first: w.first.max(s.first),
                last: w.last.max(s.last),
                ..w
            },
        });
    }
    Ok(worst.expect("nonempty rule"))
}

fn practical_budget(params: &MarketParams, eps: f64, plan: &PracticalPlan) -> Result<SizeBudget> {
    let d = params.dim();
    let q = plan.rule.len() as f64;
    let shape = shape::price(probe_nodes(params, plan)?, q, d);
    Ok(SizeBudget {
        variant: Variant::Practical,
        eps,
        n_trunc: plan.rule.upper_limit,
        q,
        predicted_m_bound: shape.size,
        predicted_l_bound: shape.depth as f64,
        node_eps: plan.node_eps,
        factor_smoothness: plan.settings.smoothness,
    })
}

fn check_params(params: &MarketParams) -> Result<()> {
    params.validate()?;
    if !params.is_normalized() {
        return Err(Error::DomainError("synthesis requires the normalized model mu = 1/2, sigma = T = 1".into()));
    }
    Ok(())
}

/// Truncation level, node count and size bounds of `Γ_{d,ε}`.
///
/// The worst-case constant mode evaluates the bounds without building anything; practical mode
/// plans the rule, builds the first and last node networks and extrapolates.
pub fn size_budget(params: &MarketParams, eps: f64, variant: Variant) -> Result<SizeBudget> {
    size_budget_with(params, eps, variant, &PriceOptions::default())
}

pub fn size_budget_with(params: &MarketParams, eps: f64, variant: Variant, options: &PriceOptions) -> Result<SizeBudget> {
    check_params(params)?;
    check_eps(eps)?;
    match variant {
        Variant::PaperConstants => worst_case_budget(params, eps),
        Variant::Practical => practical_budget(params, eps, &practical_plan(params, eps, options)?),
    }
}

/// Record of a synthesis run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisManifest {
    pub mode: Variant,
    pub eps: f64,
    pub params: MarketParams,
    pub n_trunc: f64,
    pub q: usize,
    pub cells: usize,
    pub gauss_order: usize,
    pub weight_sum: f64,
    pub node_eps: f64,
    pub factor_eps: f64,
    pub factor: FactorSettings,
    pub budget: f64,
    pub predicted_m_bound: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: Option<u64>,
    pub metrics: NetworkMetrics,
}

impl SynthesisManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// A built price network together with its manifest.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub network: NeuralNetwork,
    pub manifest: SynthesisManifest,
}

/// `Γ_{d,ε}` with default options.
pub fn price_net(params: &MarketParams, mode: SynthesisMode) -> Result<NeuralNetwork> {
    Ok(synthesize(params, mode, &PriceOptions::default())?.network)
}

/// Build `Γ_{d,ε}`, approximating `x ↦ ∫₀^∞ F_d(c, x) dc` on `[a,b]^d`.
///
/// Half of `ε` goes to the quadrature and half to the node networks, each
/// built at `ε/(2Σw)`. Fails with [`Error::BudgetExceeded`] before building
/// when the predicted size exceeds `options.budget`.
pub fn synthesize(params: &MarketParams, mode: SynthesisMode, options: &PriceOptions) -> Result<Synthesis> {
    check_params(params)?;
    check_eps(mode.eps)?;
    let eps = mode.eps;
    let (rule, node_eps, settings, budget) = match mode.variant {
        Variant::PaperConstants => {
            let budget = worst_case_budget(params, eps)?;
            over_budget(&budget, options.budget)?;
            let nq = paper_quadrature_order(params.smoothness);
            let rule = composite_rule(nq, (budget.q / nq as f64) as usize, budget.n_trunc)?;
            let settings = options.factor.unwrap_or_else(|| FactorSettings::analytic(nq));
            (rule, budget.node_eps, settings, budget)
        }
        Variant::Practical => {
            let plan = practical_plan(params, eps, options)?;
            let budget = practical_budget(params, eps, &plan)?;
            over_budget(&budget, options.budget)?;
            (plan.rule, plan.node_eps, plan.settings, budget)
        }
    };
    let nets: Vec<NeuralNetwork> = par::map_slice(&rule.nodes, |&c| factor_tensor_net_with(node_eps, c, params, settings))
        .into_iter()
        .collect::<Result<_>>()?;
    let network = assemble(&rule.weights, nets, params.dim())?;
    let manifest = SynthesisManifest {
        mode: mode.variant,
        eps,
        params: params.clone(),
        n_trunc: rule.upper_limit,
        q: rule.len(),
        cells: rule.cells,
        gauss_order: rule.order,
        weight_sum: rule.weight_sum(),
        node_eps,
        factor_eps: node_eps / (3.0 * params.dim() as f64),
        factor: settings,
        budget: options.budget,
        predicted_m_bound: budget.predicted_m_bound,
        nodes: rule.nodes.clone(),
        weights: rule.weights.clone(),
        seed: None,
        metrics: network.metrics(),
    };
    Ok(Synthesis { network, manifest })
}

fn over_budget(budget: &SizeBudget, limit: f64) -> Result<()> {
    if budget.predicted_m_bound <= limit {
        Ok(())
    } else {
        Err(Error::BudgetExceeded {
            predicted_m: budget.predicted_m_bound,
            predicted_l: budget.predicted_l_bound,
            budget: limit,
        })
    }
}
