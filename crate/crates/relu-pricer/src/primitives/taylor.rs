use crate::calculus::{
    affine_net, concat_chain, concat_owned, fanout_net, parallel_owned, scalar_affine_net, shifted_fanout_net,
    zero_net,
};
use crate::error::{Error, Result};
use crate::network::{AffineLayer, NeuralNetwork};

use super::{check_tolerance, product_net};

/// Tolerance on sampled derivatives when checking membership in the unit ball.
const RANGE_SLACK: f64 = 1e-9;

/// A univariate `C^n` function given through its derivatives.
pub struct SmoothFunctionOracle<'a> {
    eval: Box<dyn Fn(usize, f64) -> f64 + Sync + 'a>,
    order: usize,
    domain: (f64, f64),
    norm_bound: f64,
}

impl<'a> SmoothFunctionOracle<'a> {
    /// `eval(k, t)` must return `f^{(k)}(t)` for `k ≤ order`, and `norm_bound`
    /// must dominate `max_k sup |f^{(k)}|` over `domain`.
    pub fn new(
        order: usize,
        domain: (f64, f64),
        norm_bound: f64,
        eval: impl Fn(usize, f64) -> f64 + Sync + 'a,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArity(0));
        }
        if !(norm_bound > 0.0 && norm_bound.is_finite()) {
            return Err(Error::InvalidScale(norm_bound));
        }
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::InvalidInterval(domain.0, domain.1));
        }
        Ok(Self { eval: Box::new(eval), order, domain, norm_bound })
    }

    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        (self.eval)(k, t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

/// Reference hat function `h_{N,j}(x) = ρ(1 − |Nx − j|)`.
pub fn hat(n: usize, j: usize, x: f64) -> f64 {
    (1.0 - (n as f64 * x - j as f64).abs()).max(0.0)
}

/// Grid size `N = ⌈(2/(n! ε))^{1/n}⌉` used by [`taylor_net`].
pub fn taylor_grid_size(order: usize, eps: f64) -> usize {
    let ln_fact: f64 = (1..=order).map(|k| (k as f64).ln()).sum();
    let ln_n = ((2.0f64).ln() - ln_fact - eps.ln()) / order as f64;
    (ln_n.exp().ceil() as usize).max(1)
}

fn hat_net(n: usize, j: usize) -> NeuralNetwork {
    let nf = n as f64;
    let jf = j as f64;
    let first = AffineLayer::from_dense(3, 1, &[nf, nf, nf], vec![-(jf - 1.0), -jf, -(jf + 1.0)]).unwrap();
    let second = AffineLayer::from_dense(1, 3, &[1.0, -2.0, 1.0], vec![0.0]).unwrap();
    NeuralNetwork::from_layers_unchecked(vec![first, second])
}

/// `φ_{f,ε}`: approximates `f ∈ B^n_1` on `[0,1]` within `ε` through a
/// partition of unity of hats times local Taylor polynomials of degree `n−1`.
pub fn taylor_net(f: &SmoothFunctionOracle<'_>, eps: f64) -> Result<NeuralNetwork> {
    check_tolerance(eps)?;
    if f.domain != (0.0, 1.0) {
        return Err(Error::InvalidInterval(f.domain.0, f.domain.1));
    }
    if eps >= 1.0 {
        return Ok(zero_net(1));
    }
    let n = f.order;
    let grid = taylor_grid_size(n, eps);

    let mut derivs = Vec::with_capacity(grid + 1);
    for j in 0..=grid {
        let x = j as f64 / grid as f64;
        let row: Vec<f64> = (0..=n).map(|k| f.derivative(k, x)).collect();
        for (k, &v) in row.iter().enumerate() {
            if !(v.abs() <= 1.0 + RANGE_SLACK) {
                return Err(Error::OracleRangeViolation { order: k, point: x, value: v });
            }
        }
        derivs.push(row);
    }

    let pair = product_net(eps / 8.0, 2, 3.0)?;
    let monomials: Vec<NeuralNetwork> = (2..n)
        .map(|k| product_net(eps / (8.0 * std::f64::consts::E), k, 1.0))
        .collect::<Result<_>>()?;

    let mut psis = Vec::with_capacity(grid + 1);
    for (j, row) in derivs.iter().enumerate() {
        let node = j as f64 / grid as f64;
        let tau = if n == 1 {
            NeuralNetwork::from_layers_unchecked(vec![AffineLayer::from_dense(1, 1, &[0.0], vec![row[0]])?])
        } else {
            let mut coef = Vec::with_capacity(n - 1);
            let mut fact = 1.0;
            for k in 1..n {
                fact *= k as f64;
                coef.push(row[k] / fact);
            }
            coef.reverse();
            let sigma = affine_net(1, n - 1, &coef, &[row[0]])?;
            let mut xis = Vec::with_capacity(n - 1);
            for k in (2..n).rev() {
                xis.push(concat_owned(monomials[k - 2].clone(), shifted_fanout_net(1, k, node)));
            }
            xis.push(scalar_affine_net(1.0, -node));
            concat_chain(vec![sigma, parallel_owned(xis)?, fanout_net(1, n - 1)])?
        };
        let inner = parallel_owned(vec![hat_net(grid, j), tau])?;
        psis.push(concat_owned(pair.clone(), inner));
    }
    let ones = vec![1.0; grid + 1];
    let lambda = affine_net(1, grid + 1, &ones, &[0.0])?;
    concat_chain(vec![lambda, parallel_owned(psis)?, fanout_net(1, 2 * grid + 2)])
}

/// `Φ_{f,ε}`: approximates a smooth `f` on `[a,b]`, `0 < a < b`, within `ε` by
/// rescaling to `[0,1]`, normalizing into `B^n_1` and calling [`taylor_net`].
pub fn smooth_net(f: &SmoothFunctionOracle<'_>, eps: f64) -> Result<NeuralNetwork> {
    let (a, b) = f.domain;
    if !(a > 0.0 && a < b) {
        return Err(Error::InvalidInterval(a, b));
    }
    check_tolerance(eps)?;
    let n = f.order;
    let width = b - a;
    let scale = width.powi(-(n as i32)).min(1.0);
    let norm = f.norm_bound;
    let inner_eps = scale * eps / norm;
    let pullback = SmoothFunctionOracle {
        eval: Box::new(move |k, t| scale * width.powi(k as i32) * f.derivative(k, a + width * t) / norm),
        order: n,
        domain: (0.0, 1.0),
        norm_bound: 1.0,
    };
    let phi = taylor_net(&pullback, inner_eps)?;
    let alpha = scalar_affine_net(norm / scale, 0.0);
    let lambda = scalar_affine_net(1.0 / width, -a / width);
    concat_chain(vec![alpha, phi, lambda])
}
