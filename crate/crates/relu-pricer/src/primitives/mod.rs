//! Approximation primitives: squaring, multiplication, m-ary products,
//! tensor products and local Taylor emulation of smooth functions.

mod taylor;

pub use taylor::{hat, smooth_net, taylor_net, taylor_grid_size, SmoothFunctionOracle};

use crate::calculus::{concat_owned, parallel_owned, parallel_same_depth_owned, zero_net};
use crate::error::{Error, Result};
use crate::network::{AffineLayer, LayerBuilder, NeuralNetwork};

pub(crate) fn check_tolerance(eps: f64) -> Result<()> {
    if eps > 0.0 && !eps.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidTolerance(eps))
    }
}

/// Number of sawtooth levels `m = ⌈½|log₂ε|⌉` (at least one) for `ε < 1`.
pub fn square_levels(eps: f64) -> usize {
    ((-eps.log2() / 2.0).ceil() as usize).max(1)
}

fn dense(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> AffineLayer {
    AffineLayer::from_dense(rows, cols, w, b.to_vec()).expect("literal layer")
}

/// `σ_ε`: approximates `t ↦ t²` on `[0,1]` within `ε`, exact at 0.
///
/// Built from `m` sawtooth levels; the fourth neuron carries the running
/// interpolant `f_k = f_{k−1} − g_k / 4^k` through the hidden layers.
pub fn square_net(eps: f64) -> Result<NeuralNetwork> {
    check_tolerance(eps)?;
    if eps >= 1.0 {
        return Ok(zero_net(1));
    }
    let m = square_levels(eps);
    if m == 1 {
        return Ok(NeuralNetwork::from_layers_unchecked(vec![dense(1, 1, &[1.0], &[0.0])]));
    }
    let shifts = [0.0, -0.5, -1.0, 0.0];
    let corr = |k: i32| {
        let c = 2f64.powi(-2 * k + 3);
        [-c, 2.0 * c, -c, 1.0]
    };
    let mut layers = vec![dense(4, 1, &[1.0; 4], &shifts)];
    for k in 2..m as i32 {
        let mut w = Vec::with_capacity(16);
        for _ in 0..3 {
            w.extend_from_slice(&[2.0, -4.0, 2.0, 0.0]);
        }
        w.extend_from_slice(&corr(k));
        layers.push(dense(4, 4, &w, &shifts));
    }
    layers.push(dense(1, 4, &corr(m as i32), &[0.0]));
    Ok(NeuralNetwork::from_layers_unchecked(layers))
}

/// `μ_ε(B)`: approximates `(x, y) ↦ xy` on `[−B,B]²` within `ε`, with
/// `μ(x,0) = μ(0,y) = 0` exactly.
///
/// Uses `xy = 2B²(((x+y)/2B)² − (x/2B)² − (y/2B)²)`. The three squares run in
/// parallel and the weighted sum is applied directly to their (nonnegative)
/// outputs as one extra layer, which keeps the output layer at three weights.
pub fn mult_net(eps: f64, bound: f64) -> Result<NeuralNetwork> {
    check_tolerance(eps)?;
    if !(bound > 0.0) {
        return Err(Error::InvalidScale(bound));
    }
    let b2 = bound * bound;
    if eps >= b2 {
        return Ok(zero_net(2));
    }
    let sq = square_net(eps / (6.0 * b2))?;
    let half = 1.0 / (2.0 * bound);
    let abs_half = |w: [f64; 4]| {
        NeuralNetwork::from_layers_unchecked(vec![dense(2, 2, &w, &[0.0, 0.0]), dense(1, 2, &[half, half], &[0.0])])
    };
    let branches = vec![
        concat_owned(sq.clone(), abs_half([1.0, 1.0, -1.0, -1.0])),
        concat_owned(sq.clone(), abs_half([1.0, 0.0, -1.0, 0.0])),
        concat_owned(sq, abs_half([0.0, 1.0, 0.0, -1.0])),
    ];
    let stacked = parallel_same_depth_owned(branches)?;
    let mut layers = stacked.into_layers();
    layers[0] = share_inputs(&layers[0], 2);
    layers.push(dense(1, 3, &[2.0 * b2, -2.0 * b2, -2.0 * b2], &[0.0]));
    Ok(NeuralNetwork::from_layers_unchecked(layers))
}

/// Compose `layer` with the fan-out `x ↦ (x, …, x)` of `x ∈ ℝ^d` by folding
/// column `c` onto input `c mod d`. Blocks never overlap in a row, so no
/// entries are merged.
fn share_inputs(layer: &AffineLayer, d: usize) -> AffineLayer {
    let mut b = LayerBuilder::with_capacity(d, layer.weight_nnz());
    for r in 0..layer.rows() {
        for (c, v) in layer.row(r) {
            b.push(c % d, v);
        }
        b.finish_row();
    }
    b.build(layer.bias().to_vec()).expect("folded layer")
}

/// `Π_ε(m, B)`: approximates `x ↦ Π x_j` on `[−B,B]^m` within `ε`.
///
/// A binary tree of depth `l = ⌈log₂m⌉` of pairwise multipliers at accuracy
/// `ε m⁻² B^{−2m}` with bound `B^m`, fed by a layer padding the input to `2^l`
/// channels with constant ones. A zero input yields exactly zero.
pub fn product_net(eps: f64, m: usize, bound: f64) -> Result<NeuralNetwork> {
    if m < 2 {
        return Err(Error::InvalidArity(m));
    }
    if !(bound >= 1.0) {
        return Err(Error::InvalidScale(bound));
    }
    check_tolerance(eps)?;
    let bm = bound.powi(m as i32);
    if eps >= bm {
        return Ok(zero_net(m));
    }
    let levels = (usize::BITS - (m - 1).leading_zeros()) as usize;
    let width = 1usize << levels;
    let nu = mult_net(eps / ((m * m) as f64 * bm * bm), bm)?;
    let mut tree = nu.clone();
    for _ in 1..levels {
        let below = parallel_same_depth_owned(vec![tree.clone(), tree])?;
        tree = concat_owned(nu.clone(), below);
    }
    let mut b = LayerBuilder::with_capacity(m, m);
    let mut bias = vec![0.0; width];
    for (i, bi) in bias.iter_mut().enumerate() {
        if i < m {
            b.push(i, 1.0);
        } else {
            *bi = 1.0;
        }
        b.finish_row();
    }
    let omega = NeuralNetwork::from_layers_unchecked(vec![b.build(bias)?]);
    Ok(concat_owned(tree, omega))
}

/// `Ψ_ε`: product of factor networks, `Π_ε ⊙ 𝒫(factors)`.
///
/// If each factor approximates a function with values in `[−B,B]` to within
/// `ε`, the result approximates their tensor product within `3mB^{m−1}ε`.
pub fn tensor_product_net(eps: f64, factors: Vec<NeuralNetwork>, bound: f64) -> Result<NeuralNetwork> {
    check_tolerance(eps)?;
    if factors.is_empty() {
        return Err(Error::EmptyFactorList);
    }
    if let Some(f) = factors.iter().find(|f| f.dim_out() != 1) {
        return Err(Error::DimensionMismatch(format!("factor with {} outputs", f.dim_out())));
    }
    let m = factors.len();
    if m == 1 {
        return Ok(factors.into_iter().next().unwrap());
    }
    if eps >= bound / (2.0 * m as f64) {
        let dim_in = factors.iter().map(NeuralNetwork::dim_in).sum();
        return Ok(zero_net(dim_in));
    }
    let prod = product_net(eps, m, bound)?;
    Ok(concat_owned(prod, parallel_owned(factors)?))
}

/// Explicit size bound for [`mult_net`]: `90 log₂(1/ε) + 180 log₂B + 467`.
pub fn mult_size_bound(eps: f64, bound: f64) -> f64 {
    90.0 * (1.0 / eps).log2() + 180.0 * bound.log2() + 467.0
}

/// Explicit size bound for [`product_net`]:
/// `360 m log₂(1/ε) + 1440 m² log₂B + 720 m log₂m + 1912 m`.
pub fn product_size_bound(eps: f64, m: usize, bound: f64) -> f64 {
    let m = m as f64;
    360.0 * m * (1.0 / eps).log2() + 1440.0 * m * m * bound.log2() + 720.0 * m * m.log2() + 1912.0 * m
}

/// Size bound for [`square_net`]: `15(½|log₂ε| + 1)`.
pub fn square_size_bound(eps: f64) -> f64 {
    15.0 * (0.5 * eps.log2().abs() + 1.0)
}

/// Depth bound for [`square_net`]: `½|log₂ε| + 1`.
pub fn square_depth_bound(eps: f64) -> f64 {
    0.5 * eps.log2().abs() + 1.0
}
