#![allow(dead_code)]

use proptest::prelude::*;
use relu_pricer::{AffineLayer, NeuralNetwork};

/// Entries are exact zeros about a third of the time so that sparsity
/// patterns vary.
pub fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 2 => -2.0..2.0f64]
}

pub fn layer(rows: usize, cols: usize) -> impl Strategy<Value = AffineLayer> {
    (prop::collection::vec(entry(), rows * cols), prop::collection::vec(entry(), rows))
        .prop_map(move |(w, b)| AffineLayer::from_dense(rows, cols, &w, b).expect("finite entries"))
}

/// A network with the given widths `[N_0, N_1, …, N_L]`.
pub fn net_with_widths(widths: Vec<usize>) -> impl Strategy<Value = NeuralNetwork> {
    let layers: Vec<_> = widths.windows(2).map(|w| layer(w[1], w[0])).collect();
    layers.prop_map(|ls| NeuralNetwork::new(ls).expect("compatible widths"))
}

/// A network `dim_in → dim_out` of depth `1..=max_depth` with hidden widths
/// up to 4.
pub fn net(dim_in: usize, dim_out: usize, max_depth: usize) -> impl Strategy<Value = NeuralNetwork> {
    (1..=max_depth)
        .prop_flat_map(move |depth| prop::collection::vec(1usize..=4, depth - 1))
        .prop_flat_map(move |hidden| {
            let mut widths = vec![dim_in];
            widths.extend(hidden);
            widths.push(dim_out);
            net_with_widths(widths)
        })
}

/// Any network with input and output widths up to 3.
pub fn any_net(max_depth: usize) -> impl Strategy<Value = NeuralNetwork> {
    (1usize..=3, 1usize..=3).prop_flat_map(move |(i, o)| net(i, o, max_depth))
}

/// A composable pair `(front, back)` with `dim_in(front) = dim_out(back)`.
pub fn composable_pair(max_depth: usize) -> impl Strategy<Value = (NeuralNetwork, NeuralNetwork)> {
    (1usize..=3, 1usize..=3, 1usize..=3)
        .prop_flat_map(move |(i, mid, o)| (net(mid, o, max_depth), net(i, mid, max_depth)))
}

/// A composable triple `(f, g, h)` for `f ∘ g ∘ h`.
pub fn composable_triple(
    max_depth: usize,
) -> impl Strategy<Value = (NeuralNetwork, NeuralNetwork, NeuralNetwork)> {
    (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(move |(i, m1, m2, o)| {
        (net(m2, o, max_depth), net(m1, m2, max_depth), net(i, m1, max_depth))
    })
}

pub fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

/// `|a − b| ≤ tol·(1 + |b|)` componentwise.
pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

/// Largest `|f − net|` over an `n`-point uniform grid of `[lo, hi]`.
pub fn grid_sup_1d(net: &NeuralNetwork, f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (net.realize_scalar(&[t]).unwrap() - f(t)).abs()
        })
        .fold(0.0, f64::max)
}
