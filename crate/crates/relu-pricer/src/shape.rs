//! Size accounting without materializing weights.
//!
//! A [`Shape`] carries the exact depth and upper bounds on `M`, `M_1` and
//! `M_L` of a network. Every constructor here mirrors a builder of
//! [`calculus`](crate::calculus) or [`primitives`](crate::primitives), so the
//! bounds can be evaluated for networks far too large to build. Counts are
//! `f64` because worst-case constant instances exceed any integer type.

use serde::{Deserialize, Serialize};

use std::f64::consts::LN_2;

use crate::network::NeuralNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub depth: usize,
    pub size: f64,
    pub first: f64,
    pub last: f64,
    pub dim_in: f64,
    pub dim_out: f64,
}

impl Shape {
    /// Depth-one affine map with at most `entries` nonzero weights and biases.
    pub fn affine(dim_in: f64, dim_out: f64, entries: f64) -> Self {
        Self { depth: 1, size: entries, first: entries, last: entries, dim_in, dim_out }
    }

    /// Exact shape of a built network.
    pub fn of(net: &NeuralNetwork) -> Self {
        let layers = net.layers();
        Self {
            depth: layers.len(),
            size: net.size() as f64,
            first: layers[0].size() as f64,
            last: layers[layers.len() - 1].size() as f64,
            dim_in: net.dim_in() as f64,
            dim_out: net.dim_out() as f64,
        }
    }

    /// Placeholder for networks whose size is beyond floating-point range.
    pub fn unbounded(dim_in: f64, dim_out: f64) -> Self {
        let inf = f64::INFINITY;
        Self { depth: usize::MAX / 4, size: inf, first: inf, last: inf, dim_in, dim_out }
    }

    pub fn is_finite(&self) -> bool {
        self.size.is_finite() && self.depth < usize::MAX / 4
    }

    pub fn zero(dim_in: f64) -> Self {
        Self::affine(dim_in, 1.0, 0.0)
    }

    pub fn identity(d: f64, depth: usize) -> Self {
        if depth == 1 {
            return Self::affine(d, d, d);
        }
        Self { depth, size: 2.0 * d * depth as f64, first: 2.0 * d, last: 2.0 * d, dim_in: d, dim_out: d }
    }

    /// `front ⊙ back`.
    pub fn concat(front: Self, back: Self) -> Self {
        Self {
            depth: front.depth.saturating_add(back.depth),
            size: front.size + front.first + back.size + back.last,
            first: if back.depth >= 2 { back.first } else { 2.0 * back.first },
            last: if front.depth >= 2 { front.last } else { 2.0 * front.last },
            dim_in: back.dim_in,
            dim_out: front.dim_out,
        }
    }

    /// `nets[0] ⊙ nets[1] ⊙ …`.
    pub fn chain(nets: &[Self]) -> Self {
        let mut acc = *nets.last().expect("nonempty chain");
        for f in nets.iter().rev().skip(1) {
            acc = Self::concat(*f, acc);
        }
        acc
    }

    /// `q` copies stacked by the same-depth parallelization.
    pub fn repeat(self, q: f64) -> Self {
        Self {
            depth: self.depth,
            size: self.size * q,
            first: self.first * q,
            last: self.last * q,
            dim_in: self.dim_in * q,
            dim_out: self.dim_out * q,
        }
    }

    pub fn extend(self, depth: usize) -> Self {
        if depth <= self.depth {
            return self;
        }
        Self::concat(Self::identity(self.dim_out, depth - self.depth), self)
    }

    /// Same-depth stacking of networks already padded to equal depth.
    pub fn stack(nets: &[Self]) -> Self {
        let depth = nets[0].depth;
        let mut out = Self { depth, size: 0.0, first: 0.0, last: 0.0, dim_in: 0.0, dim_out: 0.0 };
        for s in nets {
            debug_assert_eq!(s.depth, depth);
            out.size += s.size;
            out.first += s.first;
            out.last += s.last;
            out.dim_in += s.dim_in;
            out.dim_out += s.dim_out;
        }
        out
    }

    /// General parallelization: pad to the maximum depth, then stack.
    pub fn parallel(nets: &[Self]) -> Self {
        let depth = nets.iter().map(|s| s.depth).max().expect("nonempty");
        let padded: Vec<Self> = nets.iter().map(|s| s.extend(depth)).collect();
        Self::stack(&padded)
    }
}

/// Shape of [`square_net`](crate::primitives::square_net) at `ε = e^{ln_eps}`.
pub fn square(ln_eps: f64) -> Shape {
    if ln_eps >= 0.0 {
        return Shape::zero(1.0);
    }
    let x = -ln_eps / (2.0 * LN_2);
    let m = (x - 1e-12 * x).ceil().max(1.0);
    if m == 1.0 {
        return Shape::affine(1.0, 1.0, 1.0);
    }
    if m > usize::MAX as f64 / 2.0 {
        return Shape::unbounded(1.0, 1.0);
    }
    Shape { depth: m as usize, size: 10.0 + 15.0 * (m - 2.0), first: 6.0, last: 4.0, dim_in: 1.0, dim_out: 1.0 }
}

/// Shape of [`mult_net`](crate::primitives::mult_net).
pub fn mult(ln_eps: f64, bound: f64) -> Shape {
    let ln_b2 = 2.0 * bound.ln();
    if ln_eps >= ln_b2 {
        return Shape::zero(2.0);
    }
    let sq = square(ln_eps - 6f64.ln() - ln_b2);
    let branch = |nnz: f64| {
        let half = Shape { depth: 2, size: nnz + 2.0, first: nnz, last: 2.0, dim_in: 2.0, dim_out: 1.0 };
        Shape::concat(sq, half)
    };
    let mut s = Shape::stack(&[branch(4.0), branch(2.0), branch(2.0)]);
    s.dim_in = 2.0;
    s.dim_out = 1.0;
    s.depth += 1;
    s.size += 3.0;
    s.last = 3.0;
    s
}

/// Shape of [`product_net`](crate::primitives::product_net).
pub fn product(ln_eps: f64, m: usize, bound: f64) -> Shape {
    let ln_bm = m as f64 * bound.ln();
    if ln_eps >= ln_bm {
        return Shape::zero(m as f64);
    }
    let levels = (usize::BITS - (m - 1).leading_zeros()) as usize;
    let width = (1usize << levels) as f64;
    let nu = mult(ln_eps - 2.0 * (m as f64).ln() - 2.0 * ln_bm, bound.powi(m as i32));
    let mut tree = nu;
    for _ in 1..levels {
        tree = Shape::concat(nu, tree.repeat(2.0));
    }
    Shape::concat(tree, Shape::affine(m as f64, width, width))
}

/// Shape of [`tensor_product_net`](crate::primitives::tensor_product_net)
/// with `m` copies of the factor shape.
pub fn tensor(ln_eps: f64, factor: Shape, m: usize, bound: f64) -> Shape {
    if m == 1 {
        return factor;
    }
    if ln_eps >= (bound / (2.0 * m as f64)).ln() {
        return Shape::zero(factor.dim_in * m as f64);
    }
    Shape::concat(product(ln_eps, m, bound), factor.repeat(m as f64))
}

/// `ln` of the Taylor grid size before rounding,
/// `(ln 2 − ln n! − ln ε)/n`.
pub fn ln_taylor_grid(order: usize, ln_eps: f64) -> f64 {
    let ln_fact: f64 = (1..=order).map(|k| (k as f64).ln()).sum();
    (LN_2 - ln_fact - ln_eps) / order as f64
}

/// Shape of [`taylor_net`](crate::primitives::taylor_net) of order `n`.
pub fn taylor(order: usize, ln_eps: f64) -> Shape {
    if ln_eps >= 0.0 {
        return Shape::zero(1.0);
    }
    let n = order;
    let grid = ln_taylor_grid(n, ln_eps).exp().ceil().max(1.0);
    let hat = Shape { depth: 2, size: 9.0, first: 6.0, last: 3.0, dim_in: 1.0, dim_out: 1.0 };
    let tau = if n == 1 {
        Shape::affine(1.0, 1.0, 1.0)
    } else {
        let sigma = Shape::affine((n - 1) as f64, 1.0, n as f64);
        let ln_mono = ln_eps - (8.0 * std::f64::consts::E).ln();
        let mut xis: Vec<Shape> = (2..n)
            .rev()
            .map(|k| Shape::concat(product(ln_mono, k, 1.0), Shape::affine(1.0, k as f64, 2.0 * k as f64)))
            .collect();
        xis.push(Shape::affine(1.0, 1.0, 2.0));
        Shape::chain(&[sigma, Shape::parallel(&xis), Shape::affine(1.0, (n - 1) as f64, (n - 1) as f64)])
    };
    let psi = Shape::concat(product(ln_eps - 8f64.ln(), 2, 3.0), Shape::parallel(&[hat, tau]));
    let count = grid + 1.0;
    Shape::chain(&[Shape::affine(count, 1.0, count), psi.repeat(count), Shape::affine(1.0, 2.0 * count, 2.0 * count)])
}

/// Shape of [`smooth_net`](crate::primitives::smooth_net) for an order-`n`
/// function on `[a,b]` with `ln` of its norm bound `ln_norm`.
pub fn smooth(order: usize, domain: (f64, f64), ln_eps: f64, ln_norm: f64) -> Shape {
    let ln_scale = (-(order as f64) * (domain.1 - domain.0).ln()).min(0.0);
    let inner = taylor(order, ln_scale + ln_eps - ln_norm);
    Shape::chain(&[Shape::affine(1.0, 1.0, 1.0), inner, Shape::affine(1.0, 1.0, 2.0)])
}

/// Shape of the factor tensor network `λ ⊙ Ψ` over `d` factors of shape
/// `factor`, where the factors and the product run at accuracy `ε/(3d)`.
pub fn factor_tensor(ln_eps: f64, factor: Shape, d: usize) -> Shape {
    if ln_eps > LN_2 {
        return Shape::zero(d as f64);
    }
    let ln_inner = ln_eps - (3.0 * d as f64).ln();
    Shape::concat(Shape::affine(1.0, 1.0, 2.0), tensor(ln_inner, factor, d, 1.0))
}

/// Shape of the assembled price network over `q` node networks of shape at
/// most `node` (the worst node). Each node may need padding to the common
/// depth, which is accounted for by a per-node identity allowance.
pub fn price(node: Shape, q: f64, d: usize) -> Shape {
    let df = d as f64;
    let pad = 2.0 * node.depth as f64 + node.last + 2.0;
    let mut body = node.repeat(q);
    body.size += pad * q;
    body.last = body.last.max(2.0 * q);
    Shape::chain(&[Shape::affine(q, 1.0, q), body, Shape::affine(df, df * q, df * q)])
}
