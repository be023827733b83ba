//! Network combinators: concatenation, identities, depth extension,
//! parallelization and single-layer utility networks.

use crate::error::{Error, Result};
use crate::network::{AffineLayer, LayerBuilder, NeuralNetwork};

/// `front ⊙ back`: realizes `front ∘ back`, with depth `L(front) + L(back)`.
///
/// The last layer of `back` is stacked with its negation and the first layer
/// of `front` is doubled as `(A | −A)`, so the seam passes through a ReLU
/// using `ρ(y) − ρ(−y) = y`.
pub fn concat(front: &NeuralNetwork, back: &NeuralNetwork) -> Result<NeuralNetwork> {
    check_seam(front, back)?;
    Ok(concat_owned(front.clone(), back.clone()))
}

fn check_seam(front: &NeuralNetwork, back: &NeuralNetwork) -> Result<()> {
    if front.dim_in() != back.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "front expects {} inputs, back produces {}",
            front.dim_in(),
            back.dim_out()
        )));
    }
    Ok(())
}

/// [`concat`] taking ownership, avoiding a copy of untouched layers.
///
/// Panics on a dimension mismatch; use [`concat`] for checked composition.
pub fn concat_owned(front: NeuralNetwork, back: NeuralNetwork) -> NeuralNetwork {
    assert_eq!(front.dim_in(), back.dim_out(), "concat seam dimension mismatch");
    let mut layers = back.into_layers();
    let seam_back = layers.pop().expect("nonempty");
    layers.push(seam_back.stacked_with_negation());
    let mut front_layers = front.into_layers().into_iter();
    let seam_front = front_layers.next().expect("nonempty");
    layers.push(seam_front.split_with_negation());
    layers.extend(front_layers);
    NeuralNetwork::from_layers_unchecked(layers)
}

/// Concatenate a chain `nets[0] ⊙ nets[1] ⊙ …` (first element is outermost).
pub fn concat_chain(nets: Vec<NeuralNetwork>) -> Result<NeuralNetwork> {
    let mut it = nets.into_iter().rev();
    let mut acc = it.next().ok_or_else(|| Error::DimensionMismatch("empty chain".into()))?;
    for front in it {
        check_seam(&front, &acc)?;
        acc = concat_owned(front, acc);
    }
    Ok(acc)
}

fn identity_layer(d: usize) -> AffineLayer {
    let mut b = LayerBuilder::with_capacity(d, d);
    for i in 0..d {
        b.push(i, 1.0);
        b.finish_row();
    }
    b.build(vec![0.0; d]).expect("identity layer")
}

/// `Φ^Id_{d,L}`: realizes the identity on ℝ^d with depth `L`.
pub fn identity_net(d: usize, depth: usize) -> NeuralNetwork {
    assert!(d >= 1 && depth >= 1, "identity_net needs d, L >= 1");
    if depth == 1 {
        return NeuralNetwork::from_layers_unchecked(vec![identity_layer(d)]);
    }
    let id = identity_layer(d);
    let mut layers = Vec::with_capacity(depth);
    layers.push(id.stacked_with_negation());
    for _ in 0..depth - 2 {
        layers.push(identity_layer(2 * d));
    }
    layers.push(id.split_with_negation());
    NeuralNetwork::from_layers_unchecked(layers)
}

/// `ℰ_L(Φ)`: pad a network to depth `L` with an identity network on its output.
pub fn extend_depth(net: &NeuralNetwork, depth: usize) -> Result<NeuralNetwork> {
    if depth < net.depth() {
        return Err(Error::InvalidDepth { requested: depth, actual: net.depth() });
    }
    Ok(extend_depth_owned(net.clone(), depth))
}

fn extend_depth_owned(net: NeuralNetwork, depth: usize) -> NeuralNetwork {
    if depth == net.depth() {
        return net;
    }
    let pad = identity_net(net.dim_out(), depth - net.depth());
    concat_owned(pad, net)
}

/// `𝒫_s`: block-diagonal stacking of equal-depth networks.
pub fn parallel_same_depth(nets: &[NeuralNetwork]) -> Result<NeuralNetwork> {
    parallel_same_depth_owned(nets.to_vec())
}

/// [`parallel_same_depth`] taking ownership; input layers are released as
/// soon as the corresponding output layer is assembled.
pub fn parallel_same_depth_owned(nets: Vec<NeuralNetwork>) -> Result<NeuralNetwork> {
    if nets.is_empty() {
        return Err(Error::DimensionMismatch("parallelization of zero networks".into()));
    }
    let depths: Vec<usize> = nets.iter().map(NeuralNetwork::depth).collect();
    if depths.iter().any(|&l| l != depths[0]) {
        return Err(Error::DepthMismatch(depths));
    }
    if nets.len() == 1 {
        return Ok(nets.into_iter().next().unwrap());
    }
    let depth = depths[0];
    let mut columns: Vec<std::vec::IntoIter<AffineLayer>> =
        nets.into_iter().map(|n| n.into_layers().into_iter()).collect();
    let mut layers = Vec::with_capacity(depth);
    for _ in 0..depth {
        let blocks: Vec<AffineLayer> = columns.iter_mut().map(|c| c.next().expect("equal depth")).collect();
        let refs: Vec<&AffineLayer> = blocks.iter().collect();
        layers.push(AffineLayer::block_diagonal(&refs));
    }
    Ok(NeuralNetwork::from_layers_unchecked(layers))
}

/// `𝒫`: parallelize networks of arbitrary depth after extending each to the maximum.
pub fn parallel(nets: &[NeuralNetwork]) -> Result<NeuralNetwork> {
    parallel_owned(nets.to_vec())
}

pub fn parallel_owned(nets: Vec<NeuralNetwork>) -> Result<NeuralNetwork> {
    let depth = nets
        .iter()
        .map(NeuralNetwork::depth)
        .max()
        .ok_or_else(|| Error::DimensionMismatch("parallelization of zero networks".into()))?;
    let extended = nets.into_iter().map(|n| extend_depth_owned(n, depth)).collect();
    parallel_same_depth_owned(extended)
}

/// Depth-one network `x ↦ A x + b` from a row-major matrix.
pub fn affine_net(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<NeuralNetwork> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    if b.len() != rows {
        return Err(Error::DimensionMismatch(format!("bias of length {} for {rows} rows", b.len())));
    }
    NeuralNetwork::new(vec![AffineLayer::from_dense(rows, cols, a, b.to_vec())?])
}

/// Scalar affine map `t ↦ w t + b`.
pub fn scalar_affine_net(w: f64, b: f64) -> NeuralNetwork {
    affine_net(1, 1, &[w], &[b]).expect("scalar affine")
}

/// `∇_{d,q}`: `q` stacked copies of the identity on ℝ^d.
pub fn fanout_net(d: usize, q: usize) -> NeuralNetwork {
    shifted_fanout_net(d, q, 0.0)
}

/// `q` copies of `x − shift` for every coordinate, with bias `−shift` on each row.
pub fn shifted_fanout_net(d: usize, q: usize, shift: f64) -> NeuralNetwork {
    assert!(d >= 1 && q >= 1, "fanout needs d, q >= 1");
    let mut b = LayerBuilder::with_capacity(d, d * q);
    for _ in 0..q {
        for i in 0..d {
            b.push(i, 1.0);
            b.finish_row();
        }
    }
    let layer = b.build(vec![-shift; d * q]).expect("fanout layer");
    NeuralNetwork::from_layers_unchecked(vec![layer])
}

/// Depth-one network `x ↦ Σ w_j x_j`.
pub fn weighted_sum_net(w: &[f64]) -> Result<NeuralNetwork> {
    if w.is_empty() {
        return Err(Error::DimensionMismatch("empty weight vector".into()));
    }
    affine_net(1, w.len(), w, &[0.0])
}

/// Depth-one zero network `ℝ^dim_in → ℝ`, the fallback for loose tolerances.
pub fn zero_net(dim_in: usize) -> NeuralNetwork {
    let layer = AffineLayer::from_csr(1, dim_in, vec![0, 0], vec![], vec![], vec![0.0]).expect("zero layer");
    NeuralNetwork::from_layers_unchecked(vec![layer])
}
