//! Affine layers, networks and their ReLU realization.
//!
//! Weights live in compressed sparse rows. Every entry of a dense input
//! matrix whose bit pattern differs from `+0.0` is kept, so a dense round
//! trip is bit-exact, while the size `M` counts only entries that compare
//! unequal to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// One affine map `x ↦ A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    bias: Vec<f64>,
}

impl AffineLayer {
    /// Build from a row-major dense matrix.
    pub fn from_dense(rows: usize, cols: usize, weights: &[f64], bias: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a {rows}x{cols} matrix",
                weights.len()
            )));
        }
        let mut b = LayerBuilder::new(cols);
        for r in 0..rows {
            for (c, &w) in weights[r * cols..(r + 1) * cols].iter().enumerate() {
                if w.to_bits() != 0 {
                    b.push(c, w);
                }
            }
            b.finish_row();
        }
        b.build(bias)
    }

    /// Build from raw CSR arrays. Column indices must be strictly increasing within a row.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::DimensionMismatch(m.to_string()));
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != values.len() {
            return bad("row pointer array inconsistent with entries");
        }
        if col_idx.len() != values.len() {
            return bad("column index and value arrays differ in length");
        }
        if bias.len() != rows {
            return bad("bias length differs from row count");
        }
        for r in 0..rows {
            let (s, e) = (row_ptr[r], row_ptr[r + 1]);
            if s > e {
                return bad("row pointers decrease");
            }
            let idx = &col_idx[s..e];
            if idx.iter().any(|&c| c as usize >= cols) || idx.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices out of range or unsorted");
            }
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values, bias })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[s..e].iter().map(|&c| c as usize).zip(self.values[s..e].iter().copied())
    }

    /// Weight `A[r][c]`, zero when not stored.
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[s..e].binary_search(&(c as u32)) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    /// Row-major dense copy of the weight matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }

    /// Nonzero weights plus nonzero biases.
    pub fn size(&self) -> usize {
        self.weight_nnz() + self.bias.iter().filter(|&&b| b != 0.0).count()
    }

    pub fn weight_nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    fn validate_finite(&self, layer: usize) -> Result<()> {
        if self.values.iter().chain(&self.bias).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteWeight { layer })
        }
    }

    /// `out = A x + b`.
    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.rows);
        for r in 0..self.rows {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = self.bias[r];
            for (v, &c) in self.values[s..e].iter().zip(&self.col_idx[s..e]) {
                acc += v * x[c as usize];
            }
            out.push(acc);
        }
    }

    /// `[A; −A]`, `[b; −b]`: the stacked layer used when a network feeds a concatenation.
    pub fn stacked_with_negation(&self) -> Self {
        let mut b = LayerBuilder::with_capacity(self.cols, 2 * self.values.len());
        for sign in [1.0, -1.0] {
            for r in 0..self.rows {
                for (c, v) in self.row(r) {
                    b.push(c, sign * v);
                }
                b.finish_row();
            }
        }
        let bias = self.bias.iter().copied().chain(self.bias.iter().map(|v| -v)).collect();
        b.build(bias).expect("stacking preserves consistency")
    }

    /// `(A | −A)`, `b`: the first layer of a network consuming a stacked input.
    pub fn split_with_negation(&self) -> Self {
        let mut b = LayerBuilder::with_capacity(2 * self.cols, 2 * self.values.len());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                b.push(c, v);
            }
            for (c, v) in self.row(r) {
                b.push(c + self.cols, -v);
            }
            b.finish_row();
        }
        b.build(self.bias.clone()).expect("splitting preserves consistency")
    }

    /// Block-diagonal assembly of several layers.
    pub fn block_diagonal(blocks: &[&AffineLayer]) -> Self {
        let cols: usize = blocks.iter().map(|l| l.cols).sum();
        let nnz: usize = blocks.iter().map(|l| l.values.len()).sum();
        let mut b = LayerBuilder::with_capacity(cols, nnz);
        let mut bias = Vec::with_capacity(blocks.iter().map(|l| l.rows).sum());
        let mut offset = 0;
        for l in blocks {
            for r in 0..l.rows {
                for (c, v) in l.row(r) {
                    b.push(c + offset, v);
                }
                b.finish_row();
            }
            bias.extend_from_slice(&l.bias);
            offset += l.cols;
        }
        b.build(bias).expect("block assembly preserves consistency")
    }
}

/// Incremental CSR construction, one row at a time.
#[derive(Debug)]
pub struct LayerBuilder {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl LayerBuilder {
    pub fn new(cols: usize) -> Self {
        Self::with_capacity(cols, 0)
    }

    pub fn with_capacity(cols: usize, nnz: usize) -> Self {
        Self { cols, row_ptr: vec![0], col_idx: Vec::with_capacity(nnz), values: Vec::with_capacity(nnz) }
    }

    /// Append an entry to the current row; columns must increase.
    pub fn push(&mut self, col: usize, value: f64) {
        debug_assert!(col < self.cols);
        self.col_idx.push(col as u32);
        self.values.push(value);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.values.len());
    }

    pub fn build(self, bias: Vec<f64>) -> Result<AffineLayer> {
        let rows = self.row_ptr.len() - 1;
        AffineLayer::from_csr(rows, self.cols, self.row_ptr, self.col_idx, self.values, bias)
    }
}

/// Depth, size and dimensions of a network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub depth: usize,
    pub size: usize,
    pub per_layer_sizes: Vec<usize>,
    pub dim_in: usize,
    pub dim_out: usize,
}

/// A feed-forward ReLU network: nonempty list of dimension-compatible layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralNetwork {
    layers: Vec<AffineLayer>,
}

/// Validate a layer list and wrap it as a network.
pub fn make_network(layers: Vec<AffineLayer>) -> Result<NeuralNetwork> {
    NeuralNetwork::new(layers)
}

/// Evaluate the ReLU realization of `net` at `x`.
pub fn realize(net: &NeuralNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.realize(x)
}

/// Metrics of `net`.
pub fn measure(net: &NeuralNetwork) -> NetworkMetrics {
    net.metrics()
}

#[inline]
fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

impl NeuralNetwork {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::DimensionMismatch("a network needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.rows {
                return Err(Error::DimensionMismatch(format!("layer {l}: bias length")));
            }
            layer.validate_finite(l)?;
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} has {} inputs but layer {} has {} outputs",
                    l + 1,
                    pair[1].cols,
                    l,
                    pair[0].rows
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Skip validation; callers guarantee the invariants.
    pub(crate) fn from_layers_unchecked(layers: Vec<AffineLayer>) -> Self {
        debug_assert!(!layers.is_empty());
        debug_assert!(layers.windows(2).all(|p| p[1].cols == p[0].rows));
        Self { layers }
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<AffineLayer> {
        self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim_in(&self) -> usize {
        self.layers[0].cols
    }

    pub fn dim_out(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn size(&self) -> usize {
        self.layers.iter().map(AffineLayer::size).sum()
    }

    pub fn metrics(&self) -> NetworkMetrics {
        let per_layer_sizes: Vec<usize> = self.layers.iter().map(AffineLayer::size).collect();
        NetworkMetrics {
            depth: self.depth(),
            size: per_layer_sizes.iter().sum(),
            per_layer_sizes,
            dim_in: self.dim_in(),
            dim_out: self.dim_out(),
        }
    }

    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.dim_in()
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = relu(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Scalar output convenience for networks with one output.
    pub fn realize_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.realize(x)?;
        if out.len() != 1 {
            return Err(Error::DimensionMismatch(format!("network has {} outputs", out.len())));
        }
        Ok(out[0])
    }

    /// Evaluate at many points, fanning out over threads when enabled.
    pub fn realize_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        par::map_slice(xs, |x| self.realize(x)).into_iter().collect()
    }

    /// Sequential counterpart of [`realize_batch`](Self::realize_batch).
    pub fn realize_batch_seq(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        par::seq::map_slice(xs, |x| self.realize(x)).into_iter().collect()
    }
}

pub const SCHEMA_VERSION: u64 = 1;

/// Layers with more entries than this are written in the sparse layout.
pub const DENSE_ENTRY_LIMIT: usize = 1 << 20;

#[derive(Serialize)]
struct DocOut<'a> {
    version: u64,
    layers: Vec<LayerOut<'a>>,
}

#[derive(Serialize)]
struct LayerOut<'a> {
    rows: usize,
    cols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    row_ptr: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    col_idx: Option<&'a [u32]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<&'a [f64]>,
    bias: &'a [f64],
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

#[derive(Deserialize)]
struct DocIn {
    #[allow(dead_code)]
    version: u64,
    layers: Vec<LayerIn>,
}

#[derive(Deserialize)]
struct LayerIn {
    rows: usize,
    cols: usize,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    row_ptr: Option<Vec<usize>>,
    #[serde(default)]
    col_idx: Option<Vec<u32>>,
    #[serde(default)]
    values: Option<Vec<f64>>,
    bias: Vec<f64>,
}

/// Write `net` as JSON. Small layers use the dense `weights` array; layers
/// above [`DENSE_ENTRY_LIMIT`] entries use `row_ptr`/`col_idx`/`values`.
pub fn write_json<W: std::io::Write>(net: &NeuralNetwork, writer: W) -> Result<()> {
    let layers = net
        .layers
        .iter()
        .map(|l| {
            let dense = l.rows.saturating_mul(l.cols) <= DENSE_ENTRY_LIMIT;
            LayerOut {
                rows: l.rows,
                cols: l.cols,
                weights: dense.then(|| l.to_dense()),
                row_ptr: (!dense).then_some(&l.row_ptr[..]),
                col_idx: (!dense).then_some(&l.col_idx[..]),
                values: (!dense).then_some(&l.values[..]),
                bias: &l.bias,
            }
        })
        .collect();
    serde_json::to_writer(writer, &DocOut { version: SCHEMA_VERSION, layers })
        .map_err(|e| Error::ParseError(e.to_string()))
}

pub fn serialize(net: &NeuralNetwork) -> Vec<u8> {
    let mut out = Vec::new();
    write_json(net, &mut out).expect("writing to memory cannot fail");
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<NeuralNetwork> {
    let probe: VersionProbe =
        serde_json::from_slice(bytes).map_err(|e| Error::ParseError(e.to_string()))?;
    if probe.version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch { found: probe.version, expected: SCHEMA_VERSION });
    }
    let doc: DocIn = serde_json::from_slice(bytes).map_err(|e| Error::ParseError(e.to_string()))?;
    let layers = doc
        .layers
        .into_iter()
        .map(|l| match (l.weights, l.row_ptr, l.col_idx, l.values) {
            (Some(w), None, None, None) => AffineLayer::from_dense(l.rows, l.cols, &w, l.bias),
            (None, Some(p), Some(c), Some(v)) => AffineLayer::from_csr(l.rows, l.cols, p, c, v, l.bias),
            _ => Err(Error::ParseError("layer needs either dense or sparse weights".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    NeuralNetwork::new(layers)
}

pub fn read_json<R: std::io::Read>(mut reader: R) -> Result<NeuralNetwork> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf).map_err(|e| Error::ParseError(e.to_string()))?;
    deserialize(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> AffineLayer {
        AffineLayer::from_dense(rows, cols, w, b.to_vec()).unwrap()
    }

    #[test]
    fn single_layer_is_affine() {
        let net = make_network(vec![layer(1, 1, &[2.0], &[1.0])]).unwrap();
        assert_eq!(net.realize(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(net.realize(&[-3.0]).unwrap(), vec![-5.0]);
        let m = net.metrics();
        assert_eq!((m.depth, m.dim_in, m.dim_out, m.size), (1, 1, 1, 2));
    }

    #[test]
    fn shape_conflict_rejected() {
        let a = layer(3, 2, &[0.0; 6], &[0.0; 3]);
        let b = layer(1, 4, &[0.0; 4], &[0.0]);
        assert!(matches!(make_network(vec![a, b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let a = layer(1, 1, &[f64::NAN], &[0.0]);
        assert_eq!(make_network(vec![a]), Err(Error::NonFiniteWeight { layer: 0 }));
    }

    #[test]
    fn negative_zero_kept_but_not_counted() {
        let l = layer(1, 2, &[-0.0, 1.0], &[0.0]);
        assert_eq!(l.to_dense()[0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(l.size(), 1);
    }

    #[test]
    fn split_and_stack_shapes() {
        let l = layer(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0], &[1.0, 0.0]);
        let s = l.stacked_with_negation();
        assert_eq!((s.rows(), s.cols()), (4, 3));
        assert_eq!(s.weight(2, 0), -1.0);
        assert_eq!(s.bias(), &[1.0, 0.0, -1.0, -0.0]);
        let h = l.split_with_negation();
        assert_eq!((h.rows(), h.cols()), (2, 6));
        assert_eq!(h.weight(1, 4), -3.0);
        assert_eq!(h.size(), 2 * 3 + 1);
    }

    #[test]
    fn csr_validation() {
        assert!(AffineLayer::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(AffineLayer::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0], vec![0.0]).is_err());
        assert!(AffineLayer::from_csr(1, 2, vec![0, 1], vec![1], vec![1.0], vec![0.0]).is_ok());
    }

    #[test]
    fn version_mismatch_detected() {
        let doc = br#"{"version":2,"layers":[]}"#;
        assert_eq!(deserialize(doc), Err(Error::SchemaVersionMismatch { found: 2, expected: 1 }));
    }

    #[test]
    fn truncated_document_is_parse_error() {
        let net = make_network(vec![layer(1, 1, &[2.0], &[1.0])]).unwrap();
        let bytes = serialize(&net);
        assert!(matches!(deserialize(&bytes[..bytes.len() / 2]), Err(Error::ParseError(_))));
    }
}
