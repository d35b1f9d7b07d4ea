//! Feedforward networks without skip connections,
//! `Phi = A_L o sigma o A_{L-1} o ... o sigma o A_0`,
//! stored as sparse affine layers.
//!
//! `size` counts stored nonzero weights plus nonzero biases and `depth` is
//! the number of activation applications (`layers.len() - 1`). Constructors
//! never store explicit zeros, so `size` is honest.

mod io;
mod ops;
mod pwl;
mod regions;
mod truncate;

pub use io::{deserialize, serialize};
pub use ops::{
    affine_net, compose, identity_net, juxtapose, pad_depth, select_net, sum_networks, zero_net,
    InputMode,
};
pub use pwl::{from_piecewise_linear, Breakpoints};
pub use regions::{linear_regions, LinearRegions};
pub(crate) use ops::identity_chain;
pub use truncate::{truncate_outside_interval, Truncation, TruncationRoute};

use crate::error::{Error, Result};
use crate::exec::Exec;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// `max(x, 0)^k` with `k >= 2`.
    Repu(u32),
}

impl Activation {
    pub fn repu(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("RePU order must be >= 2, got {k}")));
        }
        Ok(Activation::Repu(k))
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Repu(k) => {
                if x <= 0.0 {
                    0.0
                } else {
                    x.powi(k as i32)
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Repu(k) => write!(f, "repu{k}"),
        }
    }
}

/// Compressed sparse row matrix. Entries within a row are sorted by column
/// and no stored value is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: vec![],
            vals: vec![],
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed in the
    /// order given; entries that are (or sum to) zero are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut trips: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, v) in &trips {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i},{j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite weight at ({i},{j})")));
            }
        }
        trips.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut vals = Vec::with_capacity(trips.len());
        let mut k = 0;
        while k < trips.len() {
            let (i, j, mut v) = trips[k];
            k += 1;
            while k < trips.len() && trips[k].0 == i && trips[k].1 == j {
                v += trips[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { rows, cols, row_ptr, col_idx, vals })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(col, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    /// Matrix product `self * other` (accumulated in ascending inner index).
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut acc = vec![0.0f64; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.cols];
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    vals.push(acc[j]);
                }
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
            row_ptr[i + 1] = col_idx.len();
        }
        SparseMatrix { rows: self.rows, cols: other.cols, row_ptr, col_idx, vals }
    }

    /// `self * v` for a dense vector.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub weights: SparseMatrix,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(weights: SparseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::InvalidArgument(format!(
                "bias length {} does not match {} rows",
                bias.len(),
                weights.rows()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical("non-finite bias".into()));
        }
        Ok(AffineLayer { weights, bias })
    }

    pub fn from_triplets(rows: usize, cols: usize, trips: Vec<(usize, usize, f64)>, bias: Vec<f64>) -> Result<Self> {
        AffineLayer::new(SparseMatrix::from_triplets(rows, cols, trips)?, bias)
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
    pub fn size(&self) -> usize {
        self.weights.nnz() + self.bias.iter().filter(|b| **b != 0.0).count()
    }

    /// `self o inner` as one affine map.
    pub fn after(&self, inner: &AffineLayer) -> AffineLayer {
        let weights = self.weights.matmul(&inner.weights);
        let mut bias = self.weights.mul_vec(&inner.bias);
        for (b, c) in bias.iter_mut().zip(&self.bias) {
            *b += c;
        }
        AffineLayer { weights, bias }
    }

    #[inline]
    fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.weights.rows() {
            let mut s = 0.0;
            for (j, a) in self.weights.row(i) {
                s += a * x[j];
            }
            out.push(s + self.bias[i]);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseNetwork {
    layers: Vec<AffineLayer>,
    activation: Activation,
}

impl SparseNetwork {
    pub fn new(layers: Vec<AffineLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        for l in 1..layers.len() {
            if layers[l].input_dim() != layers[l - 1].output_dim() {
                return Err(Error::DimensionMismatch {
                    layer: l,
                    expected: layers[l - 1].output_dim(),
                    got: layers[l].input_dim(),
                });
            }
        }
        Ok(SparseNetwork { layers, activation })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }
    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }
    pub fn size(&self) -> usize {
        self.layers.iter().map(AffineLayer::size).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { layer: 0, expected: self.input_dim(), got: x.len() });
        }
        let mut a = Vec::with_capacity(64);
        let mut b = Vec::with_capacity(64);
        Ok(self.forward(x, &mut a, &mut b).to_vec())
    }

    /// Scalar convenience for 1 -> 1 networks.
    pub fn eval1(&self, x: f64) -> f64 {
        debug_assert!(self.input_dim() == 1 && self.output_dim() == 1);
        let mut a = Vec::with_capacity(64);
        let mut b = Vec::with_capacity(64);
        self.forward(&[x], &mut a, &mut b)[0]
    }

    /// Forward pass using caller-provided scratch buffers; the returned slice
    /// borrows one of them.
    pub fn forward<'a>(&self, x: &[f64], a: &'a mut Vec<f64>, b: &'a mut Vec<f64>) -> &'a [f64] {
        let act = self.activation;
        let last = self.layers.len() - 1;
        self.layers[0].apply_into(x, a);
        for l in 1..=last {
            for v in a.iter_mut() {
                *v = act.apply(*v);
            }
            self.layers[l].apply_into(a, b);
            std::mem::swap(a, b);
        }
        a
    }

    /// Pre-bias dot products of the output layer plus the bias, for each output.
    pub fn output_parts(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let act = self.activation;
        let mut a = Vec::new();
        let mut b = Vec::new();
        let last = self.layers.len() - 1;
        if last == 0 {
            let l = &self.layers[0];
            return (0..l.output_dim())
                .map(|i| (l.weights.row(i).map(|(j, w)| w * x[j]).fold(0.0, |s, t| s + t), l.bias[i]))
                .collect();
        }
        self.layers[0].apply_into(x, &mut a);
        for l in 1..last {
            for v in a.iter_mut() {
                *v = act.apply(*v);
            }
            self.layers[l].apply_into(&a, &mut b);
            std::mem::swap(&mut a, &mut b);
        }
        for v in a.iter_mut() {
            *v = act.apply(*v);
        }
        let l = &self.layers[last];
        (0..l.output_dim())
            .map(|i| {
                let mut s = 0.0;
                for (j, w) in l.weights.row(i) {
                    s += w * a[j];
                }
                (s, l.bias[i])
            })
            .collect()
    }

    /// Evaluates a batch of points (row-major, `input_dim` values each).
    /// Results do not depend on `exec`.
    pub fn evaluate_batch(&self, xs: &[f64], exec: Exec) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if d == 0 {
            return Err(Error::InvalidArgument("batch evaluation needs input_dim >= 1".into()));
        }
        if xs.len() % d != 0 {
            return Err(Error::DimensionMismatch { layer: 0, expected: d, got: xs.len() % d });
        }
        let n = xs.len() / d;
        let o = self.output_dim();
        let chunks = exec.map_chunks(n, 256, |s, e| {
            let mut a = Vec::new();
            let mut b = Vec::new();
            let mut out = Vec::with_capacity((e - s) * o);
            for i in s..e {
                out.extend_from_slice(self.forward(&xs[i * d..(i + 1) * d], &mut a, &mut b));
            }
            out
        });
        Ok(chunks.concat())
    }
}
