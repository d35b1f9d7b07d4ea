//! Network algebra: affine building blocks, composition with merged
//! junctions, juxtaposition, depth padding and linear combinations.

use super::{Activation, AffineLayer, SparseMatrix, SparseNetwork};
use crate::error::{Error, Result};

/// Depth-0 network `x -> W x + b`.
pub fn affine_net(
    rows: usize,
    cols: usize,
    trips: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
    activation: Activation,
) -> Result<SparseNetwork> {
    SparseNetwork::new(vec![AffineLayer::from_triplets(rows, cols, trips, bias)?], activation)
}

/// The constant-zero map `R^cols -> R^rows` (size 0).
pub fn zero_net(cols: usize, rows: usize, activation: Activation) -> SparseNetwork {
    SparseNetwork::new(
        vec![AffineLayer::new(SparseMatrix::zeros(rows, cols), vec![0.0; rows]).unwrap()],
        activation,
    )
    .unwrap()
}

/// Affine selection `x -> (x[idx[0]], x[idx[1]], ...)`.
pub fn select_net(input_dim: usize, idx: &[usize], activation: Activation) -> Result<SparseNetwork> {
    let trips = idx.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
    affine_net(idx.len(), input_dim, trips, vec![0.0; idx.len()], activation)
}

/// ReLU identity of depth 1, `x = sigma(x) - sigma(-x)`; size `4 n`.
pub fn identity_net(n: usize) -> SparseNetwork {
    identity_chain(n, 1, Activation::Relu)
}

/// Identity of depth `k >= 1` for the given activation.
///
/// ReLU uses `x = sigma(x) - sigma(-x)`. RePU(2) uses
/// `x = (s(x+1) + s(-x-1) - s(x-1) - s(1-x)) / 4` with `s = RePU_2`, i.e.
/// `((x+1)^2 - (x-1)^2)/4`; this loses about `u |x|` relative accuracy per
/// layer, so RePU constructions in this crate are depth-synchronized and use
/// it only to carry values a few levels.
pub(crate) fn identity_chain(n: usize, k: usize, activation: Activation) -> SparseNetwork {
    assert!(k >= 1);
    match activation {
        Activation::Relu => {
            let mut layers = Vec::with_capacity(k + 1);
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, 1.0));
                t.push((n + i, i, -1.0));
            }
            layers.push(AffineLayer::from_triplets(2 * n, n, t, vec![0.0; 2 * n]).unwrap());
            for _ in 1..k {
                let mut t = Vec::new();
                for i in 0..n {
                    t.push((i, i, 1.0));
                    t.push((i, n + i, -1.0));
                    t.push((n + i, i, -1.0));
                    t.push((n + i, n + i, 1.0));
                }
                layers.push(AffineLayer::from_triplets(2 * n, 2 * n, t, vec![0.0; 2 * n]).unwrap());
            }
            let mut t = Vec::new();
            for i in 0..n {
                t.push((i, i, 1.0));
                t.push((i, n + i, -1.0));
            }
            layers.push(AffineLayer::from_triplets(n, 2 * n, t, vec![0.0; n]).unwrap());
            SparseNetwork::new(layers, activation).unwrap()
        }
        Activation::Repu(_) => {
            // units per coordinate: s(x+1), s(-x-1), s(x-1), s(1-x)
            let first = |src: &dyn Fn(usize) -> Vec<(usize, f64)>| {
                let mut t = Vec::new();
                let mut bias = vec![0.0; 4 * n];
                for i in 0..n {
                    for (sgn, shift, slot) in [(1.0, 1.0, 0), (-1.0, -1.0, 1), (1.0, -1.0, 2), (-1.0, 1.0, 3)] {
                        for &(c, w) in &src(i) {
                            t.push((4 * i + slot, c, sgn * w));
                        }
                        bias[4 * i + slot] = shift;
                    }
                }
                (t, bias)
            };
            let readout = |i: usize| -> Vec<(usize, f64)> {
                vec![(4 * i, 0.25), (4 * i + 1, 0.25), (4 * i + 2, -0.25), (4 * i + 3, -0.25)]
            };
            let mut layers = Vec::with_capacity(k + 1);
            let (t, b) = first(&|i| vec![(i, 1.0)]);
            layers.push(AffineLayer::from_triplets(4 * n, n, t, b).unwrap());
            for _ in 1..k {
                let (t, b) = first(&readout);
                layers.push(AffineLayer::from_triplets(4 * n, 4 * n, t, b).unwrap());
            }
            let mut t = Vec::new();
            for i in 0..n {
                for (c, w) in readout(i) {
                    t.push((i, c, w));
                }
            }
            layers.push(AffineLayer::from_triplets(n, 4 * n, t, vec![0.0; n]).unwrap());
            SparseNetwork::new(layers, activation).unwrap()
        }
    }
}

fn effective_activation(a: &SparseNetwork, b: &SparseNetwork) -> Result<Activation> {
    match (a.depth(), b.depth()) {
        (0, _) => Ok(b.activation()),
        (_, 0) => Ok(a.activation()),
        _ if a.activation() == b.activation() => Ok(a.activation()),
        _ => Err(Error::ActivationMismatch(a.activation().to_string(), b.activation().to_string())),
    }
}

/// `outer o inner`. The junction affine maps are multiplied into one layer,
/// so `depth = depth(outer) + depth(inner)`. Merge rule for size: the merged
/// layer has at most `nnz(W_outer0) * max_row_nnz(W_inner_last)` weights.
pub fn compose(outer: &SparseNetwork, inner: &SparseNetwork) -> Result<SparseNetwork> {
    if inner.output_dim() != outer.input_dim() {
        return Err(Error::DimensionMismatch {
            layer: inner.depth() + 1,
            expected: outer.input_dim(),
            got: inner.output_dim(),
        });
    }
    let act = effective_activation(outer, inner)?;
    let mut layers: Vec<AffineLayer> = inner.layers()[..inner.depth()].to_vec();
    layers.push(outer.layers()[0].after(inner.layers().last().unwrap()));
    layers.extend_from_slice(&outer.layers()[1..]);
    SparseNetwork::new(layers, act)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputMode {
    /// Every block reads the same input vector.
    Shared,
    /// Block `i` reads its own slice; inputs are concatenated.
    Disjoint,
}

/// Block-diagonal stacking; outputs are concatenated. Requires equal depths
/// (pad explicitly first). Shared mode stacks the first layers on common
/// columns, so its size is the sum of block sizes as well.
pub fn juxtapose(nets: &[SparseNetwork], mode: InputMode) -> Result<SparseNetwork> {
    if nets.is_empty() {
        return Err(Error::InvalidArgument("juxtapose of an empty list".into()));
    }
    let depth = nets[0].depth();
    let mut act = nets[0].activation();
    for n in nets {
        if n.depth() != depth {
            return Err(Error::DepthMismatch(format!(
                "juxtapose needs equal depths, got {} and {}",
                depth,
                n.depth()
            )));
        }
        if depth > 0 && n.activation() != act {
            return Err(Error::ActivationMismatch(act.to_string(), n.activation().to_string()));
        }
        act = n.activation();
    }
    if mode == InputMode::Shared {
        let d = nets[0].input_dim();
        if let Some(n) = nets.iter().find(|n| n.input_dim() != d) {
            return Err(Error::DimensionMismatch { layer: 0, expected: d, got: n.input_dim() });
        }
    }
    let mut layers = Vec::with_capacity(depth + 1);
    for l in 0..=depth {
        let rows: usize = nets.iter().map(|n| n.layers()[l].output_dim()).sum();
        let cols: usize = if l == 0 && mode == InputMode::Shared {
            nets[0].input_dim()
        } else {
            nets.iter().map(|n| n.layers()[l].input_dim()).sum()
        };
        let mut trips = Vec::new();
        let mut bias = Vec::with_capacity(rows);
        let (mut r0, mut c0) = (0, 0);
        for n in nets {
            let layer = &n.layers()[l];
            for (i, j, v) in layer.weights.triplets() {
                trips.push((r0 + i, c0 + j, v));
            }
            bias.extend_from_slice(&layer.bias);
            r0 += layer.output_dim();
            if !(l == 0 && mode == InputMode::Shared) {
                c0 += layer.input_dim();
            }
        }
        layers.push(AffineLayer::from_triplets(rows, cols, trips, bias)?);
    }
    SparseNetwork::new(layers, act)
}

/// Pads `net` with identity layers to exactly `target_depth`.
///
/// The identity block is attached on the input or the output side, whichever
/// is cheaper. Size increase is at most
/// `min(nnz(W_0) + 2 n_in + 4 n_in (k-1), size(A_L) + 2 n_out + 4 n_out (k-1))`
/// for `k = target_depth - depth`. A depth-0 net keeps its activation tag,
/// so callers padding an affine map for RePU must set the tag first.
pub fn pad_depth(net: &SparseNetwork, target_depth: usize) -> Result<SparseNetwork> {
    let d = net.depth();
    if target_depth < d {
        return Err(Error::DepthMismatch(format!("cannot pad depth {d} down to {target_depth}")));
    }
    let k = target_depth - d;
    if k == 0 {
        return Ok(net.clone());
    }
    let act = net.activation();
    let per = match act {
        Activation::Relu => 4,
        Activation::Repu(_) => 16,
    };
    let nin = net.input_dim();
    let nout = net.output_dim();
    let in_cost = net.layers()[0].weights.nnz() * (per / 4) + per * nin * k;
    let out_cost = net.layers().last().unwrap().size() * (per / 4) + per * nout * k;
    if in_cost <= out_cost && nin > 0 {
        compose(net, &identity_chain(nin, k, act))
    } else {
        compose(&identity_chain(nout, k, act), net)
    }
}

/// `x -> sum_i c_i net_i(x)` for scalar-output networks sharing an input.
/// Nets are padded to the maximal depth, juxtaposed in shared mode and
/// combined by a final (merged) affine row.
pub fn sum_networks(nets: &[SparseNetwork], coefficients: &[f64]) -> Result<SparseNetwork> {
    if nets.len() != coefficients.len() {
        return Err(Error::InvalidArgument(format!(
            "{} networks but {} coefficients",
            nets.len(),
            coefficients.len()
        )));
    }
    if nets.iter().any(|n| n.output_dim() != 1) {
        return Err(Error::InvalidArgument("sum_networks needs scalar outputs".into()));
    }
    let depth = nets.iter().map(SparseNetwork::depth).max().unwrap_or(0);
    let padded: Vec<SparseNetwork> = nets.iter().map(|n| pad_depth(n, depth)).collect::<Result<_>>()?;
    let stacked = juxtapose(&padded, InputMode::Shared)?;
    let trips = coefficients.iter().enumerate().map(|(i, &c)| (0, i, c)).collect();
    let row = affine_net(1, nets.len(), trips, vec![0.0], stacked.activation())?;
    compose(&row, &stacked)
}
