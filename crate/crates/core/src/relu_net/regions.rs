//! Enumeration of the linear pieces of a univariate ReLU network.

use super::{Activation, Breakpoints, SparseNetwork};
use crate::error::{Error, Result};

/// Linear pieces of a 1 -> 1 ReLU network: `points` are the interior piece
/// boundaries and piece `k` (between `points[k-1]` and `points[k]`) is
/// `slopes[k] * x + intercepts[k]`.
#[derive(Clone, Debug)]
pub struct LinearRegions {
    pub points: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl LinearRegions {
    /// Breakpoint form with values taken from the network's own forward pass.
    pub fn to_breakpoints(&self, net: &SparseNetwork) -> Result<Breakpoints> {
        if self.points.is_empty() {
            // affine network: represent with one artificial breakpoint at 0
            return Breakpoints::new(vec![0.0], vec![net.eval1(0.0)], self.slopes[0], self.slopes[0]);
        }
        let values = self.points.iter().map(|&x| net.eval1(x)).collect();
        Breakpoints::new(self.points.clone(), values, self.slopes[0], *self.slopes.last().unwrap())
    }

    pub fn num_pieces(&self) -> usize {
        self.slopes.len()
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (false, true) => hi - 1.0 - hi.abs(),
        (true, false) => lo + 1.0 + lo.abs(),
        (false, false) => 0.0,
    }
}

/// Enumerates the linear pieces by depth-first refinement through the layers.
/// Fails once more than `cap` pieces have been produced, or once the
/// refinement has touched more than `WORK_LIMIT` weights.
const WORK_LIMIT: usize = 400_000_000;

pub fn linear_regions(net: &SparseNetwork, cap: usize) -> Result<LinearRegions> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(Error::InvalidArgument("linear_regions needs a 1 -> 1 network".into()));
    }
    if net.activation() != Activation::Relu && net.depth() > 0 {
        return Err(Error::InvalidArgument("linear_regions needs a ReLU network".into()));
    }
    let layers = net.layers();
    let depth = net.depth();
    // buf[l] holds the pre-activation coefficients of layer l on the interval
    // currently being refined; siblings on the stack share their parent's row
    let mut buf: Vec<Vec<(f64, f64)>> = layers.iter().map(|l| vec![(0.0, 0.0); l.output_dim()]).collect();
    let l0 = &layers[0];
    for (i, slot) in buf[0].iter_mut().enumerate() {
        *slot = (l0.weights.row(i).map(|(_, w)| w).sum::<f64>(), l0.bias[i]);
    }
    let mut out = LinearRegions { points: vec![], slopes: vec![], intercepts: vec![] };
    let mut finals: Vec<(f64, f64, f64, f64)> = Vec::new();
    if depth == 0 {
        finals.push((f64::NEG_INFINITY, f64::INFINITY, buf[0][0].0, buf[0][0].1));
    }
    // (layer to compute, lo, hi)
    let mut stack: Vec<(usize, f64, f64)> = Vec::new();
    let mut cuts: Vec<f64> = Vec::new();
    let mut work = 0usize;
    let mut split = |pre: &[(f64, f64)], l: usize, lo: f64, hi: f64, stack: &mut Vec<(usize, f64, f64)>| -> Result<()> {
        cuts.clear();
        cuts.extend(pre.iter().filter(|(a, _)| *a != 0.0).map(|(a, b)| -b / a).filter(|&r| r > lo && r < hi));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        work += (cuts.len() + 1) * (layers[l].weights.nnz() + pre.len());
        if work > WORK_LIMIT {
            return Err(Error::Numerical("linear region enumeration exceeded its work limit".into()));
        }
        // push in reverse so pieces come out left to right
        let mut b = hi;
        for &c in cuts.iter().rev() {
            stack.push((l, c, b));
            b = c;
        }
        stack.push((l, lo, b));
        Ok(())
    };
    if depth > 0 {
        split(&buf[0], 1, f64::NEG_INFINITY, f64::INFINITY, &mut stack)?;
    }
    while let Some((l, lo, hi)) = stack.pop() {
        let m = midpoint(lo, hi);
        let (done, rest) = buf.split_at_mut(l);
        let pre = &done[l - 1];
        let layer = &layers[l];
        for (i, slot) in rest[0].iter_mut().enumerate() {
            let (mut s, mut c) = (0.0, layer.bias[i]);
            for (j, wv) in layer.weights.row(i) {
                let (a, b) = pre[j];
                if a * m + b > 0.0 {
                    s += wv * a;
                    c += wv * b;
                }
            }
            *slot = (s, c);
        }
        if l == depth {
            finals.push((lo, hi, rest[0][0].0, rest[0][0].1));
            if finals.len() > cap {
                return Err(Error::Numerical(format!("more than {cap} linear pieces")));
            }
        } else {
            split(&rest[0], l + 1, lo, hi, &mut stack)?;
        }
    }
    finals.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (k, &(lo, _, s, c)) in finals.iter().enumerate() {
        if k > 0 {
            let prev_s = *out.slopes.last().unwrap();
            let prev_c = *out.intercepts.last().unwrap();
            if prev_s == s && prev_c == c {
                continue; // same affine map, no kink
            }
            out.points.push(lo);
        }
        out.slopes.push(s);
        out.intercepts.push(c);
    }
    Ok(out)
}
