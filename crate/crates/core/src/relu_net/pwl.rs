//! Continuous piecewise-linear functions and their depth-1 realization.

use super::{AffineLayer, Activation, SparseNetwork};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Continuous piecewise-linear function given by its values at strictly
/// increasing breakpoints `x_0 < ... < x_n` and the slopes of the two
/// unbounded pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub left_slope: f64,
    pub right_slope: f64,
}

impl Breakpoints {
    pub fn new(points: Vec<f64>, values: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        let bp = Breakpoints { points, values, left_slope, right_slope };
        bp.validate()?;
        Ok(bp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.values.len() {
            return Err(Error::InvalidArgument("breakpoints and values must be nonempty and of equal length".into()));
        }
        if self.points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        let all = self.points.iter().chain(&self.values).chain([&self.left_slope, &self.right_slope]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("breakpoint data must be finite".into()));
        }
        Ok(())
    }

    /// Slope on each of the `n + 2` pieces, left to right.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = vec![self.left_slope];
        for w in 0..self.points.len() - 1 {
            s.push((self.values[w + 1] - self.values[w]) / (self.points[w + 1] - self.points[w]));
        }
        s.push(self.right_slope);
        s
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        let n = p.len();
        if x <= p[0] {
            return self.values[0] + self.left_slope * (x - p[0]);
        }
        if x >= p[n - 1] {
            return self.values[n - 1] + self.right_slope * (x - p[n - 1]);
        }
        let k = p.partition_point(|&t| t <= x) - 1;
        let t = (x - p[k]) / (p[k + 1] - p[k]);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }
}

/// Exact depth-1 realization
/// `f(x) = f(x_0) - s_0 sigma(x_0 - x) + s_1 sigma(x - x_0) + sum_{i>=1} (s_{i+1} - s_i) sigma(x - x_i)`.
///
/// With `n + 1` breakpoints (`n + 2` pieces) the size is at most
/// `3 (n + 2) + 1`: every hidden unit carries an input weight, a bias and an
/// output weight.
pub fn from_piecewise_linear(bp: &Breakpoints) -> Result<SparseNetwork> {
    bp.validate()?;
    let s = bp.slopes();
    let x = &bp.points;
    let mut w_in = Vec::new();
    let mut b_in = Vec::new();
    let mut w_out = Vec::new();
    let mut push = |win: f64, bin: f64, wout: f64| {
        if wout != 0.0 {
            w_in.push(win);
            b_in.push(bin);
            w_out.push(wout);
        }
    };
    push(-1.0, x[0], -s[0]);
    push(1.0, -x[0], s[1]);
    for i in 1..x.len() {
        push(1.0, -x[i], s[i + 1] - s[i]);
    }
    let h = w_in.len();
    let l0 = AffineLayer::from_triplets(h, 1, (0..h).map(|i| (i, 0, w_in[i])).collect(), b_in)?;
    let l1 = AffineLayer::from_triplets(1, h, (0..h).map(|i| (0, i, w_out[i])).collect(), vec![bp.values[0]])?;
    SparseNetwork::new(vec![l0, l1], Activation::Relu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_itself() {
        let bp = Breakpoints::new(vec![0.0], vec![0.0], 0.0, 1.0).unwrap();
        let n = from_piecewise_linear(&bp).unwrap();
        assert_eq!(n.depth(), 1);
        for x in [-2.0, 0.0, 3.5] {
            assert_eq!(n.eval1(x), x.max(0.0));
        }
    }

    #[test]
    fn hat_and_abs() {
        let hat = Breakpoints::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], 0.0, 0.0).unwrap();
        let n = from_piecewise_linear(&hat).unwrap();
        assert_eq!(n.eval1(0.0), 1.0);
        assert_eq!(n.eval1(1.0), 0.0);
        assert_eq!(n.eval1(-1.0), 0.0);
        let abs = Breakpoints::new(vec![0.0], vec![0.0], -1.0, 1.0).unwrap();
        assert_eq!(from_piecewise_linear(&abs).unwrap().eval1(-2.0), 2.0);
        assert!(from_piecewise_linear(&abs).unwrap().size() <= 3 * 2 + 1);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(Breakpoints::new(vec![1.0, 0.0], vec![0.0, 0.0], 0.0, 0.0).is_err());
    }
}
