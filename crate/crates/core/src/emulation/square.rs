//! Sawtooth squaring and polarization products.

use crate::error::{Error, Result};
use crate::relu_net::{Activation, AffineLayer, SparseNetwork};

/// ReLU network for the piecewise-linear interpolant of `y^2` on the dyadic
/// grid of level `m` in `[0, 1]`; equals `y` for `y >= 1` and `0` for `y <= 0`.
///
/// `s(y) = y - sum_{s=1}^m g_s(y) / 4^s` with `g_s` the `s`-fold tent map.
/// Size `O(m)`, depth `m`, `0 <= s(y) - y^2 <= 2^{-2m-2}` on `[0, 1]`.
pub fn square_net(m: usize) -> Result<SparseNetwork> {
    if m == 0 {
        return Err(Error::InvalidArgument("square_net needs m >= 1".into()));
    }
    let mut layers = Vec::with_capacity(m + 1);
    layers.push(AffineLayer::from_triplets(3, 1, vec![(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)], vec![0.0, -0.5, -1.0])?);
    // linear forms over the previous hidden layer
    let mut g = [2.0, -4.0, 2.0];
    let mut acc = [0.5, 1.0, -0.5];
    for s in 1..m {
        let mut t = Vec::new();
        for (j, &w) in g.iter().enumerate() {
            if w != 0.0 {
                t.push((0, j, w));
                t.push((1, j, w));
            }
        }
        for (j, &w) in acc.iter().enumerate() {
            if w != 0.0 {
                t.push((2, j, w));
            }
        }
        layers.push(AffineLayer::from_triplets(3, 3, t, vec![0.0, -0.5, 0.0])?);
        let q = 0.25f64.powi(s as i32 + 1);
        g = [2.0, -4.0, 0.0];
        acc = [-2.0 * q, 4.0 * q, 1.0];
    }
    let t = acc.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(j, &w)| (0, j, w)).collect();
    layers.push(AffineLayer::from_triplets(1, 3, t, vec![0.0])?);
    SparseNetwork::new(layers, Activation::Relu)
}

/// Parameters of a binary product network.
#[derive(Clone, Copy, Debug)]
pub struct ProductSpec {
    /// Power of two with `|a| + |b| <= scale`.
    pub scale: f64,
    pub levels: usize,
    /// Guaranteed `sup |ab - net(a, b)|` on `[-B, B]^2`.
    pub error_bound: f64,
}

pub fn product_spec(bound: f64, delta: f64) -> Result<ProductSpec> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidArgument(format!("product bound must be positive, got {bound}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("product accuracy must lie in (0, 1), got {delta}")));
    }
    let scale = 2f64.powi((2.0 * bound).log2().ceil() as i32);
    let levels = ((scale / (2.0 * delta.sqrt())).log2().ceil().max(1.0)) as usize;
    let error_bound = scale * scale * 0.25f64.powi(levels as i32 + 1);
    Ok(ProductSpec { scale, levels, error_bound })
}

/// `(a, b) -> ab` up to `delta` on `[-B, B]^2` by polarization,
/// `ab = ((a+b)^2 - a^2 - b^2) / 2`, with squares `Y^2 s(|z| / Y)`.
///
/// The three squaring copies are interleaved unit by unit, so that
/// `net(a, 0) = net(0, b) = 0` holds exactly in floating point.
pub fn product2_net(bound: f64, delta: f64) -> Result<SparseNetwork> {
    let spec = product_spec(bound, delta)?;
    product2_from_spec(&spec)
}

pub(crate) fn product2_from_spec(spec: &ProductSpec) -> Result<SparseNetwork> {
    let y = spec.scale;
    let sq = square_net(spec.levels)?;
    let sql = sq.layers();
    let mut layers = Vec::with_capacity(sql.len() + 1);
    // z_0 = a + b, z_1 = a, z_2 = b ; units sigma(z_c) then sigma(-z_c)
    let zc: [&[(usize, f64)]; 3] = [&[(0, 1.0), (1, 1.0)], &[(0, 1.0)], &[(1, 1.0)]];
    let mut t = Vec::new();
    for (c, z) in zc.iter().enumerate() {
        for &(j, w) in z.iter() {
            t.push((c, j, w));
            t.push((3 + c, j, -w));
        }
    }
    layers.push(AffineLayer::from_triplets(6, 2, t, vec![0.0; 6])?);
    // first square layer acting on |z_c| / Y
    let l0 = &sql[0];
    let mut t = Vec::new();
    let mut bias = Vec::new();
    for r in 0..l0.output_dim() {
        let w: f64 = l0.weights.row(r).map(|(_, w)| w).sum();
        for c in 0..3 {
            let row = 3 * r + c;
            t.push((row, c, w / y));
            t.push((row, 3 + c, w / y));
            bias.push(l0.bias[r]);
        }
    }
    layers.push(AffineLayer::from_triplets(bias.len(), 6, t, bias)?);
    for l in &sql[1..sql.len() - 1] {
        let mut t = Vec::new();
        let mut bias = Vec::new();
        for r in 0..l.output_dim() {
            for c in 0..3 {
                for (j, w) in l.weights.row(r) {
                    t.push((3 * r + c, 3 * j + c, w));
                }
                bias.push(l.bias[r]);
            }
        }
        layers.push(AffineLayer::from_triplets(bias.len(), 3 * l.input_dim(), t, bias)?);
    }
    let out = sql.last().unwrap();
    let h = 0.5 * y * y;
    let mut t = Vec::new();
    for (j, w) in out.weights.row(0) {
        t.push((0, 3 * j, h * w));
        t.push((0, 3 * j + 1, -h * w));
        t.push((0, 3 * j + 2, -h * w));
    }
    layers.push(AffineLayer::from_triplets(1, 3 * out.input_dim(), t, vec![0.0])?);
    SparseNetwork::new(layers, Activation::Relu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_exact_points_and_error() {
        let s = square_net(4).unwrap();
        assert_eq!(s.eval1(0.0), 0.0);
        assert_eq!(s.eval1(1.0), 1.0);
        assert_eq!(s.eval1(0.5), 0.25);
        let mut worst: f64 = 0.0;
        for i in 0..=100_000 {
            let x = i as f64 / 100_000.0;
            let e = s.eval1(x) - x * x;
            assert!(e >= -1e-15);
            worst = worst.max(e);
        }
        assert!(worst <= 2f64.powi(-10));
        assert!(worst >= 0.9 * 2f64.powi(-10));
        assert_eq!(s.depth(), 4);
    }

    #[test]
    fn product_zero_factor_and_accuracy() {
        let p = product2_net(1.0, 1e-3).unwrap();
        for i in 0..100 {
            let a = (i as f64 * 0.731).sin() * 1.0;
            assert_eq!(p.evaluate(&[a, 0.0]).unwrap()[0], 0.0);
            assert_eq!(p.evaluate(&[0.0, a]).unwrap()[0], 0.0);
        }
        assert!((p.evaluate(&[0.5, 0.5]).unwrap()[0] - 0.25).abs() <= 1e-3);
        for (b, d) in [(1.0, 1e-2), (4.0, 1e-3)] {
            let p = product2_net(b, d).unwrap();
            let n = 129;
            for i in 0..n {
                for j in 0..n {
                    let x = -b + 2.0 * b * i as f64 / (n - 1) as f64;
                    let y = -b + 2.0 * b * j as f64 / (n - 1) as f64;
                    assert!((p.evaluate(&[x, y]).unwrap()[0] - x * y).abs() <= d);
                }
            }
        }
    }
}
