//! Gauss rules for the standard Gaussian measure and for Lebesgue panels.

use super::hermite_scaled_pair;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Standard Gaussian probability measure on R.
    Gaussian,
    /// Lebesgue measure on `[a, b]`.
    Lebesgue { a: f64, b: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub measure: Measure,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

type Cache = Mutex<HashMap<usize, Arc<QuadratureRule>>>;

fn cached(cache: &'static OnceLock<Cache>, n: usize, build: impl FnOnce() -> QuadratureRule) -> Arc<QuadratureRule> {
    let c = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = c.lock().unwrap().get(&n) {
        return r.clone();
    }
    let r = Arc::new(build());
    c.lock().unwrap().insert(n, r.clone());
    r
}

/// Number of eigenvalues below `lambda` of the Jacobi matrix of the
/// normalized Hermite recurrence (zero diagonal, off-diagonal `sqrt(k)`).
fn sturm_count(n: usize, lambda: f64) -> usize {
    let mut count = 0;
    let mut d = -lambda;
    for k in 1..=n {
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
        if k < n {
            d = -lambda - k as f64 / d;
        }
    }
    count
}

/// `num_nodes`-point Gauss rule for the standard Gaussian measure.
///
/// Nodes are the eigenvalues of the Jacobi matrix (bisection on the Sturm
/// sequence, then a Newton step on `H_n`); weights are `1 / (n H_{n-1}(x)^2)`.
pub fn gauss_hermite_rule(num_nodes: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    assert!(num_nodes >= 1, "a quadrature rule needs at least one node");
    cached(&CACHE, num_nodes, || build_gauss_hermite(num_nodes))
}

fn build_gauss_hermite(n: usize) -> QuadratureRule {
    let bound = 2.0 * (n as f64).sqrt() + 1.0;
    let mut pos = Vec::new();
    for i in n.div_ceil(2)..n {
        let (mut lo, mut hi) = (0.0, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(n, mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..3 {
            let (hn, hn1, _) = hermite_scaled_pair(n, x);
            let step = hn / ((n as f64).sqrt() * hn1);
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        pos.push(x);
    }
    let weight = |x: f64| {
        let (_, hn1, scale) = hermite_scaled_pair(n, x);
        (-(n as f64).ln() - 2.0 * (hn1.abs().ln() + scale)).exp()
    };
    let mut nodes = Vec::with_capacity(n);
    nodes.extend(pos.iter().rev().map(|x| -x));
    if n % 2 == 1 {
        nodes.push(0.0);
    }
    nodes.extend(pos.iter().copied());
    let weights = nodes.iter().map(|&x| weight(x)).collect();
    QuadratureRule { nodes, weights, measure: Measure::Gaussian }
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_rule(order: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    assert!(order >= 1, "a quadrature rule needs at least one node");
    cached(&CACHE, order, || build_gauss_legendre(order))
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

fn build_gauss_legendre(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, pm) = legendre_pair(n, x);
            dp = nf * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm) = legendre_pair(n, x);
        dp = if (x * x - 1.0).abs() > 0.0 { nf * (x * p - pm) / (x * x - 1.0) } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights, measure: Measure::Lebesgue { a: -1.0, b: 1.0 } }
}

/// Gauss-Legendre rule of the given order on `[a, b]`.
pub fn panel_rule(a: f64, b: f64, order: usize) -> QuadratureRule {
    let base = gauss_legendre_rule(order);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    QuadratureRule {
        nodes: base.nodes.iter().map(|t| c + h * t).collect(),
        weights: base.weights.iter().map(|w| h * w).collect(),
        measure: Measure::Lebesgue { a, b },
    }
}
