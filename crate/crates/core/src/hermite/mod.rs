//! Normalized probabilists' Hermite polynomials `H_n` (orthonormal in
//! `L^2(R, gamma_1)`), Hermite functions, and their monomial coefficients.

mod l2;
mod quadrature;
mod tails;

pub(crate) use l2::from_squared;
pub use l2::{
    gaussian_panel_nodes, l2_gamma_error, l2_gamma_error_mc, mc_sq_estimates, tensor_rule_sums, L2Estimate, L2Method,
};
pub use quadrature::{gauss_hermite_rule, gauss_legendre_rule, panel_rule, Measure, QuadratureRule};
pub use tails::{
    direct_tail_sum, gaussian_tail_moment, hermite_sq_tail, hermite_tail_bound, incomplete_moments, tail_sum_bound, TailMoment,
};

use crate::logreal::ln_factorial;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Evaluates `H_n(x)` by the normalized three-term recurrence.
///
/// Overflow saturates to `+-inf`; this does not happen for `n <= 200`, `|x| <= 40`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Writes `H_0(x), ..., H_n(x)` into `out[0..=n]`.
pub fn hermite_eval_all(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n == 0 {
        return;
    }
    out[1] = x;
    for k in 1..n {
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// `(H_n(x), H_{n-1}(x))` as mantissas with a common natural-log scale, so
/// that `H_n(x) = a * exp(scale)`. Used where the plain values overflow.
pub(crate) fn hermite_scaled_pair(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut prev, mut cur, mut scale) = (0.0f64, 1.0f64, 0.0f64);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e150 {
            cur /= m;
            prev /= m;
            scale += m.ln();
        }
    }
    (cur, prev, scale)
}

/// Hermite function `h_n(x) = H_n(sqrt(2) x) exp(-x^2/2) / pi^{1/4}`.
pub fn hermite_function_eval(n: usize, x: f64) -> f64 {
    let (v, _, scale) = hermite_scaled_pair(n, std::f64::consts::SQRT_2 * x);
    if v == 0.0 {
        return 0.0;
    }
    let ln = v.abs().ln() + scale - 0.5 * x * x - 0.25 * std::f64::consts::PI.ln();
    v.signum() * ln.exp()
}

/// Writes `h_0(x), ..., h_n(x)` into `out[0..=n]` by the recurrence
/// `h_{k+1} = (2/(k+1))^{1/2} x h_k - (k/(k+1))^{1/2} h_{k-1}`.
/// Accurate while `exp(-x^2/2)` is a normal number (`|x| < 37`).
pub fn hermite_function_eval_all(n: usize, x: f64, out: &mut [f64]) {
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * x * out[0];
    for k in 1..n {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Horner evaluation of monomial coefficients `c[0] + c[1] x + ...`.
pub fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Monomial coefficients of `H_n`: `c_{n,n-2j} = sqrt(n!) (-1)^j / (j! (n-2j)! 2^j)`.
///
/// The exact part is `rational[k] * sqrt(radicand)` with `radicand = n!`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonomialCoeffs {
    pub degree: usize,
    #[serde(skip)]
    pub rational: Option<Vec<BigRational>>,
    #[serde(skip)]
    pub radicand: Option<BigUint>,
    pub values: Vec<f64>,
}

/// Largest degree for which exact coefficients are produced.
pub const EXACT_COEFF_MAX_DEGREE: usize = 60;

pub fn monomial_coeffs(n: usize) -> MonomialCoeffs {
    let mut values = vec![0.0; n + 1];
    let half_ln_nf = 0.5 * ln_factorial(n as u64);
    for j in 0..=n / 2 {
        let ln = half_ln_nf
            - ln_factorial(j as u64)
            - ln_factorial((n - 2 * j) as u64)
            - j as f64 * std::f64::consts::LN_2;
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        values[n - 2 * j] = s * ln.exp();
    }
    let (rational, radicand) = if n <= EXACT_COEFF_MAX_DEGREE {
        let mut r = vec![BigRational::zero(); n + 1];
        for j in 0..=n / 2 {
            let den = factorial(j) * factorial(n - 2 * j) * (BigUint::one() << j);
            let num = if j % 2 == 0 { BigInt::one() } else { -BigInt::one() };
            r[n - 2 * j] = BigRational::new(num, BigInt::from(den));
        }
        (Some(r), Some(factorial(n)))
    } else {
        (None, None)
    };
    MonomialCoeffs { degree: n, rational, radicand, values }
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |a, k| a * k)
}

impl MonomialCoeffs {
    /// Exact check of `sum_j |c_{n,j}| <= 6^{n/2}`, i.e. `n! (sum |r_j|)^2 <= 6^n`.
    /// `None` beyond the exact range.
    pub fn abs_sum_within_six_pow_half(&self) -> Option<bool> {
        let r = self.rational.as_ref()?;
        let rad = self.radicand.as_ref()?;
        let s: BigRational = r.iter().map(|q| q.abs()).fold(BigRational::zero(), |a, b| a + b);
        let lhs = BigRational::from_integer(BigInt::from(rad.clone())) * &s * &s;
        let rhs = BigRational::from_integer(BigInt::from(6u32).pow(self.degree as u32));
        Some(lhs <= rhs)
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.values, x)
    }
}
