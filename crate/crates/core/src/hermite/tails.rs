//! Gaussian tail moments and the tail bounds built on them.

use super::{gauss_legendre_rule, hermite_eval};
use crate::error::{Error, Result};
use crate::logreal::{ln_double_factorial, LogReal};
use serde::{Deserialize, Serialize};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `int_{x > M} x^n e^{-x^2/2} dx` and the bound `n!! M^n e^{-M^2/2}`, both in log form.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TailMoment {
    pub exact: LogReal,
    pub bound: LogReal,
}

/// One-sided Gaussian tail moment by the upward recurrence
/// `a_n = M^{n-1} e^{-M^2/2} + (n-1) a_{n-2}`, started from `erfc` and `e^{-M^2/2}`.
pub fn gaussian_tail_moment(n: usize, m: f64) -> Result<TailMoment> {
    if !(m >= 2.0) {
        return Err(Error::InvalidArgument(format!("tail moments need M >= 2, got {m}")));
    }
    let half = -0.5 * m * m;
    let a0 = LogReal::from_ln(
        0.5 * (std::f64::consts::PI / 2.0).ln() + libm::erfc(m / std::f64::consts::SQRT_2).ln(),
    );
    let a0 = if a0.ln.is_finite() { a0 } else { LogReal::from_ln(half - m.ln()) };
    let a1 = LogReal::from_ln(half);
    let mut a = [a0, a1];
    for k in 2..=n {
        let term = LogReal::from_ln((k - 1) as f64 * m.ln() + half);
        let next = term.add(a[k % 2].mul(LogReal::new((k - 1) as f64)));
        a[k % 2] = next;
    }
    let exact = a[n % 2];
    let bound = LogReal::from_ln(ln_double_factorial(n as u64) + n as f64 * m.ln() + half);
    let ok = if n % 2 == 0 {
        exact.ln + std::f64::consts::LN_2 <= bound.ln + 1e-12
    } else {
        exact.ln <= bound.ln + 1e-12
    };
    if !ok {
        return Err(Error::Numerical(format!("tail moment bound violated for n={n}, M={m}")));
    }
    Ok(TailMoment { exact, bound })
}

/// `(2 pi)^{-1/2} (pn)!! (3M)^{pn} e^{-M^2/2}`, an upper bound for
/// `int_{|x|>M} |H_n|^p d gamma_1`.
pub fn hermite_tail_bound(n: usize, p: usize, m: f64) -> LogReal {
    let q = (n * p) as u64;
    LogReal::from_ln(-LN_SQRT_2PI + ln_double_factorial(q) + q as f64 * (3.0 * m).ln() - 0.5 * m * m)
}

/// `int_{|x|>r} H_n^2 d gamma_1`, by Gauss-Legendre panels out to a radius
/// where [`hermite_tail_bound`] is negligible, plus that bound.
pub fn hermite_sq_tail(n: usize, r: f64) -> f64 {
    let r = r.max(0.0);
    let mut end = r + 1.0;
    while hermite_tail_bound(n, 2, end).ln > -70.0 {
        end += 0.5;
    }
    let rule = gauss_legendre_rule(20);
    let k = ((end - r) / 0.25).ceil() as usize;
    let h = (end - r) / k as f64;
    let mut acc = 0.0;
    for p in 0..k {
        let c = r + h * (p as f64 + 0.5);
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = c + 0.5 * h * t;
            let v = hermite_eval(n, x);
            acc += w * v * v * (-0.5 * x * x - LN_SQRT_2PI).exp();
        }
    }
    2.0 * acc * 0.5 * h + hermite_tail_bound(n, 2, end).value()
}

/// `m_k(a, b) = int_a^b x^k e^{-x^2/2} dx` for `k = 0..=k_max`; `a` or `b` may be infinite.
pub fn incomplete_moments(k_max: usize, a: f64, b: f64) -> Vec<f64> {
    let s2 = std::f64::consts::SQRT_2;
    let c = (std::f64::consts::PI / 2.0).sqrt();
    let m0 = if a >= 0.0 {
        c * (libm::erfc(a / s2) - libm::erfc(b / s2))
    } else if b <= 0.0 {
        c * (libm::erfc(-b / s2) - libm::erfc(-a / s2))
    } else {
        c * (libm::erf(b / s2) - libm::erf(a / s2))
    };
    let g = |x: f64| if x.is_infinite() { 0.0 } else { (-0.5 * x * x).exp() };
    let (ga, gb) = (g(a), g(b));
    let mut out = vec![0.0; k_max + 1];
    out[0] = m0;
    if k_max >= 1 {
        out[1] = ga - gb;
    }
    // a^{k-1} e^{-a^2/2}, zero at infinity
    let pw = |x: f64, gx: f64, e: usize| if gx == 0.0 { 0.0 } else { x.powi(e as i32) * gx };
    for k in 2..=k_max {
        out[k] = pw(a, ga, k - 1) - pw(b, gb, k - 1) + (k - 1) as f64 * out[k - 2];
    }
    out
}

/// `(2 / (a (1 - a))) (sqrt(s + 2) + 4) a^{sqrt(s)}` with `a = r^{sqrt 2}`, bounding
/// `sum_{k > s} r^{sqrt(2k + 1)}`.
pub fn tail_sum_bound(r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r must lie in (0, 1), got {r}")));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("s must be positive, got {s}")));
    }
    let a = r.powf(std::f64::consts::SQRT_2);
    Ok(2.0 / (a * (1.0 - a)) * ((s + 2.0).sqrt() + 4.0) * a.powf(s.sqrt()))
}

/// `sum_{s < k <= s + terms} r^{sqrt(2k + 1)}` for integer `k`.
pub fn direct_tail_sum(r: f64, s: f64, terms: usize) -> f64 {
    let start = s.floor() as u64 + 1;
    let end = (s + terms as f64).floor() as u64;
    let lr = r.ln();
    (start..=end).map(|k| (lr * ((2 * k + 1) as f64).sqrt()).exp()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_tail_matches_closed_form() {
        for r in [0.0, 1.0, 3.0, 6.0] {
            let phi = (-0.5f64 * r * r - LN_SQRT_2PI).exp();
            let exact = 2.0 * r * phi + libm::erfc(r / std::f64::consts::SQRT_2);
            assert!((hermite_sq_tail(1, r) - exact).abs() <= 1e-13 + 1e-10 * exact, "r={r}");
        }
        assert!((hermite_sq_tail(7, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_examples() {
        let t = gaussian_tail_moment(1, 2.0).unwrap();
        assert!((t.exact.value() - (-2f64).exp()).abs() < 1e-15);
        assert!((t.bound.value() - 2.0 * (-2f64).exp()).abs() < 1e-15);
        let t0 = gaussian_tail_moment(0, 2.0).unwrap();
        assert!((t0.exact.value() - 0.057_026_123_5).abs() < 1e-9);
        assert!((t0.bound.value() - (-2f64).exp()).abs() < 1e-15);
        assert!(gaussian_tail_moment(3, 1.5).is_err());
    }

    #[test]
    fn moment_recurrence_matches_incomplete() {
        let m = incomplete_moments(12, 3.0, f64::INFINITY);
        for (n, &v) in m.iter().enumerate() {
            let t = gaussian_tail_moment(n, 3.0).unwrap();
            assert!((t.exact.value() - v).abs() <= 1e-12 * v, "n={n}");
        }
    }

    #[test]
    fn tail_bound_log_space() {
        let m = 4.0;
        let b = hermite_tail_bound(0, 2, m).value();
        assert!((b - (-0.5 * m * m - LN_SQRT_2PI).exp()).abs() < 1e-18);
        assert!(hermite_tail_bound(3, 2, 6.0).ln.is_finite());
        assert!(hermite_tail_bound(150, 2, 30.0).ln.is_finite());
    }

    #[test]
    fn tail_sum() {
        assert!(direct_tail_sum(0.5, 10.0, 1_000_000) <= tail_sum_bound(0.5, 10.0).unwrap());
        let b: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&s| tail_sum_bound(0.5, s).unwrap()).collect();
        assert!(b[0] > b[1] && b[1] > b[2]);
        let v = tail_sum_bound(0.9, 1.0).unwrap();
        assert!(v > 0.0 && v.is_finite());
        assert!(tail_sum_bound(1.0, 1.0).is_err());
    }
}
