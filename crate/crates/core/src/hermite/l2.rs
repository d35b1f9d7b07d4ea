//! `L^2(gamma_d)` distances between a target and an approximation.

use super::quadrature::gauss_legendre_rule;
use super::tails::incomplete_moments;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::relu_net::LinearRegions;
use crate::rng::gaussian_sample;
use serde::{Deserialize, Serialize};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Debug)]
pub enum L2Method {
    /// `g` piecewise linear with the given regions, `f` a polynomial with monomial
    /// coefficients `f_coeffs` (used on the unbounded pieces; `f` itself is used
    /// on bounded pieces through a converged panel rule).
    PwlExact { f_coeffs: Vec<f64>, regions: LinearRegions },
    /// Composite Gauss-Legendre panels on `[-radius, radius]`; `tail_sq` bounds
    /// `int_{|x| > radius} (f - g)^2 d gamma_1`.
    PanelTail { radius: f64, panel_width: f64, tail_sq: f64 },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Estimate {
    pub estimate: f64,
    pub error_bar: f64,
    pub method: String,
}

pub(crate) fn from_squared(sq: f64, bar_sq: f64, method: &str) -> L2Estimate {
    let est = sq.max(0.0).sqrt();
    let lo = (sq - bar_sq).max(0.0).sqrt();
    L2Estimate { estimate: est, error_bar: (est - lo).max((sq + bar_sq).max(0.0).sqrt() - est), method: method.into() }
}

fn panels(a: f64, b: f64, width: f64) -> Vec<(f64, f64)> {
    let k = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / k as f64;
    (0..k).map(|i| (a + h * i as f64, if i + 1 == k { b } else { a + h * (i + 1) as f64 })).collect()
}

fn panel_integral(h: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64, order: usize) -> f64 {
    let r = gauss_legendre_rule(order);
    let (c, s) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (t, w) in r.nodes.iter().zip(&r.weights) {
        let x = c + s * t;
        let v = h(x);
        acc += w * v * v * (-0.5 * x * x).exp();
    }
    acc * s * INV_SQRT_2PI
}

/// `||f - g||_{L^2(gamma_1)}` with an error bar.
pub fn l2_gamma_error(
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &(dyn Fn(f64) -> f64 + Sync),
    method: &L2Method,
    exec: Exec,
) -> Result<L2Estimate> {
    let diff = |x: f64| f(x) - g(x);
    match method {
        L2Method::PwlExact { f_coeffs, regions } => pwl_exact(f, f_coeffs, regions, exec),
        L2Method::PanelTail { radius, panel_width, tail_sq } => {
            if !(*radius > 0.0 && *panel_width > 0.0 && *tail_sq >= 0.0) {
                return Err(Error::InvalidArgument("panel+tail needs positive radius and width".into()));
            }
            let ps = panels(-radius, *radius, *panel_width);
            let parts = exec.map(ps.len(), |i| {
                let (a, b) = ps[i];
                (panel_integral(&diff, a, b, 32), panel_integral(&diff, a, b, 16))
            });
            let q32: f64 = parts.iter().map(|p| p.0).sum();
            let q16: f64 = parts.iter().map(|p| p.1).sum();
            Ok(from_squared(q32, (q32 - q16).abs() + tail_sq, "panel+tail"))
        }
        L2Method::MonteCarlo { samples, seed } => {
            let d1 = |x: &[f64]| diff(x[0]);
            Ok(l2_gamma_error_mc(&d1, 1, *samples, *seed, exec))
        }
    }
}

fn pwl_exact(
    f: &(dyn Fn(f64) -> f64 + Sync),
    f_coeffs: &[f64],
    regions: &LinearRegions,
    exec: Exec,
) -> Result<L2Estimate> {
    let pts = &regions.points;
    if regions.slopes.len() != pts.len() + 1 {
        return Err(Error::InvalidArgument("pwl-exact needs breakpoint metadata".into()));
    }
    let deg = f_coeffs.len().saturating_sub(1);
    let order = (deg + 12).clamp(16, 64);
    // bounded pieces, split into panels of width <= 1/2; g is the piece's affine map
    let mut ps = Vec::new();
    for (k, w) in pts.windows(2).enumerate() {
        for (a, b) in panels(w[0], w[1], 0.5) {
            ps.push((a, b, regions.slopes[k + 1], regions.intercepts[k + 1]));
        }
    }
    let parts = exec.map_chunks(ps.len(), 4096, |s, e| {
        ps[s..e]
            .iter()
            .map(|&(a, b, sl, ic)| panel_integral(&|x: f64| f(x) - (sl * x + ic), a, b, order))
            .sum::<f64>()
    });
    let mut total: f64 = parts.iter().sum();
    // unbounded pieces: (f - affine)^2 is a polynomial; integrate with incomplete moments
    let tail = |a: f64, b: f64, slope: f64, icpt: f64| {
        let mut p = f_coeffs.to_vec();
        p.resize(p.len().max(2), 0.0);
        p[0] -= icpt;
        p[1] -= slope;
        let mut sq = vec![0.0; 2 * p.len() - 1];
        for (i, &u) in p.iter().enumerate() {
            for (j, &v) in p.iter().enumerate() {
                sq[i + j] += u * v;
            }
        }
        let mom = incomplete_moments(sq.len() - 1, a, b);
        sq.iter().zip(&mom).map(|(c, m)| c * m).sum::<f64>() * INV_SQRT_2PI
    };
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => (0.0, 0.0),
    };
    let n = regions.slopes.len();
    total += tail(f64::NEG_INFINITY, first, regions.slopes[0], regions.intercepts[0]);
    total += tail(last, f64::INFINITY, regions.slopes[n - 1], regions.intercepts[n - 1]);
    let bar = 1e3 * f64::EPSILON * total.abs() + f64::MIN_POSITIVE;
    Ok(from_squared(total, bar, "pwl-exact"))
}

/// Monte Carlo `||diff||_{L^2(gamma_d)}` from counter-based samples; the
/// reduction is sequential so the value does not depend on `exec`.
pub fn l2_gamma_error_mc(
    diff: &(dyn Fn(&[f64]) -> f64 + Sync),
    d: usize,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> L2Estimate {
    let parts = exec.map_chunks(samples, 8192, |s, e| {
        let mut y = vec![0.0; d];
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in s..e {
            gaussian_sample(seed, i as u64, &mut y);
            let v = diff(&y);
            s1 += v * v;
            s2 += v * v * v * v;
        }
        (s1, s2)
    });
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = if samples > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let est = mean.max(0.0).sqrt();
    let bar_sq = (var / n).sqrt();
    let bar = if est > 0.0 { bar_sq / (2.0 * est) } else { bar_sq.sqrt() };
    L2Estimate { estimate: est, error_bar: bar, method: "monte-carlo".into() }
}

/// Composite Gauss-Legendre nodes on `[-r, r]` with the Gaussian density folded
/// into the weights.
pub fn gaussian_panel_nodes(r: f64, width: f64, order: usize) -> Vec<(f64, f64)> {
    let rule = gauss_legendre_rule(order);
    let mut out = Vec::new();
    for (a, b) in panels(-r, r, width) {
        let (c, s) = (0.5 * (a + b), 0.5 * (b - a));
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = c + s * t;
            out.push((x, s * w * (-0.5 * x * x).exp() * INV_SQRT_2PI));
        }
    }
    out
}

/// `sum_i w_i f(y_i)` over the `d`-fold tensor grid of `rule`, for a
/// `k`-valued `f` writing into its second argument.
pub fn tensor_rule_sums(
    rule: &[(f64, f64)],
    d: usize,
    k: usize,
    f: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    exec: Exec,
) -> Vec<f64> {
    let n = rule.len();
    let total = n.pow(d as u32);
    let parts = exec.map_chunks(total, 4096, |s, e| {
        let mut y = vec![0.0; d];
        let mut o = vec![0.0; k];
        let mut acc = vec![0.0; k];
        for flat in s..e {
            let mut r = flat;
            let mut w = 1.0;
            for yi in y.iter_mut() {
                let (x, wx) = rule[r % n];
                *yi = x;
                w *= wx;
                r /= n;
            }
            f(&y, &mut o);
            for (a, v) in acc.iter_mut().zip(&o) {
                *a += w * v;
            }
        }
        acc
    });
    (0..k).map(|j| parts.iter().map(|p| p[j]).sum()).collect()
}

/// Monte Carlo estimates of `sqrt(E[f_j])` for a `k`-valued nonnegative `f`
/// (squared errors), with CLT bars.
pub fn mc_sq_estimates(
    d: usize,
    k: usize,
    samples: usize,
    seed: u64,
    f: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    exec: Exec,
) -> Vec<L2Estimate> {
    let parts = exec.map_chunks(samples, 4096, |s, e| {
        let mut y = vec![0.0; d];
        let mut o = vec![0.0; k];
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k];
        for i in s..e {
            gaussian_sample(seed, i as u64, &mut y);
            f(&y, &mut o);
            for j in 0..k {
                s1[j] += o[j];
                s2[j] += o[j] * o[j];
            }
        }
        (s1, s2)
    });
    let n = samples as f64;
    (0..k)
        .map(|j| {
            let s1: f64 = parts.iter().map(|p| p.0[j]).sum();
            let s2: f64 = parts.iter().map(|p| p.1[j]).sum();
            let mean = s1 / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
            from_squared(mean, (var / n).sqrt(), "monte-carlo")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_eval, monomial_coeffs};
    use crate::relu_net::{from_piecewise_linear, linear_regions, Breakpoints};

    #[test]
    fn trivial_cases() {
        let f = |x: f64| hermite_eval(3, x);
        let m = L2Method::PanelTail { radius: 12.0, panel_width: 0.5, tail_sq: 0.0 };
        let e = l2_gamma_error(&f, &f, &m, Exec::Sequential).unwrap();
        assert!(e.estimate < 1e-14);
        let h2 = |x: f64| hermite_eval(2, x);
        let zero = |_: f64| 0.0;
        let e = l2_gamma_error(&h2, &zero, &m, Exec::Sequential).unwrap();
        assert!((e.estimate - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pwl_exact_matches_panels() {
        let bp = Breakpoints::new(vec![-2.0, -0.5, 0.7, 1.9], vec![3.0, -1.0, 0.2, 2.5], 0.3, -1.0).unwrap();
        let net = from_piecewise_linear(&bp).unwrap();
        let regions = linear_regions(&net, 1000).unwrap();
        let c = monomial_coeffs(4);
        let f = |x: f64| hermite_eval(4, x);
        let g = |x: f64| net.eval1(x);
        let exact = l2_gamma_error(&f, &g, &L2Method::PwlExact { f_coeffs: c.values.clone(), regions }, Exec::Parallel).unwrap();
        let panel = l2_gamma_error(&f, &g, &L2Method::PanelTail { radius: 14.0, panel_width: 0.25, tail_sq: 0.0 }, Exec::Sequential)
            .unwrap();
        // the piecewise-linear kinks limit the panel rule; agreement to a few digits
        assert!((exact.estimate - panel.estimate).abs() < 1e-3 * exact.estimate, "{exact:?} {panel:?}");
        let mc = l2_gamma_error(&f, &g, &L2Method::MonteCarlo { samples: 200_000, seed: 7 }, Exec::Parallel).unwrap();
        assert!((mc.estimate - exact.estimate).abs() < 4.0 * mc.error_bar, "{mc:?} {exact:?}");
    }

    #[test]
    fn mc_is_schedule_independent() {
        let h = |y: &[f64]| y[0] * y[1];
        let a = l2_gamma_error_mc(&h, 2, 20_000, 3, Exec::Parallel);
        let b = l2_gamma_error_mc(&h, 2, 20_000, 3, Exec::Sequential);
        assert_eq!(a, b);
        assert!((a.estimate - 1.0).abs() < 4.0 * a.error_bar);
    }
}
