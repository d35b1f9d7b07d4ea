//! Small regression and summary helpers for the convergence studies.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares `y ~ intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 2, "need at least two points");
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LinearFit { slope, intercept, r_squared, n }
}

/// Growth check used for the "size <= c * shape" contracts: `c` is fitted as
/// the largest ratio over the first half of the sweep, and every ratio must
/// stay within `slack * c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeCheck {
    pub ratios: Vec<f64>,
    pub fitted_c: f64,
    pub max_ratio: f64,
    pub slack: f64,
    pub ok: bool,
}

pub fn shape_check(values: &[f64], shape: &[f64], slack: f64) -> ShapeCheck {
    assert_eq!(values.len(), shape.len());
    assert!(!values.is_empty());
    let ratios: Vec<f64> = values.iter().zip(shape).map(|(v, s)| v / s).collect();
    let half = ratios.len().div_ceil(2);
    let fitted_c = ratios[..half].iter().cloned().fold(0.0, f64::max);
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let ok = ratios.iter().all(|r| r.is_finite()) && max_ratio <= slack * fitted_c;
    ShapeCheck { ratios, fitted_c, max_ratio, slack, ok }
}

/// Root-mean-square estimate from squared residuals with a CLT error bar
/// (delta method on the square root).
pub fn rms_with_bar(sq: &[f64]) -> (f64, f64) {
    let n = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / n;
    let var = if sq.len() > 1 {
        sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let est = mean.max(0.0).sqrt();
    let bar_sq = (var / n).sqrt();
    let bar = if est > 0.0 { bar_sq / (2.0 * est) } else { bar_sq.sqrt() };
    (est, bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|a| 2.0 - 0.5 * a).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shape_rejects_growth() {
        let shape = [1.0, 2.0, 4.0, 8.0];
        assert!(shape_check(&[1.0, 2.0, 4.0, 8.0], &shape, 2.0).ok);
        assert!(!shape_check(&[1.0, 4.0, 16.0, 64.0], &shape, 2.0).ok);
    }
}
