//! Univariate ReLU emulators of polynomials and of `H_n`.

mod poly;
mod square;

pub use poly::{hermite_abs_coeff_bounds, hermite_recurrence_net, poly_net, poly_net_on, PolyNet};
pub use square::{product2_net, product_spec, square_net, ProductSpec};
#[allow(unused_imports)]
pub(crate) use poly::parallel;
#[allow(unused_imports)]
pub(crate) use square::product2_from_spec;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::{hermite_eval, hermite_sq_tail, l2_gamma_error, monomial_coeffs, L2Estimate, L2Method};
use crate::logreal::{ln_double_factorial, LogReal};
use crate::relu_net::{linear_regions, truncate_outside_interval, SparseNetwork, TruncationRoute};
use serde::{Deserialize, Serialize};

/// `M(n, eps) = sqrt(24 (n log(2n) - log eps))`; `sqrt(-24 log eps)` for `n = 0`.
pub fn cutoff_schedule(n: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let a = if n == 0 { 0.0 } else { n as f64 * (2.0 * n as f64).ln() };
    Ok((24.0 * (a - eps.ln())).sqrt())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < (-1f64).exp()) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/e), got {eps}")));
    }
    Ok(())
}

/// `sqrt((2n)!!) (3M)^n e^{-M^2/4}`, the tail part of the emulation bound.
pub fn tail_term(n: usize, m: f64) -> LogReal {
    LogReal::from_ln(0.5 * ln_double_factorial(2 * n as u64) + n as f64 * (3.0 * m).ln() - 0.25 * m * m)
}

/// An emulator of `H_n` vanishing outside `[-M, M]`.
#[derive(Clone, Debug)]
pub struct EmulatedHermite {
    pub net: SparseNetwork,
    pub meta: EmulatedHermiteMeta,
}

/// Metadata sidecar of an [`EmulatedHermite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulatedHermiteMeta {
    pub n: usize,
    pub m: f64,
    pub eps: f64,
    /// Width of the boundary band on which the truncation ramps act.
    pub delta: f64,
    /// `eps + sqrt((2n)!!) (3M)^n e^{-M^2/4}`.
    pub l2_error_bound: f64,
    /// `1 + (3M)^n`.
    pub sup_bound: f64,
    /// Guaranteed sup error of the untruncated emulator on `[-M, M]`.
    pub interior_sup_error: f64,
    pub truncation_constant: f64,
    pub size: usize,
    pub depth: usize,
}

/// Band width `delta` with `2 delta phi(M - 1) (1 + 2 (3M)^n)^2 <= (eps/2)^2`,
/// capped by `min(1, M/2)`; in log space.
pub fn truncation_delta(n: usize, m: f64, eps: f64) -> Result<f64> {
    let ln_phi = -0.5 * (m - 1.0) * (m - 1.0) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let ln_sup = LogReal::ONE.add(LogReal::from_ln(std::f64::consts::LN_2 + n as f64 * (3.0 * m).ln())).ln;
    let ln_delta = 2.0 * (0.5 * eps).ln() - std::f64::consts::LN_2 - ln_phi - 2.0 * ln_sup;
    let delta = ln_delta.exp().min(1.0).min(0.5 * m);
    if !(delta >= m * 2f64.powi(-40)) {
        return Err(Error::Numerical(format!(
            "truncation band underflows: delta = exp({ln_delta:.1}) for n = {n}, M = {m}, eps = {eps}"
        )));
    }
    Ok(delta)
}

/// `H~_{n,M,eps}`: interior emulator with accuracy `eps/2`, truncated to `[-M, M]`.
pub fn hermite_net(n: usize, m: f64, eps: f64) -> Result<EmulatedHermite> {
    if !(m >= 2.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("M must be at least 2, got {m}")));
    }
    check_eps(eps)?;
    let delta = truncation_delta(n, m, eps)?;
    let inner = hermite_recurrence_net(n, m, 0.5 * eps)?;
    let t = truncate_outside_interval(&inner.net, m, Some(delta), TruncationRoute::InputClamp)?;
    let sup_bound = 1.0 + (3.0 * m).powi(n as i32);
    let l2_error_bound = eps + tail_term(n, m).value();
    let meta = EmulatedHermiteMeta {
        n,
        m,
        eps,
        delta: t.delta,
        l2_error_bound,
        sup_bound,
        interior_sup_error: inner.sup_error_bound,
        truncation_constant: t.constant,
        size: t.net.size(),
        depth: t.net.depth(),
    };
    Ok(EmulatedHermite { net: t.net, meta })
}

/// `H~_{n,eps} = H~_{n, M(n,eps), eps}`.
pub fn hermite_net_auto(n: usize, eps: f64) -> Result<EmulatedHermite> {
    hermite_net(n, cutoff_schedule(n, eps)?, eps)
}

/// Largest piece count for which the exact piecewise integration is used.
pub const PWL_EXACT_PIECE_CAP: usize = 2_000_000;

impl EmulatedHermite {
    pub fn eval(&self, x: f64) -> f64 {
        self.net.eval1(x)
    }

    /// Radius past which `int (H_n - net)^2 d gamma_1` is below `(1e-3 eps)^2`;
    /// between the radius and the boundary band `|net| <= |H_n| + e` with `e`
    /// the interior sup error, on the band only `|net| <= sup_bound` is used.
    fn panel_radius(&self) -> (f64, f64) {
        let n = self.meta.n;
        let e = self.meta.interior_sup_error;
        let tail = |r: f64| {
            let h = hermite_sq_tail(n, r);
            let out = libm::erfc(r / std::f64::consts::SQRT_2);
            let band_start = (self.meta.m - self.meta.delta).max(r);
            let band = if r >= self.meta.m {
                0.0
            } else {
                self.meta.sup_bound.powi(2) * libm::erfc(band_start / std::f64::consts::SQRT_2)
            };
            2.0 * h + 2.0 * ((h.sqrt() + e * out.sqrt()).powi(2) + band)
        };
        let target = (1e-3 * self.meta.eps).powi(2);
        let mut r = 4.0;
        while r < self.meta.m + 2.0 && tail(r) > target {
            r += 0.5;
        }
        let r = r.min(self.meta.m + 2.0);
        (r, tail(r))
    }

    /// Measured `||H_n - net||_{L^2(gamma_1)}`.
    ///
    /// Exact piecewise integration when the linear regions can be enumerated
    /// (at most [`PWL_EXACT_PIECE_CAP`] pieces); otherwise composite panels on
    /// `[-R, R]` with a Gaussian tail bound for the rest.
    pub fn l2_error(&self, exec: Exec) -> Result<L2Estimate> {
        let n = self.meta.n;
        let f = move |x: f64| hermite_eval(n, x);
        let g = |x: f64| self.net.eval1(x);
        match linear_regions(&self.net, PWL_EXACT_PIECE_CAP) {
            Ok(regions) => {
                let method = L2Method::PwlExact { f_coeffs: monomial_coeffs(n).values, regions };
                l2_gamma_error(&f, &g, &method, exec)
            }
            Err(Error::Numerical(_)) => {
                let (radius, tail_sq) = self.panel_radius();
                let method = L2Method::PanelTail { radius, panel_width: 0.5, tail_sq };
                l2_gamma_error(&f, &g, &method, exec)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_values() {
        let m = cutoff_schedule(1, (-1f64).exp() * 0.999_999_999).unwrap();
        assert!((m - (24.0 * (2f64.ln() + 1.0)).sqrt()).abs() < 1e-6);
        assert!(cutoff_schedule(1, 0.5).is_err());
        assert!(cutoff_schedule(3, 1e-2).unwrap() < cutoff_schedule(4, 1e-2).unwrap());
        assert!(cutoff_schedule(3, 1e-2).unwrap() < cutoff_schedule(3, 1e-3).unwrap());
        for n in 0..=50 {
            for k in 1..=8 {
                let eps = 10f64.powi(-k);
                let m = cutoff_schedule(n, eps).unwrap();
                assert!(tail_term(n, m).ln <= eps.ln(), "n={n} eps={eps}");
            }
        }
    }

    #[test]
    fn constant_emulator() {
        let h = hermite_net(0, 3.0, 1e-2).unwrap();
        assert_eq!(h.eval(3.5), 0.0);
        assert_eq!(h.eval(-4.0), 0.0);
        for i in 0..100 {
            let x = -3.0 + 2.0 * h.meta.delta + (6.0 - 4.0 * h.meta.delta) * i as f64 / 99.0;
            assert!((h.eval(x) - 1.0).abs() < 1e-14, "x={x} v={} d={}", h.eval(x), h.meta.delta);
        }
    }

    #[test]
    fn h4_emulator_bounds() {
        let h = hermite_net(4, 6.0, 1e-2).unwrap();
        for k in [-6, 0, 1] {
            let t = 6.0 + 10f64.powi(k);
            assert_eq!(h.eval(t), 0.0);
            assert_eq!(h.eval(-t), 0.0);
        }
        let e = h.l2_error(Exec::Parallel).unwrap();
        assert!(e.estimate + e.error_bar <= h.meta.l2_error_bound, "{e:?} {:?}", h.meta);
    }
}
