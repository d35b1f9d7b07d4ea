//! Polynomial emulation: Horner products for general polynomials and the
//! three-term recurrence for Hermite polynomials.

use super::square::{product2_from_spec, product_spec};
use crate::error::{Error, Result};
use crate::relu_net::{
    affine_net, compose, juxtapose, pad_depth, select_net, zero_net, Activation, InputMode, SparseNetwork,
};

/// Runs each `(indices, net)` on the selected coordinates of a shared input
/// and concatenates the outputs; parts are padded to a common depth.
pub(crate) fn parallel(dim: usize, parts: &[(&[usize], &SparseNetwork)]) -> Result<SparseNetwork> {
    let mut nets = Vec::with_capacity(parts.len());
    for (idx, net) in parts {
        nets.push(compose(net, &select_net(dim, idx, Activation::Relu)?)?);
    }
    let depth = nets.iter().map(SparseNetwork::depth).max().unwrap_or(0);
    let padded: Vec<SparseNetwork> = nets.iter().map(|n| pad_depth(n, depth)).collect::<Result<_>>()?;
    juxtapose(&padded, InputMode::Shared)
}

fn id1() -> SparseNetwork {
    select_net(1, &[0], Activation::Relu).unwrap()
}

/// A polynomial emulator with its guaranteed sup error on `[-R, R]`.
#[derive(Clone, Debug)]
pub struct PolyNet {
    pub net: SparseNetwork,
    pub radius: f64,
    pub sup_error_bound: f64,
    /// Range bound used by each product, in evaluation order.
    pub product_bounds: Vec<f64>,
}

/// Emulates `p(x) = sum_j c_j x^j` on `[-1, 1]` to sup accuracy `eps`.
pub fn poly_net(coeffs: &[f64], eps: f64) -> Result<PolyNet> {
    if !(eps > 0.0 && eps < (-1f64).exp()) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/e), got {eps}")));
    }
    poly_net_on(coeffs, 1.0, eps)
}

/// Horner emulation on `[-R, R]`: `v <- P(x, v) + c_k`, each product an
/// instance of [`super::product2_net`] on the running sup bound of `v`.
pub fn poly_net_on(coeffs: &[f64], radius: f64, eps: f64) -> Result<PolyNet> {
    if !(radius > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument("poly_net_on needs positive radius and eps".into()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite polynomial coefficient".into()));
    }
    let n = match coeffs.iter().rposition(|&c| c != 0.0) {
        None => {
            return Ok(PolyNet { net: zero_net(1, 1, Activation::Relu), radius, sup_error_bound: 0.0, product_bounds: vec![] })
        }
        Some(n) => n,
    };
    let c = &coeffs[..=n];
    if n <= 1 {
        let w = if n == 1 { vec![(0, 0, c[1])] } else { vec![] };
        let net = affine_net(1, 1, w, vec![c[0]], Activation::Relu)?;
        return Ok(PolyNet { net, radius, sup_error_bound: 0.0, product_bounds: vec![] });
    }
    // state (x, v) with v = c_n x + c_{n-1}
    let mut net = affine_net(2, 1, vec![(0, 0, 1.0), (1, 0, c[n])], vec![0.0, c[n - 1]], Activation::Relu)?;
    let l = n - 1;
    let mut err = 0.0;
    let mut bounds = Vec::with_capacity(l);
    for (j, k) in (0..n - 1).rev().enumerate() {
        // sup |v_{k+1}| on [-R, R]
        let sup_v: f64 = c[k + 1..].iter().enumerate().map(|(i, a)| a.abs() * radius.powi(i as i32)).sum();
        let b = radius.max(sup_v + err);
        let remaining = (l - j - 1) as i32;
        let delta = (eps / (l as f64 * radius.powi(remaining))).min(0.5);
        let spec = product_spec(b, delta)?;
        let prod = product2_from_spec(&spec)?;
        let step = parallel(2, &[(&[0], &id1()), (&[0, 1], &prod)])?;
        let out = affine_net(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)], vec![0.0, c[k]], Activation::Relu)?;
        net = compose(&compose(&out, &step)?, &net)?;
        err = radius * err + spec.error_bound;
        bounds.push(b);
    }
    let net = compose(&select_net(2, &[1], Activation::Relu)?, &net)?;
    Ok(PolyNet { net, radius, sup_error_bound: err, product_bounds: bounds })
}

/// `sup_{|x| <= M} |H_k(x)|` bounds `G_k = sum_j |c_{k,j}| M^j` for `k <= n`,
/// from `G_{k+1} = (M G_k + sqrt(k) G_{k-1}) / sqrt(k+1)`.
pub fn hermite_abs_coeff_bounds(n: usize, m: f64) -> Vec<f64> {
    let mut g = vec![1.0; n + 1];
    if n >= 1 {
        g[1] = m;
    }
    for k in 1..n {
        g[k + 1] = (m * g[k] + (k as f64).sqrt() * g[k - 1]) / ((k + 1) as f64).sqrt();
    }
    g
}

/// Error recursion of the Hermite recurrence emulator: returns `E_0..=E_n`
/// for product errors `d[k]` at steps `k = 1..n-1` (`d[0]` unused).
fn propagate(n: usize, m: f64, d: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; n + 1];
    for k in 1..n {
        e[k + 1] = (m * e[k] + d[k] + (k as f64).sqrt() * e[k - 1]) / ((k + 1) as f64).sqrt();
    }
    e
}

/// Emulates `H_n` on `[-M, M]` to sup accuracy `eps` (in exact arithmetic)
/// through `sqrt(k+1) H_{k+1} = x H_k - sqrt(k) H_{k-1}`, carrying
/// `(x, H_{k-1}, H_k)` and replacing each `x H_k` by a product network.
pub fn hermite_recurrence_net(n: usize, m: f64, eps: f64) -> Result<PolyNet> {
    if !(m > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument("hermite_recurrence_net needs positive M and eps".into()));
    }
    if n <= 1 {
        let w = if n == 1 { vec![(0, 0, 1.0)] } else { vec![] };
        let b = if n == 1 { 0.0 } else { 1.0 };
        let net = affine_net(1, 1, w, vec![b], Activation::Relu)?;
        return Ok(PolyNet { net, radius: m, sup_error_bound: 0.0, product_bounds: vec![] });
    }
    let steps = n - 1;
    // amplification of a unit product error at step k into E_n
    let gain: Vec<f64> = (1..n)
        .map(|k| {
            let mut d = vec![0.0; n];
            d[k] = 1.0;
            propagate(n, m, &d)[n]
        })
        .collect();
    let mut d = vec![0.0; n];
    for k in 1..n {
        d[k] = (eps / (steps as f64 * gain[k - 1])).min(0.5);
    }
    let g = hermite_abs_coeff_bounds(n, m);
    // budgets are first fixed, then each product is sized on the range it sees
    let mut e_run = vec![0.0; n + 1];
    let mut d_real = vec![0.0; n];
    let mut bounds = Vec::with_capacity(steps);
    let mut net = affine_net(3, 1, vec![(0, 0, 1.0), (2, 0, 1.0)], vec![0.0, 1.0, 0.0], Activation::Relu)?;
    for k in 1..n {
        let b = m.max(g[k] + e_run[k]);
        let spec = product_spec(b, d[k])?;
        d_real[k] = spec.error_bound;
        e_run = propagate(n, m, &d_real);
        let prod = product2_from_spec(&spec)?;
        let step = parallel(3, &[(&[0], &id1()), (&[2], &id1()), (&[0, 2], &prod), (&[1], &id1())])?;
        // (t, b, P, a) -> (t, b, (P - sqrt(k) a) / sqrt(k+1))
        let s = 1.0 / ((k + 1) as f64).sqrt();
        let out = affine_net(
            3,
            4,
            vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, s), (2, 3, -(k as f64).sqrt() * s)],
            vec![0.0; 3],
            Activation::Relu,
        )?;
        net = compose(&compose(&out, &step)?, &net)?;
        bounds.push(b);
    }
    let net = compose(&select_net(3, &[2], Activation::Relu)?, &net)?;
    Ok(PolyNet { net, radius: m, sup_error_bound: e_run[n], product_bounds: bounds })
}
