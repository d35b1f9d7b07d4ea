//! Multivariate Hermite networks: one ReLU net with outputs `H~_nu`, `nu in Lambda`.
//!
//! Stage one evaluates univariate emulators `H~_j(y_i)` for every active
//! variable `i` and degree `1 <= j <= max_{nu in Lambda} nu_i`; stage two multiplies the
//! factors of each `nu` with a product tree.

mod product;
mod repu;

pub use product::{product_net_multi, ProductTreeInfo};
pub use repu::{hermite_monomial_expansion, repu_exact_hermite, repu_exact_poly};

use crate::emulation::{cutoff_schedule, hermite_net, parallel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::{
    from_squared, gaussian_panel_nodes, hermite_eval, hermite_sq_tail, mc_sq_estimates, tensor_rule_sums, L2Estimate,
};
use crate::index_sets::{DownwardClosedSet, MultiIndex};
use crate::relu_net::{affine_net, compose, identity_chain, Activation, SparseNetwork};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct TensorHermiteNet {
    pub net: SparseNetwork,
    pub index_set: DownwardClosedSet,
    pub eps: f64,
    pub meta: TensorHermiteMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorHermiteMeta {
    /// Output slot `k` realizes `H_nu` for `nu = per_output_order[k]`.
    pub per_output_order: Vec<MultiIndex>,
    /// Input slot `k` is the variable `y_{inputs[k]}`.
    pub inputs: Vec<u32>,
    pub eps: f64,
    /// Accuracy of each univariate factor, `eps 2^{-d(Lambda)}`.
    pub factor_eps: f64,
    /// Common cutoff `M(m(Lambda), factor_eps)`.
    pub m_cut: f64,
    /// Range bound of the factors, `1 + (3M)^{m(Lambda)}`.
    pub factor_bound: f64,
    /// Largest sup error of a factor on `[-M + delta, M - delta]`.
    pub factor_sup_error: f64,
    pub stage1_size: usize,
    pub stage1_depth: usize,
    pub stage2_size: usize,
    pub stage2_depth: usize,
    pub size: usize,
    pub depth: usize,
}

/// Quadrature choice for [`TensorHermiteNet::l2_errors`].
#[derive(Clone, Debug)]
pub enum TensorL2Method {
    /// Tensor Gauss-Legendre panels on `[-radius, radius]^d` (d at most 3) of
    /// the given order, checked against half that order, plus a Gaussian tail bound.
    PanelTail { radius: f64, panel_width: f64, order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

/// `Phi = Phi_2 o Phi_1` for the finite downward-closed `lambda`.
///
/// `nu = 0` is the constant 1 and `|nu|_0 = 1` a plain selection; every
/// factor net is depth-padded to a common depth. A ReLU identity layer sits
/// between the stages so that the factor outputs are not re-associated into
/// the product inputs (that keeps exact zeros exact).
pub fn build_tensor_hermite(lambda: &DownwardClosedSet, eps: f64, exec: Exec) -> Result<TensorHermiteNet> {
    if lambda.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    if !lambda.is_downward_closed() {
        return Err(Error::InvalidArgument("index set is not downward closed".into()));
    }
    if !(eps > 0.0 && eps < (-1f64).exp()) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/e), got {eps}")));
    }
    let inputs = lambda.support().to_vec();
    let d = inputs.len();
    let m = lambda.max_order() as usize;
    let order: Vec<MultiIndex> = lambda.iter().cloned().collect();
    if m == 0 {
        let net = affine_net(1, 0, vec![], vec![1.0], Activation::Relu)?;
        let meta = TensorHermiteMeta {
            per_output_order: order,
            inputs,
            eps,
            factor_eps: eps,
            m_cut: 0.0,
            factor_bound: 1.0,
            factor_sup_error: 0.0,
            stage1_size: 0,
            stage1_depth: 0,
            stage2_size: 1,
            stage2_depth: 0,
            size: net.size(),
            depth: 0,
        };
        return Ok(TensorHermiteNet { net, index_set: lambda.clone(), eps, meta });
    }
    let factor_eps = eps * 2f64.powi(-(lambda.max_support() as i32));
    let m_cut = cutoff_schedule(m, factor_eps)?;
    let factor_bound = 1.0 + (3.0 * m_cut).powi(m as i32);
    let built: Vec<_> = exec.map(m, |j| hermite_net(j + 1, m_cut, factor_eps)).into_iter().collect::<Result<_>>()?;
    let factor_sup_error = built.iter().map(|h| h.meta.interior_sup_error).fold(0.0, f64::max);
    let factors: Vec<SparseNetwork> = built.into_iter().map(|h| h.net).collect();
    // variable k only needs H_1..H_{m_k}, m_k = max nu_k over lambda
    let mut orders = vec![0usize; d];
    for nu in &order {
        for &(dim, e) in nu.entries() {
            let k = inputs.binary_search(&dim).unwrap();
            orders[k] = orders[k].max(e as usize);
        }
    }
    let offsets: Vec<usize> = orders.iter().scan(0, |acc, &o| Some(std::mem::replace(acc, *acc + o))).collect();
    let input_idx: Vec<[usize; 1]> = (0..d).map(|k| [k]).collect();
    let mut parts: Vec<(&[usize], &SparseNetwork)> = Vec::with_capacity(d * m);
    for (idx, &o) in input_idx.iter().zip(&orders) {
        for f in &factors[..o] {
            parts.push((idx, f));
        }
    }
    let phi1 = parallel(d, &parts)?;
    let n1: usize = orders.iter().sum();
    let pos = |dim: u32| inputs.binary_search(&dim).unwrap();

    // stage two
    let prods: Vec<(usize, SparseNetwork)> = {
        let mut arity: Vec<usize> = order.iter().map(|nu| nu.support_size()).filter(|&a| a >= 2).collect();
        arity.sort_unstable();
        arity.dedup();
        let built = exec.map(arity.len(), |i| product_net_multi(arity[i], factor_bound, eps).map(|p| p.0));
        arity.into_iter().zip(built).map(|(a, b)| b.map(|n| (a, n))).collect::<Result<_>>()?
    };
    let one = affine_net(1, 0, vec![], vec![1.0], Activation::Relu)?;
    let sel1 = affine_net(1, 1, vec![(0, 0, 1.0)], vec![0.0], Activation::Relu)?;
    let slot_idx: Vec<Vec<usize>> = order
        .iter()
        .map(|nu| nu.entries().iter().map(|&(dim, e)| offsets[pos(dim)] + (e as usize - 1)).collect())
        .collect();
    let mut parts2: Vec<(&[usize], &SparseNetwork)> = Vec::with_capacity(order.len());
    for (nu, idx) in order.iter().zip(&slot_idx) {
        let net = match nu.support_size() {
            0 => &one,
            1 => &sel1,
            a => &prods.iter().find(|p| p.0 == a).unwrap().1,
        };
        parts2.push((idx, net));
    }
    let phi2 = parallel(n1, &parts2)?;
    let barrier = identity_chain(n1, 1, Activation::Relu);
    let net = compose(&phi2, &compose(&barrier, &phi1)?)?;
    let meta = TensorHermiteMeta {
        per_output_order: order,
        inputs,
        eps,
        factor_eps,
        m_cut,
        factor_bound,
        factor_sup_error,
        stage1_size: phi1.size(),
        stage1_depth: phi1.depth(),
        stage2_size: phi2.size(),
        stage2_depth: phi2.depth(),
        size: net.size(),
        depth: net.depth(),
    };
    Ok(TensorHermiteNet { net, index_set: lambda.clone(), eps, meta })
}

/// `H_nu(y)` with `y` indexed by input slot.
fn tensor_hermite(nu: &MultiIndex, inputs: &[u32], y: &[f64]) -> f64 {
    nu.entries().iter().map(|&(dim, e)| hermite_eval(e as usize, y[inputs.binary_search(&dim).unwrap()])).product()
}

impl TensorHermiteNet {
    /// All outputs at `y` (one value per variable in `meta.inputs`).
    pub fn evaluate(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.net.evaluate(y)
    }

    pub fn output_index(&self, nu: &MultiIndex) -> Option<usize> {
        self.index_set.position(nu)
    }

    /// JSON list of the output multi-indices, in slot order.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }

    pub fn from_parts(net: SparseNetwork, sidecar: &str) -> Result<Self> {
        let meta: TensorHermiteMeta =
            serde_json::from_str(sidecar).map_err(|e| Error::Parse { offset: e.column(), msg: e.to_string() })?;
        let index_set = DownwardClosedSet::new(meta.per_output_order.iter().cloned())?;
        if index_set.indices() != meta.per_output_order.as_slice()
            || net.output_dim() != index_set.len()
            || net.input_dim() != meta.inputs.len()
        {
            return Err(Error::InvalidArgument("sidecar does not match the network".into()));
        }
        Ok(TensorHermiteNet { net, index_set, eps: meta.eps, meta })
    }

    /// Bound on `int (H_nu - H~_nu)^2 d gamma` over `{max_i |y_i| > r}`.
    ///
    /// Inside the kept box each factor is within `e` of `H_j`, so
    /// `|H~_nu| <= prod (|H_{nu_j}| + e) + eps` there; on the boundary bands
    /// only the range bound is used.
    pub fn tail_sq(&self, nu: &MultiIndex, r: f64) -> f64 {
        let k = nu.support_size() as i32;
        if k == 0 {
            return 0.0;
        }
        let e = self.meta.factor_sup_error;
        let out = libm::erfc(r / std::f64::consts::SQRT_2);
        let band_start = (self.meta.m_cut - 1.0).max(r);
        let sup = self.meta.factor_bound.powi(k) + self.eps;
        let band = sup * sup * libm::erfc(band_start / std::f64::consts::SQRT_2);
        nu.entries()
            .iter()
            .map(|&(_, n)| {
                let h = hermite_sq_tail(n as usize, r);
                let a = h.sqrt() + e * out.sqrt();
                let g = ((1.0 + e).powi(k - 1) * a + self.eps * out.sqrt()).powi(2);
                2.0 * h + 2.0 * (g + band)
            })
            .sum()
    }

    /// Smallest radius (from 3 in steps of 1/2) whose tail bound is below `target` for every output.
    pub fn panel_radius(&self, target: f64) -> f64 {
        let mut r = 3.0;
        while r < self.meta.m_cut + 2.0 && self.index_set.iter().any(|nu| self.tail_sq(nu, r) > target) {
            r += 0.5;
        }
        r
    }

    /// Measured `||H_nu - H~_nu||_{L^2(gamma)}` for every output slot.
    pub fn l2_errors(&self, method: &TensorL2Method, exec: Exec) -> Result<Vec<L2Estimate>> {
        let d = self.meta.inputs.len();
        let k = self.index_set.len();
        let order = &self.meta.per_output_order;
        let inputs = &self.meta.inputs;
        let sq_err = |y: &[f64], out: &mut [f64]| {
            let v = self.net.evaluate(y).expect("input dimension");
            for (s, nu) in order.iter().enumerate() {
                let e = v[s] - tensor_hermite(nu, inputs, y);
                out[s] = e * e;
            }
        };
        match *method {
            TensorL2Method::MonteCarlo { samples, seed } => Ok(mc_sq_estimates(d, k, samples, seed, &sq_err, exec)),
            TensorL2Method::PanelTail { radius, panel_width, order: q } => {
                if d > 3 {
                    return Err(Error::InvalidArgument(format!("tensor panels support d <= 3, got {d}")));
                }
                if !(radius > 0.0 && panel_width > 0.0 && q >= 2) {
                    return Err(Error::InvalidArgument("panel+tail needs positive radius and width".into()));
                }
                let hi_rule = gaussian_panel_nodes(radius, panel_width, q);
                let lo_rule = gaussian_panel_nodes(radius, panel_width, q / 2);
                let integrate = |rule: &[(f64, f64)]| -> Vec<f64> {
                    let sums = tensor_rule_sums(rule, d, k, &sq_err, exec);
                    let mass: f64 = rule.iter().map(|p| p.1).sum();
                    // inactive variables integrate to the box mass exactly
                    (0..k).map(|j| sums[j] / mass.powi((d - order[j].support_size()) as i32)).collect()
                };
                let hi = integrate(&hi_rule);
                let lo = integrate(&lo_rule);
                Ok((0..k)
                    .map(|j| from_squared(hi[j], (hi[j] - lo[j]).abs() + self.tail_sq(&order[j], radius), "panel+tail"))
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_set() {
        let t = build_tensor_hermite(&DownwardClosedSet::new([MultiIndex::zero()]).unwrap(), 1e-2, Exec::Parallel).unwrap();
        assert_eq!(t.evaluate(&[]).unwrap(), vec![1.0]);
        assert_eq!(t.meta.depth, 0);
    }

    #[test]
    fn one_variable() {
        let lambda = DownwardClosedSet::total_degree(1, 2);
        let t = build_tensor_hermite(&lambda, 1e-1, Exec::Parallel).unwrap();
        assert_eq!(t.net.output_dim(), 3);
        let far = t.meta.m_cut + 1.0;
        let v = t.evaluate(&[far]).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let e = t.l2_errors(&TensorL2Method::PanelTail { radius: 8.0, panel_width: 0.5, order: 16 }, Exec::Parallel).unwrap();
        for x in &e {
            assert!(x.estimate + x.error_bar <= 1e-1, "{e:?}");
        }
        let back = TensorHermiteNet::from_parts(t.net.clone(), &t.sidecar_json()).unwrap();
        assert_eq!(back.meta, t.meta);
    }
}
