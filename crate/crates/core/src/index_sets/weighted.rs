//! Weighted threshold sets `{nu : c_nu <= 1/eps}` with
//! `c_nu = prod_{j in supp nu} max{1, K b_j^{p-1}}^2 nu_j^r`.

use super::{DownwardClosedSet, MultiIndex};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub struct WeightSequence {
    b: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    pub p: f64,
    pub k: f64,
    pub r: f64,
}

impl fmt::Debug for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSequence").field("p", &self.p).field("k", &self.k).field("r", &self.r).finish()
    }
}

impl WeightSequence {
    /// Requires `p in (0, 2/3)`, `K > 0`, `r > 2/p - 1`.
    pub fn new(b: impl Fn(usize) -> f64 + Send + Sync + 'static, p: f64, k: f64, r: f64) -> Result<Self> {
        if !(p > 0.0 && p < 2.0 / 3.0) {
            return Err(Error::InvalidArgument(format!("p must lie in (0, 2/3), got {p}")));
        }
        if !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
        }
        if !(r > 2.0 / p - 1.0) {
            return Err(Error::InvalidArgument(format!("r must exceed 2/p - 1 = {}, got {r}", 2.0 / p - 1.0)));
        }
        Ok(WeightSequence { b: Arc::new(b), p, k, r })
    }

    /// Algebraic sequence `b_j = c j^{-a}`.
    pub fn algebraic(c: f64, a: f64, p: f64, k: f64, r: f64) -> Result<Self> {
        WeightSequence::new(move |j| c * (j as f64).powf(-a), p, k, r)
    }

    pub fn b(&self, j: usize) -> f64 {
        (self.b)(j)
    }

    /// `ln max{1, K b_j^{p-1}}`.
    pub fn ln_rho(&self, j: usize) -> f64 {
        (self.k.ln() + (self.p - 1.0) * self.b(j).ln()).max(0.0)
    }
}

/// `ln c_nu`; `c_0 = 1`.
pub fn cnu_weight(nu: &MultiIndex, w: &WeightSequence) -> f64 {
    nu.entries().iter().map(|&(j, e)| 2.0 * w.ln_rho(j as usize) + w.r * (e as f64).ln()).sum()
}

const DIM_SEARCH_LIMIT: usize = 1 << 26;

/// Smallest `J` with `c_{e_J} > 1/eps`, by doubling then bisection
/// (assumes `c_{e_j}` nondecreasing in `j`, as for decreasing `b_j`).
fn default_dim_cap(w: &WeightSequence, ln_t: f64) -> Result<usize> {
    let fails = |j: usize| 2.0 * w.ln_rho(j) > ln_t;
    let mut hi = 1;
    while !fails(hi) {
        hi *= 2;
        if hi > DIM_SEARCH_LIMIT {
            return Err(Error::Numerical("no dimension cap found below 2^26".into()));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fails(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi - 1)
}

/// `Lambda_eps = {nu : c_nu^{-1} >= eps}` by monotone frontier search over
/// dimensions `1..=dim_cap`. The cap is validated by `c_{e_{cap+1}}^{-1} < eps`.
pub fn lambda_eps_weighted(w: &WeightSequence, eps: f64, dim_cap: Option<usize>) -> Result<DownwardClosedSet> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let ln_t = -eps.ln();
    if ln_t < 0.0 {
        return DownwardClosedSet::new(std::iter::empty());
    }
    let tol = 1e-12 * ln_t.abs().max(1.0);
    let cap = match dim_cap {
        Some(c) => c,
        None => default_dim_cap(w, ln_t + tol)?,
    };
    if 2.0 * w.ln_rho(cap + 1) <= ln_t + tol {
        return Err(Error::InvalidArgument(format!(
            "dim_cap {cap} too small: e_{} still belongs to the set; use a larger cap",
            cap + 1
        )));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let zero = MultiIndex::zero();
    seen.insert(zero.clone());
    queue.push_back(zero);
    while let Some(nu) = queue.pop_front() {
        out.push(nu.clone());
        for j in 1..=cap as u32 {
            let next = nu.plus_unit(j);
            if seen.contains(&next) {
                continue;
            }
            if cnu_weight(&next, w) <= ln_t + tol {
                seen.insert(next.clone());
                queue.push_back(next);
            }
        }
    }
    DownwardClosedSet::new(out)
}

/// `zeta(s) = sum_{n >= 1} n^{-s}` for `s > 1` (direct sum plus Euler-Maclaurin tail).
pub fn riemann_zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    let n = 64usize;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let nf = n as f64;
    head + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * nf.powf(-s - 3.0) / 720.0
}

/// `||(c_nu^{-1})||_{l^q}` with `q = p / (2(1-p))`, i.e.
/// `(prod_j (1 + rho_j^{-2q} zeta(rq)))^{1/q}`, truncated at `terms` factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightNorm {
    pub q: f64,
    pub norm: f64,
    /// Factors used before the tail estimate.
    pub truncation: usize,
    /// Estimated `ln` of the omitted factors (power-law extrapolation of the terms).
    pub ln_tail: f64,
}

pub fn weight_norm(w: &WeightSequence, terms: usize) -> Result<WeightNorm> {
    let q = w.p / (2.0 * (1.0 - w.p));
    if !(w.r * q > 1.0) {
        return Err(Error::InvalidArgument(format!("r q = {} must exceed 1", w.r * q)));
    }
    let z = riemann_zeta(w.r * q);
    let term = |j: usize| (-2.0 * q * w.ln_rho(j)).exp() * z;
    let mut ln_sum = 0.0;
    for j in 1..=terms {
        ln_sum += term(j).ln_1p();
    }
    let (t1, t2) = (term(terms / 2).max(f64::MIN_POSITIVE), term(terms).max(f64::MIN_POSITIVE));
    let alpha = (t1 / t2).ln() / 2f64.ln();
    let ln_tail = if alpha > 1.0 { t2 * terms as f64 / (alpha - 1.0) } else { f64::INFINITY };
    let norm = ((ln_sum + ln_tail) / q).exp();
    Ok(WeightNorm { q, norm, truncation: terms, ln_tail })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsRelation {
    pub eps: f64,
    /// `||(c_nu^{-1})||_{l^q} |Lambda|^{-1/q}`.
    pub rhs: f64,
    pub ratio: f64,
    pub norm: WeightNorm,
    pub ok: bool,
}

/// Checks `eps <= ||(c_nu^{-1})||_{l^q} |Lambda_eps|^{-2(1-p)/p}`.
pub fn cardinality_eps_relation(set: &DownwardClosedSet, w: &WeightSequence, eps: f64) -> Result<EpsRelation> {
    let norm = weight_norm(w, 1 << 16)?;
    let rhs = norm.norm * (set.len() as f64).powf(-1.0 / norm.q);
    Ok(EpsRelation { eps, rhs, ratio: eps / rhs, ok: eps <= rhs, norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> WeightSequence {
        WeightSequence::algebraic(1.0, 2.0, 0.5, 1.0, 4.0).unwrap()
    }

    #[test]
    fn weight_examples() {
        let w = family();
        assert_eq!(cnu_weight(&MultiIndex::zero(), &w), 0.0);
        let nu = MultiIndex::from_pairs([(3, 2)]).unwrap();
        assert!((cnu_weight(&nu, &w).exp() - 144.0).abs() < 1e-10);
        assert!(WeightSequence::algebraic(1.0, 2.0, 0.5, 1.0, 3.0).is_err());
    }

    #[test]
    fn threshold_sets() {
        let w = family();
        assert!(lambda_eps_weighted(&w, 1.5, None).unwrap().is_empty());
        let one = lambda_eps_weighted(&w, 1.0, None).unwrap();
        // c_nu = 1 exactly for nu = e_1 only (rho_1 = 1, 1^r = 1)
        assert_eq!(one.len(), 2);
        let s = lambda_eps_weighted(&w, 1e-2, None).unwrap();
        let brute = DownwardClosedSet::tensor_box(&[4, 3, 2, 2, 2, 2, 2, 2, 2, 2, 2]);
        let expect: Vec<_> = brute.iter().filter(|n| cnu_weight(n, &w) <= 100f64.ln() + 1e-12).cloned().collect();
        assert_eq!(s.indices(), DownwardClosedSet::new(expect).unwrap().indices());
        assert!(lambda_eps_weighted(&w, 1e-2, Some(2)).is_err());
        let s3 = lambda_eps_weighted(&w, 1e-3, None).unwrap();
        assert!(s.is_subset(&s3));
    }

    #[test]
    fn zeta_and_relation() {
        assert!((riemann_zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((riemann_zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-12);
        let w = family();
        for eps in [1e-1, 1e-2, 1e-3] {
            let s = lambda_eps_weighted(&w, eps, None).unwrap();
            let rel = cardinality_eps_relation(&s, &w, eps).unwrap();
            assert!(rel.ok, "{rel:?}");
        }
    }
}
