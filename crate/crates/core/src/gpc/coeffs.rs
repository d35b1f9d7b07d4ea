//! Hermite coefficients `u_nu = int f H_nu d gamma` by quadrature.

use super::TargetFunction;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::{gauss_hermite_rule, hermite_eval_all};
use crate::index_sets::{DownwardClosedSet, MultiIndex};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoeffOptions {
    /// Nodes per variable beyond the polynomial degree.
    pub q_extra: usize,
    /// Relative change allowed when the node count is doubled.
    pub rel_tol: f64,
    /// Cap on Gauss-Hermite nodes per variable.
    pub max_nodes: usize,
    /// Cap on tensor grid points before switching to the sparse projection.
    pub max_tensor_points: usize,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions { q_extra: 10, rel_tol: 1e-8, max_nodes: 1024, max_tensor_points: 1 << 22 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoeffMethod {
    /// Product target: one-dimensional rules per factor.
    Separable,
    /// Full tensor Gauss-Hermite grid over the integration variables.
    Tensor,
    /// Combination of tensor projections over the levels `k in Lambda`, with
    /// variables outside `supp k` fixed at 0.
    SparseProjection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub index_set: DownwardClosedSet,
    /// `values[k]` belongs to the `k`-th index of `index_set`.
    pub values: Vec<f64>,
    /// Per coefficient: did the doubling check pass.
    pub converged: Vec<bool>,
    /// Nodes per variable of the final pass (for the sparse projection: the extra nodes per level).
    pub nodes: usize,
    pub method: CoeffMethod,
}

impl Coefficients {
    pub fn get(&self, nu: &MultiIndex) -> Option<f64> {
        self.index_set.position(nu).map(|k| self.values[k])
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

fn agree(a: &[f64], b: &[f64], tol: f64) -> Vec<bool> {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs() <= tol * y.abs().max(1e-5 * scale) + 1e-15 * scale).collect()
}

/// `u_nu` for every `nu in Lambda`; quadrature is refined by doubling until
/// successive passes agree to `rel_tol`, and coefficients that never agree
/// are flagged in `converged`.
pub fn compute_coeffs(f: &TargetFunction, lambda: &DownwardClosedSet, opts: &CoeffOptions, exec: Exec) -> Result<Coefficients> {
    if lambda.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    let m = lambda.max_order() as usize;
    if let Some((terms, g)) = f.factors() {
        return separable(lambda, *terms, g.as_ref(), opts, exec);
    }
    let dims: Vec<u32> = match f.dim {
        super::TargetDim::Finite(d) => {
            if lambda.support().last().is_some_and(|&j| j as usize > d) {
                return Err(Error::InvalidArgument(format!("index set uses variables beyond d = {d}")));
            }
            (1..=d as u32).collect()
        }
        super::TargetDim::Countable => lambda.support().to_vec(),
    };
    let n0 = m + 1 + opts.q_extra;
    let eval_dim = f.eval_dim(lambda);
    let fits = |n: usize| (n as f64).powi(dims.len() as i32) <= opts.max_tensor_points as f64;
    if fits(2 * n0) {
        let mut n = n0;
        let mut prev = tensor(f, lambda, &dims, eval_dim, n, exec);
        loop {
            let next = tensor(f, lambda, &dims, eval_dim, 2 * n, exec);
            let ok = agree(&prev, &next, opts.rel_tol);
            n *= 2;
            if ok.iter().all(|&c| c) || 2 * n > opts.max_nodes || !fits(2 * n) {
                return Ok(Coefficients { index_set: lambda.clone(), values: next, converged: ok, nodes: n, method: CoeffMethod::Tensor });
            }
            prev = next;
        }
    }
    if matches!(f.dim, super::TargetDim::Finite(_)) && dims.len() > lambda.support().len() {
        return Err(Error::InvalidArgument(
            "finite target with inactive variables is too large for a tensor rule".into(),
        ));
    }
    let mut q = opts.q_extra;
    let mut prev = sparse_projection(f, lambda, eval_dim, q, exec);
    loop {
        let q2 = 2 * q + 1;
        let next = sparse_projection(f, lambda, eval_dim, q2, exec);
        let ok = agree(&prev, &next, opts.rel_tol);
        q = q2;
        if ok.iter().all(|&c| c) || m + 1 + 2 * q + 1 > opts.max_nodes || q > 8 * opts.q_extra + 8 {
            return Ok(Coefficients {
                index_set: lambda.clone(),
                values: next,
                converged: ok,
                nodes: q,
                method: CoeffMethod::SparseProjection,
            });
        }
        prev = next;
    }
}

/// `sum_i w_i f(y_i) H_nu(y_i)` on the `n^|dims|` grid.
fn tensor(f: &TargetFunction, lambda: &DownwardClosedSet, dims: &[u32], eval_dim: usize, n: usize, exec: Exec) -> Vec<f64> {
    let rule = gauss_hermite_rule(n);
    let m = lambda.max_order() as usize;
    let d = dims.len();
    // H_0..H_m at every node
    let mut table = vec![0.0; n * (m + 1)];
    for (i, &x) in rule.nodes.iter().enumerate() {
        hermite_eval_all(m, x, &mut table[i * (m + 1)..(i + 1) * (m + 1)]);
    }
    let slots: Vec<Vec<(usize, usize)>> = lambda
        .iter()
        .map(|nu| nu.entries().iter().map(|&(j, e)| (dims.binary_search(&j).unwrap(), e as usize)).collect())
        .collect();
    let total = n.pow(d as u32);
    let k = lambda.len();
    let parts = exec.map_chunks(total, 1024, |s, e| {
        let mut acc = vec![0.0; k];
        let mut y = vec![0.0; eval_dim];
        let mut idx = vec![0usize; d];
        for flat in s..e {
            let mut r = flat;
            let mut w = 1.0;
            for (t, &j) in dims.iter().enumerate() {
                idx[t] = r % n;
                r /= n;
                y[j as usize - 1] = rule.nodes[idx[t]];
                w *= rule.weights[idx[t]];
            }
            let fw = w * f.eval(&y);
            for (a, sl) in acc.iter_mut().zip(&slots) {
                let mut h = fw;
                for &(t, e) in sl {
                    h *= table[idx[t] * (m + 1) + e];
                }
                *a += h;
            }
        }
        acc
    });
    (0..k).map(|j| parts.iter().map(|p| p[j]).sum()).collect()
}

/// Combination coefficient `sum_{e in {0,1}^N, k + e in Lambda} (-1)^{|e|}`.
fn combination_coeff(lambda: &DownwardClosedSet, k: &MultiIndex) -> i64 {
    let cand: Vec<u32> = lambda.support().iter().copied().filter(|&j| lambda.contains(&k.plus_unit(j))).collect();
    fn walk(lambda: &DownwardClosedSet, cur: &MultiIndex, cand: &[u32], sign: i64) -> i64 {
        let mut s = sign;
        for (i, &j) in cand.iter().enumerate() {
            let next = cur.plus_unit(j);
            if lambda.contains(&next) {
                s += walk(lambda, &next, &cand[i + 1..], -sign);
            }
        }
        s
    }
    walk(lambda, k, &cand, 1)
}

fn sparse_projection(f: &TargetFunction, lambda: &DownwardClosedSet, eval_dim: usize, q: usize, exec: Exec) -> Vec<f64> {
    let levels: Vec<(usize, i64)> = lambda
        .iter()
        .enumerate()
        .map(|(i, k)| (i, combination_coeff(lambda, k)))
        .filter(|&(_, c)| c != 0)
        .collect();
    let m = lambda.max_order() as usize;
    let parts = exec.map(levels.len(), |li| {
        let (ki, c) = levels[li];
        let k = &lambda.indices()[ki];
        let ent = k.entries();
        let rules: Vec<_> = ent.iter().map(|&(_, e)| gauss_hermite_rule(e as usize + 1 + q)).collect();
        let below: Vec<usize> = lambda.iter().enumerate().filter(|(_, nu)| (*nu).le(k)).map(|(i, _)| i).collect();
        let mut acc = vec![0.0; below.len()];
        let total: usize = rules.iter().map(|r| r.len()).product();
        let mut y = vec![0.0; eval_dim];
        let mut tables: Vec<Vec<f64>> = ent.iter().map(|_| vec![0.0; m + 1]).collect();
        for flat in 0..total {
            let mut r = flat;
            let mut w = c as f64;
            for (t, &(j, _)) in ent.iter().enumerate() {
                let n = rules[t].len();
                let i = r % n;
                r /= n;
                let x = rules[t].nodes[i];
                y[j as usize - 1] = x;
                w *= rules[t].weights[i];
                hermite_eval_all(m, x, &mut tables[t]);
            }
            let fw = w * f.eval(&y);
            for (a, &ni) in acc.iter_mut().zip(&below) {
                let nu = &lambda.indices()[ni];
                let mut h = fw;
                for (t, &(j, _)) in ent.iter().enumerate() {
                    h *= tables[t][nu.get(j) as usize];
                }
                *a += h;
            }
        }
        (below, acc)
    });
    let mut out = vec![0.0; lambda.len()];
    for (below, acc) in parts {
        for (i, a) in below.into_iter().zip(acc) {
            out[i] += a;
        }
    }
    out
}

/// Coefficients of `prod_{j <= terms} g(j, y_j)`: one-dimensional Gauss-Hermite
/// projections per factor, multiplied.
fn separable(
    lambda: &DownwardClosedSet,
    terms: usize,
    g: &(dyn Fn(usize, f64) -> f64 + Send + Sync),
    opts: &CoeffOptions,
    exec: Exec,
) -> Result<Coefficients> {
    let m = lambda.max_order() as usize;
    let one_dim = |j: usize, n: usize| -> Vec<f64> {
        let rule = gauss_hermite_rule(n);
        let mut h = vec![0.0; m + 1];
        let mut acc = vec![0.0; m + 1];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            hermite_eval_all(m, x, &mut h);
            let v = w * g(j, x);
            for (a, hk) in acc.iter_mut().zip(&h) {
                *a += v * hk;
            }
        }
        acc
    };
    // per factor: converge by doubling
    let per: Vec<(Vec<f64>, bool, usize)> = exec.map(terms, |j0| {
        let j = j0 + 1;
        let mut n = m + 1 + opts.q_extra;
        let mut prev = one_dim(j, n);
        loop {
            let next = one_dim(j, 2 * n);
            let ok = agree(&prev, &next, opts.rel_tol).iter().all(|&c| c);
            n *= 2;
            if ok || 2 * n > opts.max_nodes {
                return (next, ok, n);
            }
            prev = next;
        }
    });
    let base: f64 = per.iter().map(|p| p.0[0]).product();
    let nodes = per.iter().map(|p| p.2).max().unwrap_or(0);
    let mut values = Vec::with_capacity(lambda.len());
    let mut converged = Vec::with_capacity(lambda.len());
    for nu in lambda.iter() {
        let mut v = base;
        let mut ok = true;
        for &(j, e) in nu.entries() {
            let j = j as usize;
            if j > terms {
                v = 0.0;
                continue;
            }
            let p = &per[j - 1];
            v *= p.0[e as usize] / p.0[0];
            ok &= p.1;
        }
        values.push(v);
        converged.push(ok && per.iter().all(|p| p.1));
    }
    Ok(Coefficients { index_set: lambda.clone(), values, converged, nodes, method: CoeffMethod::Separable })
}
