//! Multi-factor products as balanced binary trees of binary products.

use crate::emulation::{parallel, product2_from_spec, product_spec, ProductSpec};
use crate::error::{Error, Result};
use crate::relu_net::{compose, select_net, Activation, SparseNetwork};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductTreeInfo {
    pub factors: usize,
    pub bound: f64,
    pub eps: f64,
    /// Forward error bound of the realized tree on `[-A, A]^d`.
    pub error_bound: f64,
    pub levels: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Node {
    /// Bound on the exact value.
    range: f64,
    /// Bound on the emulation error.
    err: f64,
}

/// Which pairs are multiplied at each tree level: `(left, right)` positions,
/// `None` for a pass-through.
fn tree_plan(d: usize) -> Vec<Vec<(usize, Option<usize>)>> {
    let mut plan = Vec::new();
    let mut width = d;
    while width > 1 {
        let lvl: Vec<(usize, Option<usize>)> =
            (0..width.div_ceil(2)).map(|i| (2 * i, if 2 * i + 1 < width { Some(2 * i + 1) } else { None })).collect();
        width = lvl.len();
        plan.push(lvl);
    }
    plan
}

/// Forward error pass for given per-product budgets; returns the root error
/// and the specs used.
fn forward(d: usize, a: f64, plan: &[Vec<(usize, Option<usize>)>], delta: &[Vec<f64>]) -> Result<(f64, Vec<Vec<ProductSpec>>)> {
    let mut nodes = vec![Node { range: a, err: 0.0 }; d];
    let mut specs = Vec::new();
    for (l, lvl) in plan.iter().enumerate() {
        let mut next = Vec::with_capacity(lvl.len());
        let mut ls = Vec::new();
        for (k, &(i, j)) in lvl.iter().enumerate() {
            match j {
                None => next.push(nodes[i]),
                Some(j) => {
                    let (u, v) = (nodes[i], nodes[j]);
                    let b = (u.range + u.err).max(v.range + v.err);
                    let spec = product_spec(b, delta[l][k])?;
                    let err = spec.error_bound + u.range * v.err + v.range * u.err + u.err * v.err;
                    next.push(Node { range: u.range * v.range, err });
                    ls.push(spec);
                }
            }
        }
        specs.push(ls);
        nodes = next;
    }
    Ok((nodes[0].err, specs))
}

/// `prod_{j=1}^d x_j` on `[-A, A]^d` to sup accuracy `eps`.
///
/// Each product's budget is `eps / (d-1)` divided by the range of its
/// sibling subtrees up the tree; a forward error pass verifies the total and
/// shrinks the budgets if needed.
pub fn product_net_multi(d: usize, a: f64, eps: f64) -> Result<(SparseNetwork, ProductTreeInfo)> {
    if d == 0 {
        return Err(Error::InvalidArgument("product of zero factors".into()));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("bound A must be positive, got {a}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if d == 1 {
        let net = select_net(1, &[0], Activation::Relu)?;
        return Ok((net, ProductTreeInfo { factors: 1, bound: a, eps, error_bound: 0.0, levels: vec![] }));
    }
    let plan = tree_plan(d);
    // amplification of each product's error into the root: product of the
    // ranges it gets multiplied with on the way up
    let mut amp: Vec<Vec<f64>> = plan.iter().map(|l| vec![1.0; l.len()]).collect();
    let mut sizes = vec![1usize; d];
    let mut size_lv = Vec::new();
    for lvl in &plan {
        let next: Vec<usize> = lvl.iter().map(|&(i, j)| sizes[i] + j.map_or(0, |j| sizes[j])).collect();
        size_lv.push(next.clone());
        sizes = next;
    }
    for l in 0..plan.len() {
        for k in 0..plan[l].len() {
            let mut pos = k;
            let mut factor = 1.0;
            for up in l + 1..plan.len() {
                let (pi, pj) = plan[up].iter().enumerate().find(|(_, &(i, j))| i == pos || j == Some(pos)).unwrap();
                let sib = if pj.0 == pos { pj.1 } else { Some(pj.0) };
                if let Some(s) = sib {
                    factor *= a.powi(size_lv[up - 1][s] as i32);
                }
                pos = pi;
            }
            amp[l][k] = factor;
        }
    }
    let mut scale = 1.0;
    let (specs, err) = loop {
        let delta: Vec<Vec<f64>> = amp
            .iter()
            .map(|l| l.iter().map(|f| (scale * eps / ((d - 1) as f64 * f)).min(0.5)).collect())
            .collect();
        let (err, specs) = forward(d, a, &plan, &delta)?;
        if err <= eps {
            break (specs, err);
        }
        scale *= 0.5;
        if scale < 1e-30 {
            return Err(Error::Numerical("product tree budget did not converge".into()));
        }
    };
    let mut net: Option<SparseNetwork> = None;
    let mut width = d;
    let mut levels = Vec::new();
    for (l, lvl) in plan.iter().enumerate() {
        let prods: Vec<SparseNetwork> = specs[l].iter().map(product2_from_spec).collect::<Result<_>>()?;
        let id = select_net(1, &[0], Activation::Relu)?;
        let idx: Vec<Vec<usize>> = lvl.iter().map(|&(i, j)| j.map_or(vec![i], |j| vec![i, j])).collect();
        let mut parts: Vec<(&[usize], &SparseNetwork)> = Vec::new();
        let mut p = 0;
        for (k, &(_, j)) in lvl.iter().enumerate() {
            if j.is_some() {
                parts.push((&idx[k], &prods[p]));
                p += 1;
            } else {
                parts.push((&idx[k], &id));
            }
        }
        let stage = parallel(width, &parts)?;
        levels.push(specs[l].iter().map(|s| s.levels).max().unwrap_or(0));
        net = Some(match net {
            None => stage,
            Some(n) => compose(&stage, &n)?,
        });
        width = lvl.len();
    }
    let info = ProductTreeInfo { factors: d, bound: a, eps, error_bound: err, levels };
    Ok((net.unwrap(), info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_factor_is_exact() {
        let (n, _) = product_net_multi(1, 3.0, 1e-2).unwrap();
        assert_eq!(n.eval1(2.5), 2.5);
    }

    #[test]
    fn three_factors_on_grid() {
        let (net, info) = product_net_multi(3, 2.0, 1e-2).unwrap();
        assert!(info.error_bound <= 1e-2);
        let g = 50;
        let mut worst: f64 = 0.0;
        for i in 0..g {
            for j in 0..g {
                for k in 0..g {
                    let x = [i, j, k].map(|t| -2.0 + 4.0 * t as f64 / (g - 1) as f64);
                    let v = net.evaluate(&x).unwrap()[0];
                    worst = worst.max((v - x[0] * x[1] * x[2]).abs());
                }
            }
        }
        assert!(worst <= 1e-2, "worst {worst}");
        assert!(net.evaluate(&[0.0, 1.7, -1.9]).unwrap()[0].abs() <= 1e-2);
    }
}
