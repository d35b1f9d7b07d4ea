//! Exact polynomial realizations with RePU(2) activation.
//!
//! Monomials `y^nu` are built level by level: level `L` holds every monomial of
//! total order in `(2^{L-1}, 2^L]`, each one product of two lower monomials.
//! Squares are `x^2 = s(x) + s(-x)`, products `ab = ((a+b)^2 - a^2 - b^2)/2`,
//! and values carried across a level use `x = ((x+1)^2 - (x-1)^2)/4`.

use crate::error::{Error, Result};
use crate::hermite::monomial_coeffs;
use crate::index_sets::{DownwardClosedSet, MultiIndex};
use crate::relu_net::{Activation, AffineLayer, SparseNetwork};
use std::collections::HashMap;

/// An affine form over the units of the current layer (or the input).
#[derive(Clone, Debug, Default)]
struct Form {
    terms: Vec<(usize, f64)>,
    bias: f64,
}

impl Form {
    fn scaled(&self, c: f64) -> Form {
        Form { terms: self.terms.iter().map(|&(j, w)| (j, c * w)).collect(), bias: c * self.bias }
    }
    fn plus(&self, o: &Form) -> Form {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&o.terms);
        Form { terms, bias: self.bias + o.bias }
    }
    fn shifted(&self, b: f64) -> Form {
        Form { terms: self.terms.clone(), bias: self.bias + b }
    }
}

struct Layer {
    trips: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

impl Layer {
    fn unit(&mut self, f: &Form) -> usize {
        let r = self.bias.len();
        for &(j, w) in &f.terms {
            self.trips.push((r, j, w));
        }
        self.bias.push(f.bias);
        r
    }
}

/// Exact RePU(2) network for the polynomials `outputs[k] = sum c y^mu` whose
/// monomials lie in `lambda`; inputs are ordered by `supp lambda`.
fn build(lambda: &DownwardClosedSet, outputs: &[Vec<(MultiIndex, f64)>]) -> Result<SparseNetwork> {
    let act = Activation::Repu(2);
    let supp = lambda.support().to_vec();
    let din = supp.len();
    let pos: HashMap<u32, usize> = supp.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    // level-0 values: constant and the coordinates
    let mut vals: HashMap<MultiIndex, Form> = HashMap::new();
    vals.insert(MultiIndex::zero(), Form { terms: vec![], bias: 1.0 });
    for &d in &supp {
        vals.insert(MultiIndex::unit(d), Form { terms: vec![(pos[&d], 1.0)], bias: 0.0 });
    }
    let m = lambda.max_order();
    let mut layers = Vec::new();
    let mut cols = din;
    let mut top = 1u32;
    while top < m {
        let next_top = (2 * top).min(m);
        let mut layer = Layer { trips: vec![], bias: vec![] };
        let mut new_vals: HashMap<MultiIndex, Form> = HashMap::new();
        // carry everything computed so far (the constant stays a bias)
        let mut keys: Vec<MultiIndex> = vals.keys().cloned().collect();
        keys.sort();
        for k in &keys {
            let f = &vals[k];
            if k.is_zero() {
                new_vals.insert(k.clone(), f.clone());
                continue;
            }
            let u1 = layer.unit(&f.shifted(1.0));
            let u2 = layer.unit(&f.shifted(1.0).scaled(-1.0));
            let u3 = layer.unit(&f.shifted(-1.0));
            let u4 = layer.unit(&f.shifted(-1.0).scaled(-1.0));
            new_vals.insert(k.clone(), Form { terms: vec![(u1, 0.25), (u2, 0.25), (u3, -0.25), (u4, -0.25)], bias: 0.0 });
        }
        for nu in lambda.iter().filter(|n| n.order() > top && n.order() <= next_top) {
            let (mu, rest) = split(nu);
            let a = &vals[&mu];
            if mu == rest {
                let u1 = layer.unit(a);
                let u2 = layer.unit(&a.scaled(-1.0));
                new_vals.insert(nu.clone(), Form { terms: vec![(u1, 1.0), (u2, 1.0)], bias: 0.0 });
            } else {
                let b = &vals[&rest];
                let s = a.plus(b);
                let us = [
                    layer.unit(&s),
                    layer.unit(&s.scaled(-1.0)),
                    layer.unit(a),
                    layer.unit(&a.scaled(-1.0)),
                    layer.unit(b),
                    layer.unit(&b.scaled(-1.0)),
                ];
                let w = [0.5, 0.5, -0.5, -0.5, -0.5, -0.5];
                new_vals.insert(nu.clone(), Form { terms: us.iter().zip(w).map(|(&u, w)| (u, w)).collect(), bias: 0.0 });
            }
        }
        let rows = layer.bias.len();
        layers.push(AffineLayer::from_triplets(rows, cols, layer.trips, layer.bias)?);
        cols = rows;
        vals = new_vals;
        top = next_top;
    }
    let mut trips = Vec::new();
    let mut bias = vec![0.0; outputs.len()];
    for (r, out) in outputs.iter().enumerate() {
        for (mu, c) in out {
            let f = vals
                .get(mu)
                .ok_or_else(|| Error::InvalidArgument(format!("monomial {mu} is not in the index set")))?;
            for &(j, w) in &f.terms {
                trips.push((r, j, c * w));
            }
            bias[r] += c * f.bias;
        }
    }
    layers.push(AffineLayer::from_triplets(outputs.len(), cols, trips, bias)?);
    SparseNetwork::new(layers, act)
}

/// `nu = mu + rest` with `|mu|_1 = ceil(|nu|_1 / 2)`, taking exponents from the lowest dimensions first.
fn split(nu: &MultiIndex) -> (MultiIndex, MultiIndex) {
    let mut need = nu.order().div_ceil(2);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &(d, e) in nu.entries() {
        let t = e.min(need);
        need -= t;
        if t > 0 {
            a.push((d, t));
        }
        if e > t {
            b.push((d, e - t));
        }
    }
    (MultiIndex::from_pairs(a).unwrap(), MultiIndex::from_pairs(b).unwrap())
}

fn closure(terms: &[(MultiIndex, f64)]) -> Result<DownwardClosedSet> {
    let mut all = std::collections::HashSet::new();
    all.insert(MultiIndex::zero());
    let mut stack: Vec<MultiIndex> = terms.iter().map(|t| t.0.clone()).collect();
    while let Some(n) = stack.pop() {
        if all.insert(n.clone()) {
            for d in n.support().collect::<Vec<_>>() {
                stack.push(n.minus_unit(d).unwrap());
            }
        }
    }
    DownwardClosedSet::new(all)
}

/// Exact RePU(2) network for `p(y) = sum_nu c_nu y^nu`; inputs are ordered by
/// the support of the downward closure of the terms. Only `k = 2` is supported.
pub fn repu_exact_poly(terms: &[(MultiIndex, f64)], k: u32) -> Result<SparseNetwork> {
    if k != 2 {
        return Err(Error::InvalidArgument(format!("RePU exact realization supports k = 2 only, got {k}")));
    }
    let lambda = closure(terms)?;
    build(&lambda, &[terms.to_vec()])
}

/// Monomial expansion of `H_nu(y) = prod_j H_{nu_j}(y_j)`.
pub fn hermite_monomial_expansion(nu: &MultiIndex) -> Vec<(MultiIndex, f64)> {
    let mut acc: Vec<(Vec<(u32, u32)>, f64)> = vec![(vec![], 1.0)];
    for &(d, e) in nu.entries() {
        let c = monomial_coeffs(e as usize).values;
        let mut next = Vec::new();
        for (mono, v) in &acc {
            for (j, &cj) in c.iter().enumerate() {
                if cj != 0.0 {
                    let mut m = mono.clone();
                    if j > 0 {
                        m.push((d, j as u32));
                    }
                    next.push((m, v * cj));
                }
            }
        }
        acc = next;
    }
    acc.into_iter().map(|(m, v)| (MultiIndex::from_pairs(m).unwrap(), v)).collect()
}

/// Exact RePU(2) network with outputs `H_nu`, `nu in lambda` in canonical order.
pub fn repu_exact_hermite(lambda: &DownwardClosedSet) -> Result<SparseNetwork> {
    if lambda.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    let outputs: Vec<Vec<(MultiIndex, f64)>> = lambda.iter().map(hermite_monomial_expansion).collect();
    build(lambda, &outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::hermite_eval;

    #[test]
    fn square_and_product() {
        let sq = repu_exact_poly(&[(MultiIndex::from_pairs([(1, 2)]).unwrap(), 1.0)], 2).unwrap();
        for x in [-3.0, 0.0, 1.5, 10.0] {
            assert_eq!(sq.eval1(x), x * x);
        }
        let xy = repu_exact_poly(&[(MultiIndex::from_pairs([(1, 1), (2, 1)]).unwrap(), 1.0)], 2).unwrap();
        assert_eq!(xy.evaluate(&[7.0, -2.0]).unwrap()[0], -14.0);
        assert!(repu_exact_poly(&[(MultiIndex::unit(1), 1.0)], 3).is_err());
    }

    #[test]
    fn cubic_hermite() {
        let c = monomial_coeffs(3).values;
        let terms: Vec<_> = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (MultiIndex::from_pairs([(1, j as u32)]).unwrap(), v))
            .collect();
        let net = repu_exact_poly(&terms, 2).unwrap();
        for i in 0..1000 {
            let x = -10.0 + 20.0 * i as f64 / 999.0;
            let h = hermite_eval(3, x);
            assert!((net.eval1(x) - h).abs() <= 1e-11 * h.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn tensor_hermite_outputs() {
        let lambda = DownwardClosedSet::total_degree(2, 4);
        let net = repu_exact_hermite(&lambda).unwrap();
        let y = [0.7, -1.3];
        let out = net.evaluate(&y).unwrap();
        for (k, nu) in lambda.iter().enumerate() {
            let direct: f64 = nu.entries().iter().map(|&(d, e)| hermite_eval(e as usize, y[d as usize - 1])).product();
            assert!((out[k] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let one = repu_exact_hermite(&DownwardClosedSet::new([MultiIndex::zero()]).unwrap()).unwrap();
        assert_eq!(one.evaluate(&[]).unwrap(), vec![1.0]);
    }
}
