//! Multi-indices and downward-closed index sets.

mod weighted;

pub use weighted::{
    cardinality_eps_relation, cnu_weight, lambda_eps_weighted, riemann_zeta, weight_norm, EpsRelation, WeightNorm,
    WeightSequence,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

/// Finitely supported multi-index with 1-based dimensions; stores only nonzero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (d, e) in pairs {
            if d == 0 {
                return Err(Error::InvalidArgument("multi-index dimensions are 1-based".into()));
            }
            if e > 0 && map.insert(d, e).is_some() {
                return Err(Error::InvalidArgument(format!("dimension {d} given twice")));
            }
        }
        Ok(MultiIndex { entries: map.into_iter().collect() })
    }

    /// `dense[i]` is the exponent of dimension `i + 1`.
    pub fn from_dense(dense: &[u32]) -> Self {
        MultiIndex {
            entries: dense.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i as u32 + 1, e)).collect(),
        }
    }

    pub fn unit(dim: u32) -> Self {
        assert!(dim >= 1);
        MultiIndex { entries: vec![(dim, 1)] }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn get(&self, dim: u32) -> u32 {
        self.entries.binary_search_by_key(&dim, |e| e.0).map(|i| self.entries[i].1).unwrap_or(0)
    }

    /// `|nu|_1`.
    pub fn order(&self) -> u32 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// `|nu|_0`.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_dim(&self) -> u32 {
        self.entries.last().map(|e| e.0).unwrap_or(0)
    }

    pub fn plus_unit(&self, dim: u32) -> Self {
        let mut e = self.entries.clone();
        match e.binary_search_by_key(&dim, |x| x.0) {
            Ok(i) => e[i].1 += 1,
            Err(i) => e.insert(i, (dim, 1)),
        }
        MultiIndex { entries: e }
    }

    /// `nu - e_dim`; `None` if `nu_dim = 0`.
    pub fn minus_unit(&self, dim: u32) -> Option<Self> {
        let i = self.entries.binary_search_by_key(&dim, |x| x.0).ok()?;
        let mut e = self.entries.clone();
        if e[i].1 == 1 {
            e.remove(i);
        } else {
            e[i].1 -= 1;
        }
        Some(MultiIndex { entries: e })
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.entries.iter().all(|&(d, e)| other.get(d) >= e)
    }

    pub fn dense(&self, dims: usize) -> Vec<u32> {
        let mut v = vec![0; dims];
        for &(d, e) in &self.entries {
            if (d as usize) <= dims {
                v[d as usize - 1] = e;
            }
        }
        v
    }
}

/// Graded lexicographic: total order first, then support, then exponents.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.support().cmp(other.support()))
            .then_with(|| self.entries.iter().map(|e| e.1).cmp(other.entries.iter().map(|e| e.1)))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<u32, u32> = self.entries.iter().copied().collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = BTreeMap::<u32, u32>::deserialize(d)?;
        MultiIndex::from_pairs(m).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (d, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}:{e}")?;
        }
        write!(f, "}}")
    }
}

/// A finite downward-closed set in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct DownwardClosedSet {
    indices: Vec<MultiIndex>,
    lookup: HashSet<MultiIndex>,
    m: u32,
    d: usize,
    supp: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetDiagnostics {
    pub m: u32,
    pub d: usize,
    pub supp: Vec<u32>,
    pub cardinality: usize,
}

impl DownwardClosedSet {
    pub fn new(indices: impl IntoIterator<Item = MultiIndex>) -> Result<Self> {
        let mut v: Vec<MultiIndex> = indices.into_iter().collect();
        v.sort();
        v.dedup();
        let lookup: HashSet<MultiIndex> = v.iter().cloned().collect();
        for nu in &v {
            for dim in nu.support() {
                let p = nu.minus_unit(dim).unwrap();
                if !lookup.contains(&p) {
                    return Err(Error::InvalidArgument(format!("not downward closed: {nu} is present but {p} is not")));
                }
            }
        }
        let m = v.iter().map(MultiIndex::order).max().unwrap_or(0);
        let d = v.iter().map(MultiIndex::support_size).max().unwrap_or(0);
        let mut supp: Vec<u32> = v.iter().flat_map(|n| n.support().collect::<Vec<_>>()).collect();
        supp.sort_unstable();
        supp.dedup();
        Ok(DownwardClosedSet { indices: v, lookup, m, d, supp })
    }

    /// Full tensor box `{nu : nu_j <= bounds[j-1]}`.
    pub fn tensor_box(bounds: &[u32]) -> Self {
        let mut out = vec![MultiIndex::zero()];
        for (j, &b) in bounds.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (b as usize + 1));
            for nu in &out {
                let mut cur = nu.clone();
                next.push(cur.clone());
                for _ in 0..b {
                    cur = cur.plus_unit(j as u32 + 1);
                    next.push(cur.clone());
                }
            }
            out = next;
        }
        DownwardClosedSet::new(out).expect("tensor boxes are downward closed")
    }

    /// `{nu : |nu|_1 <= m}` in `dims` variables.
    pub fn total_degree(dims: usize, m: u32) -> Self {
        let b = DownwardClosedSet::tensor_box(&vec![m; dims]);
        DownwardClosedSet::new(b.indices.into_iter().filter(|n| n.order() <= m)).unwrap()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.lookup.contains(nu)
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    pub fn position(&self, nu: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(nu).ok()
    }

    /// `m(Lambda) = max |nu|_1`.
    pub fn max_order(&self) -> u32 {
        self.m
    }

    /// `d(Lambda) = max |nu|_0`.
    pub fn max_support(&self) -> usize {
        self.d
    }

    /// `supp Lambda`, sorted.
    pub fn support(&self) -> &[u32] {
        &self.supp
    }

    pub fn diagnostics(&self) -> SetDiagnostics {
        SetDiagnostics { m: self.m, d: self.d, supp: self.supp.clone(), cardinality: self.len() }
    }

    /// Exhaustive predecessor check (construction already enforces it).
    pub fn is_downward_closed(&self) -> bool {
        self.indices.iter().all(|nu| nu.support().all(|j| self.contains(&nu.minus_unit(j).unwrap())))
    }

    pub fn is_subset(&self, other: &DownwardClosedSet) -> bool {
        self.indices.iter().all(|n| other.contains(n))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.indices).expect("index sets serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Vec<MultiIndex> = serde_json::from_str(s).map_err(|e| Error::Parse { offset: e.column(), msg: e.to_string() })?;
        DownwardClosedSet::new(v)
    }
}

/// `Lambda_eps = {nu : nu_j <= floor((log eps / beta_j)^2)}`.
pub fn lambda_eps_finite(beta: &[f64], eps: f64) -> Result<DownwardClosedSet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidArgument("beta must be positive".into()));
    }
    let l = eps.ln();
    let bounds: Vec<u32> = beta.iter().map(|b| box_bound(l, *b)).collect();
    Ok(DownwardClosedSet::tensor_box(&bounds))
}

fn box_bound(ln_eps: f64, beta: f64) -> u32 {
    let t = (ln_eps / beta).powi(2);
    // absorb roundoff right below an integer, e.g. (log e^{-2})^2 = 3.9999999999999996
    let r = t.round();
    if (t - r).abs() <= 1e-9 * r.max(1.0) {
        r as u32
    } else {
        t.floor() as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityCheck {
    pub cardinality: usize,
    /// `2^d |log eps|^{2d} / prod beta_j^2`.
    pub cardinality_bound: f64,
    pub m: u32,
    /// `log(eps)^2 sum beta_j^{-2}`.
    pub m_bound: f64,
    /// `eps < exp(-max beta_j)`.
    pub precondition: bool,
    pub ok: bool,
}

pub fn cardinality_bound_check(set: &DownwardClosedSet, beta: &[f64], eps: f64) -> CardinalityCheck {
    let d = beta.len() as f64;
    let l = eps.ln();
    let ln_rhs = d * std::f64::consts::LN_2 + 2.0 * d * l.abs().ln() - 2.0 * beta.iter().map(|b| b.ln()).sum::<f64>();
    let cardinality_bound = ln_rhs.exp();
    let m_bound = l * l * beta.iter().map(|b| b.powi(-2)).sum::<f64>();
    let bmax = beta.iter().cloned().fold(0.0, f64::max);
    let precondition = eps < (-bmax).exp();
    let tol = 1.0 + 1e-12;
    let ok = set.len() as f64 <= cardinality_bound * tol && set.max_order() as f64 <= m_bound * tol;
    CardinalityCheck { cardinality: set.len(), cardinality_bound, m: set.max_order(), m_bound, precondition, ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_json() {
        let a = MultiIndex::from_pairs([(2, 1)]).unwrap();
        let b = MultiIndex::from_pairs([(1, 1)]).unwrap();
        let c = MultiIndex::from_pairs([(1, 1), (3, 1)]).unwrap();
        assert!(MultiIndex::zero() < b && b < a && a < c);
        let s = DownwardClosedSet::tensor_box(&[1, 1]);
        assert_eq!(s.to_json(), r#"[{},{"1":1},{"2":1},{"1":1,"2":1}]"#);
        assert_eq!(DownwardClosedSet::from_json(&s.to_json()).unwrap(), s);
        assert!(DownwardClosedSet::from_json(r#"[{"1":2}]"#).is_err());
    }

    #[test]
    fn finite_sets() {
        let e = std::f64::consts::E;
        assert_eq!(lambda_eps_finite(&[1.0, 1.0], 1.0 / e).unwrap().len(), 4);
        let s = lambda_eps_finite(&[1.0], (-2f64).exp()).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.max_order(), 4);
        assert_eq!(lambda_eps_finite(&[1.0, 2.0], 0.999_999).unwrap().len(), 1);
        let c = cardinality_bound_check(&lambda_eps_finite(&[1.0, 1.0], 1.0 / e).unwrap(), &[1.0, 1.0], 1.0 / e);
        assert!(c.ok && c.cardinality == 4 && (c.cardinality_bound - 4.0).abs() < 1e-12);
        let c = cardinality_bound_check(&lambda_eps_finite(&[2.0], (-3f64).exp()).unwrap(), &[2.0], (-3f64).exp());
        assert_eq!(c.cardinality, 3);
        assert!(c.ok);
    }

    #[test]
    fn diagnostics() {
        let z = DownwardClosedSet::new([MultiIndex::zero()]).unwrap();
        assert_eq!(z.diagnostics(), SetDiagnostics { m: 0, d: 0, supp: vec![], cardinality: 1 });
        let b = DownwardClosedSet::tensor_box(&[2, 2]);
        assert_eq!((b.max_order(), b.max_support(), b.len()), (4, 2, 9));
        assert_eq!(DownwardClosedSet::total_degree(3, 2).len(), 10);
    }
}
