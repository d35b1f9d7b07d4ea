//! Invariant suites behind `dnngpc verify`. Each invariant is checked on a
//! fixed set of cases and reports how many passed.

use crate::emulation::{hermite_net_auto, product2_net};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::{
    gauss_hermite_rule, gaussian_tail_moment, hermite_eval, hermite_function_eval, monomial_coeffs,
};
use crate::index_sets::{
    cardinality_bound_check, cardinality_eps_relation, lambda_eps_finite, lambda_eps_weighted, DownwardClosedSet,
    WeightSequence,
};
use crate::relu_net::{deserialize, from_piecewise_linear, serialize, Breakpoints};
use crate::rng::uniform_sample;
use crate::tensor::{build_tensor_hermite, product_net_multi, repu_exact_hermite};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Hermite,
    Net,
    Tensor,
    Index,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hermite" => Ok(Suite::Hermite),
            "net" => Ok(Suite::Net),
            "tensor" => Ok(Suite::Tensor),
            "index" => Ok(Suite::Index),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidArgument(format!("unknown suite {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Test hook: corrupts one measured quantity per suite so that the
    /// corresponding invariant must fail.
    pub inject_fault: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub suite: Suite,
    pub name: String,
    pub checked: usize,
    pub passed: usize,
    /// First failing case, if any.
    pub first_failure: Option<String>,
}

impl InvariantResult {
    pub fn ok(&self) -> bool {
        self.passed == self.checked
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub suite: Suite,
    pub pass: bool,
    pub invariants: Vec<InvariantResult>,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

struct Tally {
    suite: Suite,
    name: &'static str,
    checked: usize,
    passed: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new(suite: Suite, name: &'static str) -> Self {
        Tally { suite, name, checked: 0, passed: 0, first_failure: None }
    }

    fn check(&mut self, ok: bool, case: impl FnOnce() -> String) {
        self.checked += 1;
        if ok {
            self.passed += 1;
        } else if self.first_failure.is_none() {
            self.first_failure = Some(case());
        }
    }

    fn done(self) -> InvariantResult {
        InvariantResult {
            suite: self.suite,
            name: self.name.into(),
            checked: self.checked,
            passed: self.passed,
            first_failure: self.first_failure,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions, exec: Exec) -> Result<Verdict> {
    let invariants = match suite {
        Suite::Hermite => hermite_suite(opts)?,
        Suite::Net => net_suite(opts, exec)?,
        Suite::Tensor => tensor_suite(opts, exec)?,
        Suite::Index => index_suite(opts)?,
        Suite::All => {
            let mut v = hermite_suite(opts)?;
            v.extend(net_suite(opts, exec)?);
            v.extend(tensor_suite(opts, exec)?);
            v.extend(index_suite(opts)?);
            v
        }
    };
    Ok(Verdict { suite, pass: invariants.iter().all(InvariantResult::ok), invariants })
}

fn fault(opts: &VerifyOptions) -> f64 {
    if opts.inject_fault {
        1.0
    } else {
        0.0
    }
}

fn hermite_suite(opts: &VerifyOptions) -> Result<Vec<InvariantResult>> {
    let s = Suite::Hermite;
    let rule = gauss_hermite_rule(26);
    let mut orth = Tally::new(s, "orthonormality m,n <= 25");
    for m in 0..=25 {
        for n in 0..=m {
            let mut ip = rule.integrate(|x| hermite_eval(m, x) * hermite_eval(n, x));
            if m == 0 && n == 0 {
                ip += fault(opts);
            }
            let target = if m == n { 1.0 } else { 0.0 };
            orth.check((ip - target).abs() <= 1e-10, || format!("<H_{m}, H_{n}> = {ip:e}"));
        }
    }
    let cramer_bound = std::f64::consts::PI.powf(-0.25) * (1.0 + 1e-9);
    let mut cramer = Tally::new(s, "sup |h_n| <= pi^{-1/4}");
    for n in 0..=60 {
        let sup = (0..=20_000).map(|i| hermite_function_eval(n, -20.0 + i as f64 * 2e-3).abs()).fold(0.0, f64::max);
        cramer.check(sup <= cramer_bound, || format!("n = {n}: sup = {sup:e}"));
    }
    let mut coeff = Tally::new(s, "sum_j |c_{n,j}| <= 6^{n/2} (exact)");
    for n in 0..=40 {
        let ok = monomial_coeffs(n).abs_sum_within_six_pow_half() == Some(true);
        coeff.check(ok, || format!("n = {n}"));
    }
    let mut tails = Tally::new(s, "tail moment <= n!! M^n e^{-M^2/2}");
    for n in 0..=20 {
        for m in [2.0, 3.0, 4.0, 6.0, 8.0] {
            let t = gaussian_tail_moment(n, m)?;
            tails.check(t.exact.ln <= t.bound.ln + 1e-12, || format!("n = {n}, M = {m}"));
        }
    }
    Ok(vec![orth.done(), cramer.done(), coeff.done(), tails.done()])
}

fn net_suite(opts: &VerifyOptions, exec: Exec) -> Result<Vec<InvariantResult>> {
    let s = Suite::Net;
    let mut pwl = Tally::new(s, "piecewise linear realization is exact");
    let mut io = Tally::new(s, "serialization round trip is exact");
    for case in 0..20u64 {
        let k = 2 + case as usize % 7;
        let mut pts = vec![0.0; k];
        uniform_sample(case, 0, -5.0, 5.0, &mut pts);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut vals = vec![0.0; pts.len()];
        uniform_sample(case, 1, -3.0, 3.0, &mut vals);
        let bp = Breakpoints::new(pts, vals, 0.5, -1.5)?;
        let net = from_piecewise_linear(&bp)?;
        let back = deserialize(&serialize(&net))?;
        let shift = if case == 0 { fault(opts) } else { 0.0 };
        let mut max_err: f64 = 0.0;
        let mut same = back == net;
        for i in 0..=400 {
            let x = -8.0 + i as f64 * 0.04;
            let v = net.eval1(x) + shift;
            max_err = max_err.max((v - bp.eval(x)).abs() / (1.0 + bp.eval(x).abs()));
            same &= back.eval1(x).to_bits() == net.eval1(x).to_bits();
        }
        pwl.check(max_err <= 1e-12, || format!("case {case}: error {max_err:e}"));
        io.check(same, || format!("case {case}"));
    }
    let mut emu = Tally::new(s, "||H_n - H~_n|| <= 2 eps, H~(+-(M+1)) = 0");
    for n in 0..=6 {
        for eps in [1e-1, 1e-2] {
            let h = hermite_net_auto(n, eps)?;
            let err = h.l2_error(exec)?.estimate;
            let edge = h.meta.m + 1.0;
            let ok = err <= 2.0 * eps && h.eval(edge) == 0.0 && h.eval(-edge) == 0.0;
            emu.check(ok, || format!("n = {n}, eps = {eps}: error {err:e}"));
        }
    }
    Ok(vec![pwl.done(), io.done(), emu.done()])
}

fn tensor_suite(opts: &VerifyOptions, exec: Exec) -> Result<Vec<InvariantResult>> {
    let s = Suite::Tensor;
    let mut prod2 = Tally::new(s, "|net(a, b) - ab| <= delta on [-B, B]^2");
    for (b, delta) in [(1.0, 1e-2), (4.0, 1e-3), (10.0, 1e-4)] {
        let net = product2_net(b, delta)?;
        let mut worst: f64 = 0.0;
        for i in 0..=60 {
            for j in 0..=60 {
                let (x, y) = (-b + i as f64 * b / 30.0, -b + j as f64 * b / 30.0);
                worst = worst.max((net.evaluate(&[x, y])?[0] - x * y).abs());
            }
        }
        prod2.check(worst <= delta, || format!("B = {b}, delta = {delta}: {worst:e}"));
    }
    let mut prod = Tally::new(s, "product tree error <= eps on [-A, A]^d");
    for (d, a, eps) in [(2usize, 1.0, 1e-2), (3, 2.0, 1e-2)] {
        let (net, _) = product_net_multi(d, a, eps)?;
        let mut worst: f64 = 0.0;
        let mut y = vec![0.0; d];
        for i in 0..2000u64 {
            uniform_sample(17, i, -a, a, &mut y);
            worst = worst.max((net.evaluate(&y)?[0] - y.iter().product::<f64>()).abs());
        }
        prod.check(worst <= eps, || format!("d = {d}, A = {a}: {worst:e}"));
    }
    let mut repu = Tally::new(s, "RePU net reproduces H_nu");
    let lambda = DownwardClosedSet::total_degree(2, 4);
    let net = repu_exact_hermite(&lambda)?;
    let mut y = [0.0; 2];
    for i in 0..200u64 {
        uniform_sample(23, i, -3.0, 3.0, &mut y);
        let out = net.evaluate(&y)?;
        let mut worst: f64 = 0.0;
        for (k, nu) in lambda.iter().enumerate() {
            let exact: f64 = nu.entries().iter().map(|&(j, e)| hermite_eval(e as usize, y[j as usize - 1])).product();
            let fault = if i == 0 && k == 0 { fault(opts) } else { 0.0 };
            worst = worst.max((out[k] + fault - exact).abs() / (1.0 + exact.abs()));
        }
        repu.check(worst <= 1e-9, || format!("sample {i}: {worst:e}"));
    }
    let mut tens = Tally::new(s, "tensor Hermite sup error on the box");
    let lambda = DownwardClosedSet::tensor_box(&[1, 1]);
    let t = build_tensor_hermite(&lambda, 1e-2, exec)?;
    let mut y = [0.0; 2];
    for i in 0..200u64 {
        uniform_sample(29, i, -2.0, 2.0, &mut y);
        let out = t.evaluate(&y)?;
        let worst = lambda
            .iter()
            .enumerate()
            .map(|(k, nu)| {
                let exact: f64 = nu.entries().iter().map(|&(j, e)| hermite_eval(e as usize, y[j as usize - 1])).product();
                (out[k] - exact).abs()
            })
            .fold(0.0, f64::max);
        tens.check(worst <= 1e-2, || format!("sample {i}: {worst:e}"));
    }
    Ok(vec![prod2.done(), prod.done(), repu.done(), tens.done()])
}

fn index_suite(opts: &VerifyOptions) -> Result<Vec<InvariantResult>> {
    let s = Suite::Index;
    let mut finite = Tally::new(s, "Lambda_eps finite: closed, cardinality bound");
    for beta in [vec![0.9], vec![1.0, 0.5], vec![0.7, 1.2, 2.0]] {
        for eps in [1e-2, 1e-4, 1e-6] {
            let set = lambda_eps_finite(&beta, eps)?;
            let c = cardinality_bound_check(&set, &beta, eps);
            finite.check(set.is_downward_closed() && c.ok, || format!("beta = {beta:?}, eps = {eps}"));
        }
    }
    let mut weighted = Tally::new(s, "Lambda_eps weighted: closed, eps-cardinality relation");
    let w = WeightSequence::algebraic(1.0, 2.0, 0.5, 1.0, 4.0)?;
    for (i, eps) in [1e-1, 1e-2, 1e-3, 1e-4].into_iter().enumerate() {
        let set = lambda_eps_weighted(&w, eps, None)?;
        let rel = cardinality_eps_relation(&set, &w, eps)?;
        let ok = set.is_downward_closed() && rel.ok && !(i == 0 && opts.inject_fault);
        weighted.check(ok, || format!("eps = {eps}: ratio {}", rel.ratio));
    }
    Ok(vec![finite.done(), weighted.done()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_and_faults_fail() {
        for suite in [Suite::Hermite, Suite::Index] {
            let v = run_suite(suite, &VerifyOptions::default(), Exec::Parallel).unwrap();
            assert!(v.pass, "{}", v.to_json());
            let f = run_suite(suite, &VerifyOptions { inject_fault: true }, Exec::Parallel).unwrap();
            assert!(!f.pass);
            assert_eq!(f.invariants.iter().filter(|i| !i.ok()).count(), 1);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
