//! Wiener-Hermite coefficients, truncation errors and network surrogates.

mod coeffs;
mod study;

pub use coeffs::{compute_coeffs, CoeffMethod, CoeffOptions, Coefficients};
pub use study::{
    finite_dim_study, infinite_dim_study, regularized_weights, ConvergenceReport, FiniteStudyConfig, InfiniteStudyConfig, RateFit,
    ReferenceDim, ReportRow, SHAPE_SLACK,
};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::{
    from_squared, gauss_hermite_rule, gaussian_panel_nodes, hermite_eval_all, mc_sq_estimates, tensor_rule_sums,
    L2Estimate,
};
use crate::index_sets::{DownwardClosedSet, MultiIndex};
use crate::relu_net::{affine_net, compose, Activation, SparseNetwork};
use crate::stats::linear_fit;
use crate::tensor::{build_tensor_hermite, repu_exact_hermite, TensorHermiteNet};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type Eval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Factor = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetDim {
    Finite(usize),
    /// Countably many variables; `eval` receives a truncation `(y_1, ..., y_N)`
    /// and treats the missing variables as 0.
    Countable,
}

/// A map `f(y)` of Gaussian variables. `y[j - 1]` is the variable `y_j`.
#[derive(Clone)]
pub struct TargetFunction {
    pub name: String,
    pub dim: TargetDim,
    /// Strip half-widths, recorded as metadata.
    pub strip: Option<Vec<f64>>,
    eval: Eval,
    closed_form: Option<Arc<dyn Fn(&MultiIndex) -> f64 + Send + Sync>>,
    /// `f(y) = prod_{j <= factors.0} g(j, y_j)`.
    factors: Option<(usize, Factor)>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

impl TargetFunction {
    pub fn new(name: &str, d: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TargetFunction {
            name: name.into(),
            dim: TargetDim::Finite(d),
            strip: None,
            eval: Arc::new(f),
            closed_form: None,
            factors: None,
        }
    }

    pub fn univariate(name: &str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TargetFunction::new(name, 1, move |y| f(y[0]))
    }

    pub fn countable(name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TargetFunction { dim: TargetDim::Countable, ..TargetFunction::new(name, 0, f) }
    }

    /// `f(y) = prod_{j=1}^{terms} g(j, y_j)` with `g(j, 0) = 1`, a countable
    /// target whose coefficients factorize.
    pub fn separable(name: &str, terms: usize, g: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Self {
        let g: Factor = Arc::new(g);
        let gf = g.clone();
        let eval = move |y: &[f64]| (1..=terms.min(y.len())).map(|j| gf(j, y[j - 1])).product();
        TargetFunction { factors: Some((terms, g)), ..TargetFunction::countable(name, eval) }
    }

    pub fn with_strip(mut self, beta: Vec<f64>) -> Self {
        self.strip = Some(beta);
        self
    }

    pub fn with_closed_form(mut self, c: impl Fn(&MultiIndex) -> f64 + Send + Sync + 'static) -> Self {
        self.closed_form = Some(Arc::new(c));
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    pub fn closed_form(&self, nu: &MultiIndex) -> Option<f64> {
        self.closed_form.as_ref().map(|c| c(nu))
    }

    pub(crate) fn factors(&self) -> Option<&(usize, Factor)> {
        self.factors.as_ref()
    }

    /// Number of variables `eval` expects when called on `Lambda`'s support.
    pub(crate) fn eval_dim(&self, lambda: &DownwardClosedSet) -> usize {
        match self.dim {
            TargetDim::Finite(d) => d,
            TargetDim::Countable => lambda.support().last().copied().unwrap_or(0) as usize,
        }
    }
}

/// `sum_{nu in Lambda} u_nu H_nu(y)`, `y` indexed by dimension.
pub fn expansion_eval(lambda: &DownwardClosedSet, coeffs: &[f64], y: &[f64]) -> f64 {
    let m = lambda.max_order() as usize;
    let supp = lambda.support();
    let mut table = vec![0.0; supp.len() * (m + 1)];
    for (k, &dim) in supp.iter().enumerate() {
        let x = y.get(dim as usize - 1).copied().unwrap_or(0.0);
        hermite_eval_all(m, x, &mut table[k * (m + 1)..(k + 1) * (m + 1)]);
    }
    lambda
        .iter()
        .zip(coeffs)
        .map(|(nu, c)| {
            c * nu
                .entries()
                .iter()
                .map(|&(dim, e)| table[supp.binary_search(&dim).unwrap() * (m + 1) + e as usize])
                .product::<f64>()
        })
        .sum()
}

/// Result of [`coefficient_envelope_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// `max_nu |u_nu| exp(sum_j beta_j (2 nu_j + 1)^{1/2})` over nonzero coefficients.
    pub c_fit: f64,
    /// Indices in the upper half (by order) whose scaled size exceeds the lower-half maximum.
    pub violations: usize,
    pub holds: bool,
    /// Univariate only: slope of `log|u_n|` against `-(2n + 1)^{1/2}`.
    pub beta_hat: Option<f64>,
    pub beta_hat_r_squared: Option<f64>,
    pub used: usize,
}

/// Relative size below which a coefficient counts as zero in the envelope fit.
pub const ENVELOPE_ZERO_CUTOFF: f64 = 1e-12;

pub fn coefficient_envelope_fit(coeffs: &Coefficients, beta: &[f64]) -> Result<EnvelopeFit> {
    let umax = coeffs.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if umax == 0.0 {
        return Err(Error::InvalidArgument("all coefficients vanish".into()));
    }
    let scaled = |nu: &MultiIndex, u: f64| {
        u.abs().ln()
            + nu.dense(beta.len()).iter().zip(beta).map(|(&n, b)| b * (2.0 * n as f64 + 1.0).sqrt()).sum::<f64>()
    };
    let kept: Vec<(&MultiIndex, f64)> = coeffs
        .index_set
        .iter()
        .zip(&coeffs.values)
        .filter(|(_, u)| u.abs() > ENVELOPE_ZERO_CUTOFF * umax)
        .map(|(nu, &u)| (nu, u))
        .collect();
    let stats: Vec<f64> = kept.iter().map(|(nu, u)| scaled(nu, *u)).collect();
    let c_fit = stats.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let half = stats.len().div_ceil(2);
    let lower = stats[..half].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let violations = stats[half..].iter().filter(|&&s| s > lower).count();
    let (beta_hat, r2) = if kept.iter().all(|(nu, _)| nu.max_dim() <= 1) && kept.len() >= 3 {
        let x: Vec<f64> = kept.iter().map(|(nu, _)| -(2.0 * nu.get(1) as f64 + 1.0).sqrt()).collect();
        let y: Vec<f64> = kept.iter().map(|(_, u)| u.abs().ln()).collect();
        let fit = linear_fit(&x, &y);
        (Some(fit.slope), Some(fit.r_squared))
    } else {
        (None, None)
    };
    Ok(EnvelopeFit {
        c_fit,
        violations,
        holds: violations == 0,
        beta_hat,
        beta_hat_r_squared: r2,
        used: kept.len(),
    })
}

/// How an `L^2(gamma)` error is measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ErrorMethod {
    /// Tensor Gauss-Hermite rule with `nodes` points per variable (smooth
    /// integrands), checked against `nodes / 2`.
    GaussHermite { nodes: usize },
    /// Tensor Gauss-Legendre panels on `[-radius, radius]^d`, order `order`
    /// checked against `order / 2` (piecewise smooth integrands).
    Panels { radius: f64, panel_width: f64, order: usize },
    /// Standard Gaussian samples in `dim` variables.
    MonteCarlo { samples: usize, seed: u64, dim: usize },
}

/// `||f - sum_{nu in Lambda} u_nu H_nu||_{L^2(gamma)}`.
pub fn truncation_error(f: &TargetFunction, coeffs: &Coefficients, method: &ErrorMethod, exec: Exec) -> Result<L2Estimate> {
    let lambda = &coeffs.index_set;
    let diff = |y: &[f64]| f.eval(y) - expansion_eval(lambda, &coeffs.values, y);
    l2_error_of(&diff, f.eval_dim(lambda), method, 0.0, exec)
}

/// `||d||_{L^2(gamma_dim)}` of a scalar function; `tail_sq` is added to the
/// error bar of the panel method.
pub fn l2_error_of(
    diff: &(dyn Fn(&[f64]) -> f64 + Sync),
    dim: usize,
    method: &ErrorMethod,
    tail_sq: f64,
    exec: Exec,
) -> Result<L2Estimate> {
    let sq = |y: &[f64], out: &mut [f64]| {
        let v = diff(y);
        out[0] = v * v;
    };
    match *method {
        ErrorMethod::GaussHermite { nodes } => {
            if dim > 3 || nodes < 2 {
                return Err(Error::InvalidArgument(format!("Gauss-Hermite error needs d <= 3, got {dim}")));
            }
            let rule = |n: usize| {
                let r = gauss_hermite_rule(n);
                r.nodes.iter().copied().zip(r.weights.iter().copied()).collect::<Vec<_>>()
            };
            let hi = tensor_rule_sums(&rule(nodes), dim, 1, &sq, exec)[0];
            let lo = tensor_rule_sums(&rule(nodes / 2), dim, 1, &sq, exec)[0];
            Ok(from_squared(hi, (hi - lo).abs() + tail_sq, "gauss-hermite"))
        }
        ErrorMethod::Panels { radius, panel_width, order } => {
            if dim > 3 || order < 2 || !(radius > 0.0 && panel_width > 0.0) {
                return Err(Error::InvalidArgument(format!("panel error needs d <= 3 and a positive box, got d = {dim}")));
            }
            let hi = tensor_rule_sums(&gaussian_panel_nodes(radius, panel_width, order), dim, 1, &sq, exec)[0];
            let lo = tensor_rule_sums(&gaussian_panel_nodes(radius, panel_width, order / 2), dim, 1, &sq, exec)[0];
            Ok(from_squared(hi, (hi - lo).abs() + tail_sq, "panel+tail"))
        }
        ErrorMethod::MonteCarlo { samples, seed, dim: n } => {
            Ok(mc_sq_estimates(n.max(dim), 1, samples, seed, &sq, exec).remove(0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Relu,
    Repu,
}

#[derive(Clone, Debug)]
pub enum Emulation {
    Relu(TensorHermiteNet),
    Repu(SparseNetwork),
}

/// `sum_nu u_nu H~_nu` as one network on the variables `inputs`.
#[derive(Clone, Debug)]
pub struct SurrogateModel {
    pub index_set: DownwardClosedSet,
    pub coeffs: Vec<f64>,
    pub emulation: Emulation,
    pub assembled: SparseNetwork,
    pub eps_emulation: f64,
    /// `eps_emulation * sum |u_nu|`, the emulation part of the error bound.
    pub emulation_budget: f64,
    pub inputs: Vec<u32>,
}

/// Assembles the surrogate by appending the coefficient row to the emulation
/// network (the row merges into its output layer).
pub fn assemble_surrogate(coeffs: &Coefficients, eps_emulation: f64, backend: Backend, exec: Exec) -> Result<SurrogateModel> {
    let lambda = &coeffs.index_set;
    if coeffs.values.len() != lambda.len() || coeffs.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("coefficients do not match the index set".into()));
    }
    let (emulation, net, eps, act) = match backend {
        Backend::Relu => {
            let t = build_tensor_hermite(lambda, eps_emulation, exec)?;
            let net = t.net.clone();
            (Emulation::Relu(t), net, eps_emulation, Activation::Relu)
        }
        Backend::Repu => {
            let net = repu_exact_hermite(lambda)?;
            (Emulation::Repu(net.clone()), net, 0.0, Activation::Repu(2))
        }
    };
    let trips: Vec<(usize, usize, f64)> =
        coeffs.values.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(k, &c)| (0, k, c)).collect();
    let row = affine_net(1, lambda.len(), trips, vec![0.0], act)?;
    let assembled = compose(&row, &net)?;
    let abs_sum: f64 = coeffs.values.iter().map(|c| c.abs()).sum();
    Ok(SurrogateModel {
        index_set: lambda.clone(),
        coeffs: coeffs.values.clone(),
        emulation,
        assembled,
        eps_emulation: eps,
        emulation_budget: eps * abs_sum,
        inputs: lambda.support().to_vec(),
    })
}

impl SurrogateModel {
    /// Surrogate value at `y` (indexed by dimension; missing variables are 0).
    pub fn eval(&self, y: &[f64]) -> f64 {
        let x: Vec<f64> = self.inputs.iter().map(|&d| y.get(d as usize - 1).copied().unwrap_or(0.0)).collect();
        self.assembled.evaluate(&x).expect("input dimension")[0]
    }

    /// Bound on `int (p - surrogate)^2 d gamma` outside `[-r, r]^d`, with
    /// `p = sum u_nu H_nu`, by Minkowski over the outputs.
    pub fn emulation_tail_sq(&self, r: f64) -> f64 {
        match &self.emulation {
            Emulation::Repu(_) => 0.0,
            Emulation::Relu(t) => {
                let s: f64 = self.index_set.iter().zip(&self.coeffs).map(|(nu, c)| c.abs() * t.tail_sq(nu, r).sqrt()).sum();
                s * s
            }
        }
    }
}

/// `||f - surrogate||_{L^2(gamma)}`.
///
/// With panels, the part outside the box is bounded through
/// `(f - g)^2 <= 2 (f - p)^2 + 2 (p - g)^2`: the second term by
/// [`SurrogateModel::emulation_tail_sq`], the first by a Gauss-Hermite
/// estimate of `int (f - p)^2` over the outside region.
pub fn surrogate_error(f: &TargetFunction, model: &SurrogateModel, method: &ErrorMethod, exec: Exec) -> Result<L2Estimate> {
    let diff = |y: &[f64]| f.eval(y) - model.eval(y);
    let dim = f.eval_dim(&model.index_set);
    let tail = match *method {
        ErrorMethod::Panels { radius, .. } => {
            let lambda = &model.index_set;
            let outside = |y: &[f64]| {
                if y.iter().any(|v| v.abs() > radius) {
                    f.eval(y) - expansion_eval(lambda, &model.coeffs, y)
                } else {
                    0.0
                }
            };
            let far = l2_error_of(&outside, dim, &ErrorMethod::GaussHermite { nodes: 64 }, 0.0, exec)?;
            let far_sq = (far.estimate + far.error_bar).powi(2);
            2.0 * far_sq + 2.0 * model.emulation_tail_sq(radius)
        }
        _ => 0.0,
    };
    l2_error_of(&diff, dim, method, tail, exec)
}
