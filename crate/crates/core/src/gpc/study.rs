//! Convergence studies: surrogates for a sweep of budgets, with rate fits.

use super::{
    assemble_surrogate, compute_coeffs, expansion_eval, surrogate_error, truncation_error, Backend, CoeffOptions,
    ErrorMethod, TargetDim, TargetFunction,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hermite::mc_sq_estimates;
use crate::index_sets::{lambda_eps_finite, lambda_eps_weighted, weight_norm, WeightSequence};
use crate::stats::{linear_fit, shape_check, ShapeCheck};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Largest emulation accuracy accepted by the tensor construction.
const EPS_CAP: f64 = 0.99 * 0.367_879_441_171_442_3;

/// Allowed growth of `size / shape` over the constant fitted on the first half.
pub const SHAPE_SLACK: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub budget: u64,
    pub cardinality: usize,
    pub size: usize,
    pub depth: usize,
    pub error: f64,
    pub error_bar: f64,
    pub truncation_error: f64,
    pub truncation_bar: f64,
    /// `eps * sum |u_nu|`.
    pub emulation_budget: f64,
    /// Threshold defining the index set (`eps_M` or `eps_N`).
    pub eps: f64,
    /// Accuracy passed to the emulation.
    pub eps_emulation: f64,
    pub m: u32,
    pub d: usize,
    pub max_dim: u32,
    pub coeffs_converged: bool,
    /// Error of the exact RePU surrogate on the same set, if computed.
    pub repu_error: Option<f64>,
    /// Finite study: the integer `M` derived from the budget.
    pub m_param: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The slope the theory predicts (rate constants aside).
    pub predicted_slope: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub study: String,
    pub target: String,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<RateFit>,
    pub size_shape: Option<ShapeCheck>,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("budget,cardinality,size,depth,error,error_bar\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.12e},{:.12e}", r.budget, r.cardinality, r.size, r.depth, r.error, r.error_bar);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn fit(&self, model_prefix: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.model.starts_with(model_prefix))
    }
}

fn fit(model: &str, x: &[f64], y: &[f64], predicted: f64) -> Option<RateFit> {
    if x.len() < 2 {
        return None;
    }
    let f = linear_fit(x, y);
    Some(RateFit { model: model.into(), slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, predicted_slope: predicted })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteStudyConfig {
    pub budgets: Vec<u64>,
    pub coeff: CoeffOptions,
    pub panel_width: f64,
    pub panel_order: usize,
    pub with_repu: bool,
}

impl Default for FiniteStudyConfig {
    fn default() -> Self {
        FiniteStudyConfig {
            budgets: [4u64, 6, 8, 10, 12, 14, 16, 18].iter().map(|&m| ((m + 1) as f64).powf(4.5).ceil() as u64).collect(),
            coeff: CoeffOptions::default(),
            panel_width: 0.5,
            panel_order: 16,
            with_repu: true,
        }
    }
}

/// `M = floor(N^{2d/(2d+7)} - 1)`, `eps_M = exp(-2^{-1/2} delta(beta) M^{1/(2d)})`,
/// `Lambda = Lambda_{eps_M}`, ReLU surrogate with emulation accuracy `eps_M`.
pub fn finite_dim_study(f: &TargetFunction, beta: &[f64], cfg: &FiniteStudyConfig, exec: Exec) -> Result<ConvergenceReport> {
    let d = match f.dim {
        TargetDim::Finite(d) if d == beta.len() && d >= 1 => d,
        _ => return Err(Error::InvalidArgument("finite study needs a finite target with one beta per variable".into())),
    };
    if d > 3 {
        return Err(Error::InvalidArgument("finite study measures errors by quadrature and supports d <= 3".into()));
    }
    let df = d as f64;
    let delta = (beta.iter().map(|b| b.ln()).sum::<f64>() / df).exp();
    let bmax = beta.iter().cloned().fold(0.0, f64::max);
    let mut budgets = cfg.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &n in &budgets {
        let mf = ((n as f64).powf(2.0 * df / (2.0 * df + 7.0)) - 1.0).floor();
        let m_param = mf.max(0.0) as u64;
        let eps_m = (-std::f64::consts::FRAC_1_SQRT_2 * delta * (m_param as f64).powf(1.0 / (2.0 * df))).exp();
        if !(eps_m < (-bmax).exp()) || m_param <= 2 {
            notes.push(format!("budget {n}: M = {m_param}, eps_M = {eps_m:.4} violates eps < exp(-max beta); skipped"));
            continue;
        }
        let lambda = lambda_eps_finite(beta, eps_m)?;
        let coeffs = compute_coeffs(f, &lambda, &cfg.coeff, exec)?;
        let nodes = (4 * (lambda.max_order() as usize + 1 + cfg.coeff.q_extra)).clamp(64, 1024);
        let trunc = truncation_error(f, &coeffs, &ErrorMethod::GaussHermite { nodes }, exec)?;
        let eps_emulation = eps_m.min(EPS_CAP);
        if eps_emulation < eps_m {
            notes.push(format!("budget {n}: emulation accuracy capped at {EPS_CAP:.4} (eps_M = {eps_m:.4})"));
        }
        let model = assemble_surrogate(&coeffs, eps_emulation, Backend::Relu, exec)?;
        let radius = surrogate_radius(&model, eps_emulation);
        let method = ErrorMethod::Panels { radius, panel_width: cfg.panel_width, order: cfg.panel_order };
        let err = surrogate_error(f, &model, &method, exec)?;
        let repu_error = if cfg.with_repu {
            let r = assemble_surrogate(&coeffs, 0.0, Backend::Repu, exec)?;
            Some(surrogate_error(f, &r, &ErrorMethod::GaussHermite { nodes }, exec)?.estimate)
        } else {
            None
        };
        let diag = lambda.diagnostics();
        rows.push(ReportRow {
            budget: n,
            cardinality: lambda.len(),
            size: model.assembled.size(),
            depth: model.assembled.depth(),
            error: err.estimate,
            error_bar: err.error_bar,
            truncation_error: trunc.estimate,
            truncation_bar: trunc.error_bar,
            emulation_budget: model.emulation_budget,
            eps: eps_m,
            eps_emulation,
            m: diag.m,
            d: diag.d,
            max_dim: lambda.support().last().copied().unwrap_or(0),
            coeffs_converged: coeffs.all_converged(),
            repu_error,
            m_param: Some(m_param),
        });
    }
    let mut fits = Vec::new();
    let pred = -std::f64::consts::FRAC_1_SQRT_2 * delta;
    let x: Vec<f64> = rows.iter().map(|r| (r.budget as f64).powf(1.0 / (2.0 * df + 7.0))).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    fits.extend(fit("log(error) ~ N^{1/(2d+7)}", &x, &y, pred));
    let x: Vec<f64> = rows.iter().map(|r| (r.cardinality as f64).powf(1.0 / (2.0 * df))).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.truncation_error.ln()).collect();
    fits.extend(fit("log(truncation_error) ~ |Lambda|^{1/(2d)}", &x, &y, pred));
    let sizes: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let shape: Vec<f64> = rows.iter().map(|r| r.budget as f64 * (1.0 + (r.budget as f64).ln())).collect();
    let size_shape = (!rows.is_empty()).then(|| shape_check(&sizes, &shape, SHAPE_SLACK));
    Ok(ConvergenceReport { study: "finite".into(), target: f.name.clone(), rows, fits, size_shape, notes })
}

/// Smallest radius `r >= 4` (steps of 1/2, at most `M + 1`) at which the
/// emulation tail bound is below `(1e-3 eps)^2`.
fn surrogate_radius(model: &super::SurrogateModel, eps: f64) -> f64 {
    let cap = match &model.emulation {
        super::Emulation::Relu(t) => t.meta.m_cut + 1.0,
        super::Emulation::Repu(_) => 8.0,
    };
    let target = (1e-3 * eps).powi(2);
    let mut r = 4.0;
    while r < cap && model.emulation_tail_sq(r) > target {
        r += 0.5;
    }
    r.min(cap)
}

/// Number of variables drawn in the Monte Carlo error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceDim {
    Fixed(usize),
    /// `scale * max(supp Lambda) + offset`.
    Affine { scale: usize, offset: usize },
}

impl ReferenceDim {
    pub fn resolve(&self, max_dim: usize) -> usize {
        match *self {
            ReferenceDim::Fixed(n) => n.max(max_dim),
            ReferenceDim::Affine { scale, offset } => scale * max_dim + offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfiniteStudyConfig {
    pub budgets: Vec<u64>,
    pub mc_samples: usize,
    pub seed: u64,
    pub reference_dim: ReferenceDim,
    pub coeff: CoeffOptions,
    /// Exponent `1 + delta` of the size shape `N^{1+delta}`.
    pub size_exponent: f64,
}

impl Default for InfiniteStudyConfig {
    fn default() -> Self {
        InfiniteStudyConfig {
            budgets: vec![8, 16, 32, 64, 128],
            mc_samples: 10_000,
            seed: crate::rng::DEFAULT_SEED,
            reference_dim: ReferenceDim::Affine { scale: 2, offset: 8 },
            coeff: CoeffOptions::default(),
            size_exponent: 1.5,
        }
    }
}

/// `b_j` replaced by `max(b_j, j^{-2/p})`.
pub fn regularized_weights(w: &WeightSequence) -> Result<WeightSequence> {
    let inner = w.clone();
    let p = w.p;
    WeightSequence::new(move |j| inner.b(j).max((j as f64).powf(-2.0 / p)), w.p, w.k, w.r)
}

/// `eps_N = (C_3 N)^{-2(1-p)/p}` with `C_3` the `l^{p/(2(1-p))}` norm of
/// `(c_nu^{-1})`; `Lambda = {c_nu^{-1} >= eps_N}`; ReLU surrogate with
/// emulation accuracy `eps_N`; errors by Monte Carlo.
pub fn infinite_dim_study(
    f: &TargetFunction,
    w: &WeightSequence,
    cfg: &InfiniteStudyConfig,
    exec: Exec,
) -> Result<ConvergenceReport> {
    let w_hat = regularized_weights(w)?;
    let norm = weight_norm(&w_hat, 1 << 16)?;
    let p = w.p;
    let mut budgets = cfg.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut rows = Vec::new();
    let mut notes = vec![format!("C_3 = {:.6} (q = {:.4}, {} factors, tail ln {:.3e})", norm.norm, norm.q, norm.truncation, norm.ln_tail)];
    for &n in &budgets {
        let eps_n = (norm.norm * n as f64).powf(-2.0 * (1.0 - p) / p);
        let lambda = lambda_eps_weighted(&w_hat, eps_n, None)?;
        let coeffs = compute_coeffs(f, &lambda, &cfg.coeff, exec)?;
        let eps_emulation = eps_n.min(EPS_CAP);
        if eps_emulation < eps_n {
            notes.push(format!("budget {n}: emulation accuracy capped at {EPS_CAP:.4} (eps_N = {eps_n:.4})"));
        }
        let model = assemble_surrogate(&coeffs, eps_emulation, Backend::Relu, exec)?;
        let max_dim = lambda.support().last().copied().unwrap_or(0) as usize;
        let dim = match f.dim {
            TargetDim::Finite(d) => d,
            TargetDim::Countable => cfg.reference_dim.resolve(max_dim),
        };
        let sq = |y: &[f64], out: &mut [f64]| {
            let u = f.eval(y);
            let g = model.eval(y);
            let pv = expansion_eval(&lambda, &coeffs.values, y);
            out[0] = (u - g) * (u - g);
            out[1] = (u - pv) * (u - pv);
        };
        let est = mc_sq_estimates(dim, 2, cfg.mc_samples, cfg.seed, &sq, exec);
        let diag = lambda.diagnostics();
        rows.push(ReportRow {
            budget: n,
            cardinality: lambda.len(),
            size: model.assembled.size(),
            depth: model.assembled.depth(),
            error: est[0].estimate,
            error_bar: est[0].error_bar,
            truncation_error: est[1].estimate,
            truncation_bar: est[1].error_bar,
            emulation_budget: model.emulation_budget,
            eps: eps_n,
            eps_emulation,
            m: diag.m,
            d: diag.d,
            max_dim: max_dim as u32,
            coeffs_converged: coeffs.all_converged(),
            repu_error: None,
            m_param: None,
        });
    }
    let pred = -(1.0 / p - 1.0);
    let x: Vec<f64> = rows.iter().map(|r| (r.budget as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let mut fits = Vec::new();
    fits.extend(fit("log(error) ~ log N", &x, &y, pred));
    let xl: Vec<f64> = rows.iter().map(|r| (r.cardinality as f64).ln()).collect();
    let yt: Vec<f64> = rows.iter().map(|r| r.truncation_error.ln()).collect();
    fits.extend(fit("log(truncation_error) ~ log |Lambda|", &xl, &yt, pred));
    let sizes: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let shape: Vec<f64> = rows.iter().map(|r| (r.budget as f64).powf(cfg.size_exponent)).collect();
    let size_shape = (!rows.is_empty()).then(|| shape_check(&sizes, &shape, SHAPE_SLACK));
    Ok(ConvergenceReport { study: "infinite".into(), target: f.name.clone(), rows, fits, size_shape, notes })
}
