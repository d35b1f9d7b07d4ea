//! `-(a u')' = f` on `(0, 1)`, `u(0) = u(1) = 0`, with the lognormal
//! coefficient `a(x, y) = exp(sum_j y_j psi_j(x))`, solved by P1 elements,
//! and the surrogate study for `y -> G(u(y))`.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gpc::{infinite_dim_study, ConvergenceReport, InfiniteStudyConfig, TargetFunction};
use crate::index_sets::WeightSequence;
use crate::rng::gaussian_sample;
use std::fmt;
use std::sync::Arc;

type Fun = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Two-point Gauss abscissae on `[0, 1]`.
const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

#[derive(Clone)]
pub struct Pde1dConfig {
    pub mesh_cells: usize,
    rhs: Fun,
    weight: Fun,
}

impl fmt::Debug for Pde1dConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pde1dConfig").field("mesh_cells", &self.mesh_cells).finish()
    }
}

impl Pde1dConfig {
    /// Uniform mesh, `f = 1`, observable `G(u) = int u`.
    pub fn new(mesh_cells: usize) -> Result<Self> {
        if mesh_cells < 4 {
            return Err(Error::InvalidArgument(format!("need at least 4 cells, got {mesh_cells}")));
        }
        Ok(Pde1dConfig { mesh_cells, rhs: Arc::new(|_| 1.0), weight: Arc::new(|_| 1.0) })
    }

    pub fn with_rhs(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.rhs = Arc::new(f);
        self
    }

    /// Observable `G(u) = int g u dx`.
    pub fn with_observable(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.weight = Arc::new(g);
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.mesh_cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.mesh_cells).map(|i| i as f64 * self.h()).collect()
    }
}

#[derive(Clone)]
pub struct KLExpansion {
    psi: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    /// `b_j = sup |psi_j|`, `j = 1..=j_max`.
    pub b: Vec<f64>,
    pub j_max: usize,
}

impl fmt::Debug for KLExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KLExpansion").field("j_max", &self.j_max).finish()
    }
}

impl KLExpansion {
    pub fn new(psi: impl Fn(usize, f64) -> f64 + Send + Sync + 'static, b: Vec<f64>) -> Result<Self> {
        if b.is_empty() || b.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("KL sup norms must be positive".into()));
        }
        Ok(KLExpansion { psi: Arc::new(psi), j_max: b.len(), b })
    }

    /// `psi_j(x) = j^{-s} sin(j pi x)`, `b_j = j^{-s}`.
    pub fn sine(s: f64, j_max: usize) -> Result<Self> {
        let b = (1..=j_max).map(|j| (j as f64).powf(-s)).collect();
        KLExpansion::new(move |j, x| (j as f64).powf(-s) * (j as f64 * std::f64::consts::PI * x).sin(), b)
    }

    pub fn psi(&self, j: usize, x: f64) -> f64 {
        (self.psi)(j, x)
    }

    /// `sum_{j <= j_max} b_j^p`.
    pub fn b_sum(&self, p: f64) -> f64 {
        self.b.iter().map(|b| b.powf(p)).sum()
    }
}

/// A mesh with `psi_j` tabulated at the quadrature points.
#[derive(Clone, Debug)]
pub struct PdeSolver {
    pub cfg: Pde1dConfig,
    pub kl: KLExpansion,
    qpts: Vec<f64>,
    /// `psi[(j-1) * qpts.len() + q]`.
    psi: Vec<f64>,
    load: Vec<f64>,
}

impl PdeSolver {
    pub fn new(cfg: &Pde1dConfig, kl: &KLExpansion) -> Self {
        let h = cfg.h();
        let qpts: Vec<f64> = (0..cfg.mesh_cells).flat_map(|c| GAUSS2.map(|t| (c as f64 + t) * h)).collect();
        let mut psi = Vec::with_capacity(kl.j_max * qpts.len());
        for j in 1..=kl.j_max {
            psi.extend(qpts.iter().map(|&x| kl.psi(j, x)));
        }
        // load vector F_i = int f phi_i, interior nodes 1..n-1
        let n = cfg.mesh_cells;
        let mut load = vec![0.0; n + 1];
        for c in 0..n {
            for (k, t) in GAUSS2.iter().enumerate() {
                let fx = 0.5 * h * (cfg.rhs)(qpts[2 * c + k]);
                load[c] += fx * (1.0 - t);
                load[c + 1] += fx * t;
            }
        }
        PdeSolver { cfg: cfg.clone(), kl: kl.clone(), qpts, psi, load }
    }

    /// `a` at the quadrature points for `y` (only `j <= min(len, j_max)` used).
    pub fn coefficient(&self, y: &[f64]) -> Vec<f64> {
        let nq = self.qpts.len();
        let mut la = vec![0.0; nq];
        for (j, &yj) in y.iter().take(self.kl.j_max).enumerate() {
            if yj != 0.0 {
                for (l, p) in la.iter_mut().zip(&self.psi[j * nq..(j + 1) * nq]) {
                    *l += yj * p;
                }
            }
        }
        la.iter().map(|v| v.exp()).collect()
    }

    /// Nodal values `u_0..u_n` (boundary values 0).
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        let a = self.coefficient(y);
        self.solve_with(&a)
    }

    pub fn solve_with(&self, a: &[f64]) -> Result<Vec<f64>> {
        let n = self.cfg.mesh_cells;
        let h = self.cfg.h();
        // cell stiffness k_c = (int_c a) / h^2 * h = mean(a) / h
        let kc: Vec<f64> = (0..n).map(|c| 0.5 * (a[2 * c] + a[2 * c + 1]) / h).collect();
        if kc.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::Numerical("coefficient is not positive and finite".into()));
        }
        // interior unknowns 1..n-1: diag kc[i-1] + kc[i], off-diagonal -kc[i]
        let m = n - 1;
        let mut c_prime = vec![0.0; m];
        let mut d_prime = vec![0.0; m];
        for i in 0..m {
            let diag = kc[i] + kc[i + 1];
            let lower = if i > 0 { -kc[i] } else { 0.0 };
            let upper = -kc[i + 1];
            let denom = diag - lower * if i > 0 { c_prime[i - 1] } else { 0.0 };
            if !(denom.abs() > 0.0) {
                return Err(Error::Numerical("singular stiffness matrix".into()));
            }
            c_prime[i] = upper / denom;
            d_prime[i] = (self.load[i + 1] - lower * if i > 0 { d_prime[i - 1] } else { 0.0 }) / denom;
        }
        let mut u = vec![0.0; n + 1];
        for i in (0..m).rev() {
            u[i + 1] = d_prime[i] - if i + 1 < m { c_prime[i] * u[i + 2] } else { 0.0 };
        }
        Ok(u)
    }

    /// `int a (u_h')^2` with the same quadrature as the stiffness matrix, and `F . u`.
    pub fn energy_and_load(&self, y: &[f64], u: &[f64]) -> (f64, f64) {
        let a = self.coefficient(y);
        let h = self.cfg.h();
        let e = (0..self.cfg.mesh_cells)
            .map(|c| {
                let du = (u[c + 1] - u[c]) / h;
                0.5 * h * (a[2 * c] + a[2 * c + 1]) * du * du
            })
            .sum();
        let l = self.load.iter().zip(u).map(|(f, v)| f * v).sum();
        (e, l)
    }

    pub fn observable(&self, u: &[f64]) -> f64 {
        observable(&self.cfg, u)
    }
}

pub fn solve_pde_sample(cfg: &Pde1dConfig, kl: &KLExpansion, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() > kl.j_max {
        return Err(Error::InvalidArgument(format!("{} parameters exceed J_max = {}", y.len(), kl.j_max)));
    }
    PdeSolver::new(cfg, kl).solve(y)
}

/// `G(u) = int g u dx` by the trapezoid rule on the mesh.
pub fn observable(cfg: &Pde1dConfig, u: &[f64]) -> f64 {
    let h = cfg.h();
    let n = u.len() - 1;
    let w = |i: usize| (cfg.weight)(i as f64 * h) * u[i];
    h * (0.5 * (w(0) + w(n)) + (1..n).map(w).sum::<f64>())
}

/// `y -> G(u(y))` as a countable target; variables beyond `J_max` are ignored.
pub fn pde_target(cfg: &Pde1dConfig, kl: &KLExpansion) -> TargetFunction {
    let solver = Arc::new(PdeSolver::new(cfg, kl));
    TargetFunction::countable("pde-observable", move |y| {
        let u = solver.solve(&y[..y.len().min(solver.kl.j_max)]).expect("positive coefficient");
        solver.observable(&u)
    })
}

/// Runs [`infinite_dim_study`] on `G(u(y))` with `b_j = sup |psi_j|`, then
/// reports the reference truncation effect: RMS of `G(u)` at `J_ref` versus
/// `2 J_ref` over 100 samples.
pub fn pde_surrogate_study(
    cfg: &Pde1dConfig,
    kl: &KLExpansion,
    w: &WeightSequence,
    study: &InfiniteStudyConfig,
    exec: Exec,
) -> Result<ConvergenceReport> {
    let target = pde_target(cfg, kl);
    let mut report = infinite_dim_study(&target, w, study, exec)?;
    if let Some(last) = report.rows.last() {
        let j_ref = study.reference_dim.resolve(last.max_dim as usize);
        let j2 = (2 * j_ref).min(kl.j_max);
        let diffs = exec.map(100, |i| {
            let mut y = vec![0.0; j2];
            gaussian_sample(study.seed ^ 0x7A11, i as u64, &mut y);
            target.eval(&y[..j_ref.min(j2)]) - target.eval(&y)
        });
        let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
        report.notes.push(format!("reference truncation J_ref = {j_ref} vs {j2}: RMS difference {rms:.3e} over 100 samples"));
        if j2 < 2 * j_ref {
            report.notes.push(format!("J_max = {} limits the sensitivity run", kl.j_max));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint_error(n: usize) -> f64 {
        let cfg = Pde1dConfig::new(n).unwrap();
        let kl = KLExpansion::sine(3.0, 4).unwrap();
        let u = solve_pde_sample(&cfg, &kl, &[]).unwrap();
        let h = cfg.h();
        (0..n)
            .map(|c| {
                let x = (c as f64 + 0.5) * h;
                (0.5 * (u[c] + u[c + 1]) - 0.5 * x * (1.0 - x)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_coefficient() {
        let cfg = Pde1dConfig::new(64).unwrap();
        let kl = KLExpansion::sine(3.0, 4).unwrap();
        let u = solve_pde_sample(&cfg, &kl, &[0.0; 4]).unwrap();
        for (i, x) in cfg.nodes().iter().enumerate() {
            assert!((u[i] - 0.5 * x * (1.0 - x)).abs() < 1e-12);
        }
        let r = midpoint_error(32) / midpoint_error(64);
        assert!((3.5..=4.5).contains(&r), "{r}");
        let g = observable(&cfg, &u);
        assert!((g - 1.0 / 12.0).abs() < 1e-3);
        assert_eq!(observable(&cfg, &vec![0.0; 65]), 0.0);
        // a = e^c scales u by e^{-c}
        let s = PdeSolver::new(&cfg, &kl);
        let uc = s.solve_with(&vec![2f64.exp(); 128]).unwrap();
        for (a, b) in uc.iter().zip(&u) {
            assert!((a - b * (-2f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn galerkin_identity() {
        let cfg = Pde1dConfig::new(128).unwrap();
        let kl = KLExpansion::sine(3.0, 16).unwrap();
        let s = PdeSolver::new(&cfg, &kl);
        let mut y = vec![0.0; 16];
        gaussian_sample(3, 0, &mut y);
        let u = s.solve(&y).unwrap();
        let (e, l) = s.energy_and_load(&y, &u);
        assert!((e - l).abs() <= 1e-10 * l.abs());
        assert!(solve_pde_sample(&cfg, &kl, &[0.0; 17]).is_err());
    }
}
