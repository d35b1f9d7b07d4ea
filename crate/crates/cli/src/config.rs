//! Study configuration files (TOML, or JSON when the extension is `.json`).

use anyhow::{bail, Context};
use dnngpc::gpc::{FiniteStudyConfig, InfiniteStudyConfig, TargetFunction};
use dnngpc::index_sets::WeightSequence;
use dnngpc::pde::{KLExpansion, Pde1dConfig};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::path::Path;

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("invalid JSON config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteTarget {
    /// `prod_j 1 / (1 + y_j^2)`, holomorphic on the strip of width 1.
    Runge,
    /// `exp(sum_j y_j / d)`.
    Exp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteFile {
    pub target: FiniteTarget,
    #[serde(default = "one")]
    pub dim: usize,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub study: FiniteStudyConfig,
}

fn one() -> usize {
    1
}

impl FiniteFile {
    pub fn target(&self) -> anyhow::Result<TargetFunction> {
        let d = self.dim;
        if d == 0 || self.beta.len() != d {
            bail!("need dim >= 1 and one beta per variable (dim = {d}, {} betas)", self.beta.len());
        }
        Ok(match self.target {
            FiniteTarget::Runge => {
                TargetFunction::new("runge", d, |y| y.iter().map(|v| 1.0 / (1.0 + v * v)).product())
            }
            FiniteTarget::Exp => TargetFunction::new("exp", d, move |y| (y.iter().sum::<f64>() / d as f64).exp()),
        }
        .with_strip(self.beta.clone()))
    }
}

/// `b_j = scale * j^{-decay}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    #[serde(default = "three")]
    pub decay: f64,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default = "half")]
    pub p: f64,
    #[serde(default = "ten")]
    pub k: f64,
    #[serde(default = "four")]
    pub r: f64,
}

impl Default for WeightsFile {
    fn default() -> Self {
        WeightsFile { decay: 3.0, scale: 1.0, p: 0.5, k: 10.0, r: 4.0 }
    }
}

fn three() -> f64 {
    3.0
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn ten() -> f64 {
    10.0
}
fn four() -> f64 {
    4.0
}

impl WeightsFile {
    pub fn sequence(&self) -> anyhow::Result<WeightSequence> {
        Ok(WeightSequence::algebraic(self.scale, self.decay, self.p, self.k, self.r)?)
    }
}

/// Separable toy map `prod_{j <= terms} 1 / (1 + (sigma b_j y_j)^2)`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfiniteFile {
    #[serde(default = "sixty_four")]
    pub terms: usize,
    #[serde(default = "unit")]
    pub sigma: f64,
    #[serde(default)]
    pub weights: WeightsFile,
    #[serde(default)]
    pub study: InfiniteStudyConfig,
}

fn sixty_four() -> usize {
    64
}

impl InfiniteFile {
    pub fn target(&self) -> TargetFunction {
        let (scale, decay, sigma) = (self.weights.scale, self.weights.decay, self.sigma);
        TargetFunction::separable("toy", self.terms, move |j, y| {
            let t = sigma * scale * (j as f64).powf(-decay) * y;
            1.0 / (1.0 + t * t)
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeFile {
    #[serde(default = "mesh")]
    pub mesh_cells: usize,
    /// `psi_j = j^{-kl_decay} sin(j pi x)`.
    #[serde(default = "three")]
    pub kl_decay: f64,
    #[serde(default = "j_max")]
    pub j_max: usize,
    #[serde(default = "half")]
    pub p: f64,
    #[serde(default = "ten")]
    pub k: f64,
    #[serde(default = "four")]
    pub r: f64,
    #[serde(default)]
    pub study: InfiniteStudyConfig,
}

fn mesh() -> usize {
    256
}
fn j_max() -> usize {
    256
}

impl PdeFile {
    pub fn problem(&self) -> anyhow::Result<(Pde1dConfig, KLExpansion, WeightSequence)> {
        let cfg = Pde1dConfig::new(self.mesh_cells)?;
        let kl = KLExpansion::sine(self.kl_decay, self.j_max)?;
        let w = WeightSequence::algebraic(1.0, self.kl_decay, self.p, self.k, self.r)?;
        Ok((cfg, kl, w))
    }
}
