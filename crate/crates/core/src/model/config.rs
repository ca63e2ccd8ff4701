use serde::{Deserialize, Serialize};

use super::distance::DistanceMetric;
use crate::error::{Error, Result};

/// Default learning rate for short-term centroids.
pub const DEFAULT_ALPHA: f64 = 0.1;
/// Default novelty percentile.
pub const DEFAULT_BETA: f64 = 0.95;
/// Default number of selections before consolidation.
pub const DEFAULT_THETA: u64 = 30;
/// Default class-informativeness margin.
pub const DEFAULT_GAMMA: f64 = 0.15;
/// Distances kept for the novelty percentile.
pub const DEFAULT_WINDOW: usize = 2000;
/// Distances required before novelty detection may fire.
pub const DEFAULT_WARMUP: usize = 100;

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_theta() -> u64 {
    DEFAULT_THETA
}
fn default_stride() -> usize {
    1
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_warmup() -> usize {
    DEFAULT_WARMUP
}

/// Hyperparameters of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    /// Patch side `rho_l`.
    pub rho: usize,
    /// STM capacity `Delta`.
    pub stm_capacity: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Selections needed to consolidate an STM centroid.
    #[serde(default = "default_theta")]
    pub theta: u64,
    /// Novelty percentile.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub metric: DistanceMetric,
}

impl LayerConfig {
    /// A layer with the default hyperparameters.
    pub fn new(rho: usize, stm_capacity: usize) -> Self {
        Self {
            rho,
            stm_capacity,
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            beta: DEFAULT_BETA,
            stride: 1,
            window: DEFAULT_WINDOW,
            warmup: DEFAULT_WARMUP,
            metric: DistanceMetric::Euclidean,
        }
    }

    pub fn dim(&self) -> usize {
        self.rho * self.rho
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if self.stm_capacity == 0 {
            return bad("stm_capacity must be at least 1".into());
        }
        if self.theta == 0 {
            return bad("theta must be at least 1".into());
        }
        if self.rho == 0 || self.stride == 0 {
            return bad("rho and stride must be positive".into());
        }
        if self.window == 0 || self.warmup > self.window {
            return bad(format!(
                "need 0 < warmup <= window, got warmup {} and window {}",
                self.warmup, self.window
            ));
        }
        Ok(())
    }
}

/// The three-layer MNIST / EMNIST architecture (`rho` = 8, 13, 20).
pub fn mnist_layers(stm_capacity: usize) -> Vec<LayerConfig> {
    [8, 13, 20]
        .into_iter()
        .map(|rho| LayerConfig::new(rho, stm_capacity))
        .collect()
}

/// The three-layer SVHN architecture (`rho` = 10, 14, 18).
pub fn svhn_layers(stm_capacity: usize) -> Vec<LayerConfig> {
    [10, 14, 18]
        .into_iter()
        .map(|rho| LayerConfig::new(rho, stm_capacity))
        .collect()
}

/// Switches for the ablation studies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ablation {
    /// No consolidation; classification falls back to STM centroids.
    #[serde(default)]
    pub ltm_disabled: bool,
    /// LTM centroids keep learning with the STM rate.
    #[serde(default)]
    pub ltm_dynamic: bool,
    /// 1-based indices of layers removed from the hierarchy.
    #[serde(default)]
    pub drop_layers: Vec<usize>,
}

impl Ablation {
    pub fn active_mask(&self, layers: usize) -> Result<Vec<bool>> {
        let mut mask = vec![true; layers];
        for &l in &self.drop_layers {
            if l == 0 || l > layers {
                return Err(Error::Config(format!(
                    "cannot drop layer {l} of a {layers}-layer hierarchy"
                )));
            }
            mask[l - 1] = false;
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Config("every layer was dropped".into()));
        }
        Ok(mask)
    }
}
