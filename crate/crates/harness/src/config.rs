//! Experiment configuration files.
//!
//! A config is a TOML document; unknown keys are rejected and relative paths
//! are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stam::dataset::{ClassId, StreamMode, StreamSpec};
use stam::model::{
    Ablation, DistanceMetric, LayerConfig, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA,
    DEFAULT_THETA, DEFAULT_WARMUP, DEFAULT_WINDOW,
};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub mode: StreamMode,
    /// Class ids introduced in each phase.
    pub phases: Vec<Vec<ClassId>>,
    /// `N_p`.
    pub examples_per_phase: usize,
}

fn default_rho() -> Vec<usize> {
    vec![8, 13, 20]
}
fn default_delta() -> usize {
    400
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_theta() -> u64 {
    DEFAULT_THETA
}
fn default_one() -> usize {
    1
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_warmup() -> usize {
    DEFAULT_WARMUP
}

/// Hierarchy hyperparameters shared by every layer except the patch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Patch side of each layer, strictly increasing.
    #[serde(default = "default_rho")]
    pub rho: Vec<usize>,
    /// STM capacity.
    #[serde(default = "default_delta")]
    pub delta: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_theta")]
    pub theta: u64,
    #[serde(default = "default_one")]
    pub stride: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub metric: DistanceMetric,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            delta: default_delta(),
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            theta: DEFAULT_THETA,
            stride: 1,
            window: DEFAULT_WINDOW,
            warmup: DEFAULT_WARMUP,
            metric: DistanceMetric::Euclidean,
        }
    }
}

impl ModelConfig {
    pub fn layers(&self) -> Vec<LayerConfig> {
        self.rho
            .iter()
            .map(|&rho| LayerConfig {
                rho,
                stm_capacity: self.delta,
                alpha: self.alpha,
                theta: self.theta,
                beta: self.beta,
                stride: self.stride,
                window: self.window,
                warmup: self.warmup,
                metric: self.metric,
            })
            .collect()
    }
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_labels() -> usize {
    10
}
fn default_test() -> usize {
    100
}
fn default_eval_repeats() -> usize {
    5
}
fn default_stream_repeats() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_cluster_factor() -> usize {
    2
}
fn default_trace_every() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_labels")]
    pub labels_per_class: usize,
    #[serde(default = "default_test")]
    pub test_per_class: usize,
    /// Labeled/test draws per phase boundary.
    #[serde(default = "default_eval_repeats")]
    pub eval_repeats: usize,
    /// Independent unlabeled streams.
    #[serde(default = "default_stream_repeats")]
    pub stream_repeats: usize,
    /// Run the k-means clustering task.
    #[serde(default = "default_true")]
    pub clustering: bool,
    /// Clusters per class seen (2 by default, 1 for the alternative protocol).
    #[serde(default = "default_cluster_factor")]
    pub cluster_factor: usize,
    /// Fill the `seconds` column; off by default so reports are reproducible.
    #[serde(default)]
    pub record_time: bool,
    /// Stride, in images, of the LTM-count trace written to `ltm_trace.csv`.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            labels_per_class: default_labels(),
            test_per_class: default_test(),
            eval_repeats: default_eval_repeats(),
            stream_repeats: default_stream_repeats(),
            clustering: true,
            cluster_factor: default_cluster_factor(),
            record_time: false,
            trace_every: default_trace_every(),
        }
    }
}

fn default_cap() -> usize {
    stam::baselines::MNIST_PCA_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Upper bound on PCA components.
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Neighbours of the KNN classifier.
    #[serde(default = "default_one")]
    pub k: usize,
    /// Optional fixed component count per phase; replaces the variance rule.
    #[serde(default)]
    pub components: Vec<usize>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            cap: default_cap(),
            k: 1,
            components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    pub values: Vec<f64>,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub stream: StreamConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Write a hierarchy snapshot per stream (and the last PCA model) to `out_dir/snapshots`.
    #[serde(default)]
    pub save_snapshots: bool,
}

impl ExperimentConfig {
    /// Parse a config document; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out_dir);
        fix(&mut cfg.data.train_images);
        fix(&mut cfg.data.train_labels);
        fix(&mut cfg.data.test_images);
        fix(&mut cfg.data.test_labels);
        Ok(cfg)
    }

    /// Read, resolve and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_toml(&text, base)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn layer_configs(&self) -> Vec<LayerConfig> {
        self.model.layers()
    }

    /// The stream specification of stream repeat `stream_id`.
    pub fn stream_spec(&self, stream_seed: u64) -> StreamSpec {
        StreamSpec {
            mode: self.stream.mode,
            phases: self.stream.phases.clone(),
            examples_per_phase: self.stream.examples_per_phase,
            seed: stream_seed,
        }
    }

    /// Check parameter ranges (not the data files).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.stream_spec(0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.model.rho.is_empty() {
            return bad("model.rho lists no layers".into());
        }
        for c in self.layer_configs() {
            c.validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if !self.model.rho.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!(
                "model.rho must be strictly increasing, got {:?}",
                self.model.rho
            ));
        }
        self.ablation
            .active_mask(self.model.rho.len())
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let e = &self.eval;
        if !(e.gamma >= 0.0 && e.gamma < 1.0) {
            return bad(format!("eval.gamma must lie in [0, 1), got {}", e.gamma));
        }
        if e.labels_per_class == 0 || e.test_per_class == 0 {
            return bad("eval.labels_per_class and eval.test_per_class must be positive".into());
        }
        if e.eval_repeats == 0 || e.stream_repeats == 0 {
            return bad("eval.eval_repeats and eval.stream_repeats must be positive".into());
        }
        if e.cluster_factor == 0 || e.trace_every == 0 {
            return bad("eval.cluster_factor and eval.trace_every must be positive".into());
        }
        if self.baseline.cap == 0 || self.baseline.k == 0 {
            return bad("baseline.cap and baseline.k must be positive".into());
        }
        if !self.baseline.components.is_empty()
            && self.baseline.components.len() != self.stream.phases.len()
        {
            return bad(format!(
                "baseline.components has {} entries for {} phases",
                self.baseline.components.len(),
                self.stream.phases.len()
            ));
        }
        if let Some(s) = &self.sweep {
            crate::SweepAxis::parse(&s.axis)?;
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        let d = &self.data;
        for p in [
            &d.train_images,
            &d.train_labels,
            &d.test_images,
            &d.test_labels,
        ] {
            if !p.is_file() {
                return Err(HarnessError::Config(format!(
                    "data file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// Keep only the first `n` phases.
    pub fn truncate_phases(&mut self, n: usize) -> Result<()> {
        if n == 0 || n > self.stream.phases.len() {
            return Err(HarnessError::Config(format!(
                "--phases {n} is not in 1..={}",
                self.stream.phases.len()
            )));
        }
        self.stream.phases.truncate(n);
        if !self.baseline.components.is_empty() {
            self.baseline.components.truncate(n);
        }
        Ok(())
    }
}
