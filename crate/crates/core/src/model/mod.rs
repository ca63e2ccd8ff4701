//! The streaming learner: per-layer centroid memories, novelty detection,
//! short-term to long-term consolidation and LRU eviction.

mod config;
mod distance;
mod hierarchy;
mod layer;
mod novelty;
mod pool;

pub use config::{
    mnist_layers, svhn_layers, Ablation, LayerConfig, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA,
    DEFAULT_THETA, DEFAULT_WARMUP, DEFAULT_WINDOW,
};
pub use distance::{manhattan, squared_euclidean, DistanceMetric};
pub use hierarchy::{footprint_formula, Hierarchy};
pub use layer::{blend, LayerMemory, LayerStats, LtmPolicy, PatchEvent, PatchOutcome};
pub use novelty::{nearest_rank, NoveltyWindow, RunningMean};
pub use pool::{Centroid, CentroidMeta, CentroidPool, Nearest, SearchTier, Tier};
