//! Running experiments: phased streams, evaluations at phase ends, the PCA
//! reference, ablations and sweeps.
//!
//! Seeds are split from the master seed by component and cell:
//!
//! | draw                     | path                               |
//! |--------------------------|------------------------------------|
//! | stream `s`               | `[STREAM, s]`                      |
//! | STM initialization       | `[INIT, s]`                        |
//! | labeled set              | `[LABELED, s, phase, eval]`        |
//! | test set                 | `[TEST, s, phase, eval]`           |
//! | k-means over embeddings  | `[KMEANS, s, phase, eval]`         |
//! | k-means over PCA output  | `[BASELINE_KMEANS, s, phase, eval]`|
//!
//! Sweep values share the master seed, so a sweep changes exactly one factor.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use stam::baselines::{
    knn_classify, pca_fit, pca_transform, PcaModel, PcaOptions, DEFAULT_VARIANCE_TARGET,
};
use stam::dataset::{
    build_stream, load_idx_pair, sample_labeled_set, sample_test_set, ClassId, Image, LabeledSet,
};
use stam::model::{Ablation, Hierarchy};
use stam::rng::{component, derive_seed};
use stam::tasks::{
    associations_from_encodings, classify_encoding, cluster_accuracy, embedding_from_encoding,
    encode_image, kmeans, EvalContext, ImageEncoding, KMeansOptions,
};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{BaselineMetrics, LtmTrace, PhaseMetrics};

/// Training and test splits.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Image>,
    pub test: Vec<Image>,
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let d = &cfg.data;
        let train = load_idx_pair(&d.train_images, &d.train_labels)
            .map_err(|e| HarnessError::from_core(d.train_images.display(), e))?;
        let test = load_idx_pair(&d.test_images, &d.test_labels)
            .map_err(|e| HarnessError::from_core(d.test_images.display(), e))?;
        if train.is_empty() || test.is_empty() {
            return Err(HarnessError::Data("empty training or test split".into()));
        }
        Ok(Self { train, test })
    }
}

/// Final state of one stream, kept when snapshots are requested.
#[derive(Debug, Clone)]
pub struct StreamSnapshot {
    pub stream_id: usize,
    pub hierarchy: Hierarchy,
    pub pca: Option<PcaModel>,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    /// Ordered by stream, then phase, then evaluation repeat.
    pub metrics: Vec<PhaseMetrics>,
    pub baseline: Vec<BaselineMetrics>,
    pub traces: Vec<LtmTrace>,
    pub snapshots: Vec<StreamSnapshot>,
}

struct StreamOutcome {
    metrics: Vec<PhaseMetrics>,
    baseline: Vec<BaselineMetrics>,
    trace: LtmTrace,
    snapshot: Option<StreamSnapshot>,
}

fn core(ctx: impl std::fmt::Display) -> impl FnOnce(stam::Error) -> HarnessError {
    move |e| HarnessError::from_core(ctx, e)
}

/// Run the configured experiment, loading the data first.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = Dataset::load(cfg)?;
    run_experiment_with(cfg, &data)
}

/// Run the configured experiment on already loaded data.
///
/// Stream repeats run in parallel; the result does not depend on scheduling.
pub fn run_experiment_with(cfg: &ExperimentConfig, data: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outcomes = (0..cfg.eval.stream_repeats)
        .into_par_iter()
        .map(|s| run_stream(cfg, data, s))
        .collect::<Result<Vec<_>>>()?;
    let mut result = ExperimentResult::default();
    for o in outcomes {
        result.metrics.extend(o.metrics);
        result.baseline.extend(o.baseline);
        result.traces.push(o.trace);
        result.snapshots.extend(o.snapshot);
    }
    Ok(result)
}

fn run_stream(cfg: &ExperimentConfig, data: &Dataset, s: usize) -> Result<StreamOutcome> {
    let sid = s as u64;
    let spec = cfg.stream_spec(derive_seed(cfg.seed, &[component::STREAM, sid]));
    let stream = build_stream(&data.train, &spec).map_err(core(format!("stream {s}")))?;
    let mut h =
        Hierarchy::new(cfg.layer_configs(), cfg.ablation.clone()).map_err(core("hierarchy"))?;
    let first = &data.train[stream.order[0]];
    let n_init = h
        .images_needed_for_init(first.height(), first.width())
        .map_err(core("initialization"))?;
    let init: Vec<Image> = stream.images(&data.train).take(n_init).cloned().collect();
    h.init_from_images(&init, derive_seed(cfg.seed, &[component::INIT, sid]))
        .map_err(core(format!("stream {s} initialization")))?;

    let active: Vec<usize> = h.active_layers().collect();
    let mut trace = LtmTrace {
        stream_id: s,
        layers: active.iter().map(|l| l + 1).collect(),
        counts: Vec::with_capacity(stream.len()),
        phase_ends: Vec::new(),
    };
    let mut metrics = Vec::new();
    let mut baseline = Vec::new();
    let mut pca = None;
    for p in 0..spec.phases.len() {
        let t0 = Instant::now();
        for img in stream.phase_images(&data.train, p) {
            h.process_image(img).map_err(core(format!("stream {s}")))?;
            trace
                .counts
                .push(active.iter().map(|&l| h.layer(l).ltm().len()).collect());
        }
        trace.phase_ends.push(trace.counts.len());
        let classes = spec.classes_seen(p);
        let draws = (0..cfg.eval.eval_repeats)
            .map(|e| draw_sets(cfg, data, &classes, s, p, e))
            .collect::<Result<Vec<_>>>()?;
        let mut rows = evaluate_phase(cfg, data, &h, s, p, &classes, &draws)?;
        let seconds = t0.elapsed().as_secs_f64();
        if cfg.eval.record_time {
            for r in &mut rows {
                r.seconds = Some(seconds);
            }
        }
        info!(
            "stream {s} phase {}: accuracy {:.3}, LTM {:?}",
            p + 1,
            rows.iter().map(|r| r.acc_mean).sum::<f64>() / rows.len() as f64,
            rows[0].ltm
        );
        metrics.extend(rows);
        if cfg.baseline.enabled {
            let end = stream.phases[p].end;
            let seen: Vec<&[f64]> = stream.order[..end]
                .iter()
                .map(|&i| data.train[i].pixels())
                .collect();
            let (model, rows) = evaluate_baseline(cfg, data, &seen, s, p, &classes, &draws)?;
            baseline.extend(rows);
            pca = Some(model);
        }
    }
    let snapshot = cfg.save_snapshots.then(|| StreamSnapshot {
        stream_id: s,
        hierarchy: h,
        pca,
    });
    Ok(StreamOutcome {
        metrics,
        baseline,
        trace,
        snapshot,
    })
}

fn draw_sets(
    cfg: &ExperimentConfig,
    data: &Dataset,
    classes: &[ClassId],
    s: usize,
    p: usize,
    e: usize,
) -> Result<(LabeledSet, LabeledSet)> {
    let cell = [s as u64, p as u64, e as u64];
    let path = |c: u64| [c, cell[0], cell[1], cell[2]];
    let labeled = sample_labeled_set(
        &data.train,
        classes,
        cfg.eval.labels_per_class,
        derive_seed(cfg.seed, &path(component::LABELED)),
    )
    .map_err(core("labeled set"))?;
    let test = sample_test_set(
        &data.test,
        classes,
        cfg.eval.test_per_class,
        derive_seed(cfg.seed, &path(component::TEST)),
    )
    .map_err(core("test set"))?;
    Ok((labeled, test))
}

/// Encodings of one split under one frozen hierarchy, computed on demand.
struct EncodingCache<'a> {
    h: &'a Hierarchy,
    images: &'a [Image],
    with_embedding: bool,
    map: HashMap<usize, ImageEncoding>,
}

impl<'a> EncodingCache<'a> {
    fn new(h: &'a Hierarchy, images: &'a [Image], with_embedding: bool) -> Self {
        Self {
            h,
            images,
            with_embedding,
            map: HashMap::new(),
        }
    }

    fn fill(&mut self, set: &LabeledSet) -> Result<()> {
        let mut missing: Vec<usize> = set
            .examples
            .iter()
            .map(|e| e.index)
            .filter(|i| !self.map.contains_key(i))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        let encoded = missing
            .par_iter()
            .map(|&i| encode_image(self.h, &self.images[i], self.with_embedding))
            .collect::<stam::Result<Vec<_>>>()
            .map_err(core("encoding"))?;
        self.map.extend(missing.into_iter().zip(encoded));
        Ok(())
    }

    fn get(&self, i: usize) -> &ImageEncoding {
        &self.map[&i]
    }
}

fn per_class_accuracy(classes: &[ClassId], truth: &[ClassId], correct: &[bool]) -> Vec<f64> {
    classes
        .iter()
        .map(|&c| {
            let (n, k) = truth
                .iter()
                .zip(correct)
                .filter(|(&t, _)| t == c)
                .fold((0usize, 0usize), |(n, k), (_, &ok)| {
                    (n + 1, k + ok as usize)
                });
            if n == 0 {
                0.0
            } else {
                k as f64 / n as f64
            }
        })
        .collect()
}

fn cluster_count(cfg: &ExperimentConfig, classes: usize, points: usize) -> usize {
    (cfg.eval.cluster_factor * classes).min(points)
}

fn evaluate_phase(
    cfg: &ExperimentConfig,
    data: &Dataset,
    h: &Hierarchy,
    s: usize,
    p: usize,
    classes: &[ClassId],
    draws: &[(LabeledSet, LabeledSet)],
) -> Result<Vec<PhaseMetrics>> {
    let ctx = EvalContext::of(h);
    let has_centroids = ctx.centroids() > 0;
    let clustering = cfg.eval.clustering && has_centroids;
    let mut train_cache = EncodingCache::new(h, &data.train, false);
    let mut test_cache = EncodingCache::new(h, &data.test, clustering);
    let ltm: Vec<(usize, usize)> = ctx
        .layers
        .iter()
        .map(|l| (l.layer + 1, h.layer(l.layer).ltm().len()))
        .collect();
    let footprint = h.memory_footprint();

    let mut rows = Vec::with_capacity(draws.len());
    for (e, (labeled, test)) in draws.iter().enumerate() {
        test_cache.fill(test)?;
        let truth: Vec<ClassId> = test.examples.iter().map(|x| x.class).collect();
        let (correct, abstained, cin) = if has_centroids {
            train_cache.fill(labeled)?;
            let assoc = associations_from_encodings(
                &ctx,
                labeled
                    .examples
                    .iter()
                    .map(|x| (train_cache.get(x.index), x.class)),
                cfg.eval.gamma,
            )
            .map_err(core(format!("stream {s} phase {}", p + 1)))?;
            let mut correct = Vec::with_capacity(truth.len());
            let mut abstained = 0usize;
            for x in &test.examples {
                let c = classify_encoding(&assoc, test_cache.get(x.index))
                    .map_err(core("classification"))?;
                abstained += c.abstained as usize;
                correct.push(!c.abstained && c.class == x.class);
            }
            (correct, abstained, assoc.cin_fractions())
        } else {
            // nothing learned: every test image abstains
            (
                vec![false; truth.len()],
                truth.len(),
                vec![0.0; ctx.layers.len()],
            )
        };
        let cluster_acc = if clustering {
            let points: Vec<Vec<f64>> = test
                .examples
                .iter()
                .map(|x| embedding_from_encoding(&ctx, test_cache.get(x.index)).map(|v| v.values))
                .collect::<stam::Result<_>>()
                .map_err(core("embedding"))?;
            let k = cluster_count(cfg, classes.len(), points.len());
            let seed = derive_seed(cfg.seed, &[component::KMEANS, s as u64, p as u64, e as u64]);
            let km = kmeans(&points, k, seed, KMeansOptions::default()).map_err(core("k-means"))?;
            Some(cluster_accuracy(&km.assignments, &truth).map_err(core("clustering"))?)
        } else {
            None
        };
        let n = truth.len() as f64;
        rows.push(PhaseMetrics {
            stream_id: s,
            eval_id: e,
            phase: p + 1,
            classes_seen: classes.to_vec(),
            acc_mean: correct.iter().filter(|&&c| c).count() as f64 / n,
            acc_per_class: per_class_accuracy(classes, &truth, &correct),
            cluster_acc,
            ltm: ltm.clone(),
            cin,
            abstain_rate: abstained as f64 / n,
            footprint_px: footprint,
            seconds: None,
        });
    }
    Ok(rows)
}

fn evaluate_baseline(
    cfg: &ExperimentConfig,
    data: &Dataset,
    seen: &[&[f64]],
    s: usize,
    p: usize,
    classes: &[ClassId],
    draws: &[(LabeledSet, LabeledSet)],
) -> Result<(PcaModel, Vec<BaselineMetrics>)> {
    let opts = PcaOptions {
        cap: cfg.baseline.cap,
        variance_target: DEFAULT_VARIANCE_TARGET,
        components: cfg.baseline.components.get(p).copied(),
    };
    let model = pca_fit(seen, &opts).map_err(core(format!("PCA, stream {s} phase {}", p + 1)))?;
    let explained: f64 = model.explained().iter().sum();
    let project = |img: &Image| pca_transform(&model, img.pixels()).map_err(core("PCA transform"));
    let mut rows = Vec::with_capacity(draws.len());
    for (e, (labeled, test)) in draws.iter().enumerate() {
        let train: Vec<Vec<f64>> = labeled
            .examples
            .iter()
            .map(|x| project(&data.train[x.index]))
            .collect::<Result<_>>()?;
        let labels: Vec<ClassId> = labeled.examples.iter().map(|x| x.class).collect();
        let queries: Vec<Vec<f64>> = test
            .examples
            .iter()
            .map(|x| project(&data.test[x.index]))
            .collect::<Result<_>>()?;
        let k = cfg.baseline.k.min(train.len());
        let predicted = queries
            .par_iter()
            .map(|q| knn_classify(&train, &labels, q, k))
            .collect::<stam::Result<Vec<_>>>()
            .map_err(core("KNN"))?;
        let truth: Vec<ClassId> = test.examples.iter().map(|x| x.class).collect();
        let correct = predicted.iter().zip(&truth).filter(|(a, b)| a == b).count();
        let cluster_acc = if cfg.eval.clustering {
            let kc = cluster_count(cfg, classes.len(), queries.len());
            let seed = derive_seed(
                cfg.seed,
                &[component::BASELINE_KMEANS, s as u64, p as u64, e as u64],
            );
            let km =
                kmeans(&queries, kc, seed, KMeansOptions::default()).map_err(core("k-means"))?;
            Some(cluster_accuracy(&km.assignments, &truth).map_err(core("clustering"))?)
        } else {
            None
        };
        rows.push(BaselineMetrics {
            stream_id: s,
            eval_id: e,
            phase: p + 1,
            classes_seen: classes.to_vec(),
            components: model.n_components(),
            explained,
            acc_mean: correct as f64 / truth.len() as f64,
            cluster_acc,
        });
    }
    Ok((model, rows))
}

/// The ablations of the learner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AblationKind {
    /// No consolidation; evaluation uses STM centroids.
    NoLtm,
    /// LTM centroids keep learning.
    DynamicLtm,
    /// Remove these 1-based layers.
    DropLayers(Vec<usize>),
}

impl AblationKind {
    /// `no-ltm`, `dynamic-ltm` or `drop:L[,L...]`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "no-ltm" | "no_ltm" => Ok(Self::NoLtm),
            "dynamic-ltm" | "dynamic_ltm" => Ok(Self::DynamicLtm),
            _ => {
                let list = s
                    .strip_prefix("drop:")
                    .or_else(|| s.strip_prefix("drop="))
                    .ok_or_else(|| HarnessError::Config(format!("unknown ablation {s:?}")))?;
                let layers = list
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| HarnessError::Config(format!("bad layer {t:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                Ok(Self::DropLayers(layers))
            }
        }
    }

    pub fn flags(&self) -> Ablation {
        match self {
            Self::NoLtm => Ablation {
                ltm_disabled: true,
                ..Ablation::default()
            },
            Self::DynamicLtm => Ablation {
                ltm_dynamic: true,
                ..Ablation::default()
            },
            Self::DropLayers(l) => Ablation {
                drop_layers: l.clone(),
                ..Ablation::default()
            },
        }
    }
}

/// The experiment with one ablation applied (replacing any configured flags).
pub fn run_ablation(
    cfg: &ExperimentConfig,
    which: &AblationKind,
    data: &Dataset,
) -> Result<ExperimentResult> {
    let mut cfg = cfg.clone();
    cfg.ablation = which.flags();
    cfg.validate()?;
    run_experiment_with(&cfg, data)
}

/// A parameter a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Gamma,
    Theta,
    Beta,
    Delta,
    LabelsPerClass,
    StreamLength,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "alpha" => Self::Alpha,
            "gamma" => Self::Gamma,
            "theta" => Self::Theta,
            "beta" => Self::Beta,
            "delta" => Self::Delta,
            "labels_per_class" => Self::LabelsPerClass,
            "stream_length" => Self::StreamLength,
            _ => {
                return Err(HarnessError::Config(format!(
                    "unknown sweep axis {s:?} (expected alpha, gamma, theta, beta, delta, \
                     labels_per_class or stream_length)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Gamma => "gamma",
            Self::Theta => "theta",
            Self::Beta => "beta",
            Self::Delta => "delta",
            Self::LabelsPerClass => "labels_per_class",
            Self::StreamLength => "stream_length",
        }
    }

    /// A copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Config(format!(
                    "{} needs a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        let mut c = cfg.clone();
        match self {
            Self::Alpha => c.model.alpha = value,
            Self::Gamma => c.eval.gamma = value,
            Self::Beta => c.model.beta = value,
            Self::Theta => c.model.theta = count()? as u64,
            Self::Delta => c.model.delta = count()?,
            Self::LabelsPerClass => c.eval.labels_per_class = count()?,
            Self::StreamLength => c.stream.examples_per_phase = count()?,
        }
        c.validate()?;
        Ok(c)
    }
}

/// One experiment of a sweep.
#[derive(Debug, Clone)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    pub value: f64,
    pub result: ExperimentResult,
}

/// One independent experiment per value, all with the same master seed.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    data: &Dataset,
) -> Result<Vec<SweepBlock>> {
    if values.is_empty() {
        warn!("sweep over {} has no values; nothing to run", axis.name());
        return Ok(Vec::new());
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values)
        .map(|(c, &value)| {
            info!("sweep {} = {value}", axis.name());
            Ok(SweepBlock {
                axis,
                value,
                result: run_experiment_with(c, data)?,
            })
        })
        .collect()
}

/// Load a config file and apply the common command-line overrides.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    phases: Option<usize>,
    np: Option<usize>,
    labels: Option<usize>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o.to_path_buf();
    }
    if let Some(n) = phases {
        cfg.truncate_phases(n)?;
    }
    if let Some(n) = np {
        cfg.stream.examples_per_phase = n;
    }
    if let Some(n) = labels {
        cfg.eval.labels_per_class = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DataConfig, StreamConfig};
    use stam::dataset::StreamMode;

    pub(crate) fn toy_config() -> ExperimentConfig {
        let text = r#"
seed = 11
out_dir = "out"
[data]
train_images = "x"
train_labels = "x"
test_images = "x"
test_labels = "x"
[stream]
mode = "incremental"
phases = [[0, 1], [2, 3]]
examples_per_phase = 60
[model]
rho = [3, 5]
delta = 20
theta = 4
window = 200
warmup = 20
[eval]
labels_per_class = 3
test_per_class = 4
eval_repeats = 2
stream_repeats = 2
[baseline]
enabled = true
cap = 10
"#;
        ExperimentConfig::from_toml(text, Path::new(".")).unwrap()
    }

    /// Four classes of 8x8 images: horizontal stripes, vertical stripes,
    /// a checkerboard and a centred blob, with noise.
    pub(crate) fn toy_data(per_class: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = stam::rng::seeded(seed);
        let mut make = |n: usize| -> Vec<Image> {
            (0..4u32)
                .flat_map(|c| (0..n).map(move |i| (c, i)))
                .map(|(c, _)| {
                    let pix = (0..64)
                        .map(|k| {
                            let (r, col) = (k / 8, k % 8);
                            let base = match c {
                                0 => (r % 2) as f64,
                                1 => (col % 2) as f64,
                                2 => ((r + col) % 2) as f64,
                                _ => {
                                    let d = (r as f64 - 3.5).abs() + (col as f64 - 3.5).abs();
                                    (d < 3.0) as u8 as f64
                                }
                            };
                            (base * 0.8 + 0.2 * rng.random::<f64>()).clamp(0.0, 1.0)
                        })
                        .collect();
                    Image::new(8, 8, pix).unwrap().with_label(c)
                })
                .collect()
        };
        let train = make(per_class);
        let test = make(per_class / 2);
        Dataset { train, test }
    }

    #[test]
    fn protocol_shape_and_determinism() {
        let cfg = toy_config();
        let data = toy_data(30, 1);
        let a = run_experiment_with(&cfg, &data).unwrap();
        // 2 streams x 2 phases x 2 evaluation repeats
        assert_eq!(a.metrics.len(), 8);
        assert_eq!(a.baseline.len(), 8);
        assert_eq!(a.traces.len(), 2);
        for m in &a.metrics {
            assert_eq!(m.classes_seen, cfg.stream_spec(0).classes_seen(m.phase - 1));
            assert!((0.0..=1.0).contains(&m.acc_mean));
            assert_eq!(m.acc_per_class.len(), m.classes_seen.len());
            assert_eq!(m.ltm.len(), 2);
            assert!(m.seconds.is_none());
        }
        for t in &a.traces {
            assert_eq!(t.counts.len(), 120);
            assert_eq!(t.phase_ends, vec![60, 120]);
            for l in 0..2 {
                assert!(t.counts.windows(2).all(|w| w[0][l] <= w[1][l]));
            }
        }
        let b = run_experiment_with(&cfg, &data).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.baseline, b.baseline);
    }

    #[test]
    fn learns_the_toy_task() {
        let mut cfg = toy_config();
        cfg.eval.stream_repeats = 1;
        cfg.stream.examples_per_phase = 200;
        let r = run_experiment_with(&cfg, &toy_data(60, 2)).unwrap();
        let last = r.metrics.last().unwrap();
        assert!(last.acc_mean > 0.5, "accuracy {}", last.acc_mean);
        assert!(last.ltm.iter().all(|&(_, n)| n > 0));
    }

    #[test]
    fn no_consolidation_means_abstention() {
        let mut cfg = toy_config();
        cfg.model.theta = u64::MAX;
        cfg.eval.stream_repeats = 1;
        let r = run_experiment_with(&cfg, &toy_data(20, 3)).unwrap();
        for m in &r.metrics {
            assert_eq!(m.acc_mean, 0.0);
            assert_eq!(m.abstain_rate, 1.0);
            assert!(m.ltm.iter().all(|&(_, n)| n == 0));
            assert_eq!(m.cluster_acc, None);
        }
    }

    #[test]
    fn ablation_flags() {
        let cfg = toy_config();
        let data = toy_data(20, 4);
        let r = run_ablation(&cfg, &AblationKind::NoLtm, &data).unwrap();
        assert!(r.metrics.iter().all(|m| m.ltm.iter().all(|&(_, n)| n == 0)));
        assert!(r.metrics.iter().any(|m| m.abstain_rate < 1.0));
        let r = run_ablation(&cfg, &AblationKind::DropLayers(vec![2]), &data).unwrap();
        assert!(r
            .metrics
            .iter()
            .all(|m| m.ltm.len() == 1 && m.ltm[0].0 == 1));
        assert!(matches!(
            run_ablation(&cfg, &AblationKind::DropLayers(vec![1, 2]), &data),
            Err(HarnessError::Config(_))
        ));
        assert_eq!(
            AblationKind::parse("drop:3,2").unwrap(),
            AblationKind::DropLayers(vec![3, 2])
        );
        assert!(AblationKind::parse("nothing").is_err());
    }

    #[test]
    fn sweeps() {
        let mut cfg = toy_config();
        cfg.eval.stream_repeats = 1;
        cfg.baseline.enabled = false;
        let data = toy_data(20, 5);
        assert!(run_sweep(&cfg, SweepAxis::Gamma, &[], &data)
            .unwrap()
            .is_empty());
        let blocks = run_sweep(
            &cfg,
            SweepAxis::LabelsPerClass,
            &[1.0, 2.0, 3.0, 5.0],
            &data,
        )
        .unwrap();
        assert_eq!(blocks.len(), 4);
        assert_eq!(blocks[3].value, 5.0);
        assert!(SweepAxis::Delta.apply(&cfg, 2.5).is_err());
        assert!(SweepAxis::parse("omega").is_err());
        assert_eq!(SweepAxis::Delta.apply(&cfg, 7.0).unwrap().model.delta, 7);
    }

    #[test]
    fn stream_config_reaches_the_spec() {
        let cfg = ExperimentConfig {
            stream: StreamConfig {
                mode: StreamMode::Uniform,
                phases: vec![vec![0], vec![1]],
                examples_per_phase: 5,
            },
            data: DataConfig {
                train_images: "a".into(),
                train_labels: "a".into(),
                test_images: "a".into(),
                test_labels: "a".into(),
            },
            ..toy_config()
        };
        let spec = cfg.stream_spec(9);
        assert_eq!(spec.mode, StreamMode::Uniform);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.classes_seen(0), vec![0, 1]);
    }
}
