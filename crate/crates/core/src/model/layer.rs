use super::config::LayerConfig;
use super::novelty::{NoveltyWindow, RunningMean};
use super::pool::{
    Centroid, CentroidMeta, CentroidPool, Nearest, Query, ScanHit, SearchTier, Tier,
};
use crate::error::{Error, Result};

/// How a layer treats its long-term memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LtmPolicy {
    /// Consolidation is off; every centroid stays in STM.
    pub disabled: bool,
    /// Selected LTM centroids are updated like STM ones.
    pub dynamic: bool,
}

/// Counters for what happened at a layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerStats {
    pub patches: u64,
    pub novelties: u64,
    pub evictions: u64,
    pub consolidations: u64,
}

/// What `process_patch` did with a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchEvent {
    /// A new STM centroid was created; `evicted` is the id pushed out to make room.
    Novel { id: u64, evicted: Option<u64> },
    /// The nearest STM centroid was updated; `consolidated` if it moved to LTM.
    StmUpdate { id: u64, consolidated: bool },
    /// The nearest centroid was in LTM.
    LtmHit { id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchOutcome {
    pub nearest: Nearest,
    pub threshold: f64,
    pub event: PatchEvent,
}

/// Exponential centroid update `c <- alpha x + (1 - alpha) c`.
#[inline]
pub fn blend(centroid: &mut [f64], x: &[f64], alpha: f64) {
    let keep = 1.0 - alpha;
    for (c, &v) in centroid.iter_mut().zip(x) {
        *c = alpha * v + keep * *c;
    }
}

/// Centroid memories and distance statistics for one layer.
#[derive(Debug, Clone)]
pub struct LayerMemory {
    pub(crate) config: LayerConfig,
    pub(crate) policy: LtmPolicy,
    pub(crate) stm: CentroidPool,
    pub(crate) ltm: CentroidPool,
    pub(crate) novelty: NoveltyWindow,
    pub(crate) dbar: RunningMean,
    pub(crate) clock: u64,
    pub(crate) next_id: u64,
    pub(crate) stats: LayerStats,
    /// Winner of the previous query; seeds the next scan. Not part of the state.
    pub(crate) hint: Option<(Tier, usize)>,
}

impl PartialEq for LayerMemory {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.policy == other.policy
            && self.stm == other.stm
            && self.ltm == other.ltm
            && self.novelty == other.novelty
            && self.dbar == other.dbar
            && self.clock == other.clock
            && self.next_id == other.next_id
            && self.stats == other.stats
    }
}

impl LayerMemory {
    pub fn new(config: LayerConfig, policy: LtmPolicy) -> Result<Self> {
        config.validate()?;
        let dim = config.dim();
        Ok(Self {
            novelty: NoveltyWindow::new(config.window),
            config,
            policy,
            stm: CentroidPool::new(dim),
            ltm: CentroidPool::new(dim),
            dbar: RunningMean::default(),
            clock: 0,
            next_id: 0,
            stats: LayerStats::default(),
            hint: None,
        })
    }

    pub fn config(&self) -> &LayerConfig {
        &self.config
    }

    pub fn policy(&self) -> LtmPolicy {
        self.policy
    }

    pub fn stm(&self) -> &CentroidPool {
        &self.stm
    }

    pub fn ltm(&self) -> &CentroidPool {
        &self.ltm
    }

    pub fn pool(&self, tier: Tier) -> &CentroidPool {
        match tier {
            Tier::Ltm => &self.ltm,
            Tier::Stm => &self.stm,
        }
    }

    fn pool_mut(&mut self, tier: Tier) -> &mut CentroidPool {
        match tier {
            Tier::Ltm => &mut self.ltm,
            Tier::Stm => &mut self.stm,
        }
    }

    pub fn centroid(&self, tier: Tier, index: usize) -> Centroid<'_> {
        self.pool(tier).get(index, tier)
    }

    /// `D̄_l`: mean nearest distance over everything processed so far.
    pub fn dbar(&self) -> f64 {
        self.dbar.mean()
    }

    pub fn running_mean(&self) -> RunningMean {
        self.dbar
    }

    pub fn novelty_window(&self) -> &NoveltyWindow {
        &self.novelty
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn stats(&self) -> LayerStats {
        self.stats
    }

    fn fresh_meta(&mut self) -> CentroidMeta {
        let id = self.next_id;
        self.next_id += 1;
        CentroidMeta {
            id,
            select_count: 0,
            last_selected: self.clock,
        }
    }

    /// Replace the STM with the given (already normalized) patches and clear
    /// the LTM. At most `stm_capacity` patches are accepted.
    pub fn seed_stm<'a>(&mut self, patches: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let dim = self.config.dim();
        let mut stm = CentroidPool::new(dim);
        for p in patches {
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "seed patch has {} values, layer expects {dim}",
                    p.len()
                )));
            }
            if stm.len() == self.config.stm_capacity {
                return Err(Error::Init(format!(
                    "more seed patches than the STM capacity {}",
                    self.config.stm_capacity
                )));
            }
            let meta = self.fresh_meta();
            stm.push(p, meta);
        }
        self.stm = stm;
        self.ltm = CentroidPool::new(dim);
        self.hint = None;
        Ok(())
    }

    /// Nearest centroid among the requested pools. Ties go to the lowest
    /// index, LTM before STM.
    pub fn nearest_centroid(&self, x: &[f64], search: SearchTier) -> Result<Nearest> {
        self.nearest_with_hint(x, search, None)
    }

    pub(crate) fn nearest_with_hint(
        &self,
        x: &[f64],
        search: SearchTier,
        hint: Option<(Tier, usize)>,
    ) -> Result<Nearest> {
        if x.len() != self.config.dim() {
            return Err(Error::Shape(format!(
                "patch has {} values, layer expects {}",
                x.len(),
                self.config.dim()
            )));
        }
        let metric = self.config.metric;
        let q = Query::new(x);
        let hint = hint.filter(|&(t, i)| search.includes(t) && i < self.pool(t).len());
        let mut best = hint.map(|(tier, index)| ScanHit {
            tier,
            index,
            score: metric.score(x, self.pool(tier).values(index)),
        });
        for &tier in search.tiers() {
            let skip = hint.filter(|h| h.0 == tier).map(|h| h.1);
            self.pool(tier).scan(&q, metric, tier, skip, &mut best);
        }
        best.map(|b| Nearest {
            tier: b.tier,
            index: b.index,
            distance: metric.score_to_distance(b.score),
        })
        .ok_or_else(|| Error::State(format!("no centroids to search ({search:?})")))
    }

    /// `D̂_l`, or `+inf` while fewer than `warmup` distances have been seen.
    pub fn novelty_threshold(&self) -> f64 {
        if self.novelty.len() < self.config.warmup {
            return f64::INFINITY;
        }
        self.novelty
            .percentile(self.config.beta)
            .unwrap_or(f64::INFINITY)
    }

    /// Move centroid `index` toward `x` and record the selection.
    pub fn update_centroid(&mut self, tier: Tier, index: usize, x: &[f64]) -> Result<()> {
        if tier == Tier::Ltm && !self.policy.dynamic {
            return Err(Error::Contract(
                "LTM centroids are frozen unless the dynamic-LTM ablation is on".into(),
            ));
        }
        if index >= self.pool(tier).len() {
            return Err(Error::Contract(format!("no {tier:?} centroid {index}")));
        }
        let alpha = self.config.alpha;
        let now = self.clock;
        let pool = self.pool_mut(tier);
        pool.modify(index, |c| blend(c, x, alpha));
        let meta = pool.meta_mut(index);
        meta.select_count += 1;
        meta.last_selected = now;
        Ok(())
    }

    fn search_tier(&self) -> SearchTier {
        if self.policy.disabled {
            SearchTier::StmOnly
        } else {
            SearchTier::All
        }
    }

    /// Process one normalized patch.
    ///
    /// 1. find the nearest centroid over STM and LTM;
    /// 2. record its distance in the novelty window and in `D̄_l`;
    /// 3. distance above the novelty threshold: the patch becomes a new STM
    ///    centroid, evicting the least-recently selected one if STM is full;
    /// 4. otherwise an STM winner is updated and moves to LTM once selected
    ///    `theta` times;
    /// 5. an LTM winner only has its recency refreshed (updated too under the
    ///    dynamic-LTM ablation).
    pub fn process_patch(&mut self, x: &[f64]) -> Result<PatchOutcome> {
        self.clock += 1;
        self.stats.patches += 1;
        let nearest = self.nearest_with_hint(x, self.search_tier(), self.hint)?;
        self.novelty.push(nearest.distance);
        self.dbar.push(nearest.distance);
        let threshold = self.novelty_threshold();

        let event = if nearest.distance > threshold {
            let meta = self.fresh_meta();
            let evicted = if self.stm.len() >= self.config.stm_capacity {
                let victim = self
                    .stm
                    .least_recently_selected()
                    .expect("full STM is not empty");
                let old = self.stm.meta(victim).id;
                self.stm.replace(victim, x, meta);
                self.hint = Some((Tier::Stm, victim));
                self.stats.evictions += 1;
                Some(old)
            } else {
                self.stm.push(x, meta);
                self.hint = Some((Tier::Stm, self.stm.len() - 1));
                None
            };
            self.stats.novelties += 1;
            PatchEvent::Novel {
                id: meta.id,
                evicted,
            }
        } else {
            match nearest.tier {
                Tier::Stm => {
                    self.update_centroid(Tier::Stm, nearest.index, x)?;
                    let meta = *self.stm.meta(nearest.index);
                    let consolidated =
                        !self.policy.disabled && meta.select_count >= self.config.theta;
                    if consolidated {
                        let (values, meta) = self.stm.remove(nearest.index);
                        self.ltm.push(&values, meta);
                        self.stats.consolidations += 1;
                        self.hint = Some((Tier::Ltm, self.ltm.len() - 1));
                    } else {
                        self.hint = Some((Tier::Stm, nearest.index));
                    }
                    PatchEvent::StmUpdate {
                        id: meta.id,
                        consolidated,
                    }
                }
                Tier::Ltm => {
                    if self.policy.dynamic {
                        self.update_centroid(Tier::Ltm, nearest.index, x)?;
                    } else {
                        self.ltm.meta_mut(nearest.index).last_selected = self.clock;
                    }
                    self.hint = Some((Tier::Ltm, nearest.index));
                    PatchEvent::LtmHit {
                        id: self.ltm.meta(nearest.index).id,
                    }
                }
            }
        };
        debug_assert!(self.stm.len() <= self.config.stm_capacity);
        Ok(PatchOutcome {
            nearest,
            threshold,
            event,
        })
    }

    /// `rho^2 (|LTM| + Delta)`.
    pub fn memory_footprint(&self) -> u64 {
        (self.config.dim() * (self.ltm.len() + self.config.stm_capacity)) as u64
    }
}
