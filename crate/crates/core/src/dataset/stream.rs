use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::{ClassId, Image};
use crate::error::{Error, Result};
use crate::rng::{seeded, StamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamMode {
    /// Each phase draws only from its own classes.
    Incremental,
    /// Every phase draws from the union of all classes.
    Uniform,
}

/// Reproducible description of an unlabeled stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub mode: StreamMode,
    pub phases: Vec<Vec<ClassId>>,
    pub examples_per_phase: usize,
    #[serde(default)]
    pub seed: u64,
}

impl StreamSpec {
    /// `classes_per_phase` new classes per phase over `0..n_classes`.
    pub fn incremental(
        n_classes: u32,
        classes_per_phase: u32,
        examples_per_phase: usize,
        seed: u64,
    ) -> Self {
        let phases = (0..n_classes)
            .collect::<Vec<_>>()
            .chunks(classes_per_phase.max(1) as usize)
            .map(<[u32]>::to_vec)
            .collect();
        Self {
            mode: StreamMode::Incremental,
            phases,
            examples_per_phase,
            seed,
        }
    }

    fn all_classes(&self) -> Vec<ClassId> {
        self.phases
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Classes drawn during phase `p`.
    pub fn phase_classes(&self, p: usize) -> Vec<ClassId> {
        match self.mode {
            StreamMode::Incremental => {
                let mut c = self.phases[p].clone();
                c.sort_unstable();
                c.dedup();
                c
            }
            StreamMode::Uniform => self.all_classes(),
        }
    }

    /// Classes the stream has shown by the end of phase `p`, sorted.
    pub fn classes_seen(&self, p: usize) -> Vec<ClassId> {
        match self.mode {
            StreamMode::Incremental => self.phases[..=p]
                .iter()
                .flatten()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            StreamMode::Uniform => self.all_classes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples_per_phase == 0 {
            return Err(Error::Config("examples_per_phase must be positive".into()));
        }
        if self.phases.is_empty() || self.phases.iter().any(Vec::is_empty) {
            return Err(Error::Config("every phase needs at least one class".into()));
        }
        if self.mode == StreamMode::Incremental {
            let mut seen = BTreeSet::new();
            for (p, phase) in self.phases.iter().enumerate() {
                for &c in phase {
                    if !seen.insert(c) {
                        return Err(Error::Config(format!(
                            "class {c} appears again in phase {}",
                            p + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A built stream: indices into the source dataset, grouped into phases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    pub order: Vec<usize>,
    pub phases: Vec<Range<usize>>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn images<'a>(&'a self, dataset: &'a [Image]) -> impl Iterator<Item = &'a Image> + 'a {
        self.order.iter().map(move |&i| &dataset[i])
    }

    pub fn phase_images<'a>(
        &'a self,
        dataset: &'a [Image],
        phase: usize,
    ) -> impl Iterator<Item = &'a Image> + 'a {
        self.order[self.phases[phase].clone()]
            .iter()
            .map(move |&i| &dataset[i])
    }
}

/// Dataset indices grouped by label, each group in ascending index order.
pub fn class_pools(dataset: &[Image]) -> BTreeMap<ClassId, Vec<usize>> {
    let mut pools: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, img) in dataset.iter().enumerate() {
        if let Some(label) = img.label() {
            pools.entry(label).or_default().push(i);
        }
    }
    pools
}

/// Split `total` draws evenly over `n` classes; the remainder goes to randomly chosen classes.
fn quotas(total: usize, n: usize, rng: &mut StamRng) -> Vec<usize> {
    let mut q = vec![total / n; n];
    for i in index::sample(rng, n, total % n) {
        q[i] += 1;
    }
    q
}

/// Draw `count` members of `pool`: without replacement when the pool is big
/// enough, with replacement otherwise.
pub(crate) fn draw(pool: &[usize], count: usize, rng: &mut StamRng) -> Vec<usize> {
    if count <= pool.len() {
        index::sample(rng, pool.len(), count)
            .into_iter()
            .map(|i| pool[i])
            .collect()
    } else {
        (0..count)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect()
    }
}

/// Build the unlabeled stream described by `spec`.
///
/// Within a phase every class gets an equal share of the `N_p` draws (the
/// remainder is spread at random), and the phase is then shuffled.
pub fn build_stream(dataset: &[Image], spec: &StreamSpec) -> Result<Stream> {
    spec.validate()?;
    let pools = class_pools(dataset);
    for c in spec.all_classes() {
        if !pools.contains_key(&c) {
            return Err(Error::Config(format!("class {c} not present in dataset")));
        }
    }
    let mut rng = seeded(spec.seed);
    let mut order = Vec::with_capacity(spec.phases.len() * spec.examples_per_phase);
    let mut phases = Vec::with_capacity(spec.phases.len());
    for p in 0..spec.phases.len() {
        let classes = spec.phase_classes(p);
        let q = quotas(spec.examples_per_phase, classes.len(), &mut rng);
        let start = order.len();
        let mut chunk = Vec::with_capacity(spec.examples_per_phase);
        for (c, &n) in classes.iter().zip(&q) {
            chunk.extend(draw(&pools[c], n, &mut rng));
        }
        chunk.shuffle(&mut rng);
        order.extend(chunk);
        phases.push(start..order.len());
    }
    Ok(Stream { order, phases })
}
