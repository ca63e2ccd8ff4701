use rand::seq::index;

use super::config::{Ablation, LayerConfig};
use super::layer::{LayerMemory, LtmPolicy};
use super::pool::{CentroidPool, SearchTier};
use crate::dataset::{normalize_in_place, Image, PatchGrid};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// A stack of layers with increasing receptive fields.
///
/// The hierarchy is a single-writer state machine: images must be fed in
/// stream order. Read-only queries take `&self` and can be shared across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub(crate) layers: Vec<LayerMemory>,
    pub(crate) active: Vec<bool>,
    pub(crate) ablation: Ablation,
    pub(crate) initialized: bool,
    pub(crate) images_seen: u64,
}

impl Hierarchy {
    pub fn new(configs: Vec<LayerConfig>, ablation: Ablation) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::Config("a hierarchy needs at least one layer".into()));
        }
        if configs.windows(2).any(|w| w[0].rho >= w[1].rho) {
            return Err(Error::Config(
                "patch sizes must increase strictly from layer to layer".into(),
            ));
        }
        let active = ablation.active_mask(configs.len())?;
        let policy = LtmPolicy {
            disabled: ablation.ltm_disabled,
            dynamic: ablation.ltm_dynamic,
        };
        let layers = configs
            .into_iter()
            .map(|c| LayerMemory::new(c, policy))
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            active,
            ablation,
            initialized: false,
            images_seen: 0,
        })
    }

    pub fn layers(&self) -> &[LayerMemory] {
        &self.layers
    }

    pub fn layer(&self, l: usize) -> &LayerMemory {
        &self.layers[l]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn is_active(&self, l: usize) -> bool {
        self.active[l]
    }

    /// Indices of the layers that take part in learning and evaluation.
    pub fn active_layers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.layers.len()).filter(|&l| self.active[l])
    }

    pub fn ablation(&self) -> &Ablation {
        &self.ablation
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn images_seen(&self) -> u64 {
        self.images_seen
    }

    /// Pool used by the evaluation heads: LTM, or STM when LTM is ablated.
    pub fn eval_tier(&self) -> SearchTier {
        if self.ablation.ltm_disabled {
            SearchTier::StmOnly
        } else {
            SearchTier::LtmOnly
        }
    }

    /// The pool the evaluation heads read at layer `l`.
    pub fn eval_pool(&self, l: usize) -> &CentroidPool {
        match self.eval_tier() {
            SearchTier::StmOnly => self.layers[l].stm(),
            _ => self.layers[l].ltm(),
        }
    }

    /// Number of centroids the evaluation heads see at each layer (0 for inactive layers).
    pub fn eval_counts(&self) -> Vec<usize> {
        let tier = self.eval_tier();
        self.layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                if !self.active[l] {
                    0
                } else if tier == SearchTier::StmOnly {
                    layer.stm().len()
                } else {
                    layer.ltm().len()
                }
            })
            .collect()
    }

    /// Minimum number of `height x width` images needed to fill every active STM.
    pub fn images_needed_for_init(&self, height: usize, width: usize) -> Result<usize> {
        let mut need = 1;
        for l in self.active_layers() {
            let cfg = self.layers[l].config();
            let m = PatchGrid::new(height, width, cfg.rho, cfg.stride)?.len();
            need = need.max(cfg.stm_capacity.div_ceil(m));
        }
        Ok(need)
    }

    /// Fill every active layer's STM with `Delta` normalized patches sampled
    /// uniformly without replacement from all patches of `images`.
    pub fn init_from_images(&mut self, images: &[Image], seed: u64) -> Result<()> {
        for l in 0..self.layers.len() {
            if !self.active[l] {
                continue;
            }
            let cfg = self.layers[l].config().clone();
            let grids = images
                .iter()
                .map(|img| PatchGrid::for_image(img, cfg.rho, cfg.stride))
                .collect::<Result<Vec<_>>>()?;
            let total: usize = grids.iter().map(PatchGrid::len).sum();
            if total < cfg.stm_capacity {
                return Err(Error::Init(format!(
                    "layer {} needs {} patches to fill its STM, the init images hold {total}",
                    l + 1,
                    cfg.stm_capacity
                )));
            }
            let mut rng = seeded(derive_seed(seed, &[l as u64]));
            let picks = index::sample(&mut rng, total, cfg.stm_capacity);
            let dim = cfg.dim();
            let mut buf = vec![0.0; dim * cfg.stm_capacity];
            for (slot, flat) in buf.chunks_exact_mut(dim).zip(picks.iter()) {
                let (img, local) = locate(&grids, flat);
                grids[img].fill(&images[img], local, slot);
                normalize_in_place(slot);
            }
            self.layers[l].seed_stm(buf.chunks_exact(dim))?;
        }
        self.initialized = true;
        Ok(())
    }

    /// Feed one image: for each active layer in order, every patch in
    /// row-major order is normalized and processed.
    pub fn process_image(&mut self, image: &Image) -> Result<()> {
        if !self.initialized {
            return Err(Error::State("hierarchy has not been initialized".into()));
        }
        for l in 0..self.layers.len() {
            if !self.active[l] {
                continue;
            }
            let layer = &mut self.layers[l];
            let grid = PatchGrid::for_image(image, layer.config().rho, layer.config().stride)?;
            let mut buf = vec![0.0; grid.dim()];
            for m in 0..grid.len() {
                grid.fill(image, m, &mut buf);
                normalize_in_place(&mut buf);
                layer.process_patch(&buf)?;
            }
        }
        self.images_seen += 1;
        Ok(())
    }

    /// Stored pixels, `sum_l rho_l^2 (|LTM_l| + Delta_l)`, over active layers.
    pub fn memory_footprint(&self) -> u64 {
        self.active_layers()
            .map(|l| self.layers[l].memory_footprint())
            .sum()
    }
}

/// Map a global patch number to (image, patch-within-image).
fn locate(grids: &[PatchGrid], mut flat: usize) -> (usize, usize) {
    for (i, g) in grids.iter().enumerate() {
        if flat < g.len() {
            return (i, flat);
        }
        flat -= g.len();
    }
    unreachable!("patch index beyond the init images")
}

/// `sum rho^2 (ltm + delta)` for explicit numbers.
pub fn footprint_formula(layers: &[(usize, usize, usize)]) -> u64 {
    layers
        .iter()
        .map(|&(rho, ltm, delta)| (rho * rho * (ltm + delta)) as u64)
        .sum()
}
