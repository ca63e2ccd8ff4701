use crate::dataset::{normalize_in_place, Image, PatchGrid};
use crate::error::{Error, Result};
use crate::model::{CentroidMeta, CentroidPool, Hierarchy};

/// `f = exp(-d / dbar)`: a distance turned into an affinity in `(0, 1]`.
pub fn patch_affinity(distance: f64, dbar: f64) -> Result<f64> {
    if dbar <= 0.0 || !dbar.is_finite() {
        return Err(Error::State(format!(
            "mean distance is {dbar}; no stream has been processed yet"
        )));
    }
    Ok((-distance / dbar).exp())
}

/// What the evaluation heads need to know about one layer of a frozen hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalLayer {
    /// Index of the layer in the hierarchy.
    pub layer: usize,
    pub dbar: f64,
    /// Ids of the evaluation-pool centroids, in pool order.
    pub ids: Vec<u64>,
}

/// Summary of a frozen hierarchy: one entry per active layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalContext {
    pub layers: Vec<EvalLayer>,
}

impl EvalContext {
    pub fn of(hierarchy: &Hierarchy) -> Self {
        let layers = hierarchy
            .active_layers()
            .map(|l| EvalLayer {
                layer: l,
                dbar: hierarchy.layer(l).dbar(),
                ids: hierarchy
                    .eval_pool(l)
                    .metas()
                    .iter()
                    .map(|m| m.id)
                    .collect(),
            })
            .collect();
        Self { layers }
    }

    /// Total number of evaluation centroids over all layers.
    pub fn centroids(&self) -> usize {
        self.layers.iter().map(|l| l.ids.len()).sum()
    }
}

/// One layer of an [`ImageEncoding`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEncoding {
    pub layer: usize,
    /// For each patch in row-major order: nearest evaluation centroid and its
    /// distance. Empty when the layer's evaluation pool is empty.
    pub nearest: Vec<(usize, f64)>,
    /// Number of patches `M_l` (kept separately since `nearest` may be empty).
    pub patches: usize,
    /// For each evaluation centroid, the distance to its closest patch.
    pub min_distance: Option<Vec<f64>>,
}

/// Everything the evaluation heads need from one image, computed once per
/// frozen hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoding {
    pub layers: Vec<LayerEncoding>,
}

/// Encode `image` against the evaluation pools of `hierarchy`.
///
/// With `with_embedding`, the per-centroid minimum patch distances are also
/// computed (needed by [`embed`](super::embed) but not by classification).
pub fn encode_image(
    hierarchy: &Hierarchy,
    image: &Image,
    with_embedding: bool,
) -> Result<ImageEncoding> {
    let tier = hierarchy.eval_tier();
    let mut layers = Vec::new();
    for l in hierarchy.active_layers() {
        let memory = hierarchy.layer(l);
        let cfg = memory.config();
        let pool = hierarchy.eval_pool(l);
        let grid = PatchGrid::for_image(image, cfg.rho, cfg.stride)?;
        let mut buf = vec![0.0; grid.dim()];
        let mut nearest = Vec::with_capacity(if pool.is_empty() { 0 } else { grid.len() });
        let mut patches = CentroidPool::new(grid.dim());
        for m in 0..grid.len() {
            grid.fill(image, m, &mut buf);
            normalize_in_place(&mut buf);
            if !pool.is_empty() {
                let n = memory.nearest_centroid(&buf, tier)?;
                nearest.push((n.index, n.distance));
            }
            if with_embedding {
                let meta = CentroidMeta {
                    id: m as u64,
                    select_count: 0,
                    last_selected: 0,
                };
                patches.push(&buf, meta);
            }
        }
        let min_distance = with_embedding.then(|| {
            (0..pool.len())
                .map(|c| {
                    patches
                        .nearest(pool.values(c), cfg.metric)
                        .map_or(f64::INFINITY, |(_, d)| d)
                })
                .collect()
        });
        layers.push(LayerEncoding {
            layer: l,
            nearest,
            patches: grid.len(),
            min_distance,
        });
    }
    Ok(ImageEncoding { layers })
}
