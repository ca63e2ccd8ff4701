use std::io::Write;

use super::encode::{encode_image, patch_affinity, EvalContext, ImageEncoding};
use crate::dataset::{ClassId, Image};
use crate::error::{Error, Result};
use crate::model::Hierarchy;

/// `Phi(x)`: one affinity per evaluation centroid, layer after layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    /// Entries in `(0, 1]`.
    pub values: Vec<f64>,
    /// `(layer, centroid id)` of each entry.
    pub index: Vec<(usize, u64)>,
}

impl EmbeddingVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Build the embedding of an image encoded with `with_embedding = true`.
///
/// The entry of centroid `c` at layer `l` is `exp(-min_m d(x_{l,m}, c) / dbar_l)`.
pub fn embedding_from_encoding(ctx: &EvalContext, enc: &ImageEncoding) -> Result<EmbeddingVector> {
    if ctx.centroids() == 0 {
        return Err(Error::State("no centroids to embed against".into()));
    }
    super::associate::check_layout(ctx, enc)?;
    let mut values = Vec::with_capacity(ctx.centroids());
    let mut index = Vec::with_capacity(ctx.centroids());
    for (layer, le) in ctx.layers.iter().zip(&enc.layers) {
        if layer.ids.is_empty() {
            continue;
        }
        let mins = le
            .min_distance
            .as_ref()
            .filter(|m| m.len() == layer.ids.len())
            .ok_or_else(|| {
                Error::Contract("image was encoded without per-centroid distances".into())
            })?;
        for (&id, &d) in layer.ids.iter().zip(mins) {
            values.push(patch_affinity(d, layer.dbar)?);
            index.push((layer.layer, id));
        }
    }
    Ok(EmbeddingVector { values, index })
}

/// Embed one image against the evaluation pools of `hierarchy`.
pub fn embed(hierarchy: &Hierarchy, image: &Image) -> Result<EmbeddingVector> {
    let ctx = EvalContext::of(hierarchy);
    if ctx.centroids() == 0 {
        return Err(Error::State("no centroids to embed against".into()));
    }
    embedding_from_encoding(&ctx, &encode_image(hierarchy, image, true)?)
}

/// Write embeddings as CSV: `image_id,label,l<layer>_c<id>,...`.
///
/// All rows must share the index of the first one.
pub fn write_embeddings_csv<W: Write>(
    out: W,
    rows: &[(usize, Option<ClassId>, EmbeddingVector)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let index = rows.first().map(|r| r.2.index.clone()).unwrap_or_default();
    let mut header = vec!["image_id".to_string(), "label".to_string()];
    header.extend(index.iter().map(|(l, id)| format!("l{}_c{id}", l + 1)));
    w.write_record(&header).map_err(csv_error)?;
    for (image_id, label, e) in rows {
        if e.index != index {
            return Err(Error::Contract(
                "embeddings in one file must come from the same snapshot".into(),
            ));
        }
        let mut rec = vec![
            image_id.to_string(),
            label.map(|c| c.to_string()).unwrap_or_default(),
        ];
        rec.extend(e.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
