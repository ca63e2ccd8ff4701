use super::encode::{encode_image, patch_affinity, EvalContext, ImageEncoding};
use crate::dataset::{ClassId, Image};
use crate::error::{Error, Result};
use crate::model::Hierarchy;

/// Class-association vector of one evaluation centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAssociation {
    /// `g_c(k)` for each labeled class, in [`Associations::classes`] order.
    pub g: Vec<f64>,
    /// Total affinity the centroid received; 0 means `g` is the uniform fallback.
    pub mass: f64,
    /// Class-informative: `max g > 1/|L| + gamma`.
    pub cin: bool,
    /// Position (in `classes`) of the largest entry of `g`, lowest on ties.
    pub argmax: usize,
    pub argmax_value: f64,
}

impl ClassAssociation {
    fn from_mass(mass: Vec<f64>, gamma: f64) -> Self {
        let n = mass.len();
        let total: f64 = mass.iter().sum();
        let g: Vec<f64> = if total > 0.0 {
            mass.iter().map(|m| m / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let mut argmax = 0;
        for (k, &v) in g.iter().enumerate() {
            if v > g[argmax] {
                argmax = k;
            }
        }
        let argmax_value = g[argmax];
        let cin = total > 0.0 && argmax_value > 1.0 / n as f64 + gamma;
        Self {
            g,
            mass: total,
            cin,
            argmax,
            argmax_value,
        }
    }
}

/// Associations of every evaluation centroid at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAssociations {
    pub layer: usize,
    pub centroids: Vec<ClassAssociation>,
}

impl LayerAssociations {
    /// Fraction of centroids that are class-informative (0 for an empty pool).
    pub fn cin_fraction(&self) -> f64 {
        if self.centroids.is_empty() {
            return 0.0;
        }
        self.centroids.iter().filter(|c| c.cin).count() as f64 / self.centroids.len() as f64
    }
}

/// Label associations for a frozen hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct Associations {
    /// Labeled classes, ascending. `|L|` is its length.
    pub classes: Vec<ClassId>,
    pub gamma: f64,
    pub layers: Vec<LayerAssociations>,
}

impl Associations {
    pub fn cin_fractions(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(LayerAssociations::cin_fraction)
            .collect()
    }
}

/// Associate evaluation centroids with classes from pre-encoded labeled images.
///
/// Every patch of a labeled example adds its affinity `f` to the entry of the
/// example's class in its nearest centroid's mass; `g` is the normalized
/// mass.
pub fn associations_from_encodings<'a>(
    ctx: &EvalContext,
    labeled: impl IntoIterator<Item = (&'a ImageEncoding, ClassId)>,
    gamma: f64,
) -> Result<Associations> {
    let labeled: Vec<_> = labeled.into_iter().collect();
    if labeled.is_empty() {
        return Err(Error::Evaluation("the labeled set is empty".into()));
    }
    if ctx.centroids() == 0 {
        return Err(Error::Evaluation(
            "no layer has any centroid to associate with labels".into(),
        ));
    }
    let mut classes: Vec<ClassId> = labeled.iter().map(|&(_, c)| c).collect();
    classes.sort_unstable();
    classes.dedup();
    let nclass = classes.len();

    let mut mass: Vec<Vec<f64>> = ctx
        .layers
        .iter()
        .map(|l| vec![0.0; l.ids.len() * nclass])
        .collect();
    for (enc, class) in &labeled {
        let k = classes.binary_search(class).expect("class collected above");
        check_layout(ctx, enc)?;
        for (li, (layer, le)) in ctx.layers.iter().zip(&enc.layers).enumerate() {
            if layer.ids.is_empty() {
                continue;
            }
            for &(c, d) in &le.nearest {
                mass[li][c * nclass + k] += patch_affinity(d, layer.dbar)?;
            }
        }
    }

    let layers = ctx
        .layers
        .iter()
        .zip(mass)
        .map(|(layer, m)| LayerAssociations {
            layer: layer.layer,
            centroids: m
                .chunks_exact(nclass)
                .map(|row| ClassAssociation::from_mass(row.to_vec(), gamma))
                .collect(),
        })
        .collect();
    Ok(Associations {
        classes,
        gamma,
        layers,
    })
}

/// Encode `labeled` against `hierarchy` and compute associations.
pub fn compute_associations<'a>(
    hierarchy: &Hierarchy,
    labeled: impl IntoIterator<Item = (&'a Image, ClassId)>,
    gamma: f64,
) -> Result<Associations> {
    let ctx = EvalContext::of(hierarchy);
    let encoded = labeled
        .into_iter()
        .map(|(img, c)| Ok((encode_image(hierarchy, img, false)?, c)))
        .collect::<Result<Vec<_>>>()?;
    associations_from_encodings(&ctx, encoded.iter().map(|(e, c)| (e, *c)), gamma)
}

pub(crate) fn check_layout(ctx: &EvalContext, enc: &ImageEncoding) -> Result<()> {
    let ok = ctx.layers.len() == enc.layers.len()
        && ctx.layers.iter().zip(&enc.layers).all(|(l, e)| {
            l.layer == e.layer
                && (e.nearest.is_empty() || e.nearest.len() == e.patches)
                && e.nearest.iter().all(|&(c, _)| c < l.ids.len())
        });
    if ok {
        Ok(())
    } else {
        Err(Error::Contract(
            "encoding was not produced from this hierarchy snapshot".into(),
        ))
    }
}

/// Outcome of classifying one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Predicted class; the lowest labeled class when `abstained`.
    pub class: ClassId,
    /// Summed layer votes, in [`Associations::classes`] order.
    pub votes: Vec<f64>,
    /// Per-layer votes `v_l(k)`, each in `[0, 1]`.
    pub layer_votes: Vec<Vec<f64>>,
    /// No patch selected a class-informative centroid.
    pub abstained: bool,
}

/// Vote with the patches of an encoded image.
///
/// A patch whose nearest centroid is class-informative votes
/// `argmax_value` for that centroid's top class; each layer's vote is the
/// sum divided by the layer's patch count, and the class with the largest
/// summed vote wins (lowest class on ties).
pub fn classify_encoding(assoc: &Associations, enc: &ImageEncoding) -> Result<Classification> {
    let nclass = assoc.classes.len();
    if assoc.layers.len() != enc.layers.len() {
        return Err(Error::Contract(
            "encoding and associations come from different snapshots".into(),
        ));
    }
    let mut votes = vec![0.0; nclass];
    let mut layer_votes = Vec::with_capacity(enc.layers.len());
    for (la, le) in assoc.layers.iter().zip(&enc.layers) {
        if la.layer != le.layer {
            return Err(Error::Contract(
                "encoding and associations come from different snapshots".into(),
            ));
        }
        let mut v = vec![0.0; nclass];
        for &(c, _) in &le.nearest {
            let a = la
                .centroids
                .get(c)
                .ok_or_else(|| Error::Contract("encoding refers to an unknown centroid".into()))?;
            if a.cin {
                v[a.argmax] += a.argmax_value;
            }
        }
        if le.patches > 0 {
            for x in &mut v {
                *x /= le.patches as f64;
            }
        }
        for (t, x) in votes.iter_mut().zip(&v) {
            *t += x;
        }
        layer_votes.push(v);
    }
    let abstained = votes.iter().all(|&v| v == 0.0);
    let mut best = 0;
    for (k, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = k;
        }
    }
    Ok(Classification {
        class: assoc.classes[best],
        votes,
        layer_votes,
        abstained,
    })
}

/// Encode and classify one image.
pub fn classify(
    hierarchy: &Hierarchy,
    assoc: &Associations,
    image: &Image,
) -> Result<Classification> {
    classify_encoding(assoc, &encode_image(hierarchy, image, false)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::encode::{EvalLayer, LayerEncoding};

    fn ctx(layers: &[(usize, f64)]) -> EvalContext {
        EvalContext {
            layers: layers
                .iter()
                .enumerate()
                .map(|(l, &(n, dbar))| EvalLayer {
                    layer: l,
                    dbar,
                    ids: (0..n as u64).collect(),
                })
                .collect(),
        }
    }

    fn enc(layers: Vec<Vec<(usize, f64)>>) -> ImageEncoding {
        ImageEncoding {
            layers: layers
                .into_iter()
                .enumerate()
                .map(|(l, nearest)| LayerEncoding {
                    layer: l,
                    patches: nearest.len(),
                    nearest,
                    min_distance: None,
                })
                .collect(),
        }
    }

    #[test]
    fn single_class_is_fully_associated() {
        let c = ctx(&[(1, 1.0)]);
        let e = enc(vec![vec![(0, 0.3); 9]]);
        let a = associations_from_encodings(&c, [(&e, 4)], 0.15).unwrap();
        let g = &a.layers[0].centroids[0];
        assert_eq!(g.g, vec![1.0]);
        // with |L| = 1 the CIN threshold is 1 + gamma, so only gamma < 0 qualifies
        assert!(!g.cin);
        let a = associations_from_encodings(&c, [(&e, 4)], -0.01).unwrap();
        assert!(a.layers[0].centroids[0].cin);
        let e2 = enc(vec![vec![(0, 0.3); 9]]);
        let a = associations_from_encodings(&c, [(&e, 4), (&e2, 7)], 0.15).unwrap();
        assert_eq!(a.classes, vec![4, 7]);
        assert_eq!(a.layers[0].centroids[0].g, vec![0.5, 0.5]);
        assert!(!a.layers[0].centroids[0].cin);
    }

    #[test]
    fn class_a_only_centroid_is_informative() {
        let c = ctx(&[(2, 1.0)]);
        let a_img = enc(vec![vec![(0, 0.5); 4]]);
        let b_img = enc(vec![vec![(1, 0.5); 4]]);
        let a = associations_from_encodings(&c, [(&a_img, 0), (&b_img, 1)], 0.15).unwrap();
        let g0 = &a.layers[0].centroids[0];
        assert_eq!(g0.g, vec![1.0, 0.0]);
        assert!(g0.cin);
        let gamma_max = 1.0 - 0.5;
        let a = associations_from_encodings(&c, [(&a_img, 0), (&b_img, 1)], gamma_max).unwrap();
        assert!(!a.layers[0].centroids[0].cin, "strict inequality");
    }

    #[test]
    fn zero_mass_is_uniform_and_not_cin() {
        let c = ctx(&[(3, 1.0)]);
        let e = enc(vec![vec![(0, 0.1)]]);
        let a = associations_from_encodings(&c, [(&e, 0), (&e, 1), (&e, 2)], 0.0).unwrap();
        let z = &a.layers[0].centroids[2];
        assert_eq!(z.mass, 0.0);
        assert!(z.g.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(!z.cin);
    }

    #[test]
    fn errors() {
        let c = ctx(&[(0, 1.0)]);
        let e = enc(vec![vec![]]);
        assert!(matches!(
            associations_from_encodings(&c, [(&e, 0)], 0.1),
            Err(Error::Evaluation(_))
        ));
        let c = ctx(&[(1, 1.0)]);
        assert!(matches!(
            associations_from_encodings(&c, std::iter::empty(), 0.1),
            Err(Error::Evaluation(_))
        ));
        let c0 = ctx(&[(1, 0.0)]);
        let e = enc(vec![vec![(0, 0.1)]]);
        assert!(matches!(
            associations_from_encodings(&c0, [(&e, 0)], 0.1),
            Err(Error::State(_))
        ));
    }

    fn assoc_with(layers: Vec<Vec<(usize, f64, bool)>>, nclass: usize) -> Associations {
        Associations {
            classes: (0..nclass as ClassId).collect(),
            gamma: 0.15,
            layers: layers
                .into_iter()
                .enumerate()
                .map(|(l, cs)| LayerAssociations {
                    layer: l,
                    centroids: cs
                        .into_iter()
                        .map(|(argmax, value, cin)| {
                            let mut g = vec![(1.0 - value) / (nclass - 1) as f64; nclass];
                            g[argmax] = value;
                            ClassAssociation {
                                g,
                                mass: 1.0,
                                cin,
                                argmax,
                                argmax_value: value,
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn one_layer_vote() {
        let a = assoc_with(vec![vec![(0, 0.9, true)]], 2);
        let r = classify_encoding(&a, &enc(vec![vec![(0, 1.0); 5]])).unwrap();
        assert_eq!(r.class, 0);
        assert!((r.votes[0] - 0.9).abs() < 1e-15);
        assert_eq!(r.votes[1], 0.0);
        assert!(!r.abstained);
    }

    #[test]
    fn no_cin_abstains() {
        let a = assoc_with(vec![vec![(1, 0.6, false)]], 3);
        let r = classify_encoding(&a, &enc(vec![vec![(0, 1.0); 5]])).unwrap();
        assert!(r.abstained);
        assert_eq!(r.class, 0);
        assert_eq!(r.votes, vec![0.0; 3]);
    }

    #[test]
    fn layer_votes_add_up() {
        // layer 1: 10 patches, 2 vote 1.0 for class 0 and 3 vote 1.0 for class 1 -> (0.2, 0.3)
        // layer 2: 4 patches: one 1.0 for class 0 and one 0.4 for class 1 -> (0.25, 0.1)
        let a = assoc_with(
            vec![
                vec![(0, 1.0, true), (1, 1.0, true), (0, 0.7, false)],
                vec![(0, 1.0, true), (1, 0.4, true), (1, 0.9, false)],
            ],
            2,
        );
        let l1 = [0, 0, 1, 1, 1, 2, 2, 2, 2, 2]
            .iter()
            .map(|&c| (c, 1.0))
            .collect();
        let l2 = [0, 1, 2, 2].iter().map(|&c| (c, 1.0)).collect();
        let r = classify_encoding(&a, &enc(vec![l1, l2])).unwrap();
        assert!((r.layer_votes[0][0] - 0.2).abs() < 1e-15);
        assert!((r.layer_votes[0][1] - 0.3).abs() < 1e-15);
        assert!((r.layer_votes[1][0] - 0.25).abs() < 1e-15);
        assert!((r.layer_votes[1][1] - 0.1).abs() < 1e-15);
        assert!((r.votes[0] - 0.45).abs() < 1e-15);
        assert!((r.votes[1] - 0.4).abs() < 1e-15);
        assert_eq!(r.class, 0);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let a = assoc_with(vec![vec![(0, 0.8, true), (1, 0.8, true)]], 2);
        let r = classify_encoding(&a, &enc(vec![vec![(1, 1.0), (0, 1.0)]])).unwrap();
        assert_eq!(r.class, 0);
    }
}
