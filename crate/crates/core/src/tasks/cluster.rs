use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::model::squared_euclidean;
use crate::rng::{derive_seed, seeded};

/// Restart and iteration limits for [`kmeans`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances from each point to its center.
    pub inertia: f64,
    /// Lloyd iterations used by the winning restart.
    pub iterations: usize,
}

/// k-means with k-means++ seeding and Lloyd iterations.
///
/// Each restart uses its own seed derived from `seed`; the restart with the
/// lowest inertia wins (lowest restart on ties). Restarts run in parallel but
/// the result is the same as running them in order.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Argument(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("points have different lengths".into()));
    }
    let restarts = opts.restarts.max(1);
    let runs: Vec<KMeansResult> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(points, k, derive_seed(seed, &[r as u64]), opts.max_iter))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_euclidean(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_euclidean(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    if t < w {
                        pick = Some(i);
                        break;
                    }
                    t -= w;
                }
            }
            // rounding can leave `t` just above the last weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // every point coincides with a center; any choice is as good
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_euclidean(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> KMeansResult {
    let mut rng = seeded(seed);
    let dim = points[0].len();
    let mut centers = plus_plus(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut dist = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest_center(p, &centers);
            dist[i] = d;
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&assignments) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for (c, s) in centers[j].iter_mut().zip(&sums[j]) {
                    *c = s / counts[j] as f64;
                }
            } else {
                // an empty cluster takes over the point farthest from its center
                let far = (0..points.len())
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    centers[j] = points[i].clone();
                    assignments[i] = j;
                    counts[j] = 1;
                    dist[i] = 0.0;
                }
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &j)| squared_euclidean(p, &centers[j]))
        .sum();
    KMeansResult {
        assignments,
        centers,
        inertia,
        iterations,
    }
}

/// Fraction of points whose class is the majority class of their cluster
/// (ties go to the lowest class id).
pub fn cluster_accuracy(assignments: &[usize], labels: &[ClassId]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} assignments for {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut counts: BTreeMap<usize, BTreeMap<ClassId, usize>> = BTreeMap::new();
    for (&a, &c) in assignments.iter().zip(labels) {
        *counts.entry(a).or_default().entry(c).or_default() += 1;
    }
    let correct: usize = counts
        .values()
        .map(|per_class| {
            // ascending class order, so `>` keeps the lowest class on ties
            per_class
                .values()
                .fold(0, |best, &n| if n > best { n } else { best })
        })
        .sum();
    Ok(correct as f64 / labels.len() as f64)
}
