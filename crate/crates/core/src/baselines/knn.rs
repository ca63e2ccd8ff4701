use std::collections::BTreeMap;

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::model::squared_euclidean;

/// Neighbours used by the baseline classifier unless configured otherwise.
pub const DEFAULT_K: usize = 1;

/// Indices of the `k` training points nearest to `query`, nearest first;
/// equal distances are ordered by index.
pub fn k_nearest(train: &[Vec<f64>], query: &[f64], k: usize) -> Result<Vec<usize>> {
    if train.is_empty() {
        return Err(Error::Argument("the KNN training set is empty".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::Argument(format!(
            "K = {k} is not in 1..={}",
            train.len()
        )));
    }
    if train.iter().any(|t| t.len() != query.len()) {
        return Err(Error::Shape(
            "query and training points differ in length".into(),
        ));
    }
    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| (squared_euclidean(t, query), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_key);
        scored.truncate(k);
    }
    scored.sort_by(by_key);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

/// Majority label among the `k` nearest training points.
///
/// Neighbours are ranked by distance, then index. A vote tie goes to the
/// tied label whose best-ranked neighbour comes first.
pub fn knn_classify(
    train: &[Vec<f64>],
    labels: &[ClassId],
    query: &[f64],
    k: usize,
) -> Result<ClassId> {
    if labels.len() != train.len() {
        return Err(Error::Argument(format!(
            "{} labels for {} training points",
            labels.len(),
            train.len()
        )));
    }
    let nearest = k_nearest(train, query, k)?;
    // label -> (votes, rank of its first neighbour)
    let mut tally: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for (rank, &i) in nearest.iter().enumerate() {
        let e = tally.entry(labels[i]).or_insert((0, rank));
        e.0 += 1;
    }
    let (label, _) = tally
        .into_iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)))
        .expect("k >= 1");
    Ok(label)
}
