use super::distance::{scan_pool, screen_error, screened_scan, DistanceMetric};

/// Memory tier of a centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    /// Long-term memory. Ordered first: in a joint scan LTM wins ties.
    Ltm,
    /// Short-term memory.
    Stm,
}

/// Which pools a nearest-centroid query scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchTier {
    All,
    LtmOnly,
    StmOnly,
}

impl SearchTier {
    pub fn includes(self, tier: Tier) -> bool {
        match self {
            Self::All => true,
            Self::LtmOnly => tier == Tier::Ltm,
            Self::StmOnly => tier == Tier::Stm,
        }
    }

    pub(crate) fn tiers(self) -> &'static [Tier] {
        match self {
            Self::All => &[Tier::Ltm, Tier::Stm],
            Self::LtmOnly => &[Tier::Ltm],
            Self::StmOnly => &[Tier::Stm],
        }
    }
}

/// Bookkeeping attached to every centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CentroidMeta {
    /// Unique within a layer, assigned at creation.
    pub id: u64,
    pub select_count: u64,
    /// Event-clock value of the last selection (or creation).
    pub last_selected: u64,
}

/// Borrowed view of one centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid<'a> {
    pub values: &'a [f64],
    pub meta: CentroidMeta,
    pub tier: Tier,
}

/// A pool of equally sized centroids stored contiguously.
///
/// Alongside the `f64` values the pool keeps a single-precision copy and the
/// squared norm of every row; both are derived data used to speed up scans.
#[derive(Debug, Clone)]
pub struct CentroidPool {
    dim: usize,
    values: Vec<f64>,
    meta: Vec<CentroidMeta>,
    shadow: Vec<f32>,
    norms: Vec<f64>,
}

impl PartialEq for CentroidPool {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.values == other.values && self.meta == other.meta
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// A query patch prepared for repeated scans.
pub(crate) struct Query<'a> {
    pub x: &'a [f64],
    x32: Vec<f32>,
    norm2: f64,
}

impl<'a> Query<'a> {
    pub fn new(x: &'a [f64]) -> Self {
        Self {
            x,
            x32: x.iter().map(|&v| v as f32).collect(),
            norm2: norm2(x),
        }
    }
}

impl CentroidPool {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            values: Vec::new(),
            meta: Vec::new(),
            shadow: Vec::new(),
            norms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Apply `f` to the values of row `i`, then refresh its derived data.
    pub(crate) fn modify(&mut self, i: usize, f: impl FnOnce(&mut [f64])) {
        let range = i * self.dim..(i + 1) * self.dim;
        f(&mut self.values[range.clone()]);
        self.sync(i);
    }

    fn sync(&mut self, i: usize) {
        let range = i * self.dim..(i + 1) * self.dim;
        for (s, &v) in self.shadow[range.clone()]
            .iter_mut()
            .zip(&self.values[range.clone()])
        {
            *s = v as f32;
        }
        self.norms[i] = norm2(&self.values[range]);
    }

    pub fn meta(&self, i: usize) -> &CentroidMeta {
        &self.meta[i]
    }

    pub(crate) fn meta_mut(&mut self, i: usize) -> &mut CentroidMeta {
        &mut self.meta[i]
    }

    pub fn metas(&self) -> &[CentroidMeta] {
        &self.meta
    }

    /// All values, centroid after centroid.
    pub fn flat_values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, tier: Tier) -> Centroid<'_> {
        Centroid {
            values: self.values(i),
            meta: self.meta[i],
            tier,
        }
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.meta.iter().position(|m| m.id == id)
    }

    pub(crate) fn push(&mut self, values: &[f64], meta: CentroidMeta) {
        assert_eq!(values.len(), self.dim, "centroid dimension mismatch");
        self.values.extend_from_slice(values);
        self.shadow.extend(values.iter().map(|&v| v as f32));
        self.norms.push(norm2(values));
        self.meta.push(meta);
    }

    pub(crate) fn replace(&mut self, i: usize, values: &[f64], meta: CentroidMeta) {
        self.modify(i, |row| row.copy_from_slice(values));
        self.meta[i] = meta;
    }

    /// Remove centroid `i`, keeping the order of the others.
    pub(crate) fn remove(&mut self, i: usize) -> (Vec<f64>, CentroidMeta) {
        let values: Vec<f64> = self
            .values
            .drain(i * self.dim..(i + 1) * self.dim)
            .collect();
        self.shadow.drain(i * self.dim..(i + 1) * self.dim);
        self.norms.remove(i);
        (values, self.meta.remove(i))
    }

    /// Nearest row to `x` and its distance; lowest index on ties.
    pub fn nearest(&self, x: &[f64], metric: DistanceMetric) -> Option<(usize, f64)> {
        let mut best = None;
        self.scan(&Query::new(x), metric, Tier::Ltm, None, &mut best);
        best.map(|b| (b.index, metric.score_to_distance(b.score)))
    }

    /// Index of the least-recently selected centroid; lowest index on ties.
    pub fn least_recently_selected(&self) -> Option<usize> {
        self.meta
            .iter()
            .enumerate()
            .min_by_key(|(i, m)| (m.last_selected, *i))
            .map(|(i, _)| i)
    }

    /// Scan for the centroid with the smallest score, updating `best` when a
    /// centroid beats it. Ties go to the earlier position in (tier, index)
    /// order. `skip` excludes one index that the caller already scored.
    pub(crate) fn scan(
        &self,
        q: &Query<'_>,
        metric: DistanceMetric,
        tier: Tier,
        skip: Option<usize>,
        best: &mut Option<ScanHit>,
    ) {
        let mut score = best.map_or(f64::INFINITY, |b| b.score);
        // rows below `tie_below` precede the current best in (tier, index) order
        let tie_below = match best {
            None => usize::MAX,
            Some(b) if b.tier == tier => b.index,
            Some(b) if b.tier > tier => usize::MAX,
            Some(_) => 0,
        };
        let mut won = None;
        let mut screened = false;
        if metric == DistanceMetric::Euclidean {
            let max_norm = self.norms.iter().fold(0.0f64, |m, &n| m.max(n));
            let err = screen_error(self.dim, q.norm2, max_norm);
            if err.is_finite()
                && max_norm < f32::MAX as f64 / 4.0
                && q.norm2 < f32::MAX as f64 / 4.0
            {
                if let Some(w) = screened_scan(
                    q.x,
                    &q.x32,
                    &self.values,
                    &self.shadow,
                    self.dim,
                    skip,
                    &mut score,
                    tie_below,
                    err,
                ) {
                    won = w;
                    screened = true;
                }
            }
        }
        if !screened {
            won = scan_pool(
                metric,
                q.x,
                &self.values,
                self.dim,
                skip,
                &mut score,
                tie_below,
            );
        }
        if let Some(index) = won {
            *best = Some(ScanHit { tier, index, score });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScanHit {
    pub tier: Tier,
    pub index: usize,
    pub score: f64,
}

/// Result of a nearest-centroid query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub tier: Tier,
    pub index: usize,
    pub distance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: u64, last: u64) -> CentroidMeta {
        CentroidMeta {
            id,
            select_count: 0,
            last_selected: last,
        }
    }

    #[test]
    fn remove_keeps_order() {
        let mut p = CentroidPool::new(2);
        for i in 0..4 {
            p.push(&[i as f64, -(i as f64)], meta(i, 0));
        }
        let (v, m) = p.remove(1);
        assert_eq!(v, vec![1.0, -1.0]);
        assert_eq!(m.id, 1);
        assert_eq!(p.len(), 3);
        assert_eq!(p.values(1), &[2.0, -2.0]);
        assert_eq!(p.position_of(3), Some(2));
    }

    #[test]
    fn lru_ties_lowest_index() {
        let mut p = CentroidPool::new(1);
        for (i, last) in [5, 2, 7, 2].into_iter().enumerate() {
            p.push(&[0.0], meta(i as u64, last));
        }
        assert_eq!(p.least_recently_selected(), Some(1));
        assert_eq!(CentroidPool::new(1).least_recently_selected(), None);
    }
}
