use std::collections::VecDeque;

/// Sliding window over the most recent nearest-centroid distances with exact
/// order statistics.
///
/// The window keeps arrival order in a ring and a sorted copy next to it, so
/// a percentile query is an index lookup and each push costs one binary
/// search plus one shift of at most `capacity` values.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyWindow {
    capacity: usize,
    ring: VecDeque<f64>,
    sorted: Vec<f64>,
}

/// 1-based nearest rank `ceil(beta * n)`, clamped to `1..=n`.
pub fn nearest_rank(beta: f64, n: usize) -> usize {
    // Absorb representation error such as 0.95 * 100 = 95.00000000000001.
    let r = (beta * n as f64 - 1e-9).ceil();
    (r.max(1.0) as usize).min(n)
}

impl NoveltyWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            capacity,
            ring: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Values in arrival order, oldest first.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.ring.iter().copied()
    }

    pub fn push(&mut self, d: f64) {
        debug_assert!(d.is_finite() && d >= 0.0, "bad distance {d}");
        let pn = self.sorted.partition_point(|v| v.total_cmp(&d).is_lt());
        if self.ring.len() == self.capacity {
            let old = self.ring.pop_front().expect("full ring");
            let po = self.sorted.partition_point(|v| v.total_cmp(&old).is_lt());
            // replace `old` by `d`, shifting only the values between them
            if pn > po {
                self.sorted.copy_within(po + 1..pn, po);
                self.sorted[pn - 1] = d;
            } else {
                self.sorted.copy_within(pn..po, pn + 1);
                self.sorted[pn] = d;
            }
        } else {
            self.sorted.insert(pn, d);
        }
        self.ring.push_back(d);
    }

    /// Nearest-rank percentile of the window contents.
    pub fn percentile(&self, beta: f64) -> Option<f64> {
        if self.sorted.is_empty() {
            None
        } else {
            Some(self.sorted[nearest_rank(beta, self.sorted.len()) - 1])
        }
    }
}

/// Cumulative mean of every nearest distance seen, `D̄_l`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    pub sum: f64,
    pub count: u64,
}

impl RunningMean {
    pub fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}
