//! Distance kernels for the nearest-centroid scans.
//!
//! The `f64` kernels accumulate into eight lanes and fold them in a fixed
//! tree. The AVX2 path performs exactly the same additions in the same
//! order as the portable one, so scores are bit-identical on every CPU.
//! Bounded variants stop as soon as a partial sum exceeds the bound. Lanes
//! only grow and rounding is monotone, so a partial sum above the bound
//! proves the full sum is above it too: abandoning never changes which
//! centroid wins a scan.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// L1.
    Manhattan,
}

const LANES: usize = 8;
/// Elements between two bound checks.
const CHECK_EVERY: usize = 32;
const LANES32: usize = 16;
const CHECK_EVERY32: usize = 64;

#[inline(always)]
fn fold(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline(always)]
fn bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let body = n - n % LANES;
    let mut acc = [0.0f64; LANES];
    let mut i = 0;
    while i < body {
        let end = (i + CHECK_EVERY).min(body);
        for (ca, cb) in a[i..end]
            .chunks_exact(LANES)
            .zip(b[i..end].chunks_exact(LANES))
        {
            for k in 0..LANES {
                let d = ca[k] - cb[k];
                acc[k] += if L1 { d.abs() } else { d * d };
            }
        }
        i = end;
        if i < n && fold(&acc) > bound {
            return f64::INFINITY;
        }
    }
    let mut s = fold(&acc);
    for k in body..n {
        let d = a[k] - b[k];
        s += if L1 { d.abs() } else { d * d };
    }
    s
}

#[inline(always)]
fn fold32(acc: &[f32; LANES32]) -> f32 {
    let mut t = [0.0f32; 8];
    for k in 0..8 {
        t[k] = acc[k] + acc[k + 8];
    }
    let mut u = [0.0f32; 4];
    for k in 0..4 {
        u[k] = t[k] + t[k + 4];
    }
    (u[0] + u[2]) + (u[1] + u[3])
}

#[inline(always)]
fn bounded_sq32(a: &[f32], b: &[f32], bound: f32) -> f32 {
    let n = a.len().min(b.len());
    let body = n - n % LANES32;
    let mut acc = [0.0f32; LANES32];
    let mut i = 0;
    while i < body {
        let end = (i + CHECK_EVERY32).min(body);
        for (ca, cb) in a[i..end]
            .chunks_exact(LANES32)
            .zip(b[i..end].chunks_exact(LANES32))
        {
            for k in 0..LANES32 {
                let d = ca[k] - cb[k];
                acc[k] += d * d;
            }
        }
        i = end;
        if i < n && fold32(&acc) > bound {
            return f32::INFINITY;
        }
    }
    let mut s = fold32(&acc);
    for k in body..n {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    use super::{CHECK_EVERY, CHECK_EVERY32, LANES, LANES32};

    /// `((l0 + l1) + (l2 + l3)) + ((l4 + l5) + (l6 + l7))` for lanes `a = l0..l3`, `b = l4..l7`.
    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn fold(a: __m256d, b: __m256d) -> f64 {
        let h = _mm256_hadd_pd(a, b); // [l0+l1, l4+l5, l2+l3, l6+l7]
        let s = _mm_add_pd(_mm256_castpd256_pd128(h), _mm256_extractf128_pd(h, 1));
        _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s))
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    pub unsafe fn bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64 {
        let n = a.len().min(b.len());
        let body = n - n % LANES;
        let sign = _mm256_set1_pd(-0.0);
        let mut acc0 = _mm256_setzero_pd();
        let mut acc1 = _mm256_setzero_pd();
        let mut i = 0;
        while i < body {
            let end = (i + CHECK_EVERY).min(body);
            for (ca, cb) in a[i..end]
                .chunks_exact(LANES)
                .zip(b[i..end].chunks_exact(LANES))
            {
                let (ca, cb) = (ca.split_at(4), cb.split_at(4));
                let d0 = _mm256_sub_pd(
                    _mm256_loadu_pd(ca.0.as_ptr()),
                    _mm256_loadu_pd(cb.0.as_ptr()),
                );
                let d1 = _mm256_sub_pd(
                    _mm256_loadu_pd(ca.1.as_ptr()),
                    _mm256_loadu_pd(cb.1.as_ptr()),
                );
                if L1 {
                    acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign, d0));
                    acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign, d1));
                } else {
                    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(d0, d0));
                    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(d1, d1));
                }
            }
            i = end;
            if i < n && fold(acc0, acc1) > bound {
                return f64::INFINITY;
            }
        }
        let mut s = fold(acc0, acc1);
        for k in body..n {
            let d = a[k] - b[k];
            s += if L1 { d.abs() } else { d * d };
        }
        s
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    unsafe fn fold32(a: __m256, b: __m256) -> f32 {
        let t = _mm256_add_ps(a, b);
        let u = _mm_add_ps(_mm256_castps256_ps128(t), _mm256_extractf128_ps(t, 1));
        let v = _mm_add_ps(u, _mm_movehl_ps(u, u)); // [u0+u2, u1+u3, ..]
        _mm_cvtss_f32(_mm_add_ss(v, _mm_shuffle_ps(v, v, 1)))
    }

    #[inline]
    #[target_feature(enable = "avx2")]
    pub unsafe fn bounded_sq32(a: &[f32], b: &[f32], bound: f32) -> f32 {
        let n = a.len().min(b.len());
        let body = n - n % LANES32;
        let mut acc0 = _mm256_setzero_ps();
        let mut acc1 = _mm256_setzero_ps();
        let mut i = 0;
        while i < body {
            let end = (i + CHECK_EVERY32).min(body);
            for (ca, cb) in a[i..end]
                .chunks_exact(LANES32)
                .zip(b[i..end].chunks_exact(LANES32))
            {
                let (ca, cb) = (ca.split_at(8), cb.split_at(8));
                let d0 = _mm256_sub_ps(
                    _mm256_loadu_ps(ca.0.as_ptr()),
                    _mm256_loadu_ps(cb.0.as_ptr()),
                );
                let d1 = _mm256_sub_ps(
                    _mm256_loadu_ps(ca.1.as_ptr()),
                    _mm256_loadu_ps(cb.1.as_ptr()),
                );
                acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(d0, d0));
                acc1 = _mm256_add_ps(acc1, _mm256_mul_ps(d1, d1));
            }
            i = end;
            if i < n && fold32(acc0, acc1) > bound {
                return f32::INFINITY;
            }
        }
        let mut s = fold32(acc0, acc1);
        for k in body..n {
            let d = a[k] - b[k];
            s += d * d;
        }
        s
    }
}

/// A family of distance kernels; the scans are generic over it so that each
/// family is compiled into its own specialized loop.
trait Kernel {
    fn bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64;
    fn bounded_sq32(a: &[f32], b: &[f32], bound: f32) -> f32;
}

struct Portable;

impl Kernel for Portable {
    #[inline(always)]
    fn bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64 {
        bounded::<L1>(a, b, bound)
    }
    #[inline(always)]
    fn bounded_sq32(a: &[f32], b: &[f32], bound: f32) -> f32 {
        bounded_sq32(a, b, bound)
    }
}

/// Only instantiated behind a successful AVX2 feature check.
#[cfg(target_arch = "x86_64")]
struct Avx2;

#[cfg(target_arch = "x86_64")]
impl Kernel for Avx2 {
    #[inline(always)]
    fn bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64 {
        // SAFETY: `Avx2` is only used after `has_avx2()` returned true.
        unsafe { avx2::bounded::<L1>(a, b, bound) }
    }
    #[inline(always)]
    fn bounded_sq32(a: &[f32], b: &[f32], bound: f32) -> f32 {
        // SAFETY: as above.
        unsafe { avx2::bounded_sq32(a, b, bound) }
    }
}

#[inline]
fn has_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[inline]
fn dispatch_bounded<const L1: bool>(a: &[f64], b: &[f64], bound: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        return Avx2::bounded::<L1>(a, b, bound);
    }
    bounded::<L1>(a, b, bound)
}

/// Scan the `dim`-sized rows of `rows` for one that beats `*best`.
///
/// A row beats the current best with a strictly smaller score, or with an
/// equal score when its index is below `tie_below` (the caller's way of
/// saying "this row comes earlier in the global order"). On success `*best`
/// is updated and the winning row is returned.
#[inline(always)]
fn scan_rows<K: Kernel, const L1: bool>(
    x: &[f64],
    rows: &[f64],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    mut tie_below: usize,
) -> Option<usize> {
    let mut won = None;
    for (i, c) in rows.chunks_exact(dim).enumerate() {
        if skip == Some(i) {
            continue;
        }
        let s = K::bounded::<L1>(x, c, *best);
        if s < *best || (s == *best && i < tie_below && s.is_finite()) {
            *best = s;
            won = Some(i);
            tie_below = 0;
        }
    }
    won
}

/// Candidates kept by the single-precision screen before it gives up.
const SCREEN_CAPACITY: usize = 64;

/// Squared-Euclidean scan with a single-precision screen.
///
/// Rows are first scored in `f32`. `err` must bound `|s32 - s64|` for every
/// row, so any row whose `f32` score exceeds `min32 + 2 err` can neither be
/// the `f64` winner nor tie with it. Survivors are rescored exactly with the
/// same rule as [`scan_rows`]. Returns `None` when the screen keeps too many
/// rows; the caller then falls back to the exact scan.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn screened_rows<K: Kernel>(
    x: &[f64],
    x32: &[f32],
    rows: &[f64],
    rows32: &[f32],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    mut tie_below: usize,
    err: f64,
) -> Option<Option<usize>> {
    let mut idx = [0usize; SCREEN_CAPACITY];
    let mut val = [0.0f32; SCREEN_CAPACITY];
    let mut len = 0;
    let limit = *best + err;
    let mut min32 = f64::INFINITY;
    for (i, c) in rows32.chunks_exact(dim).enumerate() {
        if skip == Some(i) {
            continue;
        }
        let keep = limit.min(min32 + 2.0 * err);
        // widen slightly so rounding the bound to f32 never drops a survivor
        let s = K::bounded_sq32(x32, c, (keep * (1.0 + 1e-6)) as f32) as f64;
        if s > keep {
            continue;
        }
        min32 = min32.min(s);
        if len == SCREEN_CAPACITY {
            let cut = min32 + 2.0 * err;
            let mut w = 0;
            for r in 0..len {
                if val[r] as f64 <= cut {
                    idx[w] = idx[r];
                    val[w] = val[r];
                    w += 1;
                }
            }
            if w == SCREEN_CAPACITY {
                return None;
            }
            len = w;
        }
        idx[len] = i;
        val[len] = s as f32;
        len += 1;
    }
    let cut = limit.min(min32 + 2.0 * err);
    let mut won = None;
    for r in 0..len {
        if val[r] as f64 > cut {
            continue;
        }
        let i = idx[r];
        let s = K::bounded::<false>(x, &rows[i * dim..(i + 1) * dim], *best);
        if s < *best || (s == *best && i < tie_below && s.is_finite()) {
            *best = s;
            won = Some(i);
            tie_below = 0;
        }
    }
    Some(won)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn scan_rows_avx2<const L1: bool>(
    x: &[f64],
    rows: &[f64],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    tie_below: usize,
) -> Option<usize> {
    scan_rows::<Avx2, L1>(x, rows, dim, skip, best, tie_below)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn screened_rows_avx2(
    x: &[f64],
    x32: &[f32],
    rows: &[f64],
    rows32: &[f32],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    tie_below: usize,
    err: f64,
) -> Option<Option<usize>> {
    screened_rows::<Avx2>(x, x32, rows, rows32, dim, skip, best, tie_below, err)
}

/// Runtime-dispatched exact scan, see [`scan_rows`].
pub(crate) fn scan_pool(
    metric: DistanceMetric,
    x: &[f64],
    rows: &[f64],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    tie_below: usize,
) -> Option<usize> {
    let l1 = metric == DistanceMetric::Manhattan;
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe {
            if l1 {
                scan_rows_avx2::<true>(x, rows, dim, skip, best, tie_below)
            } else {
                scan_rows_avx2::<false>(x, rows, dim, skip, best, tie_below)
            }
        };
    }
    if l1 {
        scan_rows::<Portable, true>(x, rows, dim, skip, best, tie_below)
    } else {
        scan_rows::<Portable, false>(x, rows, dim, skip, best, tie_below)
    }
}

/// Bound on `|s32 - s64|` for squared Euclidean scores of `dim`-vectors with
/// squared norms at most `norm2_x` and `norm2_c`.
///
/// Rounding the inputs and the subtraction perturbs each squared difference
/// by at most `4u (|x_i| + |c_i|)^2`, and the lane-wise summation by at most
/// `(dim / 16 + 5) u` times the sum; both are covered twice over.
pub(crate) fn screen_error(dim: usize, norm2_x: f64, norm2_c: f64) -> f64 {
    let u = f32::EPSILON as f64 / 2.0;
    4.0 * (dim as f64 / 16.0 + 16.0) * u * (norm2_x + norm2_c)
}

/// Runtime-dispatched [`screened_rows`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn screened_scan(
    x: &[f64],
    x32: &[f32],
    rows: &[f64],
    rows32: &[f32],
    dim: usize,
    skip: Option<usize>,
    best: &mut f64,
    tie_below: usize,
    err: f64,
) -> Option<Option<usize>> {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe {
            screened_rows_avx2(x, x32, rows, rows32, dim, skip, best, tie_below, err)
        };
    }
    screened_rows::<Portable>(x, x32, rows, rows32, dim, skip, best, tie_below, err)
}

/// Squared Euclidean distance.
#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    dispatch_bounded::<false>(a, b, f64::INFINITY)
}

/// L1 distance.
#[inline]
pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    dispatch_bounded::<true>(a, b, f64::INFINITY)
}

impl DistanceMetric {
    /// Monotone surrogate used for comparisons: squared distance for
    /// Euclidean, the distance itself for L1.
    #[inline]
    pub fn score(self, a: &[f64], b: &[f64]) -> f64 {
        self.score_bounded(a, b, f64::INFINITY)
    }

    /// Like [`score`](Self::score), but returns `+inf` once the partial score exceeds `bound`.
    #[inline]
    pub fn score_bounded(self, a: &[f64], b: &[f64], bound: f64) -> f64 {
        match self {
            Self::Euclidean => dispatch_bounded::<false>(a, b, bound),
            Self::Manhattan => dispatch_bounded::<true>(a, b, bound),
        }
    }

    #[inline]
    pub fn score_to_distance(self, score: f64) -> f64 {
        match self {
            Self::Euclidean => score.sqrt(),
            Self::Manhattan => score,
        }
    }

    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        self.score_to_distance(self.score(a, b))
    }
}
