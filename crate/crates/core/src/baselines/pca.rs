use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Share of variance the kept components must explain by default.
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.9;

/// How many components [`pca_fit`] keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaOptions {
    /// Upper bound on the number of components.
    pub cap: usize,
    /// Keep the fewest components whose cumulative explained variance
    /// reaches this fraction.
    pub variance_target: f64,
    /// Fixed component count (a per-phase schedule entry); replaces the
    /// variance rule but still honours `cap` and the data dimensions.
    pub components: Option<usize>,
}

impl PcaOptions {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            variance_target: DEFAULT_VARIANCE_TARGET,
            components: None,
        }
    }
}

/// A fitted PCA projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Per-feature mean of the training data.
    pub mean: Vec<f64>,
    /// `m x n`, one orthonormal component per row, by decreasing variance.
    pub components: DMatrix<f64>,
    /// Explained-variance ratio of every eigen-direction of the covariance,
    /// nonincreasing; the first `m` belong to the kept components.
    pub spectrum: Vec<f64>,
    /// Number of training samples.
    pub samples: usize,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Explained-variance ratios of the kept components.
    pub fn explained(&self) -> &[f64] {
        &self.spectrum[..self.n_components()]
    }
}

/// Smallest `m` with `sum(ratios[..m]) >= target`.
pub fn components_for_variance(ratios: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        acc += r;
        // tolerance for ratios that should sum to exactly `target`
        if acc >= target - 1e-12 {
            return i + 1;
        }
    }
    ratios.len()
}

/// Fit PCA by a full eigendecomposition of the sample covariance.
///
/// The number of kept components is `min(cap, min(N, n), m_target)` where
/// `m_target` is the variance rule (or the fixed count of `opts.components`).
pub fn pca_fit(data: &[&[f64]], opts: &PcaOptions) -> Result<PcaModel> {
    let n_samples = data.len();
    if n_samples < 2 {
        return Err(Error::Fit(format!(
            "PCA needs at least 2 samples, got {n_samples}"
        )));
    }
    let n = data[0].len();
    if n == 0 || data.iter().any(|row| row.len() != n) {
        return Err(Error::Shape(
            "PCA samples must be nonempty and equally long".into(),
        ));
    }
    if !(opts.variance_target > 0.0 && opts.variance_target <= 1.0) {
        return Err(Error::Config(format!(
            "variance target must lie in (0, 1], got {}",
            opts.variance_target
        )));
    }

    let mut mean = vec![0.0; n];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_samples as f64;
    }
    let centered = DMatrix::from_fn(n_samples, n, |i, j| data[i][j] - mean[j]);
    let cov = centered.tr_mul(&centered) / (n_samples as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Fit("the data has zero variance".into()));
    }
    let spectrum: Vec<f64> = values.iter().map(|v| v / total).collect();

    let wanted = opts
        .components
        .unwrap_or_else(|| components_for_variance(&spectrum, opts.variance_target));
    let m = wanted.min(opts.cap).min(n_samples.min(n)).max(1);

    let mut components = DMatrix::zeros(m, n);
    for (r, &i) in order.iter().take(m).enumerate() {
        let v = eig.eigenvectors.column(i);
        // fix the sign: the largest-magnitude entry (first on ties) is positive
        let mut pivot = 0;
        for j in 0..n {
            if v[j].abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            components[(r, j)] = sign * v[j];
        }
    }
    Ok(PcaModel {
        mean,
        components,
        spectrum,
        samples: n_samples,
    })
}

/// Project one sample: `components (x - mean)`.
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.n_features() {
        return Err(Error::Shape(format!(
            "sample has {} features, the model was fit on {}",
            x.len(),
            model.n_features()
        )));
    }
    let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(a, m)| a - m).collect();
    Ok((0..model.n_components())
        .map(|r| {
            model
                .components
                .row(r)
                .iter()
                .zip(&centered)
                .map(|(c, v)| c * v)
                .sum()
        })
        .collect())
}
