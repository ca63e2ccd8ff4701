use super::image::Image;
use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant patch.
pub const NORMALIZE_EPS: f64 = 1e-8;

/// A `rho x rho` window of an image, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: Vec<f64>,
    pub layer: usize,
    /// Row and column of the top-left corner.
    pub position: (usize, usize),
}

/// The set of window positions for one patch size and stride over one image size.
///
/// Positions are enumerated row-major by top-left corner; the hierarchy relies
/// on that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rho: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, rho: usize, stride: usize) -> Result<Self> {
        if rho == 0 || stride == 0 {
            return Err(Error::Shape(format!(
                "patch side {rho} and stride {stride} must be positive"
            )));
        }
        if rho > height || rho > width {
            return Err(Error::Shape(format!(
                "patch side {rho} exceeds image {height}x{width}"
            )));
        }
        Ok(Self {
            rho,
            stride,
            rows: (height - rho) / stride + 1,
            cols: (width - rho) / stride + 1,
        })
    }

    pub fn for_image(image: &Image, rho: usize, stride: usize) -> Result<Self> {
        Self::new(image.height(), image.width(), rho, stride)
    }

    /// Number of patches, `M_l`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.rho * self.rho
    }

    /// Top-left corner of the `index`-th patch.
    pub fn position(&self, index: usize) -> (usize, usize) {
        (
            (index / self.cols) * self.stride,
            (index % self.cols) * self.stride,
        )
    }

    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(|i| self.position(i))
    }

    /// Copy the `index`-th window into `out` (length `rho^2`).
    pub fn fill(&self, image: &Image, index: usize, out: &mut [f64]) {
        let (r0, c0) = self.position(index);
        let rho = self.rho;
        for (dr, dst) in out.chunks_exact_mut(rho).enumerate() {
            dst.copy_from_slice(&image.row(r0 + dr)[c0..c0 + rho]);
        }
    }
}

/// All patches of `image`, unnormalized, in row-major order of their corners.
pub fn extract_patches(image: &Image, rho: usize, stride: usize) -> Result<Vec<Patch>> {
    let grid = PatchGrid::for_image(image, rho, stride)?;
    Ok((0..grid.len())
        .map(|i| {
            let mut values = vec![0.0; grid.dim()];
            grid.fill(image, i, &mut values);
            Patch {
                values,
                layer: 0,
                position: grid.position(i),
            }
        })
        .collect())
}

/// Zero-mean, unit (population) variance in place. Constant vectors become all zeros.
pub fn normalize_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < NORMALIZE_EPS {
        values.fill(0.0);
    } else {
        for v in values.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
}

pub fn normalize_patch(patch: &Patch) -> Patch {
    let mut out = patch.clone();
    normalize_in_place(&mut out.values);
    out
}
