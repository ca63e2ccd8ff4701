use crate::error::{Error, Result};

/// Class identifier as stored in IDX label files.
pub type ClassId = u32;

/// A grayscale image, row-major, with an optional class label.
///
/// The label travels with the image so that evaluation can score results,
/// but the learner never reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f64>,
    height: usize,
    width: usize,
    label: Option<ClassId>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty image {height}x{width}")));
        }
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::Shape(format!("pixel {i} is not finite")));
        }
        Ok(Self {
            pixels,
            height,
            width,
            label: None,
        })
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.label = Some(label);
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Pixel at (`row`, `col`).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn label(&self) -> Option<ClassId> {
        self.label
    }
}

/// A channel-interleaved (`HWC`) color image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Convert a three-channel image to grayscale with BT.601 luma weights.
pub fn to_grayscale(rgb: &ColorImage) -> Result<Image> {
    if rgb.channels != 3 {
        return Err(Error::Shape(format!(
            "expected 3 channels, got {}",
            rgb.channels
        )));
    }
    if rgb.data.len() != rgb.height * rgb.width * 3 {
        return Err(Error::Shape(format!(
            "{}x{}x3 image needs {} values, got {}",
            rgb.height,
            rgb.width,
            rgb.height * rgb.width * 3,
            rgb.data.len()
        )));
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let pixels = rgb
        .data
        .chunks_exact(3)
        .map(|px| wr * px[0] + wg * px[1] + wb * px[2])
        .collect();
    Image::new(rgb.height, rgb.width, pixels)
}
