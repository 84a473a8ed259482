//! Grayscale images, quality metrics, noise synthesis and patch handling.

mod io;
mod metrics;
mod patches;
mod synthetic;

pub use io::{load_image, save_image};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use patches::{augment8, extract_patches, reassemble, PatchSet};
pub use synthetic::synthetic_scene;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_PEAK: f64 = 255.0;

/// Row-major grayscale image with real-valued intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
    peak: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>, peak: f64) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage("zero-size image".into()));
        }
        if data.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !(peak.is_finite() && peak > 0.0) {
            return Err(Error::InvalidImage(format!(
                "peak must be positive, got {peak}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite pixel".into()));
        }
        Ok(Image {
            height,
            width,
            data,
            peak,
        })
    }

    /// Builds an image from rows, peak 255.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidImage("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Image::new(height, width, data, DEFAULT_PEAK)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "zero-size image");
        Image {
            height,
            width,
            data: vec![0.0; height * width],
            peak: DEFAULT_PEAK,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        let mut img = Image::zeros(height, width);
        img.data.fill(value);
        img
    }

    /// Internal constructor for derived images; callers guarantee the shape.
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>, peak: f64) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Image {
            height,
            width,
            data,
            peak,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        assert!(peak > 0.0 && peak.is_finite());
        self.peak = peak;
        self
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: self.shape(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_parts(
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
            self.peak,
        )
    }

    pub fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        Image::from_parts(
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            self.peak,
        )
    }

    pub fn scale(&self, s: f64) -> Image {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &Image) -> Image {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Image) -> Image {
        self.zip_map(other, |a, b| a - b)
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &Image) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copies out a `size_h x size_w` window starting at (row, col).
    pub fn crop(&self, row: usize, col: usize, size_h: usize, size_w: usize) -> Result<Image> {
        if row + size_h > self.height || col + size_w > self.width || size_h == 0 || size_w == 0 {
            return Err(Error::InvalidArgument(format!(
                "crop {size_h}x{size_w} at ({row},{col}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(size_h * size_w);
        for r in row..row + size_h {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + size_w]);
        }
        Ok(Image::from_parts(size_h, size_w, data, self.peak))
    }
}

/// Returns `img + n` with `n` i.i.d. N(0, sigma^2); the result is not clamped.
pub fn add_gaussian_noise(img: &Image, sigma: f64, rng: &mut Rng) -> Result<Image> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    let data = img
        .data()
        .iter()
        .map(|&v| v + sigma * rng.normal())
        .collect();
    Ok(Image::from_parts(
        img.height(),
        img.width(),
        data,
        img.peak(),
    ))
}
