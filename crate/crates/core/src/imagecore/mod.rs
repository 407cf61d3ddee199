//! Grayscale image primitives shared by the descriptors and the form pipeline.
//!
//! Intensities are stored as `f64` in row-major order with a nominal range of
//! `[0, 1]` (0 is black ink, 1 is white paper).

mod filter;
mod geometry;
mod pgm;

pub use filter::{convolve, convolve_direct, gaussian_kernel, ConvolutionPlan, Kernel, Spectrum};
pub use geometry::{resize_bilinear, warp_projective, Homography};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};

use crate::error::{Error, Result};

/// Side of the canonical character window every descriptor consumes.
pub const CANONICAL_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite intensity at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self { width, height, data: vec![value; width * height] }
    }

    /// Builds an image from `f(x, y)`.
    ///
    /// Panics if `f` produces a non-finite value or a dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                assert!(v.is_finite(), "non-finite intensity at ({x}, {y})");
                data.push(v);
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Applies `f` to every intensity.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(self.width, self.height, |x, y| f(self.get(x, y)))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Copies out the `width`×`height` sub-window whose top-left pixel is `(left, top)`.
    pub fn crop(&self, left: usize, top: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || left + width > self.width || top + height > self.height {
            return Err(Error::RectOutOfBounds {
                top,
                left,
                height,
                width,
                img_width: self.width,
                img_height: self.height,
            });
        }
        Ok(Self::from_fn(width, height, |x, y| self.get(left + x, top + y)))
    }

    pub(crate) fn require_min(&self, min: usize) -> Result<()> {
        if self.width < min || self.height < min {
            return Err(Error::ImageTooSmall { width: self.width, height: self.height, min });
        }
        Ok(())
    }
}

/// Per-pixel gradient quantities; orientation is unsigned, in `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

/// Folds an angle from `atan2` into `[0, π)`.
#[inline]
pub fn unsigned_orientation(gy: f64, gx: f64) -> f64 {
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += std::f64::consts::PI;
    }
    if theta >= std::f64::consts::PI {
        theta = 0.0;
    }
    theta
}

/// Central differences `(I[x+1] - I[x-1]) / 2` in the interior and one-sided
/// differences on the first and last row/column.
pub fn gradients(img: &GrayImage) -> Result<GradientField> {
    img.require_min(3)?;
    let (w, h) = (img.width, img.height);
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(w - 1, y) - img.get(w - 2, y)
            } else {
                (img.get(x + 1, y) - img.get(x - 1, y)) * 0.5
            };
            gy[i] = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, h - 1) - img.get(x, h - 2)
            } else {
                (img.get(x, y + 1) - img.get(x, y - 1)) * 0.5
            };
        }
    }
    let magnitude = gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    let orientation = gx.iter().zip(&gy).map(|(&a, &b)| unsigned_orientation(b, a)).collect();
    Ok(GradientField { width: w, height: h, gx, gy, magnitude, orientation })
}

/// Summed-area table with a zero first row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table entry: sum of all pixels with `row < i` and `col < j`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.table[i * (self.width + 1) + j]
    }

    /// Sum over the `height`×`width` rectangle with top-left pixel `(left, top)`.
    pub fn box_sum(&self, top: usize, left: usize, height: usize, width: usize) -> Result<f64> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::RectOutOfBounds {
                top,
                left,
                height,
                width,
                img_width: self.width,
                img_height: self.height,
            });
        }
        let (b, r) = (top + height, left + width);
        Ok(self.at(b, r) - self.at(top, r) - self.at(b, left) + self.at(top, left))
    }
}

pub fn integral_image(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width, img.height);
    let stride = w + 1;
    let mut table = vec![0.0; stride * (h + 1)];
    for i in 1..=h {
        for j in 1..=w {
            table[i * stride + j] = img.get(j - 1, i - 1) + table[(i - 1) * stride + j]
                + table[i * stride + j - 1]
                - table[(i - 1) * stride + j - 1];
        }
    }
    IntegralImage { width: w, height: h, table }
}

/// Maps an arbitrary index into `0..n` by reflect-101 mirroring (`dcb|abcd|cba`).
#[inline]
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}
