//! Whole-window descriptors computed on the canonical 64×64 character window.

mod gist;
mod hog;
mod lbp;
mod sift;
mod surf;

pub use gist::{gist, GaborBank, GaborFilter};
pub use hog::hog;
pub use lbp::{lbp, lbp_code, uniform_bin};
pub use sift::sift_global;
pub use surf::{haar_responses, surf_global};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imagecore::{resize_bilinear, GrayImage, CANONICAL_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorKind {
    Hog,
    Sift,
    Surf,
    Lbp,
    Gist,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 5] = [Self::Gist, Self::Hog, Self::Lbp, Self::Sift, Self::Surf];

    /// Length of the single-window descriptor.
    pub fn base_dim(self) -> usize {
        DescriptorConfig::default().base_dim(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hog => "HOG",
            Self::Sift => "SIFT",
            Self::Surf => "SURF",
            Self::Lbp => "LBP",
            Self::Gist => "GIST",
        }
    }

    /// Stable one-byte tag used by the cache format.
    pub fn tag(self) -> u8 {
        match self {
            Self::Hog => 0,
            Self::Sift => 1,
            Self::Surf => 2,
            Self::Lbp => 3,
            Self::Gist => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        [Self::Hog, Self::Sift, Self::Surf, Self::Lbp, Self::Gist].into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown descriptor {s:?}")))
    }
}

/// Every tunable constant of the five descriptors in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    pub window: usize,
    pub hog_cell: usize,
    pub hog_bins: usize,
    pub hog_block_cells: usize,
    pub hog_epsilon: f64,
    pub hog_clip: f64,
    pub sift_grid: usize,
    pub sift_bins: usize,
    pub sift_sigma: f64,
    pub sift_clip: f64,
    pub surf_filter: usize,
    pub surf_grid: usize,
    pub gist_grid: usize,
    pub gabor_wavelengths: Vec<f64>,
    pub gabor_orientations: usize,
    /// Envelope σ as a multiple of the wavelength.
    pub gabor_sigma_ratio: f64,
    pub gabor_aspect: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            window: CANONICAL_SIZE,
            hog_cell: 8,
            hog_bins: 9,
            hog_block_cells: 2,
            hog_epsilon: 1e-6,
            hog_clip: 0.2,
            sift_grid: 4,
            sift_bins: 8,
            sift_sigma: 32.0,
            sift_clip: 0.2,
            surf_filter: 8,
            surf_grid: 4,
            gist_grid: 4,
            gabor_wavelengths: vec![4.0, 8.0, 16.0, 32.0],
            gabor_orientations: 8,
            gabor_sigma_ratio: 0.56,
            gabor_aspect: 0.5,
        }
    }
}

impl DescriptorConfig {
    pub fn base_dim(&self, kind: DescriptorKind) -> usize {
        match kind {
            DescriptorKind::Hog => {
                let cells = self.window / self.hog_cell;
                let blocks = cells + 1 - self.hog_block_cells;
                blocks * blocks * self.hog_block_cells * self.hog_block_cells * self.hog_bins
            }
            DescriptorKind::Sift => self.sift_grid * self.sift_grid * self.sift_bins,
            DescriptorKind::Surf => self.surf_grid * self.surf_grid * 4,
            DescriptorKind::Lbp => 59,
            DescriptorKind::Gist => {
                self.gabor_wavelengths.len() * self.gabor_orientations * self.gist_grid * self.gist_grid
            }
        }
    }
}

/// A fixed-length descriptor vector tagged with its kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    kind: DescriptorKind,
    pyramid: bool,
    values: Vec<f64>,
}

impl Descriptor {
    /// Checks the length against `base_dim` (×7 for pyramid descriptors) and finiteness.
    pub fn new(kind: DescriptorKind, pyramid: bool, values: Vec<f64>, base_dim: usize) -> Result<Self> {
        let expected = base_dim * if pyramid { 7 } else { 1 };
        if values.len() != expected {
            return Err(Error::DimensionContract { kind: kind.name(), expected, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{kind} descriptor has non-finite values")));
        }
        Ok(Self { kind, pyramid, values })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn pyramid(&self) -> bool {
        self.pyramid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Display name, e.g. `SIFT` or `SIFT7`.
    pub fn name(&self) -> String {
        variant_name(self.kind, self.pyramid)
    }
}

pub fn variant_name(kind: DescriptorKind, pyramid: bool) -> String {
    if pyramid {
        format!("{}7", kind.name())
    } else {
        kind.name().to_string()
    }
}

/// Scales `v` to unit L2 norm; vectors with norm below `guard` become zero.
pub(crate) fn l2_normalize(v: &mut [f64], guard: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < guard {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub(crate) fn check_window(img: &GrayImage, cfg: &DescriptorConfig) -> Result<()> {
    if img.width() != cfg.window || img.height() != cfg.window {
        return Err(Error::WrongWindowSize { expected: cfg.window, width: img.width(), height: img.height() });
    }
    Ok(())
}

/// Computes any descriptor kind with a shared configuration and Gabor bank.
#[derive(Clone)]
pub struct Extractor {
    config: DescriptorConfig,
    bank: GaborBank,
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(DescriptorConfig::default())
    }
}

impl Extractor {
    pub fn new(config: DescriptorConfig) -> Self {
        let bank = GaborBank::new(&config);
        Self { config, bank }
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn bank(&self) -> &GaborBank {
        &self.bank
    }

    pub fn base_dim(&self, kind: DescriptorKind) -> usize {
        self.config.base_dim(kind)
    }

    /// Describes a window that already has the canonical size.
    pub fn describe_window(&self, img: &GrayImage, kind: DescriptorKind) -> Result<Descriptor> {
        let values = match kind {
            DescriptorKind::Hog => hog(img, &self.config)?,
            DescriptorKind::Sift => sift_global(img, &self.config)?,
            DescriptorKind::Surf => surf_global(img, &self.config)?,
            DescriptorKind::Lbp => {
                check_window(img, &self.config)?;
                lbp(img)?
            }
            DescriptorKind::Gist => gist(img, &self.bank)?,
        };
        Descriptor::new(kind, false, values, self.base_dim(kind))
    }

    /// Resizes to the canonical window when needed, then describes.
    pub fn describe(&self, img: &GrayImage, kind: DescriptorKind) -> Result<Descriptor> {
        let w = self.config.window;
        if img.width() == w && img.height() == w {
            self.describe_window(img, kind)
        } else {
            self.describe_window(&resize_bilinear(img, w, w), kind)
        }
    }
}
