//! Overlapping seven-region spatial partition: the full window plus three
//! half-height strips and three half-width strips, each offset by a quarter
//! of the window so consecutive strips overlap by half.

use crate::descriptors::{Descriptor, DescriptorKind, Extractor};
use crate::error::{Error, Result};
use crate::imagecore::{resize_bilinear, GrayImage};

/// Pixel rectangle `[left, left+width) × [top, top+height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
}

/// Regions in concatenation order: full, top, vertical middle, bottom, left,
/// horizontal middle, right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSet(pub [Rect; 7]);

impl RegionSet {
    pub fn rects(&self) -> &[Rect; 7] {
        &self.0
    }
}

pub const REGION_NAMES: [&str; 7] = ["full", "top", "v-mid", "bottom", "left", "h-mid", "right"];

pub fn regions(width: usize, height: usize) -> Result<RegionSet> {
    if width < 4 || height < 4 {
        return Err(Error::ImageTooSmall { width, height, min: 4 });
    }
    let strip_h = height.div_ceil(2);
    let strip_w = width.div_ceil(2);
    let row = |top| Rect { left: 0, top, width, height: strip_h };
    let col = |left| Rect { left, top: 0, width: strip_w, height };
    Ok(RegionSet([
        Rect { left: 0, top: 0, width, height },
        row(0),
        row(height / 4),
        row(height - strip_h),
        col(0),
        col(width / 4),
        col(width - strip_w),
    ]))
}

/// The X7 descriptor: each region is cropped, resized to the canonical window
/// and described; the seven vectors are concatenated in region order.
pub fn describe7(extractor: &Extractor, img: &GrayImage, kind: DescriptorKind) -> Result<Descriptor> {
    let set = regions(img.width(), img.height())?;
    let window = extractor.config().window;
    let base = extractor.base_dim(kind);
    let mut values = Vec::with_capacity(base * 7);
    for r in set.rects() {
        let crop = img.crop(r.left, r.top, r.width, r.height)?;
        let canonical = if r.width == window && r.height == window { crop } else { resize_bilinear(&crop, window, window) };
        values.extend(extractor.describe_window(&canonical, kind)?.into_values());
    }
    Descriptor::new(kind, true, values, base)
}

/// Base descriptor or its seven-region pyramid.
pub fn describe(extractor: &Extractor, img: &GrayImage, kind: DescriptorKind, pyramid: bool) -> Result<Descriptor> {
    if pyramid {
        describe7(extractor, img, kind)
    } else {
        extractor.describe(img, kind)
    }
}
