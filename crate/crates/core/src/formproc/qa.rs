use std::collections::BTreeSet;
use std::fmt;

use crate::imagecore::GrayImage;

/// Advisory quality flags for a cropped cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QaFlag {
    /// Several sizeable ink blobs: likely a cropping error.
    MultiComponent,
    /// Almost no ink: missing or misplaced writing.
    NearEmpty,
    /// Faint or washed-out: an unclear letter.
    LowContrast,
}

impl QaFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::MultiComponent => "multi-component",
            Self::NearEmpty => "near-empty",
            Self::LowContrast => "low-contrast",
        }
    }
}

impl fmt::Display for QaFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QaThresholds {
    /// More components than this (each at least `min_component_fraction`
    /// of the area) raises `MultiComponent`.
    pub max_components: usize,
    pub min_component_fraction: f64,
    pub min_ink_fraction: f64,
    pub min_range: f64,
}

impl Default for QaThresholds {
    fn default() -> Self {
        Self { max_components: 4, min_component_fraction: 0.01, min_ink_fraction: 0.005, min_range: 0.15 }
    }
}

/// Otsu threshold over 256 intensity levels; `None` when the image has a
/// single level. Pixels at or below the returned level are ink.
pub fn otsu_threshold(img: &GrayImage) -> Option<f64> {
    let mut hist = [0usize; 256];
    for &v in img.data() {
        hist[(v.clamp(0.0, 1.0) * 255.0).round() as usize] += 1;
    }
    let n = img.data().len() as f64;
    let total: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for (t, &c) in hist.iter().enumerate().take(255) {
        w0 += c as f64;
        s0 += t as f64 * c as f64;
        let w1 = n - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let diff = s0 / w0 - (total - s0) / w1;
        let between = w0 * w1 * diff * diff;
        if best.is_none_or(|(b, _)| between > b) {
            best = Some((between, t));
        }
    }
    best.map(|(_, t)| t as f64 / 255.0)
}

/// Otsu-binarized ink mask, row-major.
pub fn ink_mask(img: &GrayImage) -> Vec<bool> {
    match otsu_threshold(img) {
        Some(t) => img.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0 <= t).collect(),
        None => vec![false; img.data().len()],
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Sizes of the 8-connected components of `mask`, largest first.
pub fn ink_components(mask: &[bool], width: usize, height: usize) -> Vec<usize> {
    assert_eq!(mask.len(), width * height, "mask size");
    let mut parent: Vec<usize> = (0..mask.len()).collect();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if !mask[i] {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut union = |j: usize| {
                if mask[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            };
            if x > 0 {
                union(i - 1);
            }
            if y > 0 {
                union(i - width);
                if x > 0 {
                    union(i - width - 1);
                }
                if x + 1 < width {
                    union(i - width + 1);
                }
            }
        }
    }
    let mut sizes = vec![0usize; mask.len()];
    for i in 0..mask.len() {
        if mask[i] {
            let r = find(&mut parent, i);
            sizes[r] += 1;
        }
    }
    let mut out: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

pub fn qa_flags(cell: &GrayImage) -> BTreeSet<QaFlag> {
    qa_flags_with(cell, &QaThresholds::default())
}

pub fn qa_flags_with(cell: &GrayImage, th: &QaThresholds) -> BTreeSet<QaFlag> {
    let mut flags = BTreeSet::new();
    let area = cell.data().len() as f64;
    let mask = ink_mask(cell);
    let ink = mask.iter().filter(|&&m| m).count() as f64;
    let big = ink_components(&mask, cell.width(), cell.height())
        .into_iter()
        .filter(|&s| s as f64 >= th.min_component_fraction * area)
        .count();
    if big > th.max_components {
        flags.insert(QaFlag::MultiComponent);
    }
    if ink < th.min_ink_fraction * area {
        flags.insert(QaFlag::NearEmpty);
    }
    let (lo, hi) = cell.min_max();
    if hi - lo < th.min_range {
        flags.insert(QaFlag::LowContrast);
    }
    flags
}
