use std::f64::consts::PI;

use super::{check_window, DescriptorConfig};
use crate::error::Result;
use crate::imagecore::{gradients, GrayImage};

/// Unnormalized per-cell orientation histograms, `cells_y × cells_x × bins`.
///
/// Bin `b` is centred on `b·π/bins`; every vote is split linearly between the
/// two nearest bin centres, wrapping at π.
pub fn hog_cell_histograms(img: &GrayImage, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    check_window(img, cfg)?;
    let g = gradients(img)?;
    let cells = cfg.window / cfg.hog_cell;
    let bins = cfg.hog_bins;
    let bin_width = PI / bins as f64;
    let mut hist = vec![0.0; cells * cells * bins];
    for y in 0..cells * cfg.hog_cell {
        for x in 0..cells * cfg.hog_cell {
            let i = y * g.width + x;
            let mag = g.magnitude[i];
            if mag == 0.0 {
                continue;
            }
            let pos = g.orientation[i] / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = lower as usize % bins;
            let b1 = (b0 + 1) % bins;
            let cell = (y / cfg.hog_cell) * cells + x / cfg.hog_cell;
            hist[cell * bins + b0] += mag * (1.0 - frac);
            hist[cell * bins + b1] += mag * frac;
        }
    }
    Ok(hist)
}

/// Histogram of oriented gradients over the whole window.
///
/// Cells are grouped into overlapping square blocks (stride one cell); each
/// block is L2-normalized, clipped and renormalized.
pub fn hog(img: &GrayImage, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    let hist = hog_cell_histograms(img, cfg)?;
    let cells = cfg.window / cfg.hog_cell;
    let bins = cfg.hog_bins;
    let bc = cfg.hog_block_cells;
    let blocks = cells + 1 - bc;
    let eps2 = cfg.hog_epsilon * cfg.hog_epsilon;
    let mut out = Vec::with_capacity(blocks * blocks * bc * bc * bins);
    let mut block = Vec::with_capacity(bc * bc * bins);
    for by in 0..blocks {
        for bx in 0..blocks {
            block.clear();
            for cy in by..by + bc {
                for cx in bx..bx + bc {
                    let c = cy * cells + cx;
                    block.extend_from_slice(&hist[c * bins..(c + 1) * bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
            block.iter_mut().for_each(|v| *v = (*v / norm).min(cfg.hog_clip));
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + eps2).sqrt();
            out.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(out)
}
