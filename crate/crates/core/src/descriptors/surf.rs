use super::{check_window, l2_normalize, DescriptorConfig};
use crate::error::Result;
use crate::imagecore::{integral_image, GrayImage};

const NORM_GUARD: f64 = 1e-12;

/// Haar wavelet responses at every pixel.
///
/// The `f×f` filter centred on a pixel spans offsets `-f/2 .. f/2-1`; `dx` is
/// (right half − left half) / f², `dy` is (bottom half − top half) / f².
/// Pixels outside the window are replicated from the nearest edge.
pub fn haar_responses(img: &GrayImage, cfg: &DescriptorConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w, h) = (img.width(), img.height());
    let f = cfg.surf_filter;
    let half = f / 2;
    // Responses are differences, so centring first only shrinks rounding error.
    let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
    let padded = GrayImage::from_fn(w + f, h + f, |x, y| {
        let sx = (x as isize - half as isize).clamp(0, w as isize - 1) as usize;
        let sy = (y as isize - half as isize).clamp(0, h as isize - 1) as usize;
        img.get(sx, sy) - mean
    });
    let ii = integral_image(&padded);
    let area = (f * f) as f64;
    let mut dx = Vec::with_capacity(w * h);
    let mut dy = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // Pixel (x, y) sits at (x + half, y + half) in the padded image, so
            // its filter's top-left corner is (x, y).
            let left = ii.box_sum(y, x, f, half)?;
            let right = ii.box_sum(y, x + half, f, half)?;
            let top = ii.box_sum(y, x, half, f)?;
            let bottom = ii.box_sum(y + half, x, half, f)?;
            dx.push((right - left) / area);
            dy.push((bottom - top) / area);
        }
    }
    Ok((dx, dy))
}

/// Per-cell `(Σdx, Σ|dx|, Σdy, Σ|dy|)` before normalization.
pub fn surf_cell_sums(img: &GrayImage, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    check_window(img, cfg)?;
    let (dx, dy) = haar_responses(img, cfg)?;
    let grid = cfg.surf_grid;
    let cell = cfg.window / grid;
    let mut out = vec![0.0; grid * grid * 4];
    for y in 0..grid * cell {
        for x in 0..grid * cell {
            let i = y * cfg.window + x;
            let base = ((y / cell) * grid + x / cell) * 4;
            out[base] += dx[i];
            out[base + 1] += dx[i].abs();
            out[base + 2] += dy[i];
            out[base + 3] += dy[i].abs();
        }
    }
    Ok(out)
}

/// SURF-style descriptor of the whole window: cell summary statistics of box
/// filter responses, globally L2-normalized.
pub fn surf_global(img: &GrayImage, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    let mut v = surf_cell_sums(img, cfg)?;
    l2_normalize(&mut v, NORM_GUARD);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_window_is_zero() {
        let d = surf_global(&GrayImage::filled(64, 64, 0.4), &DescriptorConfig::default()).unwrap();
        assert_eq!(d.len(), 64);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_has_positive_dx_and_no_dy() {
        let img = GrayImage::from_fn(64, 64, |x, _| x as f64 / 64.0);
        let sums = surf_cell_sums(&img, &DescriptorConfig::default()).unwrap();
        for c in sums.chunks(4) {
            assert!(c[0] > 0.0);
            assert!((c[0] - c[1]).abs() < 1e-12);
            assert!(c[2].abs() < 1e-12 && c[3] < 1e-12);
        }
    }

    #[test]
    fn cell_sums_match_naive_box_filters() {
        let cfg = DescriptorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>());
        let at = |x: isize, y: isize| img.get(x.clamp(0, 63) as usize, y.clamp(0, 63) as usize);
        let mut expected = vec![0.0; 64];
        for y in 0..64isize {
            for x in 0..64isize {
                let (mut l, mut r, mut t, mut b) = (0.0, 0.0, 0.0, 0.0);
                for oy in -4..4 {
                    for ox in -4..4 {
                        let v = at(x + ox, y + oy);
                        if ox < 0 { l += v } else { r += v }
                        if oy < 0 { t += v } else { b += v }
                    }
                }
                let (dx, dy) = ((r - l) / 64.0, (b - t) / 64.0);
                let base = ((y / 16) * 4 + x / 16) as usize * 4;
                expected[base] += dx;
                expected[base + 1] += dx.abs();
                expected[base + 2] += dy;
                expected[base + 3] += dy.abs();
            }
        }
        let got = surf_cell_sums(&img, &cfg).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
