use std::f64::consts::PI;

use super::{check_window, l2_normalize, DescriptorConfig};
use crate::error::Result;
use crate::imagecore::{gradients, GrayImage};

const NORM_GUARD: f64 = 1e-12;

/// SIFT descriptor of the whole window treated as a single keypoint region.
///
/// Gradient magnitudes, weighted by a Gaussian centred on the window, vote
/// trilinearly into a `grid × grid` spatial layout and `bins` unsigned
/// orientations. Layout: row-major cells, orientation fastest.
pub fn sift_global(img: &GrayImage, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    check_window(img, cfg)?;
    let g = gradients(img)?;
    let grid = cfg.sift_grid;
    let bins = cfg.sift_bins;
    let cell = cfg.window as f64 / grid as f64;
    let centre = (cfg.window as f64 - 1.0) / 2.0;
    let two_sigma2 = 2.0 * cfg.sift_sigma * cfg.sift_sigma;
    let mut hist = vec![0.0; grid * grid * bins];

    for y in 0..cfg.window {
        let v = (y as f64 + 0.5) / cell - 0.5;
        let v0 = v.floor();
        let fv = v - v0;
        for x in 0..cfg.window {
            let i = y * g.width + x;
            let mag = g.magnitude[i];
            if mag == 0.0 {
                continue;
            }
            let (dx, dy) = (x as f64 - centre, y as f64 - centre);
            let weight = mag * (-(dx * dx + dy * dy) / two_sigma2).exp();
            let u = (x as f64 + 0.5) / cell - 0.5;
            let u0 = u.floor();
            let fu = u - u0;
            let o = g.orientation[i] / (PI / bins as f64);
            let o0 = o.floor();
            let fo = o - o0;
            let b0 = o0 as usize % bins;
            let b1 = (b0 + 1) % bins;
            for (row, wv) in [(v0, 1.0 - fv), (v0 + 1.0, fv)] {
                if row < 0.0 || row >= grid as f64 {
                    continue;
                }
                for (col, wu) in [(u0, 1.0 - fu), (u0 + 1.0, fu)] {
                    if col < 0.0 || col >= grid as f64 {
                        continue;
                    }
                    let base = (row as usize * grid + col as usize) * bins;
                    let w = weight * wv * wu;
                    hist[base + b0] += w * (1.0 - fo);
                    hist[base + b1] += w * fo;
                }
            }
        }
    }

    l2_normalize(&mut hist, NORM_GUARD);
    hist.iter_mut().for_each(|v| *v = v.min(cfg.sift_clip));
    l2_normalize(&mut hist, NORM_GUARD);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_window_is_zero() {
        let d = sift_global(&GrayImage::filled(64, 64, 0.9), &DescriptorConfig::default()).unwrap();
        assert_eq!(d, vec![0.0; 128]);
    }

    #[test]
    fn unit_norm_for_textured_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>());
            let d = sift_global(&img, &DescriptorConfig::default()).unwrap();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
            assert!(d.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn additive_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>());
        let a = sift_global(&img, &DescriptorConfig::default()).unwrap();
        let b = sift_global(&img.map(|v| v + 0.1), &DescriptorConfig::default()).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }
}
