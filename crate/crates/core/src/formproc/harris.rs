use crate::error::{Error, Result};
use crate::imagecore::{convolve, gaussian_kernel, gradients, GrayImage};

/// Smoothing scale of the structure tensor.
pub const HARRIS_SIGMA: f64 = 1.5;
pub const HARRIS_K: f64 = 0.04;
const MIN_SIDE: usize = 7;

/// A detected corner with subpixel position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: f64,
    pub y: f64,
    pub response: f64,
}

/// Largest response any image with intensities in `[0, 1]` can produce:
/// tensor entries are bounded by 1, so `R ≤ AB − k(A+B)² ≤ 1 − 4k`.
pub fn harris_response_bound(k: f64) -> f64 {
    1.0 - 4.0 * k
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k < 0.25) {
        return Err(Error::InvalidParameter(format!("Harris k must be in (0, 0.25), got {k}")));
    }
    Ok(())
}

/// Per-pixel `det(M) − k·trace(M)²` with `M` the Gaussian-smoothed
/// (σ = 1.5, reflect-101 borders) tensor of central-difference gradients.
pub fn harris_response(img: &GrayImage, k: f64) -> Result<GrayImage> {
    img.require_min(MIN_SIDE)?;
    check_k(k)?;
    let g = gradients(img)?;
    let (w, h) = (img.width(), img.height());
    let product = |f: &dyn Fn(usize) -> f64| GrayImage::new(w, h, (0..w * h).map(f).collect());
    let kernel = gaussian_kernel(HARRIS_SIGMA);
    let a = convolve(&product(&|i| g.gx[i] * g.gx[i])?, &kernel)?;
    let b = convolve(&product(&|i| g.gy[i] * g.gy[i])?, &kernel)?;
    let c = convolve(&product(&|i| g.gx[i] * g.gy[i])?, &kernel)?;
    let r = a
        .data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .map(|((&a, &b), &c)| a * b - c * c - k * (a + b) * (a + b))
        .collect();
    GrayImage::new(w, h, r)
}

/// 3×3 local maxima above `threshold`, strongest first. On plateaus the
/// first pixel in raster order wins. Positions are refined by a parabola
/// through the neighbours along each axis.
pub fn response_peaks(resp: &GrayImage, threshold: f64) -> Vec<Corner> {
    let (w, h) = (resp.width() as isize, resp.height() as isize);
    let at = |x: isize, y: isize| resp.get(x as usize, y as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let r = at(x, y);
            if r <= threshold {
                continue;
            }
            let mut peak = true;
            'nbhd: for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = at(nx, ny);
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > r || (earlier && n == r) {
                        peak = false;
                        break 'nbhd;
                    }
                }
            }
            if !peak {
                continue;
            }
            let offset = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
                (Some(l), Some(u)) if l - 2.0 * r + u < 0.0 => (0.5 * (l - u) / (l - 2.0 * r + u)).clamp(-0.5, 0.5),
                _ => 0.0,
            };
            let sx = offset((x > 0).then(|| at(x - 1, y)), (x + 1 < w).then(|| at(x + 1, y)));
            let sy = offset((y > 0).then(|| at(x, y - 1)), (y + 1 < h).then(|| at(x, y + 1)));
            out.push(Corner { x: x as f64 + sx, y: y as f64 + sy, response: r });
        }
    }
    out.sort_by(|a, b| b.response.total_cmp(&a.response));
    out
}

/// Harris corners with response above `threshold`, strongest first.
pub fn harris(img: &GrayImage, k: f64, threshold: f64) -> Result<Vec<Corner>> {
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(Error::InvalidParameter(format!("Harris threshold must be finite and non-negative, got {threshold}")));
    }
    Ok(response_peaks(&harris_response(img, k)?, threshold))
}

/// Moves `(x, y)` to the least-squares intersection of the edges around
/// it: every gradient `g` at `q` asks for `g·(q − p) = 0`. Pixels within
/// one pixel of the estimate are skipped, since gradients there point along
/// the corner diagonal rather than across an edge.
pub fn refine_corner(img: &GrayImage, x: f64, y: f64, radius: usize) -> Result<(f64, f64)> {
    let g = gradients(img)?;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let r = radius as isize;
    let (mut px, mut py) = (x, y);
    for _ in 0..50 {
        let (cx, cy) = (px.round() as isize, py.round() as isize);
        let (mut a, mut b, mut c, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for qy in (cy - r).max(0)..=(cy + r).min(h - 1) {
            for qx in (cx - r).max(0)..=(cx + r).min(w - 1) {
                if (qx as f64 - px).abs() <= 1.0 && (qy as f64 - py).abs() <= 1.0 {
                    continue;
                }
                let i = (qy * w + qx) as usize;
                let (gx, gy) = (g.gx[i], g.gy[i]);
                a += gx * gx;
                b += gx * gy;
                c += gy * gy;
                bx += gx * gx * qx as f64 + gx * gy * qy as f64;
                by += gx * gy * qx as f64 + gy * gy * qy as f64;
            }
        }
        let det = a * c - b * b;
        if det <= 1e-12 * (a + c).powi(2).max(1e-300) {
            break;
        }
        let nx = (c * bx - b * by) / det;
        let ny = (a * by - b * bx) / det;
        // Stay near the detection; a jump means the window saw no corner.
        if (nx - x).hypot(ny - y) > radius as f64 {
            break;
        }
        let moved = (nx - px).hypot(ny - py);
        (px, py) = (nx, ny);
        if moved < 1e-4 {
            break;
        }
    }
    Ok((px, py))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reflect(i: isize, n: usize) -> usize {
        let n = n as isize;
        let mut i = i;
        while i < 0 || i >= n {
            i = if i < 0 { -i } else { 2 * (n - 1) - i };
        }
        i as usize
    }

    /// Per-pixel recomputation: every tensor entry is summed directly over
    /// the Gaussian window.
    fn naive_response(img: &GrayImage, k: f64) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let grad = |x: usize, y: usize| {
            let gx = if x == 0 {
                img.get(1, y) - img.get(0, y)
            } else if x == w - 1 {
                img.get(x, y) - img.get(x - 1, y)
            } else {
                (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0
            };
            let gy = if y == 0 {
                img.get(x, 1) - img.get(x, 0)
            } else if y == h - 1 {
                img.get(x, y) - img.get(x, y - 1)
            } else {
                (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0
            };
            (gx, gy)
        };
        let r = (3.0 * HARRIS_SIGMA).ceil() as isize;
        let mut norm = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                norm += (-((dx * dx + dy * dy) as f64) / (2.0 * HARRIS_SIGMA * HARRIS_SIGMA)).exp();
            }
        }
        let mut out = Vec::new();
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * HARRIS_SIGMA * HARRIS_SIGMA)).exp() / norm;
                        let (gx, gy) = grad(reflect(x + dx, w), reflect(y + dy, h));
                        a += wgt * gx * gx;
                        b += wgt * gy * gy;
                        c += wgt * gx * gy;
                    }
                }
                out.push(a * b - c * c - k * (a + b).powi(2));
            }
        }
        out
    }

    /// Peaks by comparing every pixel with its neighbourhood directly.
    fn naive_peaks(r: &[f64], w: usize, h: usize, threshold: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = r[y * w + x];
                let beaten = (y.saturating_sub(1)..=(y + 1).min(h - 1)).any(|ny| {
                    (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|nx| {
                        let n = r[ny * w + nx];
                        (nx, ny) != (x, y) && (n > v || (n == v && (ny, nx) < (y, x)))
                    })
                });
                if v > threshold && !beaten {
                    out.push((x, y));
                }
            }
        }
        out
    }

    fn square(canvas: usize, lo: usize, hi: usize) -> GrayImage {
        GrayImage::from_fn(canvas, canvas, |x, y| if (lo..hi).contains(&x) && (lo..hi).contains(&y) { 1.0 } else { 0.0 })
    }

    #[test]
    fn response_matches_naive_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let img = GrayImage::from_fn(32, 32, |_, _| rng.random());
            let fast = harris_response(&img, HARRIS_K).unwrap();
            let slow = naive_response(&img, HARRIS_K);
            for (a, b) in fast.data().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
            let threshold = 0.001;
            let mut got: Vec<(usize, usize)> =
                harris(&img, HARRIS_K, threshold).unwrap().iter().map(|c| (c.x.round() as usize, c.y.round() as usize)).collect();
            got.sort_by_key(|&(x, y)| (y, x));
            assert_eq!(got, naive_peaks(&slow, 32, 32, threshold));
        }
    }

    #[test]
    fn constant_image_has_no_corners() {
        assert!(harris(&GrayImage::filled(20, 20, 0.3), HARRIS_K, 0.0).unwrap().is_empty());
    }

    #[test]
    fn square_corners_found() {
        let img = square(64, 22, 42);
        let corners = harris(&img, HARRIS_K, 1e-4).unwrap();
        assert!(corners.len() >= 4);
        // The response map is the reference: its four largest peaks must be
        // the four quadrant maxima.
        let resp = harris_response(&img, HARRIS_K).unwrap();
        for (qx, qy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let mut best = (f64::MIN, 0, 0);
            for y in qy * 32..qy * 32 + 32 {
                for x in qx * 32..qx * 32 + 32 {
                    if resp.get(x, y) > best.0 {
                        best = (resp.get(x, y), x, y);
                    }
                }
            }
            assert!(corners[..4].iter().any(|c| c.response == best.0));
        }
        let truth = [(21.5, 21.5), (41.5, 21.5), (21.5, 41.5), (41.5, 41.5)];
        for c in &corners[..4] {
            assert!(truth.iter().any(|&(tx, ty)| (c.x - tx).abs() <= 2.0 && (c.y - ty).abs() <= 2.0), "{c:?}");
        }
        assert!(corners.windows(2).all(|p| p[0].response >= p[1].response));
    }

    #[test]
    fn straight_edge_is_not_a_corner() {
        let img = GrayImage::from_fn(64, 64, |x, _| if x < 30 { 0.0 } else { 1.0 });
        let resp = harris_response(&img, HARRIS_K).unwrap();
        let bound = harris_response_bound(HARRIS_K);
        assert!(resp.data().iter().all(|&r| r <= 0.01 * bound));
        assert!(harris(&img, HARRIS_K, 0.01 * bound).unwrap().is_empty());
    }

    #[test]
    fn rejects_small_images_and_bad_k() {
        assert!(matches!(harris(&GrayImage::filled(6, 9, 0.0), HARRIS_K, 0.0), Err(Error::ImageTooSmall { .. })));
        assert!(harris(&GrayImage::filled(9, 9, 0.0), 0.3, 0.0).is_err());
        assert!(harris(&GrayImage::filled(9, 9, 0.0), HARRIS_K, -1.0).is_err());
    }

    #[test]
    fn refinement_finds_exact_pixel_edge_corner() {
        let img = square(40, 12, 30);
        let (x, y) = refine_corner(&img, 13.4, 11.2, 5).unwrap();
        assert!((x - 11.5).abs() < 1e-9 && (y - 11.5).abs() < 1e-9, "({x}, {y})");
        let (x, y) = refine_corner(&img, 30.0, 30.0, 5).unwrap();
        assert!((x - 29.5).abs() < 1e-9 && (y - 29.5).abs() < 1e-9, "({x}, {y})");
    }
}
