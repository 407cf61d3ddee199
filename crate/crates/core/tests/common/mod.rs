//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Everything here is written from the definitions with
//! plain per-pixel loops: no integral images, FFTs or cached tables.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::PI;

use glyphrec::imagecore::GrayImage;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::from_fn(width, height, |_, _| rng.random())
}

/// Central differences inside, one-sided differences on the border.
pub fn gradient(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let gx = match x {
        0 => img.get(1, y) - img.get(0, y),
        _ if x == w - 1 => img.get(x, y) - img.get(x - 1, y),
        _ => (img.get(x + 1, y) - img.get(x - 1, y)) / 2.0,
    };
    let gy = match y {
        0 => img.get(x, 1) - img.get(x, 0),
        _ if y == h - 1 => img.get(x, y) - img.get(x, y - 1),
        _ => (img.get(x, y + 1) - img.get(x, y - 1)) / 2.0,
    };
    (gx, gy)
}

/// Magnitude and orientation folded into [0, π).
fn oriented(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (gx, gy) = gradient(img, x, y);
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta = 0.0;
    }
    (gx.hypot(gy), theta)
}

/// Linear vote share of orientation `theta` for bin `b` of `bins` bins
/// centred on `b·π/bins`, with wrap-around at π.
fn orientation_share(theta: f64, b: usize, bins: usize) -> f64 {
    let pos = theta / (PI / bins as f64);
    let d = (pos - b as f64).rem_euclid(bins as f64);
    let d = d.min(bins as f64 - d);
    (1.0 - d).max(0.0)
}

fn l2_normalize(v: &mut [f64], guard: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x = if n < guard { 0.0 } else { *x / n };
    }
}

/// HOG: 8×8 cells, 9 bins, 2×2-cell blocks with stride one cell, every block
/// histogram recomputed from its pixels.
pub fn naive_hog(img: &GrayImage) -> Vec<f64> {
    let cell_hist = |cx: usize, cy: usize| -> Vec<f64> {
        (0..9)
            .map(|b| {
                let mut acc = 0.0;
                for y in cy * 8..cy * 8 + 8 {
                    for x in cx * 8..cx * 8 + 8 {
                        let (m, t) = oriented(img, x, y);
                        acc += m * orientation_share(t, b, 9);
                    }
                }
                acc
            })
            .collect()
    };
    let mut out = Vec::new();
    for by in 0..7 {
        for bx in 0..7 {
            let mut block: Vec<f64> = Vec::new();
            for cy in by..by + 2 {
                for cx in bx..bx + 2 {
                    block.extend(cell_hist(cx, cy));
                }
            }
            let n = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
            block.iter_mut().for_each(|v| *v = (*v / n).min(0.2));
            let n = (block.iter().map(|v| v * v).sum::<f64>() + 1e-12).sqrt();
            out.extend(block.iter().map(|v| v / n));
        }
    }
    out
}

/// Whole-window SIFT: every (cell, bin) entry is the sum over all pixels of
/// magnitude × Gaussian(σ = 32) × spatial tent × orientation tent.
pub fn naive_sift(img: &GrayImage) -> Vec<f64> {
    let tent = |t: f64| (1.0 - t.abs()).max(0.0);
    let centre = 31.5;
    let mut out = Vec::with_capacity(128);
    for row in 0..4 {
        for col in 0..4 {
            for b in 0..8 {
                let mut acc = 0.0;
                for y in 0..64 {
                    for x in 0..64 {
                        let (m, t) = oriented(img, x, y);
                        let (dx, dy) = (x as f64 - centre, y as f64 - centre);
                        let g = (-(dx * dx + dy * dy) / (2.0 * 32.0 * 32.0)).exp();
                        let u = (x as f64 + 0.5) / 16.0 - 0.5;
                        let v = (y as f64 + 0.5) / 16.0 - 0.5;
                        acc += m * g * tent(u - col as f64) * tent(v - row as f64) * orientation_share(t, b, 8);
                    }
                }
                out.push(acc);
            }
        }
    }
    l2_normalize(&mut out, 1e-12);
    out.iter_mut().for_each(|v| *v = v.min(0.2));
    l2_normalize(&mut out, 1e-12);
    out
}

/// Haar responses summed tap by tap: the 8×8 window at (x, y) covers offsets
/// −4..=3 with edge replication; halves are weighted ±1 and divided by 64.
pub fn naive_haar(img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let at = |dx: isize, dy: isize| img.get((x as isize + dx).clamp(0, w - 1) as usize, (y as isize + dy).clamp(0, h - 1) as usize);
    let (mut dx, mut dy) = (0.0, 0.0);
    for oy in -4..4 {
        for ox in -4..4 {
            let v = at(ox, oy);
            dx += if ox >= 0 { v } else { -v };
            dy += if oy >= 0 { v } else { -v };
        }
    }
    (dx / 64.0, dy / 64.0)
}

/// Per-cell (Σdx, Σ|dx|, Σdy, Σ|dy|) on a 4×4 grid of 16×16 cells.
pub fn naive_surf_sums(img: &GrayImage) -> Vec<f64> {
    let mut out = Vec::with_capacity(64);
    for cy in 0..4 {
        for cx in 0..4 {
            let mut s = [0.0; 4];
            for y in cy * 16..cy * 16 + 16 {
                for x in cx * 16..cx * 16 + 16 {
                    let (dx, dy) = naive_haar(img, x, y);
                    s[0] += dx;
                    s[1] += dx.abs();
                    s[2] += dy;
                    s[3] += dy.abs();
                }
            }
            out.extend(s);
        }
    }
    out
}

pub fn naive_surf(img: &GrayImage) -> Vec<f64> {
    let mut v = naive_surf_sums(img);
    l2_normalize(&mut v, 1e-12);
    v
}

/// Uniform LBP histogram from explicit neighbour comparisons.
pub fn naive_lbp(img: &GrayImage) -> Vec<f64> {
    let is_uniform = |code: u32| (0..8).filter(|&i| (code >> i) & 1 != (code >> ((i + 1) % 8)) & 1).count() <= 2;
    let uniform: Vec<u32> = (0..256).filter(|&c| is_uniform(c)).collect();
    assert_eq!(uniform.len(), 58);
    let mut hist = vec![0.0; 59];
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let c = img.get(x, y);
            // Clockwise from the top-left neighbour.
            let ring = [
                img.get(x - 1, y - 1),
                img.get(x, y - 1),
                img.get(x + 1, y - 1),
                img.get(x + 1, y),
                img.get(x + 1, y + 1),
                img.get(x, y + 1),
                img.get(x - 1, y + 1),
                img.get(x - 1, y),
            ];
            let code = ring.iter().enumerate().map(|(i, &n)| if n >= c { 1u32 << i } else { 0 }).sum::<u32>();
            let bin = uniform.iter().position(|&u| u == code).unwrap_or(58);
            hist[bin] += 1.0;
        }
    }
    let total = ((img.width() - 2) * (img.height() - 2)) as f64;
    hist.iter_mut().for_each(|v| *v /= total);
    hist
}

/// Even Gabor kernel: Gaussian envelope (σ = 0.56λ, aspect 0.5) times a
/// cosine along the wave direction, radius round(2σ), zero mean, unit L1.
pub fn naive_gabor(wavelength: f64, theta: f64) -> (usize, Vec<f64>) {
    let sigma = 0.56 * wavelength;
    let r = (2.0 * sigma).round().max(1.0) as isize;
    let mut taps = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            let along = x * theta.cos() + y * theta.sin();
            let across = -x * theta.sin() + y * theta.cos();
            let env = (-(along * along + 0.25 * across * across) / (2.0 * sigma * sigma)).exp();
            taps.push(env * (2.0 * PI * along / wavelength).cos());
        }
    }
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    let l1: f64 = taps.iter().map(|t| t.abs()).sum();
    taps.iter_mut().for_each(|t| *t /= l1);
    ((2 * r + 1) as usize, taps)
}

/// Mirror without repeating the edge pixel (…, 2, 1, 0, 1, 2, …).
pub fn reflect101(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Direct correlation with reflect-101 borders.
pub fn naive_correlate(img: &GrayImage, side: usize, taps: &[f64]) -> Vec<f64> {
    let r = (side / 2) as isize;
    let (w, h) = (img.width(), img.height());
    // Source column/row for every window offset, reflected once up front.
    let cols: Vec<Vec<usize>> = (0..w).map(|x| (-r..=r).map(|k| reflect101(x as isize + k, w)).collect()).collect();
    let rows: Vec<Vec<usize>> = (0..h).map(|y| (-r..=r).map(|k| reflect101(y as isize + k, h)).collect()).collect();
    let px = img.data();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t_row, &sy) in taps.chunks_exact(side).zip(&rows[y]) {
                let src = &px[sy * w..(sy + 1) * w];
                for (&t, &sx) in t_row.iter().zip(&cols[x]) {
                    acc += t * src[sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// GIST over 4 wavelengths × 8 orientations: mean |response| per 16×16 cell.
pub fn naive_gist(img: &GrayImage) -> Vec<f64> {
    let mut out = Vec::with_capacity(512);
    for wavelength in [4.0, 8.0, 16.0, 32.0] {
        for k in 0..8 {
            let (side, taps) = naive_gabor(wavelength, k as f64 * PI / 8.0);
            let resp = naive_correlate(img, side, &taps);
            for cy in 0..4 {
                for cx in 0..4 {
                    let mut acc = 0.0;
                    for y in cy * 16..cy * 16 + 16 {
                        for x in cx * 16..cx * 16 + 16 {
                            acc += resp[y * 64 + x].abs();
                        }
                    }
                    out.push(acc / 256.0);
                }
            }
        }
    }
    l2_normalize(&mut out, 1e-9);
    out
}

/// Harris response with every structure-tensor entry summed directly over a
/// normalized Gaussian window (σ = 1.5, radius 5, reflect-101 borders).
pub fn naive_harris(img: &GrayImage, k: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let sigma: f64 = 1.5;
    let r = (3.0 * sigma).ceil() as isize;
    let weight = |dx: isize, dy: isize| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).map(|(dx, dy)| weight(dx, dy)).sum();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let wgt = weight(dx, dy) / norm;
                    let (gx, gy) = gradient(img, reflect101(x + dx, w), reflect101(y + dy, h));
                    a += wgt * gx * gx;
                    b += wgt * gy * gy;
                    c += wgt * gx * gy;
                }
            }
            out.push(a * b - c * c - k * (a + b) * (a + b));
        }
    }
    out
}

/// Pixels above `threshold` that no 3×3 neighbour beats; an equal neighbour
/// earlier in raster order also beats.
pub fn naive_peaks(r: &[f64], w: usize, h: usize, threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = r[y * w + x];
            let mut beaten = false;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let n = r[ny * w + nx];
                    if (nx, ny) != (x, y) && (n > v || (n == v && (ny, nx) < (y, x))) {
                        beaten = true;
                    }
                }
            }
            if v > threshold && !beaten {
                out.push((x, y));
            }
        }
    }
    out
}

/// 8-connected component sizes by breadth-first flood fill, largest first.
pub fn flood_components(mask: &[bool], w: usize, h: usize) -> Vec<usize> {
    let mut seen = vec![false; mask.len()];
    let mut sizes = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

pub fn rbf_kernel(x: &[[f64; 2]], gamma: f64) -> Array2<f64> {
    Array2::from_shape_fn((x.len(), x.len()), |(i, j)| {
        let d2 = (x[i][0] - x[j][0]).powi(2) + (x[i][1] - x[j][1]).powi(2);
        (-gamma * d2).exp()
    })
}

/// Dual SVM objective Σα − ½ Σᵢⱼ αᵢαⱼyᵢyⱼKᵢⱼ.
pub fn dual_objective(k: &Array2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[[i, j]];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto {0 ≤ α ≤ C, Σαᵢyᵢ = 0}: α(μ) = clip(v − μy)
/// with the multiplier μ found by bisection.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the SVM dual; an independent
/// check on SMO. Returns α and the dual objective.
pub fn projected_gradient_dual(k: &Array2<f64>, y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = Array2::from_shape_fn((n, n), |(i, j)| y[i] * y[j] * k[[i, j]]);
    // Largest eigenvalue by power iteration bounds the step.
    let mut v = ndarray::Array1::from_elem(n, 1.0);
    let mut lmax = 1.0;
    for _ in 0..500 {
        let w = q.dot(&v);
        lmax = w.dot(&w).sqrt() / v.dot(&v).sqrt();
        v = &w / w.dot(&w).sqrt();
    }
    let step = 1.0 / (1.01 * lmax);
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let zq = q.dot(&ndarray::Array1::from(z.clone()));
        let ascent: Vec<f64> = z.iter().zip(zq.iter()).map(|(zi, g)| zi + step * (1.0 - g)).collect();
        let next = project(&ascent, y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&alpha).map(|(a, p)| a + (t - 1.0) / t_next * (a - p)).collect();
        alpha = next;
        t = t_next;
    }
    let obj = dual_objective(k, y, &alpha);
    (alpha, obj)
}

/// Largest violation of the box, equality and complementary-slackness
/// conditions of an SVM dual solution, in margin units.
pub fn kkt_violation(k: &Array2<f64>, y: &[f64], alpha: &[f64], b: f64, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs();
    for i in 0..n {
        worst = worst.max(-alpha[i]).max(alpha[i] - c);
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * k[[i, j]]).sum::<f64>() + b;
        let m = y[i] * f;
        let slack = if alpha[i] <= 1e-9 {
            1.0 - m
        } else if alpha[i] >= c - 1e-9 {
            m - 1.0
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(slack);
    }
    worst
}

/// Two overlapping Gaussian clouds in the plane with ±1 labels.
pub fn two_clouds(n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let (cx, cy) = if label > 0.0 { (1.0, 0.5) } else { (-1.0, -0.5) };
        x.push([cx + rng.sample(normal), cy + rng.sample(normal)]);
        y.push(label);
    }
    (x, y)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
