use std::f64::consts::PI;

use super::{l2_normalize, DescriptorConfig};
use crate::error::{Error, Result};
use crate::imagecore::{convolve_direct, ConvolutionPlan, GrayImage, Kernel, Spectrum};

/// Filter energies below this are numerical residue of zero-sum kernels.
const NORM_GUARD: f64 = 1e-9;

/// Kernels larger than this are applied through a precomputed FFT plan.
const DIRECT_TAP_LIMIT: usize = 7 * 7;

/// One real (even) Gabor kernel.
#[derive(Clone)]
pub struct GaborFilter {
    pub wavelength: f64,
    /// Direction of the wave vector, radians.
    pub orientation: f64,
    pub sigma: f64,
    pub aspect: f64,
    pub kernel: Kernel,
    plan: Option<ConvolutionPlan>,
}

impl GaborFilter {
    /// `exp(-(x'² + γ²y'²) / 2σ²) · cos(2πx'/λ)` with `x'` along the wave
    /// vector, sampled on a `(4σ+1)`-wide odd grid, shifted to zero mean and
    /// scaled to unit L1 norm.
    pub fn new(wavelength: f64, orientation: f64, sigma: f64, aspect: f64) -> Self {
        let radius = (2.0 * sigma).round().max(1.0) as isize;
        let side = (2 * radius + 1) as usize;
        let (s, c) = orientation.sin_cos();
        let mut taps = Vec::with_capacity(side * side);
        for y in -radius..=radius {
            for x in -radius..=radius {
                let (x, y) = (x as f64, y as f64);
                let xr = x * c + y * s;
                let yr = -x * s + y * c;
                let env = (-(xr * xr + aspect * aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
                taps.push(env * (2.0 * PI * xr / wavelength).cos());
            }
        }
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        taps.iter_mut().for_each(|t| *t -= mean);
        // Unit L1 gain keeps the scales comparable.
        let l1: f64 = taps.iter().map(|t| t.abs()).sum();
        taps.iter_mut().for_each(|t| *t /= l1);
        let kernel = Kernel::new(side, side, taps).expect("well-formed Gabor kernel");
        Self { wavelength, orientation, sigma, aspect, kernel, plan: None }
    }
}

/// Scales × orientations Gabor filters, scale-major.
#[derive(Clone)]
pub struct GaborBank {
    window: usize,
    grid: usize,
    filters: Vec<GaborFilter>,
}

impl GaborBank {
    pub fn new(cfg: &DescriptorConfig) -> Self {
        let mut filters = Vec::new();
        for &wavelength in &cfg.gabor_wavelengths {
            for k in 0..cfg.gabor_orientations {
                let theta = k as f64 * PI / cfg.gabor_orientations as f64;
                let mut f = GaborFilter::new(wavelength, theta, cfg.gabor_sigma_ratio * wavelength, cfg.gabor_aspect);
                if f.kernel.taps().len() > DIRECT_TAP_LIMIT {
                    f.plan = Some(ConvolutionPlan::new(&f.kernel, cfg.window, cfg.window).expect("odd kernel"));
                }
                filters.push(f);
            }
        }
        Self { window: cfg.window, grid: cfg.gist_grid, filters }
    }

    pub fn filters(&self) -> &[GaborFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Raw response of every filter (correlation, reflect-101 borders).
    pub fn responses(&self, img: &GrayImage) -> Result<Vec<GrayImage>> {
        if img.width() != self.window || img.height() != self.window {
            return Err(Error::WrongWindowSize { expected: self.window, width: img.width(), height: img.height() });
        }
        // Filters of one scale share a kernel size, hence a padded spectrum,
        // and consecutive planned filters share one inverse transform.
        let mut cached: Option<(usize, Spectrum)> = None;
        let mut out = Vec::with_capacity(self.filters.len());
        let mut i = 0;
        while i < self.filters.len() {
            let f = &self.filters[i];
            let Some(plan) = &f.plan else {
                out.push(convolve_direct(img, &f.kernel)?);
                i += 1;
                continue;
            };
            let reuse = cached
                .as_ref()
                .is_some_and(|(j, _)| self.filters[*j].plan.as_ref().is_some_and(|p| p.shares_spectrum_with(plan)));
            if !reuse {
                cached = Some((i, plan.spectrum(img)?));
            }
            let spectrum = &cached.as_ref().expect("spectrum cached").1;
            match self.filters.get(i + 1).and_then(|g| g.plan.as_ref()).filter(|p| p.shares_spectrum_with(plan)) {
                Some(next) => {
                    let (a, b) = plan.apply_spectrum_pair(next, spectrum)?;
                    out.push(a);
                    out.push(b);
                    i += 2;
                }
                None => {
                    out.push(plan.apply_spectrum(spectrum)?);
                    i += 1;
                }
            }
        }
        Ok(out)
    }
}

/// GIST: mean absolute Gabor response of every filter within each cell of a
/// `grid × grid` layout, filter-major, globally L2-normalized.
pub fn gist(img: &GrayImage, bank: &GaborBank) -> Result<Vec<f64>> {
    let responses = bank.responses(img)?;
    let grid = bank.grid;
    let cell = bank.window / grid;
    let mut out = Vec::with_capacity(responses.len() * grid * grid);
    for r in &responses {
        for cy in 0..grid {
            for cx in 0..grid {
                let mut acc = 0.0;
                for y in cy * cell..(cy + 1) * cell {
                    for x in cx * cell..(cx + 1) * cell {
                        acc += r.get(x, y).abs();
                    }
                }
                out.push(acc / (cell * cell) as f64);
            }
        }
    }
    l2_normalize(&mut out, NORM_GUARD);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bank() -> GaborBank {
        GaborBank::new(&DescriptorConfig::default())
    }

    fn grating(theta: f64, wavelength: f64) -> GrayImage {
        GrayImage::from_fn(64, 64, |x, y| {
            0.5 + 0.5 * (2.0 * PI * (x as f64 * theta.cos() + y as f64 * theta.sin()) / wavelength).cos()
        })
    }

    #[test]
    fn bank_shape() {
        let b = bank();
        assert_eq!(b.len(), 32);
        let sizes: Vec<usize> = b.filters().iter().step_by(8).map(|f| f.kernel.width()).collect();
        assert_eq!(sizes, vec![9, 19, 37, 73]);
        for (i, f) in b.filters().iter().enumerate() {
            assert!(f.kernel.sum().abs() < 1e-9);
            assert!((f.orientation - (i % 8) as f64 * PI / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fft_responses_match_direct() {
        let b = bank();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>());
        let responses = b.responses(&img).unwrap();
        for (f, r) in b.filters().iter().zip(&responses).step_by(5) {
            let direct = convolve_direct(&img, &f.kernel).unwrap();
            let diff = r.data().iter().zip(direct.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "λ={} θ={}: {diff}", f.wavelength, f.orientation);
        }
    }

    #[test]
    fn flat_window_is_zero() {
        let d = gist(&GrayImage::filled(64, 64, 0.8), &bank()).unwrap();
        assert_eq!(d, vec![0.0; 512]);
    }

    #[test]
    fn dc_offset_is_rejected() {
        let b = bank();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>() * 0.7);
        let a = gist(&img, &b).unwrap();
        let c = gist(&img.map(|v| v + 0.2), &b).unwrap();
        assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    /// Energy of the filter response over the central `n×n` pixels of a
    /// large grating, far enough from the border that no padding is involved.
    fn interior_energy(f: &GaborFilter, theta: f64, wavelength: f64) -> f64 {
        let k = &f.kernel;
        let r = k.width() / 2;
        let n = 32;
        let origin = 200;
        let mut energy = 0.0;
        for y in origin..origin + n {
            for x in origin..origin + n {
                let mut acc = 0.0;
                for j in 0..k.height() {
                    for i in 0..k.width() {
                        let (px, py) = ((x + i - r) as f64, (y + j - r) as f64);
                        let v = 0.5 + 0.5 * (2.0 * PI * (px * theta.cos() + py * theta.sin()) / wavelength).cos();
                        acc += k.get(i, j) * v;
                    }
                }
                energy += acc * acc;
            }
        }
        energy
    }

    #[test]
    fn orthogonal_filter_barely_responds() {
        let b = bank();
        for s in 0..4 {
            for k in [0, 1, 3, 6] {
                let matched = &b.filters()[s * 8 + k];
                let orth = &b.filters()[s * 8 + (k + 4) % 8];
                let on = interior_energy(matched, matched.orientation, matched.wavelength);
                let off = interior_energy(orth, matched.orientation, matched.wavelength);
                assert!(on >= 10.0 * off, "scale {s} orientation {k}: {on} vs {off}");
            }
        }
    }

    #[test]
    fn matched_filter_dominates_grating() {
        let b = bank();
        // Reflect-101 borders mirror an oblique grating into θ' = π − θ. The
        // 73-pixel kernels of the coarsest scale see that mirror image across
        // the whole 64-pixel window, so only the mirror-symmetric axis-aligned
        // gratings are checked there.
        let cases = (0..3).flat_map(|s| (0..8).map(move |k| (s, k))).chain([(3, 0), (3, 4)]);
        for (s, k) in cases {
            let target = s * 8 + k;
            let f = &b.filters()[target];
            let d = gist(&grating(f.orientation, f.wavelength), &b).unwrap();
            let cells = |j: usize| &d[j * 16..(j + 1) * 16];
            let weakest = cells(target).iter().cloned().fold(f64::INFINITY, f64::min);
            for j in (0..32).filter(|&j| j != target) {
                let strongest = cells(j).iter().cloned().fold(0.0, f64::max);
                assert!(weakest > strongest, "grating ({s},{k}) beaten by filter {j}");
            }
        }
    }
}
