use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{reflect101, GrayImage};
use crate::error::{Error, Result};

/// Kernels with more taps than this are applied in the frequency domain.
const DIRECT_TAP_LIMIT: usize = 15 * 15;

/// 2-D filter taps in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, taps: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || taps.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} taps for a {width}x{height} kernel",
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite kernel tap".into()));
        }
        Ok(Self { width, height, taps })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.taps[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    fn check_odd(&self) -> Result<()> {
        if self.width % 2 == 0 || self.height % 2 == 0 {
            return Err(Error::EvenKernel { width: self.width, height: self.height });
        }
        Ok(())
    }
}

/// Normalized isotropic Gaussian with radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Kernel {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let side = (2 * r + 1) as usize;
    let mut taps = Vec::with_capacity(side * side);
    for y in -r..=r {
        for x in -r..=r {
            taps.push((-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Kernel { width: side, height: side, taps }
}

/// Correlation (kernel not flipped) with reflect-101 borders.
///
/// Small kernels run directly; large ones go through the FFT.
pub fn convolve(img: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    kernel.check_odd()?;
    if kernel.taps.len() <= DIRECT_TAP_LIMIT {
        convolve_direct(img, kernel)
    } else {
        ConvolutionPlan::new(kernel, img.width(), img.height())?.apply(img)
    }
}

/// Spatial-domain correlation with reflect-101 borders.
pub fn convolve_direct(img: &GrayImage, kernel: &Kernel) -> Result<GrayImage> {
    kernel.check_odd()?;
    let (w, h) = (img.width(), img.height());
    let rx = (kernel.width / 2) as isize;
    let ry = (kernel.height / 2) as isize;
    // Column lookup per output x so the inner loop stays branch-free.
    let cols: Vec<Vec<usize>> = (0..w as isize)
        .map(|x| (-rx..=rx).map(|dx| reflect101(x + dx, w)).collect())
        .collect();
    let data = img.data();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        let rows: Vec<usize> = (-ry..=ry).map(|dy| reflect101(y + dy, h) * w).collect();
        for col in &cols {
            let mut acc = 0.0;
            for (ky, &row) in rows.iter().enumerate() {
                let taps = &kernel.taps[ky * kernel.width..(ky + 1) * kernel.width];
                for (t, &cx) in taps.iter().zip(col) {
                    acc += t * data[row + cx];
                }
            }
            out.push(acc);
        }
    }
    GrayImage::new(w, h, out)
}

/// Smallest 2^a·3^b·5^c that is at least `n`.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[derive(Clone)]
struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (rows, cols) = if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row_fwd, &self.col_fwd) };
        rows.process(buf);
        let mut column = vec![Complex::new(0.0, 0.0); self.height];
        for x in 0..self.width {
            for (y, c) in column.iter_mut().enumerate() {
                *c = buf[y * self.width + x];
            }
            cols.process(&mut column);
            for (y, c) in column.iter().enumerate() {
                buf[y * self.width + x] = *c;
            }
        }
    }
}

/// Frequency-domain image prepared for one padding radius.
#[derive(Clone)]
pub struct Spectrum {
    rx: usize,
    ry: usize,
    values: Vec<Complex<f64>>,
}

/// Precomputed FFT correlation of one kernel against images of a fixed size.
///
/// The image is reflect-101 padded by the kernel radius and correlated
/// circularly on a grid large enough that no valid output wraps around.
#[derive(Clone)]
pub struct ConvolutionPlan {
    img_width: usize,
    img_height: usize,
    rx: usize,
    ry: usize,
    fft: Fft2d,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl ConvolutionPlan {
    pub fn new(kernel: &Kernel, img_width: usize, img_height: usize) -> Result<Self> {
        kernel.check_odd()?;
        let (rx, ry) = (kernel.width / 2, kernel.height / 2);
        let fw = fast_len(img_width + 2 * rx);
        let fh = fast_len(img_height + 2 * ry);
        let fft = Fft2d::new(fw, fh);
        let mut spec = vec![Complex::new(0.0, 0.0); fw * fh];
        for y in 0..kernel.height {
            for x in 0..kernel.width {
                spec[y * fw + x] = Complex::new(kernel.get(x, y), 0.0);
            }
        }
        fft.run(&mut spec, false);
        // Correlation multiplies by the conjugate kernel spectrum; fold the
        // inverse-transform scale in here as well.
        let scale = 1.0 / (fw * fh) as f64;
        spec.iter_mut().for_each(|c| *c = c.conj() * scale);
        Ok(Self { img_width, img_height, rx, ry, fft, kernel_spectrum: spec })
    }

    /// Pads and transforms `img`; reusable by every plan with the same radius and size.
    pub fn spectrum(&self, img: &GrayImage) -> Result<Spectrum> {
        self.check_size(img)?;
        let (w, h) = (img.width(), img.height());
        let fw = self.fft.width;
        let mut values = vec![Complex::new(0.0, 0.0); fw * self.fft.height];
        for py in 0..h + 2 * self.ry {
            let sy = reflect101(py as isize - self.ry as isize, h);
            for px in 0..w + 2 * self.rx {
                let sx = reflect101(px as isize - self.rx as isize, w);
                values[py * fw + px] = Complex::new(img.get(sx, sy), 0.0);
            }
        }
        self.fft.run(&mut values, false);
        Ok(Spectrum { rx: self.rx, ry: self.ry, values })
    }

    pub fn apply_spectrum(&self, spectrum: &Spectrum) -> Result<GrayImage> {
        if spectrum.rx != self.rx || spectrum.ry != self.ry || spectrum.values.len() != self.kernel_spectrum.len() {
            return Err(Error::InvalidParameter("spectrum prepared for a different plan".into()));
        }
        let mut buf: Vec<Complex<f64>> = spectrum
            .values
            .iter()
            .zip(&self.kernel_spectrum)
            .map(|(a, b)| a * b)
            .collect();
        self.fft.run(&mut buf, true);
        let fw = self.fft.width;
        GrayImage::new(
            self.img_width,
            self.img_height,
            (0..self.img_height)
                .flat_map(|y| (0..self.img_width).map(move |x| (y, x)))
                .map(|(y, x)| buf[y * fw + x].re)
                .collect(),
        )
    }

    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        self.apply_spectrum(&self.spectrum(img)?)
    }

    /// Responses of this kernel and `other` from one inverse transform: both
    /// kernels are real, so `self + i·other` yields them as the real and
    /// imaginary parts.
    pub fn apply_spectrum_pair(&self, other: &ConvolutionPlan, spectrum: &Spectrum) -> Result<(GrayImage, GrayImage)> {
        if !self.shares_spectrum_with(other)
            || self.fft.width != other.fft.width
            || spectrum.rx != self.rx
            || spectrum.ry != self.ry
            || spectrum.values.len() != self.kernel_spectrum.len()
        {
            return Err(Error::InvalidParameter("spectrum prepared for a different plan".into()));
        }
        let i = Complex::new(0.0, 1.0);
        let mut buf: Vec<Complex<f64>> = spectrum
            .values
            .iter()
            .zip(self.kernel_spectrum.iter().zip(&other.kernel_spectrum))
            .map(|(s, (a, b))| s * (a + i * b))
            .collect();
        self.fft.run(&mut buf, true);
        let fw = self.fft.width;
        let (w, h) = (self.img_width, self.img_height);
        let at = |y: usize, x: usize| buf[y * fw + x];
        let re = (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| at(y, x).re).collect();
        let im = (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| at(y, x).im).collect();
        Ok((GrayImage::new(w, h, re)?, GrayImage::new(w, h, im)?))
    }

    /// Whether two plans can share one [`Spectrum`].
    pub fn shares_spectrum_with(&self, other: &ConvolutionPlan) -> bool {
        self.rx == other.rx
            && self.ry == other.ry
            && self.img_width == other.img_width
            && self.img_height == other.img_height
    }

    fn check_size(&self, img: &GrayImage) -> Result<()> {
        if img.width() != self.img_width || img.height() != self.img_height {
            return Err(Error::InvalidParameter(format!(
                "plan built for {}x{}, got {}x{}",
                self.img_width,
                self.img_height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}
