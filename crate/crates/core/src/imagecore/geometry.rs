use super::GrayImage;
use crate::error::{Error, Result};

/// Projective 3×3 transform mapping source pixel coordinates to destination
/// coordinates, stored with `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) || m[2][2].abs() < 1e-300 {
            return Err(Error::SingularHomography);
        }
        let s = m[2][2];
        let m = m.map(|row| row.map(|v| v / s));
        let h = Self { m };
        if h.det().abs() <= 1e-12 {
            return Err(Error::SingularHomography);
        }
        Ok(h)
    }

    pub fn identity() -> Self {
        Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self { m: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]] }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = &self.m;
        let det = self.det();
        if det.abs() <= 1e-12 {
            return Err(Error::SingularHomography);
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Self::new(adj.map(|row| row.map(|v| v / det)))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self> {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self::new(out)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        ((m[0][0] * x + m[0][1] * y + m[0][2]) / w, (m[1][0] * x + m[1][1] * y + m[1][2]) / w)
    }
}

/// Bilinear sample at a real position, `None` outside `[0, w-1] × [0, h-1]`.
fn sample_bilinear(img: &GrayImage, x: f64, y: f64) -> Option<f64> {
    let (w, h) = (img.width(), img.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Bilinear resampling with half-pixel-centred sample positions.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    assert!(width > 0 && height > 0, "resize target must be non-empty");
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    GrayImage::from_fn(width, height, |x, y| {
        let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        sample_bilinear(img, src_x, src_y).expect("clamped sample inside image")
    })
}

/// Renders `img` under `h` (source → destination) into an `out_w`×`out_h`
/// canvas by inverse mapping. Pixels that map outside the source are white.
pub fn warp_projective(img: &GrayImage, h: &Homography, out_w: usize, out_h: usize) -> Result<GrayImage> {
    let inv = h.inverse()?;
    Ok(GrayImage::from_fn(out_w, out_h, |x, y| {
        let (sx, sy) = inv.apply(x as f64, y as f64);
        sample_bilinear(img, sx, sy).unwrap_or(1.0)
    }))
}
