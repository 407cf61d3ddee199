use super::harris::{harris_response, refine_corner, response_peaks, HARRIS_K};
use super::homography::estimate_homography;
use crate::error::{Error, Result};
use crate::imagecore::{resize_bilinear, warp_projective, GrayImage, Homography, CANONICAL_SIZE};

/// Width of the printed cell-boundary lines on rendered forms.
pub const GRID_LINE_WIDTH: usize = 2;

/// Layout of a form: a `rows × cols` grid filling a `width × height`
/// canonical rectangle, with square registration marks outside each corner.
///
/// The outer corner of each mark sits `mark_offset` pixels diagonally
/// outside the matching corner of the rectangle; those four points define
/// the deskewing transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub width: usize,
    pub height: usize,
    /// Border trimmed from every side of each cell.
    pub margin: usize,
    pub mark_offset: usize,
    pub mark_size: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, width: usize, height: usize, margin: usize) -> Result<Self> {
        let spec = Self { rows, cols, width, height, margin, mark_offset: 16, mark_size: 10 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("grid needs at least one row and column, got {}x{}", self.rows, self.cols));
        }
        let min_cell = (self.width / self.cols).min(self.height / self.rows);
        if 2 * self.margin >= min_cell {
            return bad(format!("margin {} must be under half the smallest cell side {min_cell}", self.margin));
        }
        if self.mark_size < 6 || self.mark_size >= self.mark_offset {
            return bad(format!("mark size {} must be at least 6 and below the mark offset {}", self.mark_size, self.mark_offset));
        }
        Ok(())
    }

    /// Column boundaries `x_0 = 0 < … < x_cols = width`.
    pub fn col_edges(&self) -> Vec<usize> {
        (0..=self.cols).map(|j| j * self.width / self.cols).collect()
    }

    pub fn row_edges(&self) -> Vec<usize> {
        (0..=self.rows).map(|i| i * self.height / self.rows).collect()
    }

    /// Full cell `(left, top, width, height)` before the margin is trimmed.
    pub fn cell_box(&self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        let (xs, ys) = (self.col_edges(), self.row_edges());
        (xs[col], ys[row], xs[col + 1] - xs[col], ys[row + 1] - ys[row])
    }

    /// Cropped region of a cell: its box shrunk by the margin on every side.
    pub fn cell_rect(&self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        let (l, t, w, h) = self.cell_box(row, col);
        let m = self.margin;
        (l + m, t + m, w - 2 * m, h - 2 * m)
    }

    /// Canonical coordinates of the mark corners: top-left, top-right,
    /// bottom-right, bottom-left. Pixel centres sit at integers, so the
    /// rectangle's outer edge lies at −0.5 and `width − 0.5`.
    pub fn reference_points(&self) -> [(f64, f64); 4] {
        let o = self.mark_offset as f64;
        let (lo_x, lo_y) = (-o - 0.5, -o - 0.5);
        let (hi_x, hi_y) = (self.width as f64 - 0.5 + o, self.height as f64 - 0.5 + o);
        [(lo_x, lo_y), (hi_x, lo_y), (hi_x, hi_y), (lo_x, hi_y)]
    }
}

/// Draws a blank-or-filled form on a white page: registration marks, grid
/// lines along the cell boundaries and one glyph centred in each of the
/// first `glyphs.len()` cells (row-major). The canonical rectangle starts at
/// `(pad, pad)`.
pub fn render_form(spec: &GridSpec, glyphs: &[GrayImage], pad: usize) -> Result<GrayImage> {
    spec.validate()?;
    if glyphs.len() > spec.rows * spec.cols {
        return Err(Error::SpecMismatch(format!("{} glyphs for {} cells", glyphs.len(), spec.rows * spec.cols)));
    }
    if pad <= spec.mark_offset {
        return Err(Error::InvalidParameter(format!("page padding {pad} must exceed the mark offset {}", spec.mark_offset)));
    }
    let (pw, ph) = (spec.width + 2 * pad, spec.height + 2 * pad);
    let mut page = vec![1.0f64; pw * ph];
    let mut ink = |x: usize, y: usize, v: f64| {
        let p = &mut page[(y + pad) * pw + x + pad];
        *p = p.min(v);
    };
    let lw = GRID_LINE_WIDTH;
    let spans = |edges: &[usize], extent: usize| -> Vec<(usize, usize)> {
        edges.iter().map(|&e| if e == 0 { (0, lw) } else if e == extent { (extent - lw, extent) } else { (e - lw / 2, e - lw / 2 + lw) }).collect()
    };
    for (a, b) in spans(&spec.col_edges(), spec.width) {
        for y in 0..spec.height {
            (a..b).for_each(|x| ink(x, y, 0.0));
        }
    }
    for (a, b) in spans(&spec.row_edges(), spec.height) {
        for x in 0..spec.width {
            (a..b).for_each(|y| ink(x, y, 0.0));
        }
    }
    for (i, glyph) in glyphs.iter().enumerate() {
        let (l, t, w, h) = spec.cell_rect(i / spec.cols, i % spec.cols);
        let side = w.min(h).saturating_sub(2 * (lw + 2)).max(1);
        let g = resize_bilinear(glyph, side, side);
        let (ox, oy) = (l + (w - side) / 2, t + (h - side) / 2);
        for y in 0..side {
            for x in 0..side {
                ink(ox + x, oy + y, g.get(x, y));
            }
        }
    }
    let mut page = GrayImage::new(pw, ph, page)?;
    let (o, s) = (spec.mark_offset, spec.mark_size);
    let marks = [
        (pad - o, pad - o),
        (pad + spec.width + o - s, pad - o),
        (pad + spec.width + o - s, pad + spec.height + o - s),
        (pad - o, pad + spec.height + o - s),
    ];
    page = GrayImage::from_fn(pw, ph, |x, y| {
        if marks.iter().any(|&(mx, my)| (mx..mx + s).contains(&x) && (my..my + s).contains(&y)) {
            0.0
        } else {
            page.get(x, y)
        }
    });
    Ok(page)
}

/// Registration marks found on a page and the transform onto the canonical
/// rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FormLocation {
    /// Refined mark corners in page coordinates: top-left, top-right,
    /// bottom-right, bottom-left.
    pub corners: [(f64, f64); 4],
    /// Page → canonical coordinates.
    pub homography: Homography,
}

/// Relative response a corner needs to be considered a mark candidate.
const CANDIDATE_FRACTION: f64 = 0.1;

/// Finds the four registration marks: among Harris peaks with at least a
/// tenth of the strongest response, the one closest to each image corner
/// within that corner's quadrant, refined to subpixel accuracy.
pub fn locate_form(page: &GrayImage, spec: &GridSpec) -> Result<FormLocation> {
    spec.validate()?;
    let resp = harris_response(page, HARRIS_K)?;
    let max = resp.data().iter().copied().fold(0.0, f64::max);
    if max <= 1e-9 {
        return Err(Error::CornersNotFound);
    }
    let peaks = response_peaks(&resp, CANDIDATE_FRACTION * max);
    let (w, h) = (page.width() as f64, page.height() as f64);
    let targets = [(0.0, 0.0), (w - 1.0, 0.0), (w - 1.0, h - 1.0), (0.0, h - 1.0)];
    let mut corners = [(0.0, 0.0); 4];
    for (q, &(tx, ty)) in targets.iter().enumerate() {
        let in_quadrant = |c: &&super::Corner| ((c.x >= w / 2.0) == (tx > 0.0)) && ((c.y >= h / 2.0) == (ty > 0.0));
        let best = peaks
            .iter()
            .filter(in_quadrant)
            .min_by(|a, b| (a.x - tx).hypot(a.y - ty).total_cmp(&(b.x - tx).hypot(b.y - ty)))
            .ok_or(Error::CornersNotFound)?;
        corners[q] = refine_corner(page, best.x, best.y, spec.mark_size / 2)?;
    }
    if !is_convex_clockwise(&corners) {
        return Err(Error::CornersNotFound);
    }
    let homography = estimate_homography(&corners, &spec.reference_points()).map_err(|_| Error::CornersNotFound)?;
    Ok(FormLocation { corners, homography })
}

/// Image coordinates (y down): a top-left, top-right, bottom-right,
/// bottom-left quad turns the same way at every vertex.
fn is_convex_clockwise(p: &[(f64, f64); 4]) -> bool {
    (0..4).all(|i| {
        let (a, b, c) = (p[i], p[(i + 1) % 4], p[(i + 2) % 4]);
        (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) > 0.0
    })
}

/// Warps a scanned page onto the canonical `width × height` rectangle.
pub fn deskew(page: &GrayImage, spec: &GridSpec) -> Result<GrayImage> {
    let loc = locate_form(page, spec)?;
    warp_projective(page, &loc.homography, spec.width, spec.height)
}

/// Cuts a canonical form into its cells (row-major), trims the margin and
/// resizes each to the descriptor window.
pub fn crop_cells(form: &GrayImage, spec: &GridSpec) -> Result<Vec<GrayImage>> {
    spec.validate()?;
    if (form.width(), form.height()) != (spec.width, spec.height) {
        return Err(Error::SpecMismatch(format!(
            "form is {}x{}, grid expects {}x{}",
            form.width(),
            form.height(),
            spec.width,
            spec.height
        )));
    }
    let mut cells = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let (l, t, w, h) = spec.cell_rect(r, c);
            cells.push(resize_bilinear(&form.crop(l, t, w, h)?, CANONICAL_SIZE, CANONICAL_SIZE));
        }
    }
    Ok(cells)
}
