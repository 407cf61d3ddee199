use crate::error::{Error, Result};
use crate::imagecore::Homography;

type Quad = [(f64, f64); 4];

/// Similarity taking the points to zero mean and mean distance √2.
fn normalizer(p: &Quad) -> Result<[[f64; 3]; 3]> {
    let (mx, my) = p.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / 4.0, b + y / 4.0));
    let spread = p.iter().map(|&(x, y)| (x - mx).hypot(y - my)).sum::<f64>() / 4.0;
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::DegenerateConfiguration);
    }
    let s = std::f64::consts::SQRT_2 / spread;
    Ok([[s, 0.0, -s * mx], [0.0, s, -s * my], [0.0, 0.0, 1.0]])
}

fn apply(t: &[[f64; 3]; 3], (x, y): (f64, f64)) -> (f64, f64) {
    (t[0][0] * x + t[0][2], t[1][1] * y + t[1][2])
}

/// True when some three of the (normalized) points are collinear.
fn has_collinear_triple(p: &Quad) -> bool {
    (0..4).any(|skip| {
        let t: Vec<_> = (0..4).filter(|&i| i != skip).map(|i| p[i]).collect();
        let cross = (t[1].0 - t[0].0) * (t[2].1 - t[0].1) - (t[1].1 - t[0].1) * (t[2].0 - t[0].0);
        cross.abs() < 1e-9
    })
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
fn solve8(mut a: [[f64; 8]; 8], mut b: [f64; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let pivot = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            for c in col..8 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let tail: f64 = (row + 1..8).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

fn mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// The projective map sending each `src[i]` to `dst[i]`, from the eight
/// point-correspondence equations in normalized coordinates.
pub fn estimate_homography(src: &Quad, dst: &Quad) -> Result<Homography> {
    if src.iter().chain(dst).any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateConfiguration);
    }
    let (ts, td) = (normalizer(src)?, normalizer(dst)?);
    let s: Quad = src.map(|p| apply(&ts, p));
    let d: Quad = dst.map(|p| apply(&td, p));
    if has_collinear_triple(&s) || has_collinear_triple(&d) {
        return Err(Error::DegenerateConfiguration);
    }
    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for (i, (&(x, y), &(u, v))) in s.iter().zip(&d).enumerate() {
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v];
        b[2 * i] = u;
        b[2 * i + 1] = v;
    }
    let h = solve8(a, b).ok_or(Error::DegenerateConfiguration)?;
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]];
    let td_inv = [[1.0 / td[0][0], 0.0, -td[0][2] / td[0][0]], [0.0, 1.0 / td[1][1], -td[1][2] / td[1][1]], [0.0, 0.0, 1.0]];
    Homography::new(mul(&td_inv, &mul(&hn, &ts))).map_err(|_| Error::DegenerateConfiguration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const UNIT: Quad = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

    fn max_error(h: &Homography, src: &Quad, dst: &Quad) -> f64 {
        src.iter().zip(dst).map(|(&(x, y), &(u, v))| {
            let (a, b) = h.apply(x, y);
            (a - u).abs().max((b - v).abs())
        }).fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_translation() {
        let h = estimate_homography(&UNIT, &UNIT).unwrap();
        let id = Homography::identity();
        for (r, e) in h.matrix().iter().flatten().zip(id.matrix().iter().flatten()) {
            assert!((r - e).abs() < 1e-9);
        }
        let moved = UNIT.map(|(x, y)| (x + 5.0, y + 2.0));
        let h = estimate_homography(&UNIT, &moved).unwrap();
        let t = Homography::translation(5.0, 2.0);
        for (r, e) in h.matrix().iter().flatten().zip(t.matrix().iter().flatten()) {
            assert!((r - e).abs() < 1e-9);
        }
        assert_eq!(h.matrix()[2][2], 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 1.0)];
        assert!(matches!(estimate_homography(&line, &UNIT), Err(Error::DegenerateConfiguration)));
        assert!(matches!(estimate_homography(&UNIT, &line), Err(Error::DegenerateConfiguration)));
        let dup = [(0.0, 0.0), (0.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        assert!(matches!(estimate_homography(&dup, &UNIT), Err(Error::DegenerateConfiguration)));
        let same = [(3.0, 3.0); 4];
        assert!(matches!(estimate_homography(&same, &UNIT), Err(Error::DegenerateConfiguration)));
    }

    /// Smallest triangle area over the four triples, relative to the squared
    /// spread, as a conditioning guard for random fixtures.
    fn well_spread(p: &Quad) -> bool {
        let spread = p.iter().map(|&(x, y)| x.hypot(y)).fold(0.0, f64::max).max(1.0);
        (0..4).all(|skip| {
            let t: Vec<_> = (0..4).filter(|&i| i != skip).map(|i| p[i]).collect();
            let area = ((t[1].0 - t[0].0) * (t[2].1 - t[0].1) - (t[1].1 - t[0].1) * (t[2].0 - t[0].0)).abs() / 2.0;
            area > 0.02 * spread * spread
        })
    }

    fn quad() -> impl Strategy<Value = Quad> {
        prop::array::uniform4((0.0..100.0f64, 0.0..100.0f64))
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, max_global_rejects: 100_000, ..ProptestConfig::default() })]
        #[test]
        fn forward_mapping_round_trip(src in quad(), dst in quad()) {
            prop_assume!(well_spread(&src) && well_spread(&dst));
            let h = estimate_homography(&src, &dst).unwrap();
            prop_assert!(max_error(&h, &src, &dst) < 1e-6);
        }
    }
}
