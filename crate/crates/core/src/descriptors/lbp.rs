use crate::error::Result;
use crate::imagecore::GrayImage;

/// Neighbour offsets clockwise from the top-left; neighbour `i` sets bit `i`.
const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

const UNIFORM_BINS: usize = 58;

/// 8-neighbour, radius-1 code at an interior pixel. A bit is set when the
/// neighbour is at least as bright as the centre.
pub fn lbp_code(img: &GrayImage, x: usize, y: usize) -> u8 {
    let c = img.get(x, y);
    NEIGHBOURS.iter().enumerate().fold(0u8, |code, (bit, &(dx, dy))| {
        let n = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
        if n >= c {
            code | (1 << bit)
        } else {
            code
        }
    })
}

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// Histogram bin of a code: uniform codes (≤ 2 circular transitions) get bins
/// 0..58 in ascending code order, everything else shares bin 58.
pub fn uniform_bin(code: u8) -> usize {
    static TABLE: std::sync::OnceLock<[u8; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [UNIFORM_BINS as u8; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if transitions(code) <= 2 {
                t[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next as usize, UNIFORM_BINS);
        t
    });
    table[code as usize] as usize
}

/// Uniform LBP histogram over all interior pixels, L1-normalized.
pub fn lbp(img: &GrayImage) -> Result<Vec<f64>> {
    img.require_min(3)?;
    let mut hist = vec![0.0; UNIFORM_BINS + 1];
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            hist[uniform_bin(lbp_code(img, x, y))] += 1.0;
        }
    }
    let total = ((img.width() - 2) * (img.height() - 2)) as f64;
    hist.iter_mut().for_each(|v| *v /= total);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_table_has_58_codes() {
        let uniform = (0..=255u8).filter(|&c| uniform_bin(c) < 58).count();
        assert_eq!(uniform, 58);
        assert_eq!(uniform_bin(0), 0);
        assert_eq!(uniform_bin(255), 57);
        assert_eq!(uniform_bin(0b0101_0101), 58);
    }

    #[test]
    fn flat_image_is_all_ones_code() {
        let img = GrayImage::filled(6, 5, 0.5);
        assert_eq!(lbp_code(&img, 2, 2), 255);
        let h = lbp(&img).unwrap();
        assert_eq!(h[uniform_bin(255)], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn matches_naive_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let img = GrayImage::from_fn(10, 10, |_, _| rng.random_range(0..4) as f64 / 4.0);
        let mut counts = [0usize; 59];
        for y in 1..9 {
            for x in 1..9 {
                let c = img.get(x, y);
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
                let bits: Vec<bool> = ring.iter().map(|&n| n >= c).collect();
                let changes = (0..8).filter(|&i| bits[i] != bits[(i + 1) % 8]).count();
                let code: usize = bits.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum();
                let bin = if changes <= 2 {
                    (0..code).filter(|&c| (c as u8 ^ (c as u8).rotate_right(1)).count_ones() <= 2).count()
                } else {
                    58
                };
                counts[bin] += 1;
            }
        }
        let expected: Vec<f64> = counts.iter().map(|&c| c as f64 / 64.0).collect();
        assert_eq!(lbp(&img).unwrap(), expected);
    }

    #[test]
    fn too_small() {
        assert!(lbp(&GrayImage::filled(2, 5, 0.0)).is_err());
        assert_eq!(lbp(&GrayImage::filled(3, 3, 0.0)).unwrap().len(), 59);
    }
}
