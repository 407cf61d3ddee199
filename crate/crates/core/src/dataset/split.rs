use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Sample;
use crate::error::{Error, Result};

/// Train/validation/test proportions and shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train: 0.70, val: 0.15, test: 0.15, seed: 0 }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("split ratios {parts:?} must be in [0,1] and sum to 1")));
        }
        Ok(())
    }
}

/// Sorted sample indices of each part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Name of the part containing each sample index.
    pub fn assignment(&self) -> Vec<&'static str> {
        let mut out = vec![""; self.len()];
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            part.iter().for_each(|&i| out[i] = name);
        }
        out
    }
}

/// Moves one extra unit of class `c` into a part with `need > 0`, possibly
/// shifting other classes' extra units along an alternating path
/// `c → p₁ ← v₁ → p₂ …`. Parts are tried in `order`.
fn augment(c: usize, open: &[[bool; 3]], given: &mut [[bool; 3]], need: &mut [isize; 3], order: [usize; 3]) -> bool {
    let mut reached_from: [Option<usize>; 3] = [None; 3];
    let mut via: Vec<Option<usize>> = vec![None; open.len()];
    let mut queue = vec![c];
    let mut found = None;
    let mut head = 0;
    'search: while head < queue.len() {
        let u = queue[head];
        head += 1;
        for p in order {
            if !open[u][p] || given[u][p] || reached_from[p].is_some() {
                continue;
            }
            reached_from[p] = Some(u);
            if need[p] > 0 {
                found = Some(p);
                break 'search;
            }
            for (v, g) in given.iter().enumerate() {
                if g[p] && v != c && via[v].is_none() {
                    via[v] = Some(p);
                    queue.push(v);
                }
            }
        }
    }
    let Some(end) = found else { return false };
    let mut p = end;
    loop {
        let u = reached_from[p].expect("path recorded");
        given[u][p] = true;
        if u == c {
            break;
        }
        let q = via[u].expect("class reached through a part");
        given[u][q] = false;
        p = q;
    }
    need[end] -= 1;
    true
}

/// Integer per-class part sizes. Every entry is the floor or ceiling of its
/// exact share, rows sum to the class sizes, and each part's total is the
/// floor or ceiling of its exact global share (such a rounding always
/// exists for two-way tables).
///
/// Starting from the floors, leftover units are routed by augmenting paths
/// in the class × part graph: first until every part reaches its floor
/// total, then up to the ceilings, trying test before validation before
/// training.
fn apportion(counts: &[usize], ratios: [f64; 3]) -> Vec<[usize; 3]> {
    let n: usize = counts.iter().sum();
    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(counts.len());
    let mut open: Vec<[bool; 3]> = Vec::with_capacity(counts.len());
    for &c in counts {
        let exact = ratios.map(|r| r * c as f64);
        let floor = exact.map(|e| (e + 1e-9).floor() as usize);
        alloc.push(floor);
        open.push([0, 1, 2].map(|p| exact[p] - floor[p] as f64 > 1e-9));
    }
    let totals = [0, 1, 2].map(|p| alloc.iter().map(|a| a[p]).sum::<usize>() as isize);
    let exact_total = ratios.map(|r| r * n as f64);
    let mut left: Vec<usize> = counts.iter().zip(&alloc).map(|(&c, a)| c - a.iter().sum::<usize>()).collect();
    let mut given = vec![[false; 3]; counts.len()];
    let mut need = [0, 1, 2].map(|p| (exact_total[p] + 1e-9).floor() as isize - totals[p]);
    for c in 0..counts.len() {
        while left[c] > 0 && augment(c, &open, &mut given, &mut need, [0, 1, 2]) {
            left[c] -= 1;
        }
    }
    // Raise the caps from floor to ceiling totals.
    for p in 0..3 {
        if exact_total[p] - (exact_total[p] + 1e-9).floor() > 1e-9 {
            need[p] += 1;
        }
    }
    for c in 0..counts.len() {
        while left[c] > 0 && augment(c, &open, &mut given, &mut need, [2, 1, 0]) {
            left[c] -= 1;
        }
    }
    for ((a, g), l) in alloc.iter_mut().zip(&given).zip(&left) {
        for p in 0..3 {
            a[p] += g[p] as usize;
        }
        // Unreachable for consistent ratios; keeps the partition covering.
        a[2] += l;
    }
    alloc
}

/// Stratified split of sample labels: each class is shuffled with the seeded
/// generator and cut into train/val/test runs of the apportioned sizes.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let present: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
    if let Some(&c) = present.iter().find(|&&c| members[c].len() < 3) {
        return Err(Error::ClassTooSmall { class: c, count: members[c].len(), min: 3 });
    }
    let counts: Vec<usize> = present.iter().map(|&c| members[c].len()).collect();
    let alloc = apportion(&counts, [spec.train, spec.val, spec.test]);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (&c, a) in present.iter().zip(&alloc) {
        let mut idx = members[c].clone();
        idx.shuffle(&mut rng);
        out.train.extend_from_slice(&idx[..a[0]]);
        out.val.extend_from_slice(&idx[a[0]..a[0] + a[1]]);
        out.test.extend_from_slice(&idx[a[0] + a[1]..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn split(samples: &[Sample], spec: &SplitSpec) -> Result<Split> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    split_indices(&labels, spec)
}

/// One `sample_path,split` row per sample.
pub fn write_split_manifest(path: impl AsRef<Path>, samples: &[Sample], split: &Split) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "sample_path,split").expect("write to Vec");
    for (s, part) in samples.iter().zip(split.assignment()) {
        writeln!(out, "{},{part}", s.id).expect("write to Vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
