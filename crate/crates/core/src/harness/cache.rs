//! Descriptor matrices on disk.
//!
//! Layout (little-endian): magic `GDC1`, descriptor-kind byte, pyramid
//! byte, u32 sample count N, u32 dimension D, N×D f32 values, N u16 labels.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::DescriptorVariant;
use crate::dataset::Sample;
use crate::descriptors::{DescriptorConfig, DescriptorKind};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GDC1";

/// A descriptor matrix with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeatures {
    pub variant: DescriptorVariant,
    /// N×D, every value exactly representable as f32.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

pub fn encode_cache(c: &CachedFeatures) -> Result<Vec<u8>> {
    let (n, d) = c.features.dim();
    if c.labels.len() != n {
        return Err(Error::LengthMismatch(c.labels.len(), n));
    }
    let too_big = |what: &str| Error::InvalidParameter(format!("{what} does not fit the cache format"));
    let n32 = u32::try_from(n).map_err(|_| too_big("sample count"))?;
    let d32 = u32::try_from(d).map_err(|_| too_big("dimension"))?;
    let mut out = Vec::with_capacity(14 + 4 * n * d + 2 * n);
    out.extend_from_slice(MAGIC);
    out.push(c.variant.kind.tag());
    out.push(c.variant.pyramid as u8);
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for &v in c.features.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &l in &c.labels {
        out.extend_from_slice(&u16::try_from(l).map_err(|_| too_big("label"))?.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cache(bytes: &[u8]) -> Result<CachedFeatures> {
    let bad = |reason: &str| Error::format("descriptor cache", reason.to_string());
    if bytes.len() < 14 || &bytes[..4] != MAGIC {
        return Err(bad("missing GDC1 header"));
    }
    let kind = DescriptorKind::from_tag(bytes[4]).ok_or_else(|| bad("unknown descriptor kind"))?;
    let pyramid = match bytes[5] {
        0 => false,
        1 => true,
        _ => return Err(bad("pyramid flag must be 0 or 1")),
    };
    let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let body = n.checked_mul(d).and_then(|nd| nd.checked_mul(4)).and_then(|b| b.checked_add(2 * n)).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != 14 + body {
        return Err(bad("length does not match header"));
    }
    let values: Vec<f64> = bytes[14..14 + 4 * n * d]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let labels = bytes[14 + 4 * n * d..].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as usize).collect();
    let features = Array2::from_shape_vec((n, d), values).expect("length checked");
    Ok(CachedFeatures { variant: DescriptorVariant { kind, pyramid }, features, labels })
}

/// Digest of the sample ids, labels and pixels plus the descriptor settings.
pub fn dataset_hash(samples: &[Sample], config: &DescriptorConfig) -> String {
    let mut h = Sha256::new();
    h.update(format!("{config:?}").as_bytes());
    for s in samples {
        h.update((s.id.len() as u64).to_le_bytes());
        h.update(s.id.as_bytes());
        h.update((s.label as u64).to_le_bytes());
        h.update((s.image.width() as u64).to_le_bytes());
        h.update((s.image.height() as u64).to_le_bytes());
        for v in s.image.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache file for one dataset and descriptor variant.
pub fn cache_path(dir: &Path, hash: &str, variant: DescriptorVariant) -> PathBuf {
    dir.join(format!("{}-{}.gdc", &hash[..16], variant))
}

pub fn write_cache(path: &Path, c: &CachedFeatures) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, encode_cache(c)?).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<CachedFeatures> {
    decode_cache(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
