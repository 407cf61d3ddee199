//! Character samples: directory ingestion, stratified splitting and a
//! synthetic generator of dot-confusable glyphs.

mod split;
mod synth;

pub use split::{split, split_indices, write_split_manifest, Split, SplitSpec};
pub use synth::{confusable_groups, synth_glyphs, GlyphParams, Prototype, Stroke};

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{read_pgm, resize_bilinear, GrayImage, CANONICAL_SIZE};

/// Letters in the alphabet.
pub const CLASS_COUNT: usize = 28;

pub const METADATA_FILE: &str = "metadata.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Female => "female",
            Self::Male => "male",
            Self::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Self::Female),
            "male" | "m" => Ok(Self::Male),
            "unknown" | "" | "?" => Ok(Self::Unknown),
            other => Err(Error::format("gender", other.to_string())),
        }
    }
}

/// One character image with its label and writer metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub label: usize,
    pub writer_id: String,
    pub gender: Gender,
    /// Stable identifier: the path relative to the dataset root for
    /// ingested samples.
    pub id: String,
}

/// A file that could not be used, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestWarning {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub samples: Vec<Sample>,
    pub warnings: Vec<IngestWarning>,
}

/// Splits `<writer>_<rep>` at the last underscore.
fn parse_stem(stem: &str) -> (String, u64) {
    match stem.rsplit_once('_') {
        Some((w, r)) if !w.is_empty() => match r.parse() {
            Ok(rep) => (w.to_string(), rep),
            Err(_) => (stem.to_string(), 0),
        },
        _ => (stem.to_string(), 0),
    }
}

/// Reads `writer_id,gender` rows. Bad rows become warnings.
pub fn read_metadata(path: &Path) -> Result<(HashMap<String, Gender>, Vec<IngestWarning>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    let mut warnings = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case("writer_id,gender") => {}
        _ => return Err(Error::format("metadata file", "header must be `writer_id,gender`")),
    }
    for (i, line) in lines {
        let parsed = line.split_once(',').ok_or_else(|| "missing comma".to_string()).and_then(|(w, g)| {
            g.parse::<Gender>().map(|g| (w.trim().to_string(), g)).map_err(|e| e.to_string())
        });
        match parsed {
            Ok((w, g)) => {
                map.insert(w, g);
            }
            Err(reason) => warnings.push(IngestWarning { path: path.to_path_buf(), reason: format!("line {}: {reason}", i + 1) }),
        }
    }
    Ok((map, warnings))
}

/// Loads `root/<class>/<writer>_<rep>.pgm`, resizing every image to the
/// canonical window. Unreadable files are reported, not fatal. Output is
/// sorted by (class, writer, rep).
pub fn ingest(root: impl AsRef<Path>) -> Result<Ingested> {
    let root = root.as_ref();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let label: usize = name.parse().map_err(|_| Error::BadLabel(name.clone()))?;
        if label >= CLASS_COUNT {
            return Err(Error::BadLabel(name));
        }
        for f in std::fs::read_dir(&path).map_err(|e| Error::io(&path, e))? {
            let f = f.map_err(|e| Error::io(&path, e))?.path();
            if f.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                files.push((label, f));
            }
        }
    }
    let mut warnings = Vec::new();
    let genders = match root.join(METADATA_FILE) {
        p if p.is_file() => {
            let (map, w) = read_metadata(&p)?;
            warnings.extend(w);
            map
        }
        _ => HashMap::new(),
    };
    let loaded: Vec<_> = files
        .par_iter()
        .map(|(label, path)| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let (writer, rep) = parse_stem(&stem);
            let id = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
            read_pgm(path).map(|img| (*label, writer, rep, id, img)).map_err(|e| IngestWarning { path: path.clone(), reason: e.to_string() })
        })
        .collect();
    let mut rows = Vec::new();
    for r in loaded {
        match r {
            Ok(row) => rows.push(row),
            Err(w) => warnings.push(w),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    rows.sort_by(|a, b| (a.0, &a.1, a.2, &a.3).cmp(&(b.0, &b.1, b.2, &b.3)));
    warnings.sort_by(|a, b| a.path.cmp(&b.path).then(a.reason.cmp(&b.reason)));
    let samples = rows
        .into_iter()
        .map(|(label, writer_id, _, id, img)| {
            let image = if img.width() == CANONICAL_SIZE && img.height() == CANONICAL_SIZE {
                img
            } else {
                resize_bilinear(&img, CANONICAL_SIZE, CANONICAL_SIZE)
            };
            let gender = genders.get(&writer_id).copied().unwrap_or(Gender::Unknown);
            Sample { image, label, writer_id, gender, id }
        })
        .collect();
    Ok(Ingested { samples, warnings })
}

/// Sample counts per gender, for emulating per-gender split tables.
pub fn gender_counts<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> [(Gender, usize); 3] {
    let mut out = [(Gender::Female, 0), (Gender::Male, 0), (Gender::Unknown, 0)];
    for s in samples {
        out.iter_mut().find(|(g, _)| *g == s.gender).expect("all genders listed").1 += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::write_pgm;

    fn write(root: &Path, rel: &str, img: &GrayImage) {
        let p = root.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        write_pgm(&p, img).unwrap();
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest(dir.path()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn one_image_per_class() {
        let dir = tempfile::tempdir().unwrap();
        for c in 0..CLASS_COUNT {
            write(dir.path(), &format!("{c}/w1_0.pgm"), &GrayImage::filled(32, 40, c as f64 / 30.0));
        }
        let got = ingest(dir.path()).unwrap();
        assert_eq!(got.samples.len(), 28);
        assert!(got.warnings.is_empty());
        for (c, s) in got.samples.iter().enumerate() {
            assert_eq!(s.label, c);
            assert_eq!((s.image.width(), s.image.height()), (64, 64));
            assert_eq!(s.gender, Gender::Unknown);
            assert_eq!(s.writer_id, "w1");
        }
    }

    #[test]
    fn corrupt_file_becomes_warning_and_metadata_joins() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..9 {
            write(dir.path(), &format!("{}/w{}_{}.pgm", i % 3, i % 2, i), &GrayImage::filled(64, 64, 0.5));
        }
        std::fs::write(dir.path().join("2/w9_0.pgm"), b"P5\n64 64\n255\nshort").unwrap();
        std::fs::write(dir.path().join(METADATA_FILE), "writer_id,gender\nw0,female\nw1,male\nw2,robot\n").unwrap();
        let got = ingest(dir.path()).unwrap();
        assert_eq!(got.samples.len(), 9);
        assert_eq!(got.warnings.len(), 2);
        assert!(got.warnings.iter().any(|w| w.path.ends_with("2/w9_0.pgm")));
        assert!(got.samples.iter().all(|s| s.gender == if s.writer_id == "w0" { Gender::Female } else { Gender::Male }));
        let keys: Vec<_> = got.samples.iter().map(|s| (s.label, s.writer_id.clone())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(gender_counts(&got.samples)[0].1 + gender_counts(&got.samples)[1].1, 9);
    }

    #[test]
    fn bad_label_directories() {
        for name in ["abc", "28"] {
            let dir = tempfile::tempdir().unwrap();
            write(dir.path(), &format!("{name}/w_0.pgm"), &GrayImage::filled(8, 8, 0.0));
            assert!(matches!(ingest(dir.path()), Err(Error::BadLabel(_))));
        }
    }

    #[test]
    fn stems() {
        assert_eq!(parse_stem("w12_3"), ("w12".into(), 3));
        assert_eq!(parse_stem("a_b_10"), ("a_b".into(), 10));
        assert_eq!(parse_stem("plain"), ("plain".into(), 0));
    }
}
