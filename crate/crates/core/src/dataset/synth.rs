//! Parametric glyphs: a stroke skeleton plus 0–3 dots. Several prototypes
//! share a skeleton and differ only in dot count or placement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Gender, Sample};
use crate::imagecore::GrayImage;

/// Centre-line primitive in the 64×64 prototype frame (y down).
#[derive(Debug, Clone, PartialEq)]
pub enum Stroke {
    Polyline(Vec<(f64, f64)>),
    /// Elliptical arc; angles in degrees, 90° points down.
    Arc { cx: f64, cy: f64, rx: f64, ry: f64, start: f64, end: f64 },
}

impl Stroke {
    fn points(&self) -> Vec<(f64, f64)> {
        match self {
            Stroke::Polyline(p) => p.clone(),
            &Stroke::Arc { cx, cy, rx, ry, start, end } => {
                let steps = ((end - start).abs() / 6.0).ceil().max(1.0) as usize;
                (0..=steps)
                    .map(|i| {
                        let a = (start + (end - start) * i as f64 / steps as f64).to_radians();
                        (cx + rx * a.cos(), cy + ry * a.sin())
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub name: &'static str,
    /// Prototypes with equal skeleton ids share every stroke.
    pub skeleton: usize,
    pub strokes: Vec<Stroke>,
    pub dots: Vec<(f64, f64)>,
}

/// Dot centres for `count` dots grouped around `(x, y)`.
fn dots(count: usize, x: f64, y: f64) -> Vec<(f64, f64)> {
    match count {
        0 => vec![],
        1 => vec![(x, y)],
        2 => vec![(x - 4.5, y), (x + 4.5, y)],
        _ => vec![(x - 4.5, y + 3.0), (x + 4.5, y + 3.0), (x, y - 4.0)],
    }
}

fn line(p: &[(f64, f64)]) -> Stroke {
    Stroke::Polyline(p.to_vec())
}

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, start: f64, end: f64) -> Stroke {
    Stroke::Arc { cx, cy, rx, ry, start, end }
}

fn default_prototypes() -> Vec<Prototype> {
    let bowl = vec![arc(32.0, 30.0, 18.0, 10.0, 0.0, 180.0), line(&[(14.0, 30.0), (13.0, 25.0)]), line(&[(50.0, 30.0), (51.0, 25.0)])];
    let hook = vec![line(&[(22.0, 20.0), (44.0, 20.0), (26.0, 32.0)]), arc(34.0, 42.0, 13.0, 9.0, 150.0, 390.0)];
    let wedge = vec![line(&[(26.0, 18.0), (38.0, 34.0), (24.0, 40.0)])];
    let ra = vec![arc(24.0, 26.0, 16.0, 16.0, 0.0, 80.0)];
    let teeth = vec![
        line(&[(14.0, 30.0), (18.0, 24.0), (22.0, 30.0), (26.0, 24.0), (30.0, 30.0), (34.0, 24.0), (38.0, 30.0)]),
        arc(46.0, 30.0, 8.0, 9.0, 0.0, 180.0),
    ];
    let sad = vec![arc(22.0, 28.0, 8.0, 6.0, 0.0, 360.0), line(&[(30.0, 30.0), (34.0, 30.0)]), arc(44.0, 30.0, 10.0, 9.0, 0.0, 180.0)];
    let ta = vec![arc(34.0, 36.0, 12.0, 6.0, 0.0, 360.0), line(&[(26.0, 12.0), (26.0, 34.0)])];
    let ain = vec![arc(32.0, 22.0, 8.0, 6.0, 90.0, 330.0), arc(30.0, 38.0, 12.0, 10.0, -90.0, 120.0)];
    let fa = vec![line(&[(14.0, 38.0), (50.0, 38.0)]), arc(42.0, 30.0, 6.0, 6.0, 0.0, 360.0)];

    let families: Vec<(Vec<Stroke>, Vec<(&'static str, Vec<(f64, f64)>)>)> = vec![
        (
            bowl,
            vec![
                ("bowl-1-below", dots(1, 32.0, 48.0)),
                ("bowl-2-above", dots(2, 32.0, 18.0)),
                ("bowl-3-above", dots(3, 32.0, 18.0)),
                ("bowl-2-below", dots(2, 32.0, 48.0)),
            ],
        ),
        (hook, vec![("hook-1-inside", dots(1, 34.0, 44.0)), ("hook-0", dots(0, 0.0, 0.0)), ("hook-1-above", dots(1, 33.0, 12.0))]),
        (wedge, vec![("wedge-0", dots(0, 0.0, 0.0)), ("wedge-1-above", dots(1, 29.0, 10.0))]),
        (ra, vec![("ra-0", dots(0, 0.0, 0.0)), ("ra-1-above", dots(1, 38.0, 16.0))]),
        (teeth, vec![("teeth-0", dots(0, 0.0, 0.0)), ("teeth-3-above", dots(3, 26.0, 14.0))]),
        (sad, vec![("sad-0", dots(0, 0.0, 0.0)), ("sad-1-above", dots(1, 22.0, 14.0))]),
        (ta, vec![("ta-0", dots(0, 0.0, 0.0)), ("ta-1-above", dots(1, 38.0, 22.0))]),
        (ain, vec![("ain-0", dots(0, 0.0, 0.0)), ("ain-1-above", dots(1, 32.0, 9.0))]),
        (fa, vec![("fa-1-above", dots(1, 42.0, 16.0)), ("fa-2-above", dots(2, 42.0, 16.0))]),
        (vec![line(&[(32.0, 12.0), (32.0, 52.0)])], vec![("alif", vec![])]),
        (vec![line(&[(40.0, 12.0), (40.0, 44.0), (18.0, 44.0)]), line(&[(28.0, 24.0), (34.0, 30.0)])], vec![("kaf", vec![])]),
        (vec![line(&[(38.0, 10.0), (38.0, 40.0)]), arc(30.0, 40.0, 8.0, 8.0, 0.0, 180.0)], vec![("lam", vec![])]),
        (vec![arc(30.0, 28.0, 6.0, 6.0, 0.0, 360.0), line(&[(30.0, 34.0), (30.0, 54.0)])], vec![("mim", vec![])]),
        (vec![arc(32.0, 34.0, 11.0, 10.0, 0.0, 180.0)], vec![("nun", dots(1, 32.0, 22.0))]),
        (vec![arc(32.0, 32.0, 13.0, 11.0, 0.0, 360.0)], vec![("heh", vec![])]),
        (vec![arc(36.0, 24.0, 6.0, 6.0, 0.0, 360.0), arc(26.0, 30.0, 12.0, 16.0, 0.0, 120.0)], vec![("waw", vec![])]),
    ];
    let mut out = Vec::new();
    for (skeleton, (strokes, members)) in families.into_iter().enumerate() {
        for (name, dots) in members {
            out.push(Prototype { name, skeleton, strokes: strokes.clone(), dots });
        }
    }
    out
}

/// Prototypes and jitter ranges of the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphParams {
    pub prototypes: Vec<Prototype>,
    pub size: usize,
    pub max_rotation_deg: f64,
    pub max_translation: f64,
    pub stroke_width: (f64, f64),
    pub dot_radius: f64,
    pub noise_sigma: f64,
}

impl Default for GlyphParams {
    fn default() -> Self {
        Self {
            prototypes: default_prototypes(),
            size: 64,
            max_rotation_deg: 8.0,
            max_translation: 4.0,
            stroke_width: (2.0, 4.0),
            dot_radius: 3.0,
            noise_sigma: 0.03,
        }
    }
}

/// Class indices sharing a skeleton, for every skeleton used more than once.
pub fn confusable_groups(params: &GlyphParams) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in params.prototypes.iter().enumerate() {
        match groups.iter_mut().find(|g| params.prototypes[g[0]].skeleton == p.skeleton) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

struct Jitter {
    angle: f64,
    tx: f64,
    ty: f64,
    width: f64,
}

fn render(proto: &Prototype, params: &GlyphParams, j: &Jitter, rng: &mut ChaCha8Rng, noise: &Normal<f64>) -> GrayImage {
    let segments: Vec<((f64, f64), (f64, f64))> =
        proto.strokes.iter().flat_map(|s| s.points().windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()).collect();
    let c = params.size as f64 / 2.0;
    let (sin, cos) = j.angle.sin_cos();
    let half = j.width / 2.0;
    GrayImage::from_fn(params.size, params.size, |x, y| {
        // Pixel centre mapped back into the prototype frame.
        let (u, v) = (x as f64 + 0.5 - c - j.tx, y as f64 + 0.5 - c - j.ty);
        let p = (cos * u + sin * v + c, -sin * u + cos * v + c);
        let d_stroke = segments.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
        let mut ink = (half + 0.5 - d_stroke).clamp(0.0, 1.0);
        for &(dx, dy) in &proto.dots {
            let d = ((p.0 - dx).powi(2) + (p.1 - dy).powi(2)).sqrt();
            ink = ink.max((params.dot_radius + 0.5 - d).clamp(0.0, 1.0));
        }
        (1.0 - ink + noise.sample(rng)).clamp(0.0, 1.0)
    })
}

/// `n_per_class` jittered renderings of every prototype, class-major.
/// White background, dark anti-aliased ink. Writers are `syn000`,
/// `syn001`, … by repetition index, with alternating synthetic genders.
pub fn synth_glyphs(n_per_class: usize, seed: u64, params: &GlyphParams) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_sigma.max(0.0)).expect("finite sigma");
    let mut out = Vec::with_capacity(n_per_class * params.prototypes.len());
    for (label, proto) in params.prototypes.iter().enumerate() {
        for i in 0..n_per_class {
            let r = params.max_rotation_deg.to_radians();
            let t = params.max_translation;
            let jitter = Jitter {
                angle: rng.random_range(-r..=r),
                tx: rng.random_range(-t..=t),
                ty: rng.random_range(-t..=t),
                width: rng.random_range(params.stroke_width.0..=params.stroke_width.1),
            };
            let image = render(proto, params, &jitter, &mut rng, &noise);
            out.push(Sample {
                image,
                label,
                writer_id: format!("syn{i:03}"),
                gender: if i % 2 == 0 { Gender::Female } else { Gender::Male },
                id: format!("synth/{label:02}/syn{i:03}_0"),
            });
        }
    }
    out
}
