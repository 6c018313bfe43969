//! Procedural desk-scale corpus.
//!
//! Every synthetic "font" draws five letters from a shared set of style
//! parameters (stroke width, corner rounding, edge subdivision, jitter):
//!
//! | glyph | construction                          | contours |
//! |-------|---------------------------------------|----------|
//! | `I`   | bar, or I-beam for serif fonts        | 1        |
//! | `L`   | six-corner polygon                    | 1        |
//! | `H`   | twelve-corner polygon                 | 1        |
//! | `O`   | quadratic ellipse ring                | 2        |
//! | `B`   | block with two counters               | 3        |
//!
//! Outer contours run clockwise and counters counter-clockwise (y up), so
//! nonzero filling leaves the counters empty.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FontRecord, Style};
use crate::contour::GlyphSequence;

pub const SYNTH_CHARSET: [char; 5] = ['I', 'L', 'H', 'O', 'B'];

/// Contour size bounds, closure duplicate included.
const MIN_POINTS: usize = 8;
const MAX_POINTS: usize = 60;

type Pt = (f64, f64);

#[derive(Debug, Clone)]
struct StyleParams {
    style: Style,
    stroke: f64,
    corner_radius: f64,
    subdivisions: usize,
    jitter: f64,
    left: f64,
    right: f64,
    bottom: f64,
    top: f64,
    ellipse_segments: usize,
}

impl StyleParams {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let style = Style::ALL[rng.random_range(0..4)];
        let (stroke, rounding, jitter) = match style {
            Style::SansSerif => (rng.random_range(0.10..0.14), 0.0, 0.0),
            Style::Serif => (rng.random_range(0.07..0.10), 0.0, 0.0),
            Style::Display => (rng.random_range(0.15..0.20), rng.random_range(0.0..0.5), 0.0),
            Style::Handwriting => (rng.random_range(0.06..0.10), rng.random_range(0.2..0.5), 0.008),
        };
        Self {
            style,
            stroke,
            corner_radius: rounding * stroke,
            subdivisions: rng.random_range(0..=2),
            jitter,
            left: rng.random_range(0.12..0.22),
            right: rng.random_range(0.78..0.88),
            bottom: rng.random_range(0.08..0.16),
            top: rng.random_range(0.80..0.90),
            ellipse_segments: if rng.random_bool(0.5) { 8 } else { 12 },
        }
    }
}

/// `count` synthetic fonts, each holding the glyphs of [`SYNTH_CHARSET`].
pub fn synth_glyphs(count: usize, seed: u64) -> Vec<FontRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let params = StyleParams::sample(&mut rng);
            let font_id = format!("synth-{seed}-{i:04}");
            let glyphs = SYNTH_CHARSET
                .iter()
                .map(|&c| {
                    let contours = shape(c, &params, &mut rng);
                    (c, GlyphSequence::from_contours(font_id.clone(), c, &contours))
                })
                .collect::<BTreeMap<_, _>>();
            FontRecord {
                font_id,
                style: params.style,
                glyphs,
            }
        })
        .collect()
}

fn shape(c: char, p: &StyleParams, rng: &mut ChaCha8Rng) -> Vec<Vec<(f64, f64, bool)>> {
    let (l, r, b, t, w) = (p.left, p.right, p.bottom, p.top, p.stroke);
    let mid = (b + t) / 2.0;
    let polys: Vec<(Vec<Pt>, bool)> = match c {
        'I' => {
            let cx = (l + r) / 2.0;
            let h = w / 2.0;
            if p.style == Style::Serif {
                let s = 2.5 * w;
                vec![(
                    vec![
                        (cx - s, b),
                        (cx - s, b + w * 0.6),
                        (cx - h, b + w * 0.6),
                        (cx - h, t - w * 0.6),
                        (cx - s, t - w * 0.6),
                        (cx - s, t),
                        (cx + s, t),
                        (cx + s, t - w * 0.6),
                        (cx + h, t - w * 0.6),
                        (cx + h, b + w * 0.6),
                        (cx + s, b + w * 0.6),
                        (cx + s, b),
                    ],
                    true,
                )]
            } else {
                vec![(vec![(cx - h, b), (cx - h, t), (cx + h, t), (cx + h, b)], true)]
            }
        }
        'L' => vec![(
            vec![(l, b), (l, t), (l + w, t), (l + w, b + w), (r, b + w), (r, b)],
            true,
        )],
        'H' => vec![(
            vec![
                (l, b),
                (l, t),
                (l + w, t),
                (l + w, mid + w / 2.0),
                (r - w, mid + w / 2.0),
                (r - w, t),
                (r, t),
                (r, b),
                (r - w, b),
                (r - w, mid - w / 2.0),
                (l + w, mid - w / 2.0),
                (l + w, b),
            ],
            true,
        )],
        'O' => {
            let (cx, cy) = ((l + r) / 2.0, mid);
            let (rx, ry) = ((r - l) / 2.0, (t - b) / 2.0);
            let n = p.ellipse_segments;
            return vec![
                finish(ellipse(cx, cy, rx, ry, n, true), p, rng),
                finish(ellipse(cx, cy, rx - w, ry - w, n, false), p, rng),
            ];
        }
        'B' => vec![
            (vec![(l, b), (l, t), (r, t), (r, b)], true),
            (
                vec![(l + w, mid + w / 2.0), (l + w, t - w), (r - w, t - w), (r - w, mid + w / 2.0)],
                false,
            ),
            (
                vec![(l + w, b + w), (l + w, mid - w / 2.0), (r - w, mid - w / 2.0), (r - w, b + w)],
                false,
            ),
        ],
        other => unreachable!("no synthetic construction for {other:?}"),
    };
    polys
        .into_iter()
        .map(|(corners, outer)| {
            // Counters are listed clockwise above; reversing gives the
            // opposite winding.
            let corners = if outer {
                corners
            } else {
                corners.into_iter().rev().collect()
            };
            finish(polygon(&corners, p), p, rng)
        })
        .collect()
}

/// Corner list to on/off points with optional rounding and edge splits,
/// keeping the contour within the size bounds.
fn polygon(corners: &[Pt], p: &StyleParams) -> Vec<(f64, f64, bool)> {
    let k = corners.len();
    let rounded = p.corner_radius > 1e-3;
    let per_corner = if rounded { 3 } else { 1 };
    let base = k * per_corner;
    let max_sub = (MAX_POINTS - 1).saturating_sub(base) / k;
    let min_sub = (MIN_POINTS - 1).saturating_sub(base).div_ceil(k);
    let sub = p.subdivisions.clamp(min_sub, max_sub);

    let mut out = Vec::new();
    for i in 0..k {
        let prev = corners[(i + k - 1) % k];
        let c = corners[i];
        let next = corners[(i + 1) % k];
        let (in_len, out_len) = (dist(prev, c), dist(c, next));
        let radius = p.corner_radius.min(in_len / 3.0).min(out_len / 3.0);
        let (start, end) = if rounded {
            let a = lerp(c, prev, radius / in_len);
            let z = lerp(c, next, radius / out_len);
            out.push((a.0, a.1, true));
            out.push((c.0, c.1, false));
            out.push((z.0, z.1, true));
            (z, lerp(next, c, radius / out_len))
        } else {
            out.push((c.0, c.1, true));
            (c, next)
        };
        for s in 1..=sub {
            let q = lerp(start, end, s as f64 / (sub + 1) as f64);
            out.push((q.0, q.1, true));
        }
    }
    out
}

/// Quadratic approximation of an ellipse: on-curve points on the ellipse,
/// off-curve points where neighbouring tangents meet.
fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, n: usize, clockwise: bool) -> Vec<(f64, f64, bool)> {
    let dir = if clockwise { -1.0 } else { 1.0 };
    let reach = 1.0 / (PI / n as f64).cos();
    (0..2 * n)
        .map(|j| {
            let a = PI / 2.0 + dir * PI * j as f64 / n as f64;
            let on = j % 2 == 0;
            let s = if on { 1.0 } else { reach };
            (cx + s * rx * a.cos(), cy + s * ry * a.sin(), on)
        })
        .collect()
}

/// Applies jitter, clamps into the unit square and repeats the first point.
fn finish(mut pts: Vec<(f64, f64, bool)>, p: &StyleParams, rng: &mut ChaCha8Rng) -> Vec<(f64, f64, bool)> {
    for q in pts.iter_mut() {
        if p.jitter > 0.0 {
            q.0 += rng.random_range(-p.jitter..p.jitter);
            q.1 += rng.random_range(-p.jitter..p.jitter);
        }
        q.0 = q.0.clamp(0.0, 1.0);
        q.1 = q.1.clamp(0.0, 1.0);
    }
    if let Some(&first) = pts.first() {
        pts.push(first);
    }
    pts
}

fn lerp(a: Pt, b: Pt, t: f64) -> Pt {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

fn dist(a: Pt, b: Pt) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::validate;

    #[test]
    fn every_synthetic_glyph_validates() {
        let fonts = synth_glyphs(60, 3);
        assert_eq!(fonts.len(), 60);
        for f in &fonts {
            assert_eq!(f.glyphs.len(), SYNTH_CHARSET.len());
            for g in f.glyphs.values() {
                assert!(validate(g).is_empty(), "{}/{}: {:?}", f.font_id, g.glyph_label, validate(g));
                let contours = g.contours();
                assert!((1..=3).contains(&contours.len()));
                for c in contours {
                    assert!((MIN_POINTS..=MAX_POINTS).contains(&c.len()), "{} points", c.len());
                }
            }
        }
    }

    #[test]
    fn five_fonts_for_count_five() {
        assert_eq!(synth_glyphs(5, 0).len(), 5);
    }

    #[test]
    fn ring_has_outer_and_inner_contour() {
        let fonts = synth_glyphs(3, 9);
        for f in &fonts {
            assert_eq!(f.glyphs[&'O'].contour_count(), 2);
            assert_eq!(f.glyphs[&'B'].contour_count(), 3);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(synth_glyphs(8, 42), synth_glyphs(8, 42));
        assert_ne!(synth_glyphs(8, 42), synth_glyphs(8, 43));
    }

    #[test]
    fn all_styles_appear() {
        let fonts = synth_glyphs(40, 1);
        for s in Style::ALL {
            assert!(fonts.iter().any(|f| f.style == s), "{s} missing");
        }
    }
}
