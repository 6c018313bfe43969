//! Missing-data simulation by random and burst deletion.
//!
//! Deleted points leave no trace: survivors are renumbered so contour and
//! point identifiers stay contiguous. What was removed is recorded in a
//! [`CorruptionMeta`] that only oracle consumers may read.

use std::ops::Range;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{renumber, CorruptionMeta, DeletedPoint, DeletionMode, GlyphSequence};
use crate::error::{ContourError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub mode: DeletionMode,
    pub rate: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(mode: DeletionMode, rate: f64, seed: u64) -> Self {
        Self { mode, rate, seed }
    }

    /// Number of points removed from an `n`-point glyph.
    pub fn deleted_count(&self, n: usize) -> Result<usize> {
        deleted_count(self.rate, n)
    }
}

/// `round(rate * n)`, rounding halves up.
pub fn deleted_count(rate: f64, n: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&rate) {
        return Err(ContourError::InvalidRate(rate));
    }
    Ok((rate * n as f64 + 0.5).floor() as usize)
}

fn checked_count(spec: &CorruptionSpec, n: usize) -> Result<usize> {
    let d = spec.deleted_count(n)?;
    if d >= n {
        return Err(ContourError::RateTooHigh { deleted: d, total: n });
    }
    Ok(d)
}

/// The first `d` entries of a seeded partial Fisher-Yates shuffle of `0..n`,
/// sorted ascending.
pub fn random_indices(n: usize, d: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..d {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..d].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Window of `d` consecutive indices around `center` within `0..n`:
/// `(d - 1) / 2` before the center, the rest after, shifted inward when it
/// would cross either end.
pub fn burst_window(n: usize, d: usize, center: usize) -> Range<usize> {
    debug_assert!(d <= n && center < n.max(1));
    let before = d.saturating_sub(1) / 2;
    let start = center.saturating_sub(before).min(n - d);
    start..start + d
}

pub fn burst_center(n: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..n)
}

pub fn random_delete(seq: &GlyphSequence, spec: &CorruptionSpec) -> Result<GlyphSequence> {
    let n = seq.len();
    let d = checked_count(spec, n)?;
    let deleted = random_indices(n, d, spec.seed);
    Ok(remove_indices(seq, &deleted, spec))
}

pub fn burst_delete(seq: &GlyphSequence, spec: &CorruptionSpec) -> Result<GlyphSequence> {
    let n = seq.len();
    let d = checked_count(spec, n)?;
    let center = burst_center(n, spec.seed);
    let deleted: Vec<usize> = burst_window(n, d, center).collect();
    Ok(remove_indices(seq, &deleted, spec))
}

/// Dispatches on `spec.mode`.
pub fn corrupt(seq: &GlyphSequence, spec: &CorruptionSpec) -> Result<GlyphSequence> {
    match spec.mode {
        DeletionMode::Random => random_delete(seq, spec),
        DeletionMode::Burst => burst_delete(seq, spec),
    }
}

/// `deleted` must be sorted ascending.
fn remove_indices(seq: &GlyphSequence, deleted: &[usize], spec: &CorruptionSpec) -> GlyphSequence {
    let mut removed = Vec::with_capacity(deleted.len());
    let mut kept = Vec::with_capacity(seq.len() - deleted.len());
    let mut next = deleted.iter().peekable();
    for (i, p) in seq.points.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            removed.push(DeletedPoint {
                index: i,
                x: p.x,
                y: p.y,
                contour: p.contour_id,
                point: p.point_id,
                on_curve: p.on_curve(),
            });
        } else {
            kept.push(*p);
        }
    }
    let meta = CorruptionMeta {
        mode: spec.mode,
        rate: spec.rate,
        seed: spec.seed,
        deleted: removed,
        original_ids: seq.points.iter().map(|p| (p.contour_id, p.point_id)).collect(),
    };
    let stripped = GlyphSequence {
        points: kept,
        corrupted: true,
        meta: Some(meta),
        ..seq.clone()
    };
    renumber(&stripped)
}

/// A corrupted glyph and the ground truth it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedPair {
    pub input: GlyphSequence,
    pub target: GlyphSequence,
}

impl CorruptedPair {
    pub fn meta(&self) -> Option<&CorruptionMeta> {
        self.input.meta.as_ref()
    }
}

/// Stable per-glyph seed so a glyph's corruption does not depend on its
/// position in the corpus.
pub fn glyph_seed(base: u64, font_id: &str, label: char) -> u64 {
    // FNV-1a over the key, then a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut label_buf = [0u8; 4];
    for b in font_id
        .bytes()
        .chain([0u8])
        .chain(label.encode_utf8(&mut label_buf).bytes())
    {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One corrupted copy per glyph and spec, glyph-major. Glyphs that cannot be
/// corrupted at a given rate are skipped with a warning.
pub fn corrupt_corpus(glyphs: &[GlyphSequence], specs: &[CorruptionSpec]) -> Vec<CorruptedPair> {
    let mut out = Vec::with_capacity(glyphs.len() * specs.len());
    for glyph in glyphs {
        for spec in specs {
            let local = CorruptionSpec {
                seed: glyph_seed(spec.seed, &glyph.font_id, glyph.glyph_label),
                ..*spec
            };
            match corrupt(glyph, &local) {
                Ok(input) => out.push(CorruptedPair {
                    input,
                    target: glyph.clone(),
                }),
                Err(e) => warn!(
                    "skipping {}/{} at {} rate {}: {e}",
                    glyph.font_id, glyph.glyph_label, spec.mode, spec.rate
                ),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{validate, Rule};

    fn line_glyph(n: usize) -> GlyphSequence {
        let pts: Vec<_> = (0..n)
            .map(|i| (i as f64 / n as f64, 0.5, i % 3 != 0))
            .collect();
        GlyphSequence::from_contours("f", 'A', &[pts])
    }

    fn spec(mode: DeletionMode, rate: f64, seed: u64) -> CorruptionSpec {
        CorruptionSpec::new(mode, rate, seed)
    }

    #[test]
    fn half_rate_halves_the_glyph() {
        let out = random_delete(&line_glyph(20), &spec(DeletionMode::Random, 0.5, 3)).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.corrupted);
        assert_eq!(out.meta.as_ref().unwrap().deleted.len(), 10);
    }

    #[test]
    fn zero_rate_only_sets_the_flag() {
        let g = line_glyph(12);
        let out = random_delete(&g, &spec(DeletionMode::Random, 0.0, 1)).unwrap();
        assert_eq!(out.points, g.points);
        assert!(out.corrupted);
    }

    #[test]
    fn surviving_set_matches_independent_redraw() {
        // Re-draw with the documented contract: a partial Fisher-Yates over
        // 0..n driven by ChaCha8 seeded with the spec seed.
        let g = line_glyph(4);
        let seed = 99;
        let out = random_delete(&g, &spec(DeletionMode::Random, 0.5, seed)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = vec![0usize, 1, 2, 3];
        let mut removed = Vec::new();
        for i in 0..2 {
            let j = rng.random_range(i..4);
            pool.swap(i, j);
            removed.push(pool[i]);
        }
        let expected: Vec<_> = (0..4)
            .filter(|i| !removed.contains(i))
            .map(|i| g.points[i].x)
            .collect();
        let got: Vec<_> = out.points.iter().map(|p| p.x).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn burst_window_arithmetic() {
        assert_eq!(deleted_count(0.3, 20).unwrap(), 6);
        assert_eq!(burst_window(20, 6, 10), 8..14);
        assert_eq!(burst_window(20, 5, 0), 0..5);
        assert_eq!(burst_window(20, 5, 19), 15..20);
        assert_eq!(burst_window(20, 1, 7), 7..8);
        assert_eq!(burst_window(20, 0, 7), 7..7);
    }

    #[test]
    fn burst_removes_one_contiguous_interval() {
        let g = line_glyph(30);
        for seed in 0..200 {
            let out = burst_delete(&g, &spec(DeletionMode::Burst, 0.4, seed)).unwrap();
            let idx = out.meta.unwrap().deleted_indices();
            assert_eq!(idx.len(), 12);
            assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
        }
    }

    #[test]
    fn output_size_is_exact() {
        for trial in 0..1000u64 {
            let n = 5 + (trial as usize % 60);
            let rate = 0.1 * (1 + trial % 5) as f64;
            let mode = if trial % 2 == 0 {
                DeletionMode::Random
            } else {
                DeletionMode::Burst
            };
            let out = corrupt(&line_glyph(n), &spec(mode, rate, trial)).unwrap();
            assert_eq!(out.len(), n - deleted_count(rate, n).unwrap());
        }
    }

    #[test]
    fn rate_too_high_is_rejected() {
        let err = random_delete(&line_glyph(1), &spec(DeletionMode::Random, 0.5, 0)).unwrap_err();
        assert!(matches!(err, ContourError::RateTooHigh { deleted: 1, total: 1 }));
        assert!(matches!(
            random_delete(&line_glyph(4), &spec(DeletionMode::Random, 1.0, 0)),
            Err(ContourError::InvalidRate(_))
        ));
    }

    #[test]
    fn emptied_contour_disappears() {
        let g = GlyphSequence::from_contours(
            "f",
            'O',
            &[
                vec![(0.1, 0.1, true), (0.9, 0.1, true), (0.1, 0.1, true)],
                vec![(0.4, 0.4, true), (0.6, 0.4, true), (0.4, 0.4, true)],
                vec![(0.2, 0.8, true), (0.3, 0.8, true), (0.2, 0.8, true)],
            ],
        );
        let s = spec(DeletionMode::Burst, 0.0, 0);
        let out = remove_indices(&g, &[3, 4, 5], &s);
        assert_eq!(out.contour_count(), 2);
        assert_eq!(out.points[3].contour_id, 2);
        assert!(validate(&out).is_empty());
    }

    #[test]
    fn corpus_corruption_pairs_and_determinism() {
        let glyphs: Vec<_> = (0..20)
            .map(|i| {
                let mut g = line_glyph(10 + i);
                g.font_id = format!("font{i}");
                g
            })
            .collect();
        let specs: Vec<_> = (1..=5)
            .map(|k| spec(DeletionMode::Random, k as f64 / 10.0, 11))
            .collect();
        let a = corrupt_corpus(&glyphs, &specs);
        let b = corrupt_corpus(&glyphs, &specs);
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        for p in &a {
            assert!(validate(&p.input)
                .iter()
                .all(|v| v.rule != Rule::Contiguity && v.rule != Rule::ContourOrder));
        }
    }
}
