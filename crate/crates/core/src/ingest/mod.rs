//! Corpus construction: TrueType extraction, style filtering, font-disjoint
//! splits and the synthetic desk-scale corpus.

pub mod synth;
pub mod ttf;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{ControlPoint, GlyphSequence, Limits};
use crate::error::{ContourError, Result};
use crate::io::write_sequences;

pub use synth::synth_glyphs;
pub use ttf::{Font, FontBuilder, GlyphSource, RawOutline, RawPoint};

/// Uppercase Latin letters.
pub const DEFAULT_CHARSET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Style {
    Serif,
    SansSerif,
    Display,
    Handwriting,
}

impl Style {
    pub const ALL: [Style; 4] = [Style::Serif, Style::SansSerif, Style::Display, Style::Handwriting];

    /// Parses a category name. Monospace (and anything unknown) yields `None`.
    pub fn from_category(name: &str) -> Option<Style> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "serif" => Some(Style::Serif),
            "sansserif" | "sans" => Some(Style::SansSerif),
            "display" => Some(Style::Display),
            "handwriting" => Some(Style::Handwriting),
            _ => None,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Serif => "serif",
            Style::SansSerif => "sans-serif",
            Style::Display => "display",
            Style::Handwriting => "handwriting",
        })
    }
}

impl std::str::FromStr for Style {
    type Err = ContourError;

    fn from_str(s: &str) -> Result<Self> {
        Style::from_category(s).ok_or_else(|| ContourError::Parse(format!("unknown style `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FontRecord {
    pub font_id: String,
    pub style: Style,
    pub glyphs: BTreeMap<char, GlyphSequence>,
}

/// Reads the outline of `c` and converts it to a normalized sequence.
pub fn extract_glyph(font_id: &str, font_bytes: &[u8], c: char) -> Result<GlyphSequence> {
    let font = Font::parse(font_bytes)?;
    extract_from_font(font_id, &font, c, Limits::default())
}

/// Coordinates are shifted so the bounding box minimum is non-negative,
/// divided by units-per-em and clamped to `[0, 1]`. Each contour's first
/// point is repeated at its end.
pub fn extract_from_font(font_id: &str, font: &Font<'_>, c: char, limits: Limits) -> Result<GlyphSequence> {
    let outline = font.outline(c)?;
    if outline.contours.len() > limits.max_contours {
        return Err(ContourError::Capacity(format!(
            "{c:?} has {} contours (max {})",
            outline.contours.len(),
            limits.max_contours
        )));
    }
    if let Some(long) = outline.contours.iter().find(|ct| ct.len() + 1 > limits.max_points) {
        return Err(ContourError::Capacity(format!(
            "{c:?} has a contour of {} points (max {})",
            long.len() + 1,
            limits.max_points
        )));
    }
    let (x0, y0, _, _) = outline.bounds().unwrap_or_default();
    let upem = font.units_per_em() as f64;
    let shift_x = (-x0).max(0) as f64;
    let shift_y = (-y0).max(0) as f64;
    let norm = |v: i32, shift: f64| ((v as f64 + shift) / upem).clamp(0.0, 1.0);

    let mut points = Vec::new();
    for (ci, contour) in outline.contours.iter().enumerate() {
        let closed = contour.iter().chain(contour.first());
        for (pi, p) in closed.enumerate() {
            points.push(ControlPoint::new(
                norm(p.x, shift_x),
                norm(p.y, shift_y),
                ci as i32 + 1,
                pi as i32 + 1,
                p.on_curve,
            ));
        }
    }
    Ok(GlyphSequence::new(font_id, c, points))
}

/// Style of a font file: a Google-Fonts style `METADATA.pb` next to it, or
/// else the name of its parent directory.
pub fn detect_style(path: &Path) -> Option<Result<Style, String>> {
    let dir = path.parent()?;
    if let Ok(meta) = std::fs::read_to_string(dir.join("METADATA.pb")) {
        if let Some(line) = meta.lines().find(|l| l.trim_start().starts_with("category:")) {
            let value = line.split(':').nth(1).unwrap_or("").trim().trim_matches('"');
            return Some(Style::from_category(value).ok_or_else(|| value.to_string()));
        }
    }
    let name = dir.file_name()?.to_string_lossy().to_string();
    Some(Style::from_category(&name).ok_or(name))
}

pub fn is_monospace(category: &str) -> bool {
    category.to_ascii_lowercase().starts_with("mono")
}

/// Loads one font file, keeping the glyphs of `charset` that extract cleanly.
pub fn load_font(path: &Path, charset: &str, limits: Limits) -> Result<Option<FontRecord>> {
    let bytes = std::fs::read(path).map_err(|e| ContourError::io(path, e))?;
    let font_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let style = match detect_style(path) {
        Some(Ok(style)) => style,
        Some(Err(cat)) if is_monospace(&cat) => {
            info!("{font_id}: monospace, excluded");
            return Ok(None);
        }
        _ => {
            warn!("{font_id}: unknown style, assuming sans-serif");
            Style::SansSerif
        }
    };
    let font = Font::parse(&bytes)?;
    let mut glyphs = BTreeMap::new();
    for c in charset.chars() {
        match extract_from_font(&font_id, &font, c, limits) {
            Ok(g) if !g.is_empty() => {
                glyphs.insert(c, g);
            }
            Ok(_) => warn!("{font_id}/{c}: empty outline, skipped"),
            Err(e) => warn!("{font_id}/{c}: {e}, skipped"),
        }
    }
    if glyphs.is_empty() {
        warn!("{font_id}: no usable glyphs");
        return Ok(None);
    }
    Ok(Some(FontRecord {
        font_id,
        style,
        glyphs,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub fn file_stem(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<FontRecord>,
    pub validation: Vec<FontRecord>,
    pub test: Vec<FontRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub font_id: String,
    pub style: Style,
    pub split: SplitName,
    pub glyphs: usize,
}

impl CorpusSplit {
    pub fn part(&self, name: SplitName) -> &[FontRecord] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Validation => &self.validation,
            SplitName::Test => &self.test,
        }
    }

    pub fn glyphs(&self, name: SplitName) -> Vec<GlyphSequence> {
        self.part(name)
            .iter()
            .flat_map(|f| f.glyphs.values().cloned())
            .collect()
    }

    pub fn style_counts(&self, name: SplitName) -> BTreeMap<Style, usize> {
        let mut out = BTreeMap::new();
        for f in self.part(name) {
            *out.entry(f.style).or_insert(0) += 1;
        }
        out
    }

    pub fn manifest(&self) -> Vec<ManifestRow> {
        SplitName::ALL
            .iter()
            .flat_map(|&split| {
                self.part(split).iter().map(move |f| ManifestRow {
                    font_id: f.font_id.clone(),
                    style: f.style,
                    split,
                    glyphs: f.glyphs.len(),
                })
            })
            .collect()
    }

    /// Writes `train.jsonl`, `validation.jsonl`, `test.jsonl` and
    /// `manifest.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| ContourError::io(dir, e))?;
        let mut written = Vec::new();
        for split in SplitName::ALL {
            let path = dir.join(format!("{}.jsonl", split.file_stem()));
            let glyphs = self.glyphs(split);
            write_sequences(&path, &glyphs)?;
            written.push(path);
        }
        let path = dir.join("manifest.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for row in self.manifest() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| ContourError::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Split sizes for `n` fonts: floor of each share, the remainder handed out
/// by largest fractional part, and every non-zero share given at least one.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(ContourError::Split(format!("ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let needed = ratios.iter().filter(|&&r| r > 0.0).count();
    if n < needed {
        return Err(ContourError::Split(format!("{n} fonts cannot fill {needed} splits")));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        if ratios[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| counts[j]).unwrap_or(0);
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    Ok([counts[0], counts[1], counts[2]])
}

/// Font-level shuffle by `seed`, then contiguous train/validation/test cuts.
pub fn split_fonts(mut fonts: Vec<FontRecord>, ratios: [f64; 3], seed: u64) -> Result<CorpusSplit> {
    let [a, b, _] = split_counts(fonts.len(), ratios)?;
    fonts.sort_by(|x, y| x.font_id.cmp(&y.font_id));
    fonts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = fonts.split_off(a + b);
    let validation = fonts.split_off(a);
    Ok(CorpusSplit {
        train: fonts,
        validation,
        test,
    })
}

/// Loads every font in `font_paths` and splits them font-disjointly.
pub fn build_corpus(font_paths: &[PathBuf], split_ratios: [f64; 3], seed: u64, charset: &str) -> Result<CorpusSplit> {
    let mut fonts = Vec::new();
    for path in font_paths {
        match load_font(path, charset, Limits::default()) {
            Ok(Some(f)) => fonts.push(f),
            Ok(None) => {}
            Err(e) => warn!("{}: {e}, skipped", path.display()),
        }
    }
    let split = split_fonts(fonts, split_ratios, seed)?;
    for name in SplitName::ALL {
        info!("{}: {:?}", name.file_stem(), split.style_counts(name));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::validate;

    fn pt(x: i32, y: i32) -> RawPoint {
        RawPoint { x, y, on_curve: true }
    }

    fn ring(n: usize, r: f64, cx: f64, cy: f64) -> Vec<RawPoint> {
        (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                RawPoint {
                    x: (cx + r * t.cos()) as i32,
                    y: (cy + r * t.sin()) as i32,
                    on_curve: i % 2 == 0,
                }
            })
            .collect()
    }

    #[test]
    fn closure_duplicate_added_per_contour() {
        let mut fb = FontBuilder::new(1000);
        fb.add_char('B', vec![ring(20, 300.0, 500.0, 500.0), ring(30, 100.0, 500.0, 500.0)]);
        let g = extract_glyph("f", &fb.build(), 'B').unwrap();
        let sizes: Vec<_> = g.contours().iter().map(|c| c.len()).collect();
        assert_eq!(sizes, [21, 31]);
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn coordinates_divide_by_units_per_em() {
        let mut fb = FontBuilder::new(1000);
        fb.add_char('A', vec![vec![pt(500, 250), pt(600, 250), pt(600, 900)]]);
        let g = extract_glyph("f", &fb.build(), 'A').unwrap();
        assert_eq!((g.points[0].x, g.points[0].y), (0.5, 0.25));
    }

    #[test]
    fn negative_bounds_shift_and_overflow_clamps() {
        let mut fb = FontBuilder::new(1000);
        fb.add_char('J', vec![vec![pt(100, -200), pt(1500, 300), pt(100, 300)]]);
        let g = extract_glyph("f", &fb.build(), 'J').unwrap();
        assert_eq!(g.points[0].y, 0.0);
        assert_eq!(g.points[1].x, 1.0);
        assert!((g.points[1].y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn five_contours_exceed_capacity() {
        let mut fb = FontBuilder::new(1000);
        let contours = (0..5).map(|i| vec![pt(10 * i, 0), pt(10 * i + 5, 5), pt(10 * i, 5)]).collect();
        fb.add_char('W', contours);
        assert!(matches!(
            extract_glyph("f", &fb.build(), 'W'),
            Err(ContourError::Capacity(_))
        ));
    }

    #[test]
    fn long_contour_exceeds_capacity() {
        let mut fb = FontBuilder::new(1000);
        fb.add_char('S', vec![ring(102, 300.0, 500.0, 500.0)]);
        assert!(matches!(
            extract_glyph("f", &fb.build(), 'S'),
            Err(ContourError::Capacity(_))
        ));
        let mut fb = FontBuilder::new(1000);
        fb.add_char('S', vec![ring(101, 300.0, 500.0, 500.0)]);
        assert_eq!(extract_glyph("f", &fb.build(), 'S').unwrap().len(), 102);
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut fb = FontBuilder::new(2048);
        fb.add_char('O', vec![ring(40, 700.0, 1000.0, 1000.0)]);
        let bytes = fb.build();
        assert_eq!(
            extract_glyph("f", &bytes, 'O').unwrap(),
            extract_glyph("f", &bytes, 'O').unwrap()
        );
    }

    #[test]
    fn split_counts_follow_ratios() {
        assert_eq!(split_counts(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
        assert_eq!(split_counts(3, [0.8, 0.1, 0.1]).unwrap(), [1, 1, 1]);
        assert_eq!(split_counts(2182, [0.8144, 0.0917, 0.0939]).unwrap().iter().sum::<usize>(), 2182);
        assert!(split_counts(2, [0.8, 0.1, 0.1]).is_err());
        assert!(split_counts(10, [0.5, 0.1, 0.1]).is_err());
    }

    fn dummy_fonts(n: usize) -> Vec<FontRecord> {
        (0..n)
            .map(|i| FontRecord {
                font_id: format!("font{i:02}"),
                style: Style::ALL[i % 4],
                glyphs: BTreeMap::new(),
            })
            .collect()
    }

    #[test]
    fn splits_are_disjoint_and_seeded() {
        let a = split_fonts(dummy_fonts(10), [0.8, 0.1, 0.1], 5).unwrap();
        let b = split_fonts(dummy_fonts(10), [0.8, 0.1, 0.1], 5).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (8, 1, 1));
        let mut ids: Vec<_> = a.manifest().into_iter().map(|r| r.font_id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn style_names_parse() {
        assert_eq!(Style::from_category("SANS_SERIF"), Some(Style::SansSerif));
        assert_eq!(Style::from_category("Handwriting"), Some(Style::Handwriting));
        assert_eq!(Style::from_category("MONOSPACE"), None);
        assert!(is_monospace("MONOSPACE"));
    }

    #[test]
    fn monospace_fonts_are_excluded_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut fb = FontBuilder::new(1000);
        fb.add_char('A', vec![vec![pt(0, 0), pt(500, 0), pt(250, 700)]]);
        for (sub, expect) in [("monospace", false), ("serif", true)] {
            let d = dir.path().join(sub);
            std::fs::create_dir_all(&d).unwrap();
            let path = d.join("Font-Regular.ttf");
            std::fs::write(&path, fb.build()).unwrap();
            let rec = load_font(&path, "A", Limits::default()).unwrap();
            assert_eq!(rec.is_some(), expect);
        }
    }
}
