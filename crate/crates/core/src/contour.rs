//! Contour data model: control points, glyph sequences and the token
//! conventions shared by every stage of the pipeline.
//!
//! A glyph is an ordered list of control points grouped by contour. Contours
//! are numbered `1..=C` and the points inside each contour `1..=I`. Special
//! start/end records use `-1` for both identifiers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ContourError;

/// Maximum number of contours per glyph.
pub const C_MAX: usize = 4;
/// Maximum number of points per contour, closure duplicate included.
pub const P_MAX: usize = 102;
/// Identifier carried by start/end records.
pub const SPECIAL_ID: i32 = -1;

/// Capacity limits applied by [`validate_with`] and [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_contours: usize,
    pub max_points: usize,
}

impl Limits {
    /// Longest interior sequence that still fits: `max_contours * max_points`.
    pub fn max_sequence(&self) -> usize {
        self.max_contours * self.max_points
    }

    /// Tokenized length including the start and end records.
    pub fn max_tokens(&self) -> usize {
        self.max_sequence() + 2
    }
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_contours: C_MAX,
            max_points: P_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveFlag {
    OnCurve,
    OffCurve,
    Sos,
    Eos,
}

impl CurveFlag {
    pub const COUNT: usize = 4;
    pub const ALL: [CurveFlag; 4] = [
        CurveFlag::OnCurve,
        CurveFlag::OffCurve,
        CurveFlag::Sos,
        CurveFlag::Eos,
    ];

    /// Position of the flag in its one-hot encoding.
    pub fn class_index(self) -> usize {
        match self {
            CurveFlag::OnCurve => 0,
            CurveFlag::OffCurve => 1,
            CurveFlag::Sos => 2,
            CurveFlag::Eos => 3,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.class_index()] = 1.0;
        v
    }

    pub fn is_special(self) -> bool {
        matches!(self, CurveFlag::Sos | CurveFlag::Eos)
    }
}

/// Maps an identifier to its categorical class: `-1` is class 0, `k` is class `k`.
pub fn id_to_class(id: i32) -> usize {
    if id == SPECIAL_ID {
        0
    } else {
        id.max(0) as usize
    }
}

/// Inverse of [`id_to_class`].
pub fn class_to_id(class: usize) -> i32 {
    if class == 0 {
        SPECIAL_ID
    } else {
        class as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub x: f64,
    pub y: f64,
    pub contour_id: i32,
    pub point_id: i32,
    pub flag: CurveFlag,
}

impl ControlPoint {
    pub fn new(x: f64, y: f64, contour_id: i32, point_id: i32, on_curve: bool) -> Self {
        Self {
            x,
            y,
            contour_id,
            point_id,
            flag: if on_curve {
                CurveFlag::OnCurve
            } else {
                CurveFlag::OffCurve
            },
        }
    }

    pub fn sos() -> Self {
        Self::special(CurveFlag::Sos)
    }

    pub fn eos() -> Self {
        Self::special(CurveFlag::Eos)
    }

    fn special(flag: CurveFlag) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            contour_id: SPECIAL_ID,
            point_id: SPECIAL_ID,
            flag,
        }
    }

    pub fn on_curve(&self) -> bool {
        self.flag == CurveFlag::OnCurve
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// One deleted point, recorded for oracle use (baseline placeholders, plots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletedPoint {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub contour: i32,
    pub point: i32,
    pub on_curve: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeletionMode {
    Random,
    Burst,
}

impl fmt::Display for DeletionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeletionMode::Random => f.write_str("random"),
            DeletionMode::Burst => f.write_str("burst"),
        }
    }
}

impl std::str::FromStr for DeletionMode {
    type Err = ContourError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(DeletionMode::Random),
            "burst" => Ok(DeletionMode::Burst),
            other => Err(ContourError::Parse(format!("unknown deletion mode `{other}`"))),
        }
    }
}

/// Ground-truth knowledge about a corruption. Never part of model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionMeta {
    pub mode: DeletionMode,
    pub rate: f64,
    pub seed: u64,
    /// Deleted points in ascending original (flattened) index order.
    pub deleted: Vec<DeletedPoint>,
    /// `(contour, point)` of every original position, before deletion.
    pub original_ids: Vec<(i32, i32)>,
}

impl CorruptionMeta {
    pub fn deleted_indices(&self) -> Vec<usize> {
        self.deleted.iter().map(|d| d.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSequence {
    pub font_id: String,
    pub glyph_label: char,
    pub points: Vec<ControlPoint>,
    pub corrupted: bool,
    pub meta: Option<CorruptionMeta>,
}

impl GlyphSequence {
    pub fn new(font_id: impl Into<String>, glyph_label: char, points: Vec<ControlPoint>) -> Self {
        Self {
            font_id: font_id.into(),
            glyph_label,
            points,
            corrupted: false,
            meta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds a sequence from per-contour `(x, y, on_curve)` lists, numbering
    /// contours and points from 1.
    pub fn from_contours(
        font_id: impl Into<String>,
        glyph_label: char,
        contours: &[Vec<(f64, f64, bool)>],
    ) -> Self {
        let points = contours
            .iter()
            .filter(|c| !c.is_empty())
            .enumerate()
            .flat_map(|(ci, contour)| {
                contour.iter().enumerate().map(move |(pi, &(x, y, on))| {
                    ControlPoint::new(x, y, ci as i32 + 1, pi as i32 + 1, on)
                })
            })
            .collect();
        Self::new(font_id, glyph_label, points)
    }

    /// Consecutive runs of points sharing a contour id.
    pub fn contours(&self) -> Vec<&[ControlPoint]> {
        self.points
            .chunk_by(|a, b| a.contour_id == b.contour_id)
            .collect()
    }

    pub fn contour_count(&self) -> usize {
        self.contours().len()
    }

    /// Coordinates only, as used by point-cloud metrics.
    pub fn coordinates(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(ControlPoint::xy).collect()
    }

    pub fn tokenize(&self) -> Result<TokenizedSequence, ContourError> {
        tokenize(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Closure,
    Contiguity,
    ContourOrder,
    CoordinateRange,
    SpecialRecord,
    Capacity,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::Closure => "closure",
            Rule::Contiguity => "contiguity",
            Rule::ContourOrder => "contour-order",
            Rule::CoordinateRange => "coordinate-range",
            Rule::SpecialRecord => "special-record",
            Rule::Capacity => "capacity",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    /// Index of the offending point in the flattened sequence.
    pub index: usize,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at point {}: {}", self.rule, self.index, self.detail)
    }
}

pub fn validate(seq: &GlyphSequence) -> Vec<Violation> {
    validate_with(seq, Limits::default())
}

/// Checks every sequence invariant. The closure rule is only enforced for
/// uncorrupted sequences.
pub fn validate_with(seq: &GlyphSequence, limits: Limits) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule, index, detail: String| out.push(Violation { rule, index, detail });

    for (i, p) in seq.points.iter().enumerate() {
        if p.flag.is_special() || p.contour_id == SPECIAL_ID || p.point_id == SPECIAL_ID {
            push(
                Rule::SpecialRecord,
                i,
                format!("special record ({:?}, {}, {}) inside glyph", p.flag, p.contour_id, p.point_id),
            );
        }
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        if !in_range(p.x) || !in_range(p.y) {
            push(Rule::CoordinateRange, i, format!("({}, {}) outside [0, 1]", p.x, p.y));
        }
    }

    let mut start = 0;
    let mut expected_contour = 1;
    let mut seen_contours = 0usize;
    for contour in seq.contours() {
        let cid = contour[0].contour_id;
        seen_contours += 1;
        if cid != expected_contour && cid != SPECIAL_ID {
            let rule = if cid < expected_contour {
                Rule::ContourOrder
            } else {
                Rule::Contiguity
            };
            push(rule, start, format!("contour id {cid}, expected {expected_contour}"));
        }
        expected_contour = cid.max(expected_contour) + 1;

        for (k, p) in contour.iter().enumerate() {
            let expected = k as i32 + 1;
            if p.point_id != expected && p.point_id != SPECIAL_ID {
                push(
                    Rule::Contiguity,
                    start + k,
                    format!("point id {} in contour {cid}, expected {expected}", p.point_id),
                );
                break;
            }
        }
        if contour.len() > limits.max_points {
            push(
                Rule::Capacity,
                start,
                format!("contour {cid} has {} points (max {})", contour.len(), limits.max_points),
            );
        }
        if !seq.corrupted {
            let (first, last) = (contour[0], contour[contour.len() - 1]);
            if first.x != last.x || first.y != last.y {
                push(
                    Rule::Closure,
                    start + contour.len() - 1,
                    format!("contour {cid} ends at ({}, {}), starts at ({}, {})", last.x, last.y, first.x, first.y),
                );
            }
        }
        start += contour.len();
    }
    if seen_contours > limits.max_contours {
        push(
            Rule::Capacity,
            0,
            format!("{seen_contours} contours (max {})", limits.max_contours),
        );
    }
    out
}

/// Relabels contours `1..=C'` and points `1..=I'` within each contour,
/// treating each run of equal contour ids as one contour. Coordinates and
/// flags are untouched; an empty sequence stays empty.
pub fn renumber(seq: &GlyphSequence) -> GlyphSequence {
    let mut points = Vec::with_capacity(seq.points.len());
    for (ci, contour) in seq.contours().into_iter().enumerate() {
        for (pi, p) in contour.iter().enumerate() {
            points.push(ControlPoint {
                contour_id: ci as i32 + 1,
                point_id: pi as i32 + 1,
                ..*p
            });
        }
    }
    GlyphSequence {
        points,
        ..seq.clone()
    }
}

/// Points framed by a start record and an end record.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedSequence {
    records: Vec<ControlPoint>,
}

impl TokenizedSequence {
    /// Wraps already-framed records, checking the framing.
    pub fn from_records(records: Vec<ControlPoint>) -> Result<Self, ContourError> {
        let n = records.len();
        if n < 2 || records[0].flag != CurveFlag::Sos || records[n - 1].flag != CurveFlag::Eos {
            return Err(ContourError::Framing(
                "sequence must start with SOS and end with EOS".into(),
            ));
        }
        if let Some(i) = records[1..n - 1].iter().position(|r| r.flag.is_special()) {
            return Err(ContourError::Framing(format!(
                "special record at interior position {}",
                i + 1
            )));
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[ControlPoint] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interior(&self) -> &[ControlPoint] {
        &self.records[1..self.records.len() - 1]
    }

    /// Strips the framing records.
    pub fn detokenize(&self) -> Vec<ControlPoint> {
        self.interior().to_vec()
    }
}

pub fn tokenize(seq: &GlyphSequence) -> Result<TokenizedSequence, ContourError> {
    tokenize_points(&seq.points, Limits::default())
}

pub fn tokenize_points(points: &[ControlPoint], limits: Limits) -> Result<TokenizedSequence, ContourError> {
    if points.len() > limits.max_sequence() {
        return Err(ContourError::Capacity(format!(
            "{} points exceed the maximum sequence length {}",
            points.len(),
            limits.max_sequence()
        )));
    }
    let mut records = Vec::with_capacity(points.len() + 2);
    records.push(ControlPoint::sos());
    records.extend_from_slice(points);
    records.push(ControlPoint::eos());
    TokenizedSequence::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cid: i32, x0: f64) -> Vec<ControlPoint> {
        [(x0, 0.1), (x0 + 0.2, 0.1), (x0 + 0.2, 0.3), (x0, 0.3), (x0, 0.1)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| ControlPoint::new(x, y, cid, i as i32 + 1, true))
            .collect()
    }

    fn two_contours() -> GlyphSequence {
        let mut pts = square(1, 0.1);
        pts.extend(square(2, 0.5));
        GlyphSequence::new("f", 'A', pts)
    }

    #[test]
    fn well_formed_glyph_has_no_violations() {
        assert!(validate(&two_contours()).is_empty());
    }

    #[test]
    fn open_contour_is_a_closure_violation() {
        let mut g = two_contours();
        g.points[4].x = 0.15;
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Closure);
        assert_eq!(v[0].index, 4);

        g.corrupted = true;
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn point_id_gap_is_one_contiguity_violation() {
        let pts = vec![
            ControlPoint::new(0.1, 0.1, 1, 1, true),
            ControlPoint::new(0.5, 0.1, 1, 2, true),
            ControlPoint::new(0.1, 0.1, 1, 4, true),
        ];
        let v = validate(&GlyphSequence::new("f", 'A', pts));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Contiguity);
        assert_eq!(v[0].index, 2);
    }

    #[test]
    fn contour_gap_and_capacity_are_reported() {
        let mut g = two_contours();
        for p in g.points.iter_mut().skip(5) {
            p.contour_id = 3;
        }
        let v = validate(&g);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Contiguity);

        let five: Vec<_> = (0..5).flat_map(|c| square(c + 1, 0.1)).collect();
        let v = validate(&GlyphSequence::new("f", 'A', five));
        assert!(v.iter().any(|v| v.rule == Rule::Capacity));
    }

    #[test]
    fn special_and_out_of_range_points_are_reported() {
        let mut g = two_contours();
        g.points[1].x = 1.5;
        g.points[2].flag = CurveFlag::Eos;
        let rules: Vec<_> = validate(&g).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::CoordinateRange));
        assert!(rules.contains(&Rule::SpecialRecord));
    }

    #[test]
    fn renumber_closes_point_gaps() {
        let pts: Vec<_> = [1, 3, 5]
            .iter()
            .map(|&i| ControlPoint::new(0.2, 0.2, 1, i, true))
            .collect();
        let r = renumber(&GlyphSequence::new("f", 'A', pts));
        let ids: Vec<_> = r.points.iter().map(|p| p.point_id).collect();
        assert_eq!(ids, [1, 2, 3]);
    }

    #[test]
    fn renumber_closes_contour_gaps() {
        let mut pts = square(1, 0.1);
        pts.extend(square(3, 0.5));
        let r = renumber(&GlyphSequence::new("f", 'A', pts));
        assert_eq!(r.points[5].contour_id, 2);
        assert_eq!(r.contour_count(), 2);
    }

    #[test]
    fn renumber_is_identity_on_contiguous_input() {
        let g = two_contours();
        assert_eq!(renumber(&g), g);
    }

    #[test]
    fn tokenize_frames_points() {
        let pts: Vec<_> = (0..10)
            .map(|i| ControlPoint::new(0.1 * i as f64, 0.5, 1, i + 1, true))
            .collect();
        let g = GlyphSequence::new("f", 'A', pts);
        let t = tokenize(&g).unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(t.records()[0], ControlPoint::sos());
        assert_eq!(t.records()[11], ControlPoint::eos());
        assert_eq!(t.records()[1], g.points[0]);
        assert_eq!(t.detokenize(), g.points);
    }

    #[test]
    fn empty_glyph_tokenizes_to_sos_eos() {
        let t = tokenize(&GlyphSequence::new("f", 'A', vec![])).unwrap();
        assert_eq!(t.records(), &[ControlPoint::sos(), ControlPoint::eos()]);
    }

    #[test]
    fn tokenize_rejects_overlong_sequences() {
        let pts = vec![ControlPoint::new(0.1, 0.1, 1, 1, true); C_MAX * P_MAX + 1];
        assert!(matches!(
            tokenize(&GlyphSequence::new("f", 'A', pts)),
            Err(ContourError::Capacity(_))
        ));
    }

    #[test]
    fn from_records_rejects_bad_framing() {
        assert!(TokenizedSequence::from_records(vec![ControlPoint::sos()]).is_err());
        let bad = vec![ControlPoint::sos(), ControlPoint::eos(), ControlPoint::eos()];
        assert!(TokenizedSequence::from_records(bad).is_err());
    }

    #[test]
    fn id_class_mapping() {
        assert_eq!(id_to_class(SPECIAL_ID), 0);
        assert_eq!(id_to_class(4), 4);
        assert_eq!(class_to_id(0), SPECIAL_ID);
        assert_eq!(class_to_id(102), 102);
        for f in CurveFlag::ALL {
            assert_eq!(CurveFlag::from_class_index(f.class_index()), Some(f));
            assert_eq!(f.one_hot().iter().sum::<f64>(), 1.0);
        }
    }
}
