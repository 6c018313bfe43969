//! Canonical line-delimited sequence files.
//!
//! One glyph per line:
//!
//! ```json
//! {"font_id":"f","glyph_label":"A","corrupted":false,
//!  "points":[{"x":0.1,"y":0.2,"contour":1,"index":1,"on_curve":true}]}
//! ```
//!
//! Coordinates are written with the shortest representation that reads back
//! to the identical `f64`. Completion output may add a `completion` sidecar
//! field; oracle files hold [`CorruptionMeta`] keyed by font and glyph.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::contour::{ControlPoint, CorruptionMeta, CurveFlag, GlyphSequence};
use crate::error::{ContourError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub contour: i32,
    pub index: i32,
    pub on_curve: bool,
}

impl From<&ControlPoint> for PointRecord {
    fn from(p: &ControlPoint) -> Self {
        Self {
            x: p.x,
            y: p.y,
            contour: p.contour_id,
            index: p.point_id,
            on_curve: p.flag == CurveFlag::OnCurve,
        }
    }
}

impl From<&PointRecord> for ControlPoint {
    fn from(r: &PointRecord) -> Self {
        ControlPoint::new(r.x, r.y, r.contour, r.index, r.on_curve)
    }
}

/// Diagnostics attached to model output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionMeta {
    /// Decoding hit the length cap before an end record.
    pub unterminated: bool,
    /// Identifiers as predicted, before any repair.
    pub raw_ids: Vec<(i32, i32)>,
    /// Identifiers were replaced by emission-order numbering.
    #[serde(default)]
    pub renumbered: bool,
    /// Records dropped because a contour exceeded its capacity.
    #[serde(default)]
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLine {
    pub font_id: String,
    pub glyph_label: char,
    pub corrupted: bool,
    pub points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<CompletionMeta>,
}

impl SequenceLine {
    pub fn from_glyph(glyph: &GlyphSequence) -> Self {
        Self {
            font_id: glyph.font_id.clone(),
            glyph_label: glyph.glyph_label,
            corrupted: glyph.corrupted,
            points: glyph.points.iter().map(PointRecord::from).collect(),
            completion: None,
        }
    }

    pub fn with_completion(mut self, meta: CompletionMeta) -> Self {
        self.completion = Some(meta);
        self
    }

    /// Corruption metadata lives in oracle files, so `meta` is always `None`.
    pub fn to_glyph(&self) -> GlyphSequence {
        GlyphSequence {
            font_id: self.font_id.clone(),
            glyph_label: self.glyph_label,
            points: self.points.iter().map(ControlPoint::from).collect(),
            corrupted: self.corrupted,
            meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLine {
    pub font_id: String,
    pub glyph_label: char,
    #[serde(flatten)]
    pub meta: CorruptionMeta,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| ContourError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ContourError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| ContourError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ContourError::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| ContourError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(&row).map_err(|e| ContourError::Parse(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| ContourError::io(path, e))?;
    }
    w.flush().map_err(|e| ContourError::io(path, e))
}

pub fn read_sequences(path: &Path) -> Result<Vec<GlyphSequence>> {
    Ok(read_jsonl::<SequenceLine>(path)?
        .iter()
        .map(SequenceLine::to_glyph)
        .collect())
}

pub fn write_sequences<'a>(
    path: &Path,
    glyphs: impl IntoIterator<Item = &'a GlyphSequence>,
) -> Result<()> {
    write_jsonl(path, glyphs.into_iter().map(SequenceLine::from_glyph))
}
