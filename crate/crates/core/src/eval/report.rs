//! Per-glyph evaluation rows and their aggregate views.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hausdorff::hausdorff;
use super::raster::l1_distance;
use crate::contour::GlyphSequence;
use crate::error::{ContourError, Result};

/// Hausdorff distance charged when a cloud is empty: the diameter of the
/// unit square.
pub const EMPTY_CLOUD_PENALTY: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub font_id: String,
    pub glyph: char,
    pub style: String,
    pub mode: String,
    pub rate: f64,
    pub l1_input: f64,
    pub l1_pred: f64,
    pub hausdorff_input: f64,
    pub hausdorff_pred: f64,
}

/// One glyph to score: the corrupted input, the model output and the truth.
#[derive(Debug, Clone)]
pub struct EvalItem<'a> {
    pub input: &'a GlyphSequence,
    pub prediction: &'a GlyphSequence,
    pub target: &'a GlyphSequence,
    pub style: String,
    pub mode: String,
    pub rate: f64,
}

fn cloud_distance(a: &GlyphSequence, b: &GlyphSequence) -> f64 {
    match hausdorff(&a.coordinates(), &b.coordinates()) {
        Ok(d) => d,
        Err(_) if a.is_empty() && b.is_empty() => 0.0,
        Err(_) => EMPTY_CLOUD_PENALTY,
    }
}

pub fn evaluate_item(item: &EvalItem<'_>) -> EvalRow {
    EvalRow {
        font_id: item.target.font_id.clone(),
        glyph: item.target.glyph_label,
        style: item.style.clone(),
        mode: item.mode.clone(),
        rate: item.rate,
        l1_input: l1_distance(item.input, item.target),
        l1_pred: l1_distance(item.prediction, item.target),
        hausdorff_input: cloud_distance(item.input, item.target),
        hausdorff_pred: cloud_distance(item.prediction, item.target),
    }
}

pub fn evaluate(items: &[EvalItem<'_>]) -> EvalReport {
    EvalReport {
        rows: items.iter().map(evaluate_item).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub key: String,
    pub count: usize,
    pub l1_input: f64,
    pub l1_pred: f64,
    pub hausdorff_input: f64,
    pub hausdorff_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rate: f64,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
}

pub const METRICS: [&str; 4] = ["l1_input", "l1_pred", "hausdorff_input", "hausdorff_pred"];

impl EvalRow {
    pub fn metric(&self, name: &str) -> f64 {
        match name {
            "l1_input" => self.l1_input,
            "l1_pred" => self.l1_pred,
            "hausdorff_input" => self.hausdorff_input,
            "hausdorff_pred" => self.hausdorff_pred,
            other => panic!("unknown metric {other}"),
        }
    }
}

/// Rates are grouped on a micro-unit grid so 0.3 and 0.30000000000000004
/// share a bucket.
fn rate_key(rate: f64) -> i64 {
    (rate * 1e6).round() as i64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    fn aggregate_by<K: Ord>(&self, key: impl Fn(&EvalRow) -> (K, String)) -> Vec<Aggregate> {
        let mut groups: BTreeMap<K, (String, Vec<&EvalRow>)> = BTreeMap::new();
        for row in &self.rows {
            let (k, label) = key(row);
            groups.entry(k).or_insert_with(|| (label, Vec::new())).1.push(row);
        }
        groups
            .into_values()
            .map(|(label, rows)| {
                let n = rows.len() as f64;
                let mean = |m: &str| rows.iter().map(|r| r.metric(m)).sum::<f64>() / n;
                Aggregate {
                    key: label,
                    count: rows.len(),
                    l1_input: mean("l1_input"),
                    l1_pred: mean("l1_pred"),
                    hausdorff_input: mean("hausdorff_input"),
                    hausdorff_pred: mean("hausdorff_pred"),
                }
            })
            .collect()
    }

    pub fn by_rate(&self) -> Vec<Aggregate> {
        self.aggregate_by(|r| (rate_key(r.rate), format!("{}", r.rate)))
    }

    pub fn by_style(&self) -> Vec<Aggregate> {
        self.aggregate_by(|r| (r.style.clone(), r.style.clone()))
    }

    pub fn by_character(&self) -> Vec<Aggregate> {
        self.aggregate_by(|r| (r.glyph, r.glyph.to_string()))
    }

    pub fn by_mode_and_rate(&self) -> Vec<Aggregate> {
        self.aggregate_by(|r| ((r.mode.clone(), rate_key(r.rate)), format!("{}@{}", r.mode, r.rate)))
    }

    /// Mean and standard error of every metric at every rate.
    pub fn curves(&self) -> Vec<CurvePoint> {
        let mut groups: BTreeMap<i64, (f64, Vec<&EvalRow>)> = BTreeMap::new();
        for row in &self.rows {
            groups.entry(rate_key(row.rate)).or_insert((row.rate, Vec::new())).1.push(row);
        }
        let mut out = Vec::new();
        for (rate, rows) in groups.into_values() {
            for metric in METRICS {
                let values: Vec<f64> = rows.iter().map(|r| r.metric(metric)).collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let stderr = if values.len() > 1 {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    (var / n).sqrt()
                } else {
                    0.0
                };
                out.push(CurvePoint {
                    rate,
                    metric: metric.to_string(),
                    mean,
                    stderr,
                });
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.rows)
    }

    pub fn write_curves(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.curves())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?;
        Ok(Self { rows })
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| ContourError::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| ContourError::io(path, e))
}
