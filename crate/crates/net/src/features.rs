//! Numeric encoding of sequence records for the embedding layer.

use contourfill_core::contour::id_to_class;
use contourfill_core::{ControlPoint, CorruptionMeta, GlyphSequence, TokenizedSequence};
use ndarray::Array2;

use crate::error::{NetError, Result};
use crate::model::ModelConfig;
use crate::scalar::Scalar;

/// One record as the network sees it: coordinates plus class indices.
/// A `None` flag encodes as the all-zero vector (baseline placeholders).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputRecord {
    pub x: f64,
    pub y: f64,
    pub contour: usize,
    pub point: usize,
    pub flag: Option<usize>,
}

impl InputRecord {
    pub fn from_point(p: &ControlPoint) -> Self {
        Self {
            x: p.x,
            y: p.y,
            contour: id_to_class(p.contour_id),
            point: id_to_class(p.point_id),
            flag: Some(p.flag.class_index()),
        }
    }

    pub fn placeholder(contour_id: i32, point_id: i32) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            contour: id_to_class(contour_id),
            point: id_to_class(point_id),
            flag: None,
        }
    }
}

pub fn records_of(seq: &TokenizedSequence) -> Vec<InputRecord> {
    seq.records().iter().map(InputRecord::from_point).collect()
}

/// Baseline input: the ground-truth-length sequence with placeholders at
/// the deleted positions and survivors carrying their original ids,
/// framed by start and end records.
pub fn placeheld_records(input: &GlyphSequence, meta: &CorruptionMeta) -> Result<Vec<InputRecord>> {
    let total = input.len() + meta.deleted.len();
    if meta.original_ids.len() != total {
        return Err(NetError::Oracle(format!(
            "{} survivors + {} deletions != {} original ids",
            input.len(),
            meta.deleted.len(),
            meta.original_ids.len()
        )));
    }
    let mut deleted = meta.deleted.iter().peekable();
    let mut survivors = input.points.iter();
    let mut out = Vec::with_capacity(total + 2);
    out.push(InputRecord::from_point(&ControlPoint::sos()));
    for (pos, &(cid, pid)) in meta.original_ids.iter().enumerate() {
        if deleted.peek().is_some_and(|d| d.index == pos) {
            deleted.next();
            out.push(InputRecord::placeholder(cid, pid));
        } else {
            let p = survivors
                .next()
                .ok_or_else(|| NetError::Oracle(format!("ran out of survivors at position {pos}")))?;
            out.push(InputRecord {
                contour: id_to_class(cid),
                point: id_to_class(pid),
                ..InputRecord::from_point(p)
            });
        }
    }
    if deleted.next().is_some() || survivors.next().is_some() {
        return Err(NetError::Oracle("deleted indices out of order or out of range".into()));
    }
    out.push(InputRecord::from_point(&ControlPoint::eos()));
    Ok(out)
}

/// A padded batch of record sequences, flattened batch-major: row
/// `b * len + t` is position `t` of sequence `b`.
#[derive(Debug, Clone)]
pub struct FeatureBatch<T> {
    pub coords: Array2<T>,
    pub contour: Array2<T>,
    pub point: Array2<T>,
    pub flag: Array2<T>,
    /// `true` at padded positions.
    pub pad: Vec<bool>,
    pub batch: usize,
    pub len: usize,
}

impl<T: Scalar> FeatureBatch<T> {
    pub fn new(seqs: &[Vec<InputRecord>], cfg: &ModelConfig) -> Result<Self> {
        let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        if len > cfg.max_len {
            return Err(NetError::Length { len, max: cfg.max_len });
        }
        let rows = seqs.len() * len;
        let mut fb = Self {
            coords: Array2::zeros((rows, 2)),
            contour: Array2::zeros((rows, cfg.contour_classes)),
            point: Array2::zeros((rows, cfg.point_classes)),
            flag: Array2::zeros((rows, cfg.flag_classes)),
            pad: vec![true; rows],
            batch: seqs.len(),
            len,
        };
        for (b, seq) in seqs.iter().enumerate() {
            for (t, r) in seq.iter().enumerate() {
                let row = b * len + t;
                fb.pad[row] = false;
                fb.coords[[row, 0]] = T::lit(r.x);
                fb.coords[[row, 1]] = T::lit(r.y);
                set_class(&mut fb.contour, row, r.contour, "contour")?;
                set_class(&mut fb.point, row, r.point, "point")?;
                if let Some(f) = r.flag {
                    set_class(&mut fb.flag, row, f, "flag")?;
                }
            }
        }
        Ok(fb)
    }

    pub fn single(seq: &[InputRecord], cfg: &ModelConfig) -> Result<Self> {
        Self::new(&[seq.to_vec()], cfg)
    }

    pub fn rows(&self) -> usize {
        self.pad.len()
    }

    /// The same batch with every sequence padded to `len` positions.
    pub fn pad_to(&self, len: usize) -> Self {
        assert!(len >= self.len, "cannot shrink a batch");
        let rows = self.batch * len;
        let mut out = Self {
            coords: Array2::zeros((rows, 2)),
            contour: Array2::zeros((rows, self.contour.ncols())),
            point: Array2::zeros((rows, self.point.ncols())),
            flag: Array2::zeros((rows, self.flag.ncols())),
            pad: vec![true; rows],
            batch: self.batch,
            len,
        };
        for b in 0..self.batch {
            for t in 0..self.len {
                let (src, dst) = (b * self.len + t, b * len + t);
                out.coords.row_mut(dst).assign(&self.coords.row(src));
                out.contour.row_mut(dst).assign(&self.contour.row(src));
                out.point.row_mut(dst).assign(&self.point.row(src));
                out.flag.row_mut(dst).assign(&self.flag.row(src));
                out.pad[dst] = self.pad[src];
            }
        }
        out
    }
}

fn set_class<T: Scalar>(m: &mut Array2<T>, row: usize, class: usize, head: &'static str) -> Result<()> {
    if class >= m.ncols() {
        return Err(NetError::Class {
            head,
            class,
            classes: m.ncols(),
        });
    }
    m[[row, class]] = T::one();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use contourfill_core::corruption::{corrupt, CorruptionSpec};
    use contourfill_core::ingest::synth_glyphs;
    use contourfill_core::DeletionMode;

    #[test]
    fn pads_to_batch_maximum() {
        let cfg = ModelConfig::default();
        let rec = InputRecord::from_point(&ControlPoint::new(0.5, 0.25, 1, 2, true));
        let fb = FeatureBatch::<f32>::new(&[vec![rec; 5], vec![rec; 9]], &cfg).unwrap();
        assert_eq!(fb.len, 9);
        assert_eq!(fb.pad.iter().filter(|&&p| p).count(), 4);
        assert_eq!(fb.contour[[0, 1]], 1.0);
        assert_eq!(fb.point[[0, 2]], 1.0);
        assert_eq!(fb.flag.row(5).sum(), 0.0);
    }

    #[test]
    fn out_of_range_class_is_rejected() {
        let cfg = ModelConfig::default();
        let rec = InputRecord::from_point(&ControlPoint::new(0.5, 0.25, 7, 2, true));
        assert!(matches!(
            FeatureBatch::<f32>::single(&[rec], &cfg),
            Err(NetError::Class { head: "contour", .. })
        ));
    }

    #[test]
    fn placeholders_restore_ground_truth_length_and_ids() {
        let g = synth_glyphs(1, 5).remove(0).glyphs.remove(&'B').unwrap();
        let c = corrupt(&g, &CorruptionSpec::new(DeletionMode::Random, 0.3, 11)).unwrap();
        let meta = c.meta.clone().unwrap();
        let recs = placeheld_records(&c, &meta).unwrap();
        assert_eq!(recs.len(), g.len() + 2);
        let deleted = meta.deleted_indices();
        for (i, (r, p)) in recs[1..recs.len() - 1].iter().zip(&g.points).enumerate() {
            assert_eq!(r.contour, id_to_class(p.contour_id));
            assert_eq!(r.point, id_to_class(p.point_id));
            if deleted.contains(&i) {
                assert_eq!((r.x, r.y, r.flag), (0.0, 0.0, None));
            } else {
                assert_eq!((r.x, r.y), (p.x, p.y));
            }
        }
    }

    #[test]
    fn inconsistent_oracle_is_an_error() {
        let g = synth_glyphs(1, 5).remove(0).glyphs.remove(&'O').unwrap();
        let c = corrupt(&g, &CorruptionSpec::new(DeletionMode::Burst, 0.2, 1)).unwrap();
        let mut meta = c.meta.clone().unwrap();
        meta.original_ids.pop();
        assert!(matches!(placeheld_records(&c, &meta), Err(NetError::Oracle(_))));
    }
}
