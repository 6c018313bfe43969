//! Greedy autoregressive completion and assembly of predicted records.
//!
//! The decoder runs incrementally: each layer keeps the keys and values of
//! the positions decoded so far, and cross-attention keys and values are
//! projected from the encoder memory once per glyph.

use std::collections::BTreeMap;

use contourfill_core::contour::class_to_id;
use contourfill_core::io::CompletionMeta;
use contourfill_core::{tokenize, ControlPoint, CorruptionMeta, CurveFlag, GlyphSequence, Limits};
use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::batch::baseline_source;
use crate::error::{NetError, Result};
use crate::features::{placeheld_records, records_of, FeatureBatch, InputRecord};
use crate::graph::Graph;
use crate::model::{Architecture, AttnIds, CompletionModel, HeadsOutput, LinearIds, NormIds};
use crate::ops::{self, sinusoid, AttnLayout};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Completion {
    pub glyph: GlyphSequence,
    pub meta: CompletionMeta,
}

/// Raw greedy decoding result.
#[derive(Debug, Clone)]
pub struct Decoded<T> {
    /// Emitted records, end record excluded.
    pub records: Vec<ControlPoint>,
    /// Head outputs of every decoding step, one row per step.
    pub heads: HeadsOutput<T>,
    pub terminated: bool,
}

fn argmax<T: Scalar>(row: impl IntoIterator<Item = T>, allowed: impl Fn(usize) -> bool) -> usize {
    let mut best = (usize::MAX, T::neg_infinity());
    for (i, v) in row.into_iter().enumerate() {
        if allowed(i) && (best.0 == usize::MAX || v > best.1) {
            best = (i, v);
        }
    }
    best.0
}

struct Weights<'a, T: Scalar> {
    model: &'a CompletionModel<T>,
}

impl<T: Scalar> Weights<'_, T> {
    fn linear(&self, x: ArrayView2<T>, ids: &LinearIds) -> Array2<T> {
        let p = self.model.params();
        ops::linear(x, p.get(ids.w), p.get(ids.b))
    }

    fn norm(&self, x: ArrayView2<T>, ids: &NormIds) -> Array2<T> {
        let p = self.model.params();
        ops::layer_norm(x, p.get(ids.gamma).view(), p.get(ids.beta).view()).0
    }

    fn attend(&self, q_in: ArrayView2<T>, k: &Array2<T>, v: &Array2<T>, ids: &AttnIds) -> Array2<T> {
        let q = self.linear(q_in, &ids.q);
        let layout = AttnLayout::new(1, q.nrows(), k.nrows(), self.model.config().heads);
        let (a, _) = ops::attention(q.view(), k.view(), v.view(), &layout);
        self.linear(a.view(), &ids.o)
    }

    fn embed(&self, rec: &InputRecord, pos: usize) -> Result<Array2<T>> {
        let cfg = self.model.config();
        let fb = FeatureBatch::<T>::single(std::slice::from_ref(rec), cfg)?;
        let e = &self.model.layout.embed;
        let parts = [
            self.linear(fb.coords.view(), &e[0]),
            self.linear(fb.contour.view(), &e[1]),
            self.linear(fb.point.view(), &e[2]),
            self.linear(fb.flag.view(), &e[3]),
        ];
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let mut x = concatenate(Axis(1), &views).expect("embedding groups share one row");
        if cfg.positional_encoding {
            let pe = ndarray::Array1::from(sinusoid::<T>(pos, cfg.d_model));
            x += &pe;
        }
        Ok(x)
    }

    fn heads(&self, h: ArrayView2<T>) -> [Array2<T>; 4] {
        let q = self.model.config().group_width();
        std::array::from_fn(|i| {
            let part = h.slice(ndarray::s![.., i * q..(i + 1) * q]);
            self.linear(part, &self.model.layout.heads[i])
        })
    }
}

/// Greedy decoding from the start record until an end flag or until the
/// decoder sequence would exceed `max_len` records. Without an end flag at
/// most `max_len - 2` records are kept, so the framed output fits.
pub fn greedy_decode<T: Scalar>(
    model: &CompletionModel<T>,
    source: &[InputRecord],
    max_len: usize,
) -> Result<Decoded<T>> {
    let cfg = model.config();
    if cfg.architecture != Architecture::EncoderDecoder {
        return Err(NetError::Config("greedy decoding needs an encoder-decoder model".into()));
    }
    let max_len = max_len.min(cfg.max_len);
    let fb = FeatureBatch::<T>::single(source, cfg)?;
    let memory = {
        let mut g = Graph::new(model.params());
        let x = model.embed(&mut g, &fb);
        let m = model.encode(&mut g, x, &fb);
        g.value(m).clone()
    };
    let w = Weights { model };
    let layers = &model.layout.dec;
    let cross: Vec<(Array2<T>, Array2<T>)> = layers
        .iter()
        .map(|l| {
            (
                w.linear(memory.view(), &l.cross_attn.k),
                w.linear(memory.view(), &l.cross_attn.v),
            )
        })
        .collect();
    let d = cfg.d_model;
    let mut self_kv: Vec<(Array2<T>, Array2<T>)> =
        layers.iter().map(|_| (Array2::zeros((0, d)), Array2::zeros((0, d)))).collect();

    let mut heads_rows: [Vec<Array2<T>>; 4] = Default::default();
    let mut records = Vec::new();
    let mut input = InputRecord::from_point(&ControlPoint::sos());
    let mut terminated = false;
    let sos = CurveFlag::Sos.class_index();
    let eos = CurveFlag::Eos.class_index();
    // Positions 0..max_len-1 of the decoder input; the record emitted at the
    // last of them would be position max_len.
    for pos in 0..max_len.saturating_sub(1) {
        let mut x = w.embed(&input, pos)?;
        for (layer, ((k, v), (mk, mv))) in layers.iter().zip(self_kv.iter_mut().zip(&cross)) {
            let kn = w.linear(x.view(), &layer.self_attn.k);
            let vn = w.linear(x.view(), &layer.self_attn.v);
            k.push_row(kn.row(0)).expect("key width");
            v.push_row(vn.row(0)).expect("value width");
            let a = w.attend(x.view(), k, v, &layer.self_attn);
            x = w.norm((&x + &a).view(), &layer.ln1);
            let c = w.attend(x.view(), mk, mv, &layer.cross_attn);
            x = w.norm((&x + &c).view(), &layer.ln2);
            let h = w.linear(x.view(), &layer.ff1).mapv(|v| v.max(T::zero()));
            let f = w.linear(h.view(), &layer.ff2);
            x = w.norm((&x + &f).view(), &layer.ln3);
        }
        let out = w.heads(x.view());
        let flag = argmax(out[3].row(0).iter().copied(), |i| i != sos);
        let contour = argmax(out[1].row(0).iter().copied(), |_| true);
        let point = argmax(out[2].row(0).iter().copied(), |_| true);
        let (cx, cy) = (out[0][[0, 0]].as_f64(), out[0][[0, 1]].as_f64());
        for (rows, o) in heads_rows.iter_mut().zip(out) {
            rows.push(o);
        }
        if flag == eos {
            terminated = true;
            break;
        }
        let rec = ControlPoint {
            x: cx,
            y: cy,
            contour_id: class_to_id(contour),
            point_id: class_to_id(point),
            flag: CurveFlag::from_class_index(flag).expect("flag class"),
        };
        records.push(rec);
        input = InputRecord::from_point(&rec);
    }
    // an unterminated run keeps room for the end record it never emitted
    if !terminated {
        records.truncate(max_len.saturating_sub(2));
    }
    let stack = |rows: &[Array2<T>], width: usize| {
        if rows.is_empty() {
            return Array2::zeros((0, width));
        }
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        concatenate(Axis(0), &views).expect("head rows")
    };
    let [c, ct, pt, fl] = &heads_rows;
    Ok(Decoded {
        records,
        heads: HeadsOutput {
            coords: stack(c, 2),
            contour_logits: stack(ct, cfg.contour_classes),
            point_logits: stack(pt, cfg.point_classes),
            flag_logits: stack(fl, cfg.flag_classes),
        },
        terminated,
    })
}

/// Completes a corrupted glyph. The encoder runs exactly once.
pub fn complete<T: Scalar>(model: &CompletionModel<T>, corrupted: &GlyphSequence, max_len: usize) -> Result<Completion> {
    let source = records_of(&tokenize(corrupted)?);
    let decoded = greedy_decode(model, &source, max_len)?;
    let (glyph, mut meta) = assemble(&corrupted.font_id, corrupted.glyph_label, &decoded.records, Limits::default());
    meta.unterminated = !decoded.terminated;
    Ok(Completion { glyph, meta })
}

/// Baseline completion: one encoder pass over the placeholder-filled
/// input. Every position is predicted; ids come from the oracle, flags are
/// restricted to on/off-curve.
pub fn complete_baseline<T: Scalar>(
    model: &CompletionModel<T>,
    corrupted: &GlyphSequence,
    oracle: Option<&CorruptionMeta>,
) -> Result<Completion> {
    if model.config().architecture != Architecture::Baseline {
        return Err(NetError::Config("baseline completion needs a baseline model".into()));
    }
    let source = match oracle {
        Some(meta) => placeheld_records(corrupted, meta)?,
        None => baseline_source(corrupted)?,
    };
    let fb = FeatureBatch::<T>::single(&source, model.config())?;
    let out = model.baseline_forward(&fb);
    let on = CurveFlag::OnCurve.class_index();
    let off = CurveFlag::OffCurve.class_index();
    let records: Vec<ControlPoint> = (1..source.len() - 1)
        .map(|r| {
            let flag = argmax(out.flag_logits.row(r).iter().copied(), |i| i == on || i == off);
            ControlPoint {
                x: out.coords[[r, 0]].as_f64(),
                y: out.coords[[r, 1]].as_f64(),
                contour_id: class_to_id(source[r].contour),
                point_id: class_to_id(source[r].point),
                flag: CurveFlag::from_class_index(flag).expect("flag class"),
            }
        })
        .collect();
    let (glyph, meta) = assemble(&corrupted.font_id, corrupted.glyph_label, &records, Limits::default());
    Ok(Completion { glyph, meta })
}

/// Turns predicted records into a valid glyph.
///
/// Records are grouped by predicted contour id (ascending), keeping
/// emission order inside each group. A record with a special contour id
/// joins the contour of the record before it. Contour and point ids are
/// renumbered when they are not already `1..`, coordinates are clamped to
/// the unit square and contours beyond the capacity limits are cut. Raw
/// ids are kept in the returned metadata. The glyph is flagged corrupted
/// unless every contour ends on its first point.
pub fn assemble(font_id: &str, label: char, records: &[ControlPoint], limits: Limits) -> (GlyphSequence, CompletionMeta) {
    let mut meta = CompletionMeta {
        raw_ids: records.iter().map(|r| (r.contour_id, r.point_id)).collect(),
        ..CompletionMeta::default()
    };
    let mut groups: BTreeMap<i32, Vec<ControlPoint>> = BTreeMap::new();
    let mut last = 1;
    for r in records {
        let cid = if r.contour_id >= 1 { r.contour_id } else { last };
        last = cid;
        groups.entry(cid).or_default().push(*r);
    }
    let mut points = Vec::with_capacity(records.len());
    let mut closed = true;
    for (ci, (cid, mut contour)) in groups.into_iter().enumerate() {
        if ci >= limits.max_contours {
            meta.dropped += contour.len();
            continue;
        }
        if contour.len() > limits.max_points {
            meta.dropped += contour.len() - limits.max_points;
            contour.truncate(limits.max_points);
        }
        let new_cid = ci as i32 + 1;
        for (pi, p) in contour.iter().enumerate() {
            let new_pid = pi as i32 + 1;
            if p.contour_id != new_cid || p.point_id != new_pid || cid != new_cid {
                meta.renumbered = true;
            }
            points.push(ControlPoint {
                x: p.x.clamp(0.0, 1.0),
                y: p.y.clamp(0.0, 1.0),
                contour_id: new_cid,
                point_id: new_pid,
                flag: p.flag,
            });
        }
        let start = points.len() - contour.len();
        let (first, end) = (points[start], points[points.len() - 1]);
        closed &= contour.len() > 1 && first.xy() == end.xy() && first.flag == end.flag;
    }
    let mut glyph = GlyphSequence::new(font_id, label, points);
    glyph.corrupted = !closed;
    (glyph, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use contourfill_core::validate;

    fn rec(cid: i32, pid: i32, x: f64) -> ControlPoint {
        ControlPoint::new(x, 0.5, cid, pid, true)
    }

    #[test]
    fn consistent_predictions_are_unchanged() {
        let r = vec![rec(1, 1, 0.1), rec(1, 2, 0.2), rec(1, 3, 0.1), rec(2, 1, 0.5), rec(2, 2, 0.5)];
        let (g, meta) = assemble("f", 'A', &r, Limits::default());
        assert_eq!(g.points, r);
        assert!(!meta.renumbered);
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn duplicate_point_ids_are_renumbered() {
        let r = vec![rec(1, 1, 0.1), rec(1, 1, 0.2), rec(1, 2, 0.3)];
        let (g, meta) = assemble("f", 'A', &r, Limits::default());
        let ids: Vec<i32> = g.points.iter().map(|p| p.point_id).collect();
        assert_eq!(ids, [1, 2, 3]);
        assert!(meta.renumbered);
        assert_eq!(meta.raw_ids, vec![(1, 1), (1, 1), (1, 2)]);
    }

    #[test]
    fn contours_grouped_in_id_order_with_emission_order_inside() {
        let r = vec![rec(2, 1, 0.7), rec(1, 1, 0.1), rec(2, 2, 0.8), rec(1, 2, 0.2)];
        let (g, _) = assemble("f", 'A', &r, Limits::default());
        let xs: Vec<f64> = g.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, [0.1, 0.2, 0.7, 0.8]);
        assert_eq!(g.contour_count(), 2);
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn coordinates_clamped_and_overflow_dropped() {
        let mut r: Vec<_> = (1..=110).map(|i| rec(1, i, 1.5)).collect();
        r.push(rec(-1, -1, -0.2));
        let (g, meta) = assemble("f", 'A', &r, Limits::default());
        assert_eq!(g.len(), 102);
        assert_eq!(meta.dropped, 9);
        assert!(g.points.iter().all(|p| (0.0..=1.0).contains(&p.x)));
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn empty_prediction_is_an_empty_glyph() {
        let (g, meta) = assemble("f", 'A', &[], Limits::default());
        assert!(g.is_empty());
        assert!(meta.raw_ids.is_empty());
        assert!(validate(&g).is_empty());
    }
}
