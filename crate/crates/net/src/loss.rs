//! Four-term training objective. Every term is a mean over unmasked target
//! positions; the total is their plain sum.

use contourfill_core::contour::id_to_class;
use contourfill_core::ControlPoint;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::HeadsOutput;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub contour: f64,
    pub point: f64,
    pub coord: f64,
    pub flag: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(contour: f64, point: f64, coord: f64, flag: f64) -> Self {
        Self {
            contour,
            point,
            coord,
            flag,
            total: contour + point + coord + flag,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.contour, self.point, self.coord, self.flag, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Weighted mean of several breakdowns.
    pub fn weighted_mean(parts: &[(Self, f64)]) -> Self {
        let w: f64 = parts.iter().map(|p| p.1).sum();
        if w == 0.0 {
            return Self::default();
        }
        let m = |f: fn(&Self) -> f64| parts.iter().map(|(b, pw)| f(b) * pw).sum::<f64>() / w;
        Self::new(m(|b| b.contour), m(|b| b.point), m(|b| b.coord), m(|b| b.flag))
    }
}

/// Mean categorical cross-entropy of softmax(`logits`) against `targets`
/// over rows where `mask` is true, with its gradient. No unmasked rows
/// gives 0 and a zero gradient.
pub fn cross_entropy<T: Scalar>(logits: &Array2<T>, targets: &[usize], mask: &[bool]) -> (f64, Array2<T>) {
    let count = mask.iter().filter(|&&m| m).count();
    let mut grad = Array2::zeros(logits.raw_dim());
    if count == 0 {
        return (0.0, grad);
    }
    let norm = count as f64;
    let mut loss = 0.0;
    for (r, row) in logits.rows().into_iter().enumerate() {
        if !mask[r] {
            continue;
        }
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let t = targets[r];
        loss += z.ln() + max - row[t].as_f64();
        for (c, e) in exps.iter().enumerate() {
            let p = e / z - if c == t { 1.0 } else { 0.0 };
            grad[[r, c]] = T::lit(p / norm);
        }
    }
    (loss / norm, grad)
}

pub fn loss_contour<T: Scalar>(logits: &Array2<T>, classes: &[usize], mask: &[bool]) -> (f64, Array2<T>) {
    cross_entropy(logits, classes, mask)
}

pub fn loss_point<T: Scalar>(logits: &Array2<T>, classes: &[usize], mask: &[bool]) -> (f64, Array2<T>) {
    cross_entropy(logits, classes, mask)
}

pub fn loss_flag<T: Scalar>(logits: &Array2<T>, classes: &[usize], mask: &[bool]) -> (f64, Array2<T>) {
    cross_entropy(logits, classes, mask)
}

/// Mean absolute error over both components of unmasked rows.
pub fn loss_coord<T: Scalar>(pred: &Array2<T>, truth: &[[f64; 2]], mask: &[bool]) -> (f64, Array2<T>) {
    let count = mask.iter().filter(|&&m| m).count();
    let mut grad = Array2::zeros(pred.raw_dim());
    if count == 0 {
        return (0.0, grad);
    }
    let norm = 2.0 * count as f64;
    let mut loss = 0.0;
    for r in (0..pred.nrows()).filter(|&r| mask[r]) {
        for c in 0..2 {
            let diff = pred[[r, c]].as_f64() - truth[r][c];
            loss += diff.abs();
            grad[[r, c]] = T::lit(if diff > 0.0 {
                1.0 / norm
            } else if diff < 0.0 {
                -1.0 / norm
            } else {
                0.0
            });
        }
    }
    (loss / norm, grad)
}

/// Per-row targets of a padded batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub coords: Vec<[f64; 2]>,
    pub contour: Vec<usize>,
    pub point: Vec<usize>,
    pub flag: Vec<usize>,
    /// Non-padded rows.
    pub mask: Vec<bool>,
    /// Non-padded rows that are not start/end records.
    pub coord_mask: Vec<bool>,
}

impl Targets {
    /// Batch-major rows padded to `len`.
    pub fn new(seqs: &[&[ControlPoint]], len: usize) -> Self {
        let rows = seqs.len() * len;
        let mut t = Self {
            coords: vec![[0.0; 2]; rows],
            contour: vec![0; rows],
            point: vec![0; rows],
            flag: vec![0; rows],
            mask: vec![false; rows],
            coord_mask: vec![false; rows],
        };
        for (b, seq) in seqs.iter().enumerate() {
            assert!(seq.len() <= len, "target longer than padded length");
            for (i, p) in seq.iter().enumerate() {
                let r = b * len + i;
                t.coords[r] = p.xy();
                t.contour[r] = id_to_class(p.contour_id);
                t.point[r] = id_to_class(p.point_id);
                t.flag[r] = p.flag.class_index();
                t.mask[r] = true;
                t.coord_mask[r] = !p.flag.is_special();
            }
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.mask.len()
    }

    /// Re-pads `batch` sequences of length `from` to length `to`.
    pub fn pad_to(&self, batch: usize, from: usize, to: usize) -> Self {
        assert!(to >= from && batch * from == self.rows(), "bad padding request");
        let rows = batch * to;
        let mut out = Self {
            coords: vec![[0.0; 2]; rows],
            contour: vec![0; rows],
            point: vec![0; rows],
            flag: vec![0; rows],
            mask: vec![false; rows],
            coord_mask: vec![false; rows],
        };
        for b in 0..batch {
            for t in 0..from {
                let (s, d) = (b * from + t, b * to + t);
                out.coords[d] = self.coords[s];
                out.contour[d] = self.contour[s];
                out.point[d] = self.point[s];
                out.flag[d] = self.flag[s];
                out.mask[d] = self.mask[s];
                out.coord_mask[d] = self.coord_mask[s];
            }
        }
        out
    }
}

/// Gradients of the total loss with respect to each head output.
#[derive(Debug, Clone)]
pub struct HeadGrads<T> {
    pub coords: Array2<T>,
    pub contour: Array2<T>,
    pub point: Array2<T>,
    pub flag: Array2<T>,
}

pub fn total_loss<T: Scalar>(out: &HeadsOutput<T>, t: &Targets) -> (LossBreakdown, HeadGrads<T>) {
    let (contour, gc) = loss_contour(&out.contour_logits, &t.contour, &t.mask);
    let (point, gp) = loss_point(&out.point_logits, &t.point, &t.mask);
    let (coord, gx) = loss_coord(&out.coords, &t.coords, &t.coord_mask);
    let (flag, gf) = loss_flag(&out.flag_logits, &t.flag, &t.mask);
    (
        LossBreakdown::new(contour, point, coord, flag),
        HeadGrads {
            coords: gx,
            contour: gc,
            point: gp,
            flag: gf,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits_give_log_class_count() {
        for k in [4usize, 5, 103] {
            let logits = Array2::<f64>::zeros((3, k));
            let (l, _) = cross_entropy(&logits, &[0, 1, k - 1], &[true; 3]);
            assert!((l - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_predictions_give_zero() {
        let logits = array![[100.0, -100.0, -100.0], [-100.0, -100.0, 100.0]];
        let (l, _) = cross_entropy::<f64>(&logits, &[0, 2], &[true, true]);
        assert!(l < 1e-12);
        let (c, _) = loss_coord::<f64>(&array![[0.2, 0.3]], &[[0.2, 0.3]], &[true]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn hand_computed_two_positions() {
        let logits = array![[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]];
        let (l, _) = cross_entropy::<f64>(&logits, &[1, 0], &[true, true]);
        let ce = |row: [f64; 3], t: usize| {
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            -(row[t].exp() / z).ln()
        };
        let expect = (ce([1.0, 2.0, 0.5], 1) + ce([0.0, -1.0, 3.0], 0)) / 2.0;
        assert!((l - expect).abs() < 1e-12);
    }

    #[test]
    fn masked_rows_are_ignored() {
        let logits = array![[1.0, 2.0], [50.0, -50.0]];
        let (a, ga) = cross_entropy::<f64>(&logits, &[0, 1], &[true, false]);
        let (b, _) = cross_entropy::<f64>(&logits.slice(ndarray::s![0..1, ..]).to_owned(), &[0], &[true]);
        assert_eq!(a, b);
        assert_eq!(ga.row(1).sum(), 0.0);
        let (e, _) = cross_entropy::<f64>(&logits, &[0, 1], &[false, false]);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn coord_offset_in_x_averages_over_components() {
        let truth = [[0.1, 0.2], [0.5, 0.5], [0.9, 0.0]];
        let pred = Array2::from_shape_fn((3, 2), |(r, c)| truth[r][c] + if c == 0 { 0.1 } else { 0.0 });
        let (l, _) = loss_coord::<f64>(&pred, &truth, &[true; 3]);
        assert!((l - 0.05).abs() < 1e-12);
    }

    #[test]
    fn total_is_sum_of_terms() {
        let out = HeadsOutput {
            coords: Array2::<f64>::zeros((2, 2)),
            contour_logits: Array2::zeros((2, 5)),
            point_logits: Array2::zeros((2, 103)),
            flag_logits: Array2::zeros((2, 4)),
        };
        let pts = [ControlPoint::new(0.0, 0.0, 1, 1, true), ControlPoint::eos()];
        let t = Targets::new(&[&pts], 2);
        let (b, _) = total_loss(&out, &t);
        assert!((b.total - (5f64.ln() + 103f64.ln() + 4f64.ln())).abs() < 1e-12);
        assert_eq!(b.total, b.contour + b.point + b.coord + b.flag);
    }
}
