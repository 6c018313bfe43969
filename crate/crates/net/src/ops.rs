//! Forward kernels shared by the autograd graph and the cached decoder.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::scalar::Scalar;

pub const LN_EPS: f64 = 1e-5;

pub fn linear<T: Scalar>(x: ArrayView2<T>, w: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    let mut y = x.dot(w);
    y += b;
    y
}

/// Row-wise layer normalization. Also returns the normalized input and the
/// inverse standard deviations for the backward pass.
pub fn layer_norm<T: Scalar>(
    x: ArrayView2<T>,
    gamma: ArrayView2<T>,
    beta: ArrayView2<T>,
) -> (Array2<T>, Array2<T>, Array1<T>) {
    let d = T::lit(x.ncols() as f64);
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.iter().map(|&v| v * v).sum::<T>() / d;
        *inv = T::one() / (var + T::lit(LN_EPS)).sqrt();
        row *= *inv;
    }
    let y = &xhat * &gamma + &beta;
    (y, xhat, inv_std)
}

/// Shape and masking of one multi-head attention call. Rows of the query
/// matrix are `batch * q_len` (batch-major); keys likewise with `k_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnLayout {
    pub batch: usize,
    pub q_len: usize,
    pub k_len: usize,
    pub heads: usize,
    /// Query `i` may see key `j` only if `j <= i + k_len - q_len`.
    pub causal: bool,
    /// `batch * k_len` flags; `true` keys are never attended to.
    pub key_pad: Vec<bool>,
}

impl AttnLayout {
    pub fn new(batch: usize, q_len: usize, k_len: usize, heads: usize) -> Self {
        Self {
            batch,
            q_len,
            k_len,
            heads,
            causal: false,
            key_pad: vec![false; batch * k_len],
        }
    }

    pub fn causal(mut self) -> Self {
        self.causal = true;
        self
    }

    pub fn with_key_pad(mut self, pad: Vec<bool>) -> Self {
        assert_eq!(pad.len(), self.batch * self.k_len, "key pad length");
        self.key_pad = pad;
        self
    }

    fn visible(&self, b: usize, i: usize, j: usize) -> bool {
        !self.key_pad[b * self.k_len + j] && (!self.causal || j + self.q_len <= i + self.k_len)
    }
}

/// Scaled dot-product attention over `heads` column slices. Returns the
/// concatenated head outputs and the attention probabilities of every
/// (batch, head) pair in that order.
pub fn attention<T: Scalar>(
    q: ArrayView2<T>,
    k: ArrayView2<T>,
    v: ArrayView2<T>,
    layout: &AttnLayout,
) -> (Array2<T>, Vec<Array2<T>>) {
    let d = q.ncols();
    let dh = d / layout.heads;
    let scale = T::one() / T::lit(dh as f64).sqrt();
    let (ql, kl) = (layout.q_len, layout.k_len);
    let mut out = Array2::zeros((layout.batch * ql, d));
    let mut probs = Vec::with_capacity(layout.batch * layout.heads);
    for b in 0..layout.batch {
        for h in 0..layout.heads {
            let cols = h * dh..(h + 1) * dh;
            let qb = q.slice(s![b * ql..(b + 1) * ql, cols.clone()]);
            let kb = k.slice(s![b * kl..(b + 1) * kl, cols.clone()]);
            let vb = v.slice(s![b * kl..(b + 1) * kl, cols.clone()]);
            let mut p = qb.dot(&kb.t());
            for (i, mut row) in p.rows_mut().into_iter().enumerate() {
                let mut max = T::neg_infinity();
                for (j, s) in row.iter_mut().enumerate() {
                    if layout.visible(b, i, j) {
                        *s *= scale;
                        max = max.max(*s);
                    } else {
                        *s = T::neg_infinity();
                    }
                }
                if max == T::neg_infinity() {
                    row.fill(T::zero());
                    continue;
                }
                let mut total = T::zero();
                for s in row.iter_mut() {
                    *s = (*s - max).exp();
                    total += *s;
                }
                row /= total;
            }
            out.slice_mut(s![b * ql..(b + 1) * ql, cols]).assign(&p.dot(&vb));
            probs.push(p);
        }
    }
    (out, probs)
}

/// Gradients of [`attention`] with respect to `q`, `k` and `v`.
pub fn attention_backward<T: Scalar>(
    q: ArrayView2<T>,
    k: ArrayView2<T>,
    v: ArrayView2<T>,
    layout: &AttnLayout,
    probs: &[Array2<T>],
    dout: ArrayView2<T>,
) -> (Array2<T>, Array2<T>, Array2<T>) {
    let d = q.ncols();
    let dh = d / layout.heads;
    let scale = T::one() / T::lit(dh as f64).sqrt();
    let (ql, kl) = (layout.q_len, layout.k_len);
    let mut dq = Array2::zeros(q.raw_dim());
    let mut dk = Array2::zeros(k.raw_dim());
    let mut dv = Array2::zeros(v.raw_dim());
    for b in 0..layout.batch {
        for h in 0..layout.heads {
            let p = &probs[b * layout.heads + h];
            let cols = h * dh..(h + 1) * dh;
            let qs = s![b * ql..(b + 1) * ql, cols.clone()];
            let ks = s![b * kl..(b + 1) * kl, cols.clone()];
            let dob = dout.slice(qs);
            dv.slice_mut(ks).assign(&p.t().dot(&dob));
            let dp = dob.dot(&v.slice(ks).t());
            let inner = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
            let ds = (&dp - &inner) * p * scale;
            dq.slice_mut(qs).assign(&ds.dot(&k.slice(ks)));
            dk.slice_mut(ks).assign(&ds.t().dot(&q.slice(qs)));
        }
    }
    (dq, dk, dv)
}

/// Standard sinusoidal position code for position `pos`.
pub fn sinusoid<T: Scalar>(pos: usize, d: usize) -> Vec<T> {
    (0..d)
        .map(|i| {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let a = pos as f64 / rate;
            T::lit(if i % 2 == 0 { a.sin() } else { a.cos() })
        })
        .collect()
}
