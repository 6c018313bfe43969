//! Reverse-mode automatic differentiation over two-dimensional tensors.
//!
//! A [`Graph`] records every operation of one forward pass on a tape.
//! Parameters are referenced, not copied. [`Graph::backward`] walks the tape
//! in reverse and returns gradients for every parameter that was used.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ops::{self, AttnLayout};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::scalar::Scalar;

/// Handle to a tensor on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Value<T> {
    Owned(Array2<T>),
    Param(ParamId),
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Dropout(Var, Array2<T>),
    LayerNorm {
        x: Var,
        gamma: Var,
        xhat: Array2<T>,
        inv_std: Array1<T>,
        beta: Var,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        layout: AttnLayout,
        probs: Vec<Array2<T>>,
    },
    Concat(Vec<Var>),
    Slice(Var, usize),
}

struct Node<T> {
    value: Value<T>,
    op: Op<T>,
}

pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: HashMap<ParamId, Var>,
    dropout: Option<(T, ChaCha8Rng)>,
}

impl<'p, T: Scalar> Graph<'p, T> {
    /// Inference graph: dropout disabled.
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
            dropout: None,
        }
    }

    /// Training graph with dropout probability `p` drawn from `seed`.
    pub fn training(params: &'p ParamStore<T>, p: f64, seed: u64) -> Self {
        let mut g = Self::new(params);
        if p > 0.0 {
            g.dropout = Some((T::lit(p), ChaCha8Rng::seed_from_u64(seed)));
        }
        g
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        match &self.nodes[v.0].value {
            Value::Owned(a) => a,
            Value::Param(id) => self.params.get(*id),
        }
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).dot(self.value(b));
        self.push(y, Op::MatMul(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let y = self.value(a) + self.value(bias);
        self.push(y, Op::AddBias(a, bias))
    }

    pub fn linear(&mut self, x: Var, weight: ParamId, bias: ParamId) -> Var {
        let w = self.param(weight);
        let b = self.param(bias);
        let h = self.matmul(x, w);
        self.add_bias(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a) + self.value(b);
        self.push(y, Op::Add(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.value(a).mapv(|v| v.max(T::zero()));
        self.push(y, Op::Relu(a))
    }

    /// Inverted dropout; identity on inference graphs.
    pub fn dropout(&mut self, a: Var) -> Var {
        let shape = self.value(a).raw_dim();
        let Some((p, rng)) = self.dropout.as_mut() else {
            return a;
        };
        let p = *p;
        let keep = T::one() / (T::one() - p);
        let mask = Array2::from_shape_simple_fn(shape, || {
            if T::lit(rng.random::<f64>()) < p {
                T::zero()
            } else {
                keep
            }
        });
        let y = self.value(a) * &mask;
        self.push(y, Op::Dropout(a, mask))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: ParamId, beta: ParamId) -> Var {
        let (gamma, beta) = (self.param(gamma), self.param(beta));
        let (y, xhat, inv_std) =
            ops::layer_norm(self.value(x).view(), self.value(gamma).view(), self.value(beta).view());
        self.push(
            y,
            Op::LayerNorm {
                x,
                gamma,
                xhat,
                inv_std,
                beta,
            },
        )
    }

    pub fn attention(&mut self, q: Var, k: Var, v: Var, layout: AttnLayout) -> Var {
        let (y, probs) = ops::attention(
            self.value(q).view(),
            self.value(k).view(),
            self.value(v).view(),
            &layout,
        );
        self.push(
            y,
            Op::Attention {
                q,
                k,
                v,
                layout,
                probs,
            },
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let y = ndarray::concatenate(Axis(1), &views).expect("concat row mismatch");
        self.push(y, Op::Concat(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let y = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(y, Op::Slice(a, start))
    }

    /// Propagates the seed gradients back through the tape.
    pub fn backward(&self, seeds: Vec<(Var, Array2<T>)>) -> Gradients<T> {
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            acc(&mut grads, v, g);
        }
        let mut out = Gradients::new(self.params.len());
        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    if let Value::Param(id) = node.value {
                        out.accumulate(id, &dy);
                    }
                }
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, dy.dot(&self.value(*b).t()));
                    acc(&mut grads, *b, self.value(*a).t().dot(&dy));
                }
                Op::AddBias(a, bias) => {
                    acc(&mut grads, *bias, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, dy);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, dy.clone());
                    acc(&mut grads, *a, dy);
                }
                Op::Relu(a) => {
                    let y = self.value(Var(i));
                    let mut dx = dy;
                    dx.zip_mut_with(y, |g, &v| {
                        if v <= T::zero() {
                            *g = T::zero();
                        }
                    });
                    acc(&mut grads, *a, dx);
                }
                Op::Dropout(a, mask) => acc(&mut grads, *a, dy * mask),
                Op::LayerNorm {
                    x,
                    gamma,
                    xhat,
                    inv_std,
                    beta,
                } => {
                    acc(&mut grads, *beta, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gamma, (&dy * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let d = T::lit(xhat.ncols() as f64);
                    let mut dxhat = dy * self.value(*gamma);
                    let mean_g = dxhat.sum_axis(Axis(1)) / d;
                    let mean_gx = (&dxhat * xhat).sum_axis(Axis(1)) / d;
                    for (r, mut row) in dxhat.rows_mut().into_iter().enumerate() {
                        let xr = xhat.row(r);
                        for (g, &xh) in row.iter_mut().zip(xr.iter()) {
                            *g = (*g - mean_g[r] - xh * mean_gx[r]) * inv_std[r];
                        }
                    }
                    acc(&mut grads, *x, dxhat);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    layout,
                    probs,
                } => {
                    let (dq, dk, dv) = ops::attention_backward(
                        self.value(*q).view(),
                        self.value(*k).view(),
                        self.value(*v).view(),
                        layout,
                        probs,
                        dy.view(),
                    );
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dk);
                    acc(&mut grads, *v, dv);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, dy.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::Slice(a, start) => {
                    let mut dx = Array2::zeros(self.value(*a).raw_dim());
                    dx.slice_mut(s![.., *start..*start + dy.ncols()]).assign(&dy);
                    acc(&mut grads, *a, dx);
                }
            }
        }
        out
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Array2<T>>], v: Var, delta: Array2<T>) {
    match &mut grads[v.0] {
        Some(g) => *g += &delta,
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` (a scalar function of the parameters)
    /// against the tape gradients, seeded with ones on `out`.
    fn check(store: &mut ParamStore<f64>, build: impl Fn(&mut Graph<'_, f64>) -> Var) {
        let g = {
            let mut graph = Graph::new(store);
            let out = build(&mut graph);
            let seed = Array2::ones(graph.value(out).raw_dim());
            graph.backward(vec![(out, seed)])
        };
        let eval = |s: &ParamStore<f64>| {
            let mut graph = Graph::new(s);
            let out = build(&mut graph);
            graph.value(out).sum()
        };
        for id in 0..store.len() {
            let shape = store.get(id).raw_dim();
            for idx in ndarray::indices(shape) {

                let orig = store.get(id)[idx];
                store.get_mut(id)[idx] = orig + 1e-6;
                let up = eval(store);
                store.get_mut(id)[idx] = orig - 1e-6;
                let down = eval(store);
                store.get_mut(id)[idx] = orig;
                let numeric = (up - down) / 2e-6;
                let analytic = g.get(id).map_or(0.0, |a| a[idx]);
                assert!(
                    (numeric - analytic).abs() < 1e-6 * (1.0 + numeric.abs()),
                    "{} {idx:?}: {numeric} vs {analytic}",
                    store.name(id)
                );
            }
        }
    }

    #[test]
    fn linear_relu_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.3, -0.2, 0.5], [0.1, 0.4, -0.6]]);
        let b = store.add("b", array![[0.05, -0.1, 0.2]]);
        check(&mut store, |g| {
            let x = g.input(array![[1.0, 2.0], [-0.5, 0.7]]);
            let h = g.linear(x, w, b);
            g.relu(h)
        });
    }

    #[test]
    fn layer_norm_gradients() {
        let mut store = ParamStore::new();
        let x = store.add("x", array![[0.3, -1.2, 0.5, 2.0], [0.1, 0.4, -0.6, 0.0]]);
        let gamma = store.add("gamma", array![[1.0, 0.5, -0.3, 2.0]]);
        let beta = store.add("beta", array![[0.0, 0.1, 0.2, 0.3]]);
        let probe = store.add("probe", array![[1.0], [-2.0], [0.5], [3.0]]);
        check(&mut store, |g| {
            let xv = g.param(x);
            let y = g.layer_norm(xv, gamma, beta);
            let p = g.param(probe);
            g.matmul(y, p)
        });
    }

    #[test]
    fn attention_gradients_with_masks() {
        let mut store = ParamStore::new();
        let q = store.add("q", array![[0.3, -0.2, 0.5, 0.1], [0.1, 0.4, -0.6, 0.2], [0.7, 0.1, 0.0, -0.3], [0.2, 0.2, 0.2, 0.2]]);
        let k = store.add("k", array![[0.5, 0.1, -0.4, 0.3], [0.0, -0.3, 0.6, 0.9], [0.4, 0.4, 0.1, -0.2], [0.3, -0.1, 0.2, 0.5]]);
        let v = store.add("v", array![[1.0, 0.0, 0.5, -1.0], [0.2, 0.3, -0.7, 0.8], [0.6, -0.5, 0.4, 0.1], [0.9, 0.2, -0.3, 0.4]]);
        let probe = store.add("probe", array![[1.0], [-2.0], [0.5], [3.0]]);
        let layout = AttnLayout::new(2, 2, 2, 2)
            .causal()
            .with_key_pad(vec![false, false, false, true]);
        check(&mut store, |g| {
            let (qv, kv, vv) = (g.param(q), g.param(k), g.param(v));
            let a = g.attention(qv, kv, vv, layout.clone());
            let p = g.param(probe);
            g.matmul(a, p)
        });
    }

    #[test]
    fn concat_and_slice_route_gradients() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[1.0, 2.0], [3.0, 4.0]]);
        let b = store.add("b", array![[5.0], [6.0]]);
        let probe = store.add("probe", array![[0.5, -1.0], [2.0, 0.3]]);
        check(&mut store, |g| {
            let (av, bv) = (g.param(a), g.param(b));
            let c = g.concat_cols(&[av, bv]);
            let s = g.slice_cols(c, 1, 3);
            let p = g.param(probe);
            let y = g.matmul(s, p);
            let y2 = g.add(y, s);
            g.relu(y2)
        });
    }

    #[test]
    fn inference_dropout_is_identity() {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let x = g.input(array![[1.0, 2.0]]);
        assert_eq!(g.dropout(x), x);
    }

    #[test]
    fn training_dropout_scales_kept_units() {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::training(&store, 0.5, 7);
        let x = g.input(Array2::ones((50, 50)));
        let y = g.dropout(x);
        let vals = g.value(y);
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = vals.iter().filter(|&&v| v > 0.0).count();
        assert!((1000..1500).contains(&kept), "{kept}");
    }
}
