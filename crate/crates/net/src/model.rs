//! Encoder-decoder Transformer over control-point records, and the
//! encoder-only comparison model.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use contourfill_core::{CurveFlag, C_MAX, P_MAX};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::features::FeatureBatch;
use crate::graph::{Graph, Var};
use crate::ops::{sinusoid, AttnLayout};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Encoder over the corrupted sequence, autoregressive decoder.
    EncoderDecoder,
    /// Encoder-only stack of twice the depth over a placeholder-filled
    /// input of ground-truth length.
    Baseline,
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::EncoderDecoder => "encoder_decoder",
            Architecture::Baseline => "baseline",
        })
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "encoder_decoder" | "encoder-decoder" => Ok(Self::EncoderDecoder),
            "baseline" | "encoder_only" | "encoder-only" => Ok(Self::Baseline),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub d_model: usize,
    /// Layers per stack; the baseline stacks `2 * layers` encoder layers.
    pub layers: usize,
    pub heads: usize,
    pub contour_classes: usize,
    pub point_classes: usize,
    pub flag_classes: usize,
    pub max_len: usize,
    pub ffn_width: usize,
    pub dropout: f64,
    pub positional_encoding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::EncoderDecoder,
            d_model: 256,
            layers: 4,
            heads: 4,
            contour_classes: C_MAX + 1,
            point_classes: P_MAX + 1,
            flag_classes: CurveFlag::COUNT,
            max_len: C_MAX * P_MAX + 2,
            ffn_width: 1024,
            dropout: 0.1,
            positional_encoding: false,
        }
    }
}

impl ModelConfig {
    /// Sets `d_model` and the matching `4 * d_model` feed-forward width.
    pub fn with_width(mut self, d_model: usize) -> Self {
        self.d_model = d_model;
        self.ffn_width = 4 * d_model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(NetError::Config(m));
        if self.d_model == 0 || self.d_model % 4 != 0 {
            return fail(format!("d_model {} is not a positive multiple of 4", self.d_model));
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return fail(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        if self.layers == 0 || self.ffn_width == 0 {
            return fail("layers and ffn_width must be positive".into());
        }
        if self.contour_classes < 2 || self.point_classes < 2 || self.flag_classes != CurveFlag::COUNT {
            return fail("class counts out of range".into());
        }
        if self.max_len < 2 {
            return fail("max_len must allow the start and end records".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn group_width(&self) -> usize {
        self.d_model / 4
    }

    pub fn encoder_layers(&self) -> usize {
        match self.architecture {
            Architecture::EncoderDecoder => self.layers,
            Architecture::Baseline => 2 * self.layers,
        }
    }

    pub fn decoder_layers(&self) -> usize {
        match self.architecture {
            Architecture::EncoderDecoder => self.layers,
            Architecture::Baseline => 0,
        }
    }

    fn head_sizes(&self) -> [usize; 4] {
        [2, self.contour_classes, self.point_classes, self.flag_classes]
    }

    /// Number of trainable scalars implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let (d, f, q) = (self.d_model, self.ffn_width, self.group_width());
        let io: usize = self.head_sizes().iter().sum();
        let embed = io * q + 4 * q;
        let heads = q * io + io;
        let attn = 4 * (d * d + d);
        let norm = 2 * d;
        let ffn = d * f + f + f * d + d;
        let enc = attn + ffn + 2 * norm;
        let dec = 2 * attn + ffn + 3 * norm;
        embed + heads + self.encoder_layers() * enc + self.decoder_layers() * dec
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NormIds {
    pub gamma: ParamId,
    pub beta: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttnIds {
    pub q: LinearIds,
    pub k: LinearIds,
    pub v: LinearIds,
    pub o: LinearIds,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EncLayer {
    pub self_attn: AttnIds,
    pub ln1: NormIds,
    pub ff1: LinearIds,
    pub ff2: LinearIds,
    pub ln2: NormIds,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DecLayer {
    pub self_attn: AttnIds,
    pub ln1: NormIds,
    pub cross_attn: AttnIds,
    pub ln2: NormIds,
    pub ff1: LinearIds,
    pub ff2: LinearIds,
    pub ln3: NormIds,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// coords, contour, point, flag
    pub embed: [LinearIds; 4],
    pub enc: Vec<EncLayer>,
    pub dec: Vec<DecLayer>,
    pub heads: [LinearIds; 4],
}

const GROUPS: [&str; 4] = ["coord", "contour", "point", "flag"];

struct Builder<'a, T: Scalar> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Builder<'_, T> {
    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> LinearIds {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |rows, cols| {
            Array2::from_shape_simple_fn((rows, cols), || T::lit(self.rng.random_range(-bound..bound)))
        };
        let w = draw(fan_in, fan_out);
        let b = draw(1, fan_out);
        LinearIds {
            w: self.store.add(format!("{name}.weight"), w),
            b: self.store.add(format!("{name}.bias"), b),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> NormIds {
        NormIds {
            gamma: self.store.add(format!("{name}.gamma"), Array2::ones((1, d))),
            beta: self.store.add(format!("{name}.beta"), Array2::zeros((1, d))),
        }
    }

    fn attn(&mut self, name: &str, d: usize) -> AttnIds {
        AttnIds {
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
        }
    }
}

/// Head outputs for every position, as plain arrays (one row per position).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadsOutput<T> {
    pub coords: Array2<T>,
    pub contour_logits: Array2<T>,
    pub point_logits: Array2<T>,
    pub flag_logits: Array2<T>,
}

impl<T: Scalar> HeadsOutput<T> {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Head outputs as graph variables.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub coords: Var,
    pub contour: Var,
    pub point: Var,
    pub flag: Var,
}

impl HeadVars {
    pub fn values<T: Scalar>(&self, g: &Graph<'_, T>) -> HeadsOutput<T> {
        HeadsOutput {
            coords: g.value(self.coords).clone(),
            contour_logits: g.value(self.contour).clone(),
            point_logits: g.value(self.point).clone(),
            flag_logits: g.value(self.flag).clone(),
        }
    }
}

pub struct CompletionModel<T: Scalar> {
    config: ModelConfig,
    params: ParamStore<T>,
    pub(crate) layout: Layout,
    encoder_calls: AtomicUsize,
}

impl<T: Scalar> Clone for CompletionModel<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            params: self.params.clone(),
            layout: self.layout.clone(),
            encoder_calls: AtomicUsize::new(0),
        }
    }
}

impl<T: Scalar> fmt::Debug for CompletionModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompletionModel")
            .field("config", &self.config)
            .field("parameters", &self.params.scalar_count())
            .finish()
    }
}

impl<T: Scalar> CompletionModel<T> {
    /// Builds a model with weights and biases drawn uniformly from
    /// `±1/sqrt(fan_in)`, layer-norm gains 1 and offsets 0.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut b = Builder {
            store: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let (d, f, q) = (config.d_model, config.ffn_width, config.group_width());
        let sizes = config.head_sizes();
        let embed = std::array::from_fn(|i| b.linear(&format!("embed.{}", GROUPS[i]), sizes[i], q));
        let enc = (0..config.encoder_layers())
            .map(|i| {
                let p = format!("enc.{i}");
                EncLayer {
                    self_attn: b.attn(&format!("{p}.self_attn"), d),
                    ln1: b.norm(&format!("{p}.ln1"), d),
                    ff1: b.linear(&format!("{p}.ff1"), d, f),
                    ff2: b.linear(&format!("{p}.ff2"), f, d),
                    ln2: b.norm(&format!("{p}.ln2"), d),
                }
            })
            .collect();
        let dec = (0..config.decoder_layers())
            .map(|i| {
                let p = format!("dec.{i}");
                DecLayer {
                    self_attn: b.attn(&format!("{p}.self_attn"), d),
                    ln1: b.norm(&format!("{p}.ln1"), d),
                    cross_attn: b.attn(&format!("{p}.cross_attn"), d),
                    ln2: b.norm(&format!("{p}.ln2"), d),
                    ff1: b.linear(&format!("{p}.ff1"), d, f),
                    ff2: b.linear(&format!("{p}.ff2"), f, d),
                    ln3: b.norm(&format!("{p}.ln3"), d),
                }
            })
            .collect();
        let heads = std::array::from_fn(|i| b.linear(&format!("head.{}", GROUPS[i]), q, sizes[i]));
        Ok(Self {
            config,
            params,
            layout: Layout {
                embed,
                enc,
                dec,
                heads,
            },
            encoder_calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// How many times the encoder stack has run since construction.
    pub fn encoder_calls(&self) -> usize {
        self.encoder_calls.load(Ordering::Relaxed)
    }

    /// Four-group embedding, concatenated as (coords, contour, point, flag).
    pub fn embed(&self, g: &mut Graph<'_, T>, batch: &FeatureBatch<T>) -> Var {
        let e = &self.layout.embed;
        let parts = [&batch.coords, &batch.contour, &batch.point, &batch.flag]
            .iter()
            .zip(e)
            .map(|(x, ids)| {
                let xv = g.input((*x).clone());
                g.linear(xv, ids.w, ids.b)
            })
            .collect::<Vec<_>>();
        let mut x = g.concat_cols(&parts);
        if self.config.positional_encoding {
            let d = self.config.d_model;
            let mut pe = Array2::zeros((batch.rows(), d));
            for (r, mut row) in pe.rows_mut().into_iter().enumerate() {
                row.assign(&ndarray::Array1::from(sinusoid::<T>(r % batch.len.max(1), d)));
            }
            let pv = g.input(pe);
            x = g.add(x, pv);
        }
        g.dropout(x)
    }

    fn attention_block(
        &self,
        g: &mut Graph<'_, T>,
        ids: &AttnIds,
        x: Var,
        kv: Var,
        layout: AttnLayout,
    ) -> Var {
        let q = g.linear(x, ids.q.w, ids.q.b);
        let k = g.linear(kv, ids.k.w, ids.k.b);
        let v = g.linear(kv, ids.v.w, ids.v.b);
        let a = g.attention(q, k, v, layout);
        let o = g.linear(a, ids.o.w, ids.o.b);
        g.dropout(o)
    }

    fn feed_forward(&self, g: &mut Graph<'_, T>, ff1: &LinearIds, ff2: &LinearIds, x: Var) -> Var {
        let h = g.linear(x, ff1.w, ff1.b);
        let h = g.relu(h);
        let h = g.linear(h, ff2.w, ff2.b);
        g.dropout(h)
    }

    fn residual_norm(&self, g: &mut Graph<'_, T>, x: Var, sub: Var, ln: &NormIds) -> Var {
        let s = g.add(x, sub);
        g.layer_norm(s, ln.gamma, ln.beta)
    }

    /// Runs the encoder stack over embedded rows of `batch`.
    pub fn encode(&self, g: &mut Graph<'_, T>, x: Var, batch: &FeatureBatch<T>) -> Var {
        self.encoder_calls.fetch_add(1, Ordering::Relaxed);
        let layout = AttnLayout::new(batch.batch, batch.len, batch.len, self.config.heads)
            .with_key_pad(batch.pad.clone());
        let mut x = x;
        for layer in &self.layout.enc {
            let a = self.attention_block(g, &layer.self_attn, x, x, layout.clone());
            x = self.residual_norm(g, x, a, &layer.ln1);
            let f = self.feed_forward(g, &layer.ff1, &layer.ff2, x);
            x = self.residual_norm(g, x, f, &layer.ln2);
        }
        x
    }

    /// Teacher-forced decoder pass: causal self-attention over `target`
    /// and cross-attention into `memory`.
    pub fn decode(
        &self,
        g: &mut Graph<'_, T>,
        y: Var,
        target: &FeatureBatch<T>,
        memory: Var,
        source: &FeatureBatch<T>,
    ) -> Var {
        let heads = self.config.heads;
        let self_layout = AttnLayout::new(target.batch, target.len, target.len, heads)
            .causal()
            .with_key_pad(target.pad.clone());
        let cross_layout =
            AttnLayout::new(target.batch, target.len, source.len, heads).with_key_pad(source.pad.clone());
        let mut x = y;
        for layer in &self.layout.dec {
            let a = self.attention_block(g, &layer.self_attn, x, x, self_layout.clone());
            x = self.residual_norm(g, x, a, &layer.ln1);
            let c = self.attention_block(g, &layer.cross_attn, x, memory, cross_layout.clone());
            x = self.residual_norm(g, x, c, &layer.ln2);
            let f = self.feed_forward(g, &layer.ff1, &layer.ff2, x);
            x = self.residual_norm(g, x, f, &layer.ln3);
        }
        x
    }

    /// Splits each hidden row into four groups, one per prediction head.
    pub fn heads(&self, g: &mut Graph<'_, T>, h: Var) -> HeadVars {
        let q = self.config.group_width();
        let out: Vec<Var> = self
            .layout
            .heads
            .iter()
            .enumerate()
            .map(|(i, ids)| {
                let part = g.slice_cols(h, i * q, (i + 1) * q);
                g.linear(part, ids.w, ids.b)
            })
            .collect();
        HeadVars {
            coords: out[0],
            contour: out[1],
            point: out[2],
            flag: out[3],
        }
    }

    /// Full forward pass for training. The encoder-decoder needs the shifted
    /// target batch; the baseline ignores it.
    pub fn forward(
        &self,
        g: &mut Graph<'_, T>,
        source: &FeatureBatch<T>,
        target: Option<&FeatureBatch<T>>,
    ) -> HeadVars {
        let x = self.embed(g, source);
        let memory = self.encode(g, x, source);
        match self.config.architecture {
            Architecture::Baseline => self.heads(g, memory),
            Architecture::EncoderDecoder => {
                let target = target.expect("encoder-decoder forward needs a decoder input");
                let y = self.embed(g, target);
                let h = self.decode(g, y, target, memory, source);
                self.heads(g, h)
            }
        }
    }

    /// Encoder-only prediction for every position of a placeholder-filled
    /// input.
    pub fn baseline_forward(&self, source: &FeatureBatch<T>) -> HeadsOutput<T> {
        assert_eq!(self.config.architecture, Architecture::Baseline, "not a baseline model");
        let mut g = Graph::new(&self.params);
        let h = self.forward(&mut g, source, None);
        h.values(&g)
    }
}
