//! Padded training batches.

use contourfill_core::corruption::CorruptedPair;
use contourfill_core::{tokenize, GlyphSequence};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{placeheld_records, records_of, FeatureBatch, InputRecord};
use crate::loss::Targets;
use crate::model::{Architecture, ModelConfig};
use crate::scalar::Scalar;

/// A corrupted input and its ground truth. The input's corruption meta is
/// needed only by the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: GlyphSequence,
    pub target: GlyphSequence,
}

impl From<CorruptedPair> for TrainingPair {
    fn from(p: CorruptedPair) -> Self {
        Self {
            input: p.input,
            target: p.target,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub source: FeatureBatch<T>,
    /// Ground truth shifted right (start record first); encoder-decoder only.
    pub decoder_input: Option<FeatureBatch<T>>,
    pub targets: Targets,
    /// Positions of the batch members in the pair list.
    pub indices: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Adds `extra` padding positions to every sequence of the batch.
    pub fn with_extra_padding(&self, extra: usize) -> Self {
        let target_len = self.decoder_input.as_ref().map_or(self.source.len, |d| d.len);
        Self {
            source: self.source.pad_to(self.source.len + extra),
            decoder_input: self.decoder_input.as_ref().map(|d| d.pad_to(d.len + extra)),
            targets: self.targets.pad_to(self.size(), target_len, target_len + extra),
            indices: self.indices.clone(),
        }
    }
}

/// Encoder input of the baseline: placeholders at the oracle positions,
/// or the plain sequence when nothing was deleted.
pub fn baseline_source(input: &GlyphSequence) -> Result<Vec<InputRecord>> {
    match &input.meta {
        Some(meta) => placeheld_records(input, meta),
        None => Ok(records_of(&tokenize(input)?)),
    }
}

pub fn build_batch<T: Scalar>(pairs: &[TrainingPair], indices: &[usize], cfg: &ModelConfig) -> Result<Batch<T>> {
    let targets_tok = indices
        .iter()
        .map(|&i| tokenize(&pairs[i].target))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match cfg.architecture {
        Architecture::EncoderDecoder => {
            let sources = indices
                .iter()
                .map(|&i| Ok(records_of(&tokenize(&pairs[i].input)?)))
                .collect::<Result<Vec<_>>>()?;
            let dec_in: Vec<Vec<InputRecord>> = targets_tok
                .iter()
                .map(|t| records_of(t)[..t.len() - 1].to_vec())
                .collect();
            let dec_out: Vec<_> = targets_tok.iter().map(|t| &t.records()[1..]).collect();
            let decoder_input = FeatureBatch::new(&dec_in, cfg)?;
            let targets = Targets::new(&dec_out, decoder_input.len);
            Ok(Batch {
                source: FeatureBatch::new(&sources, cfg)?,
                decoder_input: Some(decoder_input),
                targets,
                indices: indices.to_vec(),
            })
        }
        Architecture::Baseline => {
            let sources = indices
                .iter()
                .map(|&i| baseline_source(&pairs[i].input))
                .collect::<Result<Vec<_>>>()?;
            let source = FeatureBatch::new(&sources, cfg)?;
            let outs: Vec<_> = targets_tok.iter().map(|t| t.records()).collect();
            let targets = Targets::new(&outs, source.len);
            Ok(Batch {
                source,
                decoder_input: None,
                targets,
                indices: indices.to_vec(),
            })
        }
    }
}

/// Pair order for one epoch: a seeded shuffle, distinct per epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Shuffled, padded batches for one epoch. The last batch may be short.
pub fn make_batches<'a, T: Scalar>(
    pairs: &'a [TrainingPair],
    batch_size: usize,
    seed: u64,
    epoch: usize,
    cfg: &'a ModelConfig,
) -> impl Iterator<Item = Result<Batch<T>>> + 'a {
    assert!(batch_size >= 1, "batch size must be positive");
    let order = epoch_order(pairs.len(), seed, epoch);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks.into_iter().map(move |idx| build_batch(pairs, &idx, cfg))
}

/// Batches in corpus order, used for validation.
pub fn sequential_batches<'a, T: Scalar>(
    pairs: &'a [TrainingPair],
    batch_size: usize,
    cfg: &'a ModelConfig,
) -> impl Iterator<Item = Result<Batch<T>>> + 'a {
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let chunks: Vec<Vec<usize>> = idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    chunks.into_iter().map(move |idx| build_batch(pairs, &idx, cfg))
}
