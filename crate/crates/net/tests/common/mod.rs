#![allow(dead_code)]

use contourfill_core::corruption::{corrupt_corpus, CorruptionSpec};
use contourfill_core::ingest::synth_glyphs;
use contourfill_core::{ControlPoint, DeletionMode, GlyphSequence};
use contourfill_net::{Architecture, ModelConfig, TrainingPair};

pub fn tiny_config(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        layers: 1,
        heads: 2,
        dropout: 0.0,
        ..ModelConfig::default().with_width(8)
    }
}

pub fn small_config(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        layers: 2,
        heads: 2,
        dropout: 0.0,
        ..ModelConfig::default().with_width(16)
    }
}

pub fn synth_pairs(fonts: usize, seed: u64, rate: f64) -> Vec<TrainingPair> {
    let glyphs: Vec<GlyphSequence> = synth_glyphs(fonts, seed)
        .into_iter()
        .flat_map(|f| f.glyphs.into_values())
        .collect();
    corrupt_corpus(&glyphs, &[CorruptionSpec::new(DeletionMode::Random, rate, seed)])
        .into_iter()
        .map(TrainingPair::from)
        .collect()
}

/// One-contour glyph from `(x, y, on_curve)` triples.
pub fn glyph(points: &[(f64, f64, bool)]) -> GlyphSequence {
    let pts = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y, on))| ControlPoint::new(x, y, 1, i as i32 + 1, on))
        .collect();
    GlyphSequence::new("t", 'X', pts)
}
