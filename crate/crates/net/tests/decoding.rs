mod common;

use common::{small_config, synth_pairs};
use contourfill_core::contour::{id_to_class, validate};
use contourfill_core::{tokenize, ControlPoint, CurveFlag};
use contourfill_net::batch::build_batch;
use contourfill_net::features::records_of;
use contourfill_net::{
    complete, complete_baseline, greedy_decode, Architecture, CompletionModel, FeatureBatch, Graph,
    InputRecord,
};
use ndarray::Array2;

fn model(seed: u64) -> CompletionModel<f64> {
    CompletionModel::new(small_config(Architecture::EncoderDecoder), seed).unwrap()
}

/// Encoder-decoder outputs for one source and one decoder input sequence.
fn teacher_forced(m: &CompletionModel<f64>, src: &[InputRecord], dec: &[InputRecord]) -> Array2<f64> {
    let s = FeatureBatch::single(src, m.config()).unwrap();
    let d = FeatureBatch::single(dec, m.config()).unwrap();
    let mut g = Graph::new(m.params());
    let h = m.forward(&mut g, &s, Some(&d));
    let v = h.values(&g);
    ndarray::concatenate(
        ndarray::Axis(1),
        &[v.coords.view(), v.contour_logits.view(), v.point_logits.view(), v.flag_logits.view()],
    )
    .unwrap()
}

#[test]
fn decoder_is_exactly_causal() {
    let m = model(1);
    let pairs = synth_pairs(1, 2, 0.3);
    let src = records_of(&tokenize(&pairs[0].input).unwrap());
    let dec = records_of(&tokenize(&pairs[0].target).unwrap());
    let base = teacher_forced(&m, &src, &dec);
    for t in [0, 3, dec.len() - 2] {
        let mut changed = dec.clone();
        changed[t + 1].x += 0.37;
        changed[t + 1].point = (changed[t + 1].point + 5) % 103;
        let out = teacher_forced(&m, &src, &changed);
        for r in 0..=t {
            assert_eq!(out.row(r), base.row(r), "position {r} changed after perturbing {}", t + 1);
        }
        assert_ne!(out.row(t + 1), base.row(t + 1));
    }
}

#[test]
fn encoder_memory_ignores_padding() {
    let m = model(2);
    let pairs = synth_pairs(1, 3, 0.2);
    let src = records_of(&tokenize(&pairs[1].input).unwrap());
    let fb = FeatureBatch::single(&src, m.config()).unwrap();
    let padded = fb.pad_to(fb.len + 7);
    let memory = |b: &FeatureBatch<f64>| {
        let mut g = Graph::new(m.params());
        let x = m.embed(&mut g, b);
        let e = m.encode(&mut g, x, b);
        g.value(e).clone()
    };
    let (a, b) = (memory(&fb), memory(&padded));
    for r in 0..fb.len {
        for (x, y) in a.row(r).iter().zip(b.row(r)) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn cached_decoding_matches_full_pass() {
    let m = model(3);
    let pairs = synth_pairs(1, 4, 0.3);
    let src = records_of(&tokenize(&pairs[2].input).unwrap());
    let out = greedy_decode(&m, &src, 40).unwrap();
    assert!(!out.heads.is_empty());
    let mut dec = vec![InputRecord::from_point(&ControlPoint::sos())];
    dec.extend(out.records.iter().map(InputRecord::from_point));
    dec.truncate(out.heads.len());
    let full = teacher_forced(&m, &src, &dec);
    let steps = ndarray::concatenate(
        ndarray::Axis(1),
        &[
            out.heads.coords.view(),
            out.heads.contour_logits.view(),
            out.heads.point_logits.view(),
            out.heads.flag_logits.view(),
        ],
    )
    .unwrap();
    assert_eq!(full.dim(), steps.dim());
    let diff = (&full - &steps).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(diff < 1e-9, "max difference {diff}");
}

#[test]
fn encoder_runs_once_per_completion() {
    let m = model(4);
    let pairs = synth_pairs(1, 5, 0.4);
    let before = m.encoder_calls();
    complete(&m, &pairs[0].input, 60).unwrap();
    assert_eq!(m.encoder_calls(), before + 1);
}

#[test]
fn model_wired_to_stop_returns_empty_glyph() {
    let mut m = model(5);
    m.params_mut().by_name_mut("head.flag.weight").unwrap().fill(0.0);
    let bias = m.params_mut().by_name_mut("head.flag.bias").unwrap();
    bias.fill(0.0);
    bias[[0, CurveFlag::Eos.class_index()]] = 10.0;
    let pairs = synth_pairs(1, 6, 0.3);
    let c = complete(&m, &pairs[0].input, 410).unwrap();
    assert!(c.glyph.is_empty());
    assert!(!c.meta.unterminated);
}

#[test]
fn model_that_never_stops_is_capped_and_flagged() {
    let mut m = model(6);
    m.params_mut().by_name_mut("head.flag.weight").unwrap().fill(0.0);
    let bias = m.params_mut().by_name_mut("head.flag.bias").unwrap();
    bias.fill(0.0);
    bias[[0, CurveFlag::Eos.class_index()]] = -50.0;
    bias[[0, CurveFlag::Sos.class_index()]] = 50.0;
    let pairs = synth_pairs(1, 7, 0.3);
    let decoded = greedy_decode(&m, &records_of(&tokenize(&pairs[0].input).unwrap()), 410).unwrap();
    assert_eq!(decoded.records.len(), 408);
    assert!(!decoded.terminated);
    assert!(decoded.records.iter().all(|r| !r.flag.is_special()));
    let c = complete(&m, &pairs[0].input, 410).unwrap();
    assert!(c.meta.unterminated);
    assert!(c.glyph.len() + 2 <= 410);
    assert!(validate(&c.glyph).is_empty());
}

#[test]
fn completions_validate_and_are_deterministic() {
    let pairs = synth_pairs(3, 8, 0.3);
    for seed in 0..3 {
        let m = model(10 + seed);
        for p in &pairs {
            let a = complete(&m, &p.input, 120).unwrap();
            assert!(validate(&a.glyph).is_empty(), "{:?}", validate(&a.glyph));
            assert!(a.glyph.len() + 2 <= 120);
            let b = complete(&m, &p.input, 120).unwrap();
            assert_eq!(a.glyph, b.glyph);
        }
    }
}

#[test]
fn baseline_output_has_ground_truth_length() {
    let cfg = small_config(Architecture::Baseline);
    let m = CompletionModel::<f64>::new(cfg.clone(), 1).unwrap();
    let pairs = synth_pairs(2, 9, 0.3);
    for p in &pairs {
        let c = complete_baseline(&m, &p.input, p.input.meta.as_ref()).unwrap();
        assert_eq!(c.glyph.len(), p.target.len());
        assert!(validate(&c.glyph).is_empty());
        // ids come from the oracle, so the truth's ids are reproduced
        for (a, b) in c.glyph.points.iter().zip(&p.target.points) {
            assert_eq!((a.contour_id, a.point_id), (b.contour_id, b.point_id));
            assert!(!a.flag.is_special());
        }
    }
    // no gaps: a reconstruction of the intact input
    let intact = &pairs[0].target;
    let c = complete_baseline(&m, intact, None).unwrap();
    assert_eq!(c.glyph.len(), intact.len());
    let b = build_batch::<f64>(&pairs, &[0], &cfg).unwrap();
    assert_eq!(b.source.len, pairs[0].target.len() + 2);
    assert_eq!(id_to_class(-1), 0);
}

#[test]
fn mismatched_architecture_is_an_error() {
    let m = model(1);
    let pairs = synth_pairs(1, 1, 0.3);
    assert!(complete_baseline(&m, &pairs[0].input, pairs[0].input.meta.as_ref()).is_err());
    let b = CompletionModel::<f64>::new(small_config(Architecture::Baseline), 1).unwrap();
    assert!(complete(&b, &pairs[0].input, 100).is_err());
}
