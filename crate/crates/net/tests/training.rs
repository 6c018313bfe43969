mod common;

use common::{small_config, synth_pairs};
use contourfill_net::batch::build_batch;
use contourfill_net::checkpoint;
use contourfill_net::loss::{total_loss, LossBreakdown};
use contourfill_net::model::HeadsOutput;
use contourfill_net::train::{batch_gradients, evaluate_loss, MetricsRow};
use contourfill_net::{
    train, Architecture, CompletionModel, Graph, Phase, TrainConfig, TrainOutputs,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        learning_rate: 1e-3,
        patience: 3,
        max_epochs: epochs,
        seed: 5,
        clip_norm: 1.0,
    }
}

#[test]
fn frozen_parameters_stop_after_patience() {
    let pairs = synth_pairs(2, 1, 0.3);
    let mut m = CompletionModel::<f32>::new(small_config(Architecture::EncoderDecoder), 0).unwrap();
    let before = m.params().clone();
    let c = TrainConfig {
        learning_rate: 0.0,
        patience: 1,
        ..cfg(50)
    };
    let report = train(&mut m, &pairs, &pairs, &c, &TrainOutputs::default()).unwrap();
    assert_eq!(report.epochs_run, 2);
    assert!(report.stopped_early);
    assert_eq!(report.best_epoch, 1);
    assert_eq!(report.history.len(), 2 * report.epochs_run);
    for ((_, a), (_, b)) in before.iter().zip(m.params().iter()) {
        assert_eq!(a, b);
    }
}

#[test]
fn metrics_log_and_checkpoint_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = TrainOutputs {
        checkpoint: Some(dir.path().join("model.ckpt")),
        metrics: Some(dir.path().join("metrics.jsonl")),
    };
    let pairs = synth_pairs(2, 2, 0.3);
    let mut m = CompletionModel::<f32>::new(small_config(Architecture::EncoderDecoder), 1).unwrap();
    let report = train(&mut m, &pairs[..6], &pairs[6..], &cfg(3), &outputs).unwrap();
    let text = std::fs::read_to_string(outputs.metrics.as_ref().unwrap()).unwrap();
    let rows: Vec<MetricsRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), report.epochs_run * 2);
    assert_eq!(rows, report.history);
    for r in &rows {
        let sum = r.contour + r.point + r.coord + r.flag;
        assert!((r.total - sum).abs() < 1e-9);
    }
    assert!(text.lines().next().unwrap().contains("\"phase\":\"train\""));
    let (loaded, info) = checkpoint::load::<f32>(outputs.checkpoint.as_ref().unwrap()).unwrap();
    assert_eq!(info.epoch, report.best_epoch);
    assert_eq!(info.val_loss, Some(report.best_val));
    // the trained model holds the best-validation parameters
    for ((_, a), (_, b)) in loaded.params().iter().zip(m.params().iter()) {
        assert_eq!(a, b);
    }
}

#[test]
fn same_seed_replays_identical_losses() {
    let pairs = synth_pairs(2, 3, 0.3);
    let run = || {
        let mut model_cfg = small_config(Architecture::EncoderDecoder);
        model_cfg.dropout = 0.1;
        let mut m = CompletionModel::<f32>::new(model_cfg, 9).unwrap();
        train(&mut m, &pairs, &pairs, &cfg(2), &TrainOutputs::default()).unwrap()
    };
    let (a, b) = (run(), run());
    for (x, y) in a.history.iter().zip(&b.history) {
        assert!((x.total - y.total).abs() < 1e-6);
    }
}

#[test]
fn training_reduces_loss_for_both_architectures() {
    for arch in [Architecture::EncoderDecoder, Architecture::Baseline] {
        let pairs = synth_pairs(2, 4, 0.3);
        let mut m = CompletionModel::<f32>::new(small_config(arch), 2).unwrap();
        let c = TrainConfig {
            learning_rate: 3e-3,
            ..cfg(15)
        };
        let before = evaluate_loss(&m, &pairs, 8).unwrap();
        let report = train(&mut m, &pairs, &pairs, &c, &TrainOutputs::default()).unwrap();
        let first = report.phase(Phase::Train).next().unwrap().total;
        assert!(report.best_val < 0.7 * before.total, "{arch}: {} -> {}", before.total, report.best_val);
        assert!(report.best_val < first);
    }
}

#[test]
fn loss_terms_ignore_padding() {
    let pairs = synth_pairs(2, 5, 0.3);
    for arch in [Architecture::EncoderDecoder, Architecture::Baseline] {
        let model_cfg = small_config(arch);
        let m = CompletionModel::<f64>::new(model_cfg.clone(), 3).unwrap();
        let batch = build_batch::<f64>(&pairs, &[0, 3, 7], &model_cfg).unwrap();
        let (a, _) = batch_gradients(&m, &batch, None);
        let (b, _) = batch_gradients(&m, &batch.with_extra_padding(6), None);
        for (x, y) in [(a.contour, b.contour), (a.point, b.point), (a.coord, b.coord), (a.flag, b.flag)] {
            assert!((x - y).abs() < 1e-9, "{arch}: {x} vs {y}");
        }
    }
}

#[test]
fn decomposition_holds_on_random_batches() {
    let pairs = synth_pairs(4, 6, 0.3);
    let model_cfg = small_config(Architecture::EncoderDecoder);
    let m = CompletionModel::<f32>::new(model_cfg.clone(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let idx: Vec<usize> = (0..3).map(|_| rng.random_range(0..pairs.len())).collect();
        let batch = build_batch::<f32>(&pairs, &idx, &model_cfg).unwrap();
        let mut g = Graph::new(m.params());
        let h = m.forward(&mut g, &batch.source, batch.decoder_input.as_ref());
        let (l, _) = total_loss(&h.values(&g), &batch.targets);
        assert_eq!(l.total, l.contour + l.point + l.coord + l.flag);
        assert!(l.contour >= 0.0 && l.point >= 0.0 && l.coord >= 0.0 && l.flag >= 0.0);
    }
}

#[test]
fn uniform_logits_sum_to_known_constant() {
    let pairs = synth_pairs(1, 7, 0.3);
    let model_cfg = small_config(Architecture::EncoderDecoder);
    let batch = build_batch::<f64>(&pairs, &[0, 1], &model_cfg).unwrap();
    let rows = batch.targets.rows();
    let mut coords = Array2::zeros((rows, 2));
    for (r, c) in batch.targets.coords.iter().enumerate() {
        coords[[r, 0]] = c[0];
        coords[[r, 1]] = c[1];
    }
    let out = HeadsOutput {
        coords,
        contour_logits: Array2::zeros((rows, 5)),
        point_logits: Array2::zeros((rows, 103)),
        flag_logits: Array2::zeros((rows, 4)),
    };
    let (l, _) = total_loss(&out, &batch.targets);
    let expect = LossBreakdown::new(5f64.ln(), 103f64.ln(), 0.0, 4f64.ln());
    assert!((l.total - expect.total).abs() < 1e-9);
    assert!((l.total - 7.63).abs() < 0.01);
}

#[test]
fn empty_splits_are_rejected() {
    let pairs = synth_pairs(1, 8, 0.3);
    let mut m = CompletionModel::<f32>::new(small_config(Architecture::EncoderDecoder), 0).unwrap();
    assert!(train(&mut m, &pairs, &[], &cfg(1), &TrainOutputs::default()).is_err());
    assert!(train(&mut m, &[], &pairs, &cfg(1), &TrainOutputs::default()).is_err());
}
