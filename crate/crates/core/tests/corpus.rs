use std::collections::BTreeSet;

use contourfill_core::corruption::{corrupt_corpus, CorruptionSpec};
use contourfill_core::eval::{hausdorff, l1_distance};
use contourfill_core::ingest::{read_manifest, split_fonts, synth_glyphs, SplitName};
use contourfill_core::io::{read_sequences, write_sequences};
use contourfill_core::{validate, DeletionMode};

const SPLITS: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

#[test]
fn written_corpus_reads_back_and_splits_are_font_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let split = split_fonts(synth_glyphs(20, 9), [0.8, 0.1, 0.1], 9).unwrap();
    split.write(dir.path()).unwrap();

    let mut fonts_seen = Vec::new();
    for name in SPLITS {
        let path = dir.path().join(format!("{}.jsonl", name.file_stem()));
        let read = read_sequences(&path).unwrap();
        assert_eq!(read, split.glyphs(name));
        let fonts: BTreeSet<String> = read.iter().map(|g| g.font_id.clone()).collect();
        fonts_seen.push(fonts);
    }
    assert!(fonts_seen[0].is_disjoint(&fonts_seen[1]));
    assert!(fonts_seen[0].is_disjoint(&fonts_seen[2]));
    assert!(fonts_seen[1].is_disjoint(&fonts_seen[2]));

    let manifest = read_manifest(&dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.len(), 20);
    assert_eq!(manifest.iter().map(|r| r.glyphs).sum::<usize>(), 100);
}

#[test]
fn corrupted_corpus_is_seeded_and_valid() {
    let glyphs: Vec<_> = synth_glyphs(6, 2).into_iter().flat_map(|f| f.glyphs.into_values()).collect();
    let specs: Vec<_> = [0.1, 0.3, 0.5]
        .iter()
        .flat_map(|&r| {
            [DeletionMode::Random, DeletionMode::Burst].map(|m| CorruptionSpec::new(m, r, 4))
        })
        .collect();
    let a = corrupt_corpus(&glyphs, &specs);
    let b = corrupt_corpus(&glyphs, &specs);
    assert_eq!(a.len(), glyphs.len() * specs.len());
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.input, q.input);
        assert!(validate(&p.input).is_empty());
        assert!(p.input.len() < p.target.len());
        // survivors keep their coordinates, so only target-to-input distance counts
        let survivors = p.input.coordinates();
        let d = hausdorff(&p.target.coordinates(), &survivors).unwrap();
        let directed = survivors
            .iter()
            .map(|s| {
                p.target
                    .coordinates()
                    .iter()
                    .map(|t| ((s[0] - t[0]).powi(2) + (s[1] - t[1]).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert_eq!(directed, 0.0);
        assert!(d.is_finite() && d >= 0.0);
        assert_eq!(l1_distance(&p.target, &p.target), 0.0);
    }
}

#[test]
fn corrupted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let glyphs: Vec<_> = synth_glyphs(2, 5).into_iter().flat_map(|f| f.glyphs.into_values()).collect();
    let pairs = corrupt_corpus(&glyphs, &[CorruptionSpec::new(DeletionMode::Burst, 0.4, 1)]);
    let path = dir.path().join("x.input.jsonl");
    write_sequences(&path, pairs.iter().map(|p| &p.input)).unwrap();
    let back = read_sequences(&path).unwrap();
    for (p, g) in pairs.iter().zip(&back) {
        assert_eq!(p.input.points, g.points);
        assert_eq!(p.input.corrupted, g.corrupted);
        assert!(g.meta.is_none());
    }
}
