//! Subcommand implementations.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use contourfill_core::corruption::{corrupt_corpus, CorruptionSpec};
use contourfill_core::eval::report::{write_rows, EvalItem};
use contourfill_core::eval::{evaluate_item, render as draw_glyph, EvalReport, Palette};
use contourfill_core::ingest::synth::SYNTH_CHARSET;
use contourfill_core::ingest::{build_corpus, split_fonts, synth_glyphs, CorpusSplit, SplitName};
use contourfill_core::io::{write_jsonl, CompletionMeta, OracleLine, SequenceLine};
use contourfill_core::{GlyphSequence, DeletedPoint};
use contourfill_net::checkpoint;
use contourfill_net::train::TrainOutputs;
use contourfill_net::{complete as complete_one, complete_baseline, Architecture, CompletionModel, ConfigFile, RunConfig};
use log::{info, warn};
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::data::{self, echo, paired_path, require};
use crate::error::{CliError, Result};
use crate::{CompleteArgs, CorruptArgs, EvaluateArgs, IngestArgs, RenderArgs, SynthArgs, TrainArgs};

fn write_corpus(split: &CorpusSplit, out: &Path) -> Result<()> {
    for path in split.write(out)? {
        info!("wrote {}", path.display());
    }
    for name in SplitName::ALL {
        let styles = split.style_counts(name);
        let counts: Vec<String> = styles.iter().map(|(s, n)| format!("{s}={n}")).collect();
        println!(
            "{}: {} fonts, {} glyphs ({})",
            name.file_stem(),
            split.part(name).len(),
            split.part(name).iter().map(|f| f.glyphs.len()).sum::<usize>(),
            counts.join(", ")
        );
    }
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let ratios = data::parse_split(&a.split)?;
    echo(
        "ingest",
        &[
            ("fonts", a.fonts.display().to_string()),
            ("out", a.out.display().to_string()),
            ("split", format!("{ratios:?}")),
            ("seed", a.seed.to_string()),
            ("charset", a.charset.clone()),
        ],
    );
    require(&a.fonts)?;
    let mut paths: Vec<PathBuf> = WalkDir::new(&a.fonts)
        .into_iter()
        .filter_map(|e| e.ok())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ttf"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no .ttf files under {}", a.fonts.display())));
    }
    let split = build_corpus(&paths, ratios, a.seed, &a.charset)?;
    write_corpus(&split, &a.out)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let ratios = data::parse_split(&a.split)?;
    echo(
        "synth",
        &[
            ("count", a.count.to_string()),
            ("seed", a.seed.to_string()),
            ("out", a.out.display().to_string()),
            ("split", format!("{ratios:?}")),
        ],
    );
    if a.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let per_font = SYNTH_CHARSET.len();
    let mut fonts = synth_glyphs(a.count.div_ceil(per_font), a.seed);
    let extra = fonts.len() * per_font - a.count;
    if let Some(last) = fonts.last_mut() {
        for _ in 0..extra {
            last.glyphs.pop_last();
        }
    }
    let split = split_fonts(fonts, ratios, a.seed)?;
    write_corpus(&split, &a.out)
}

pub fn corrupt(a: CorruptArgs) -> Result<()> {
    let rates = data::parse_list(&a.rates, "--rates")?;
    require(&a.input)?;
    let (sources, default_out): (Vec<(String, PathBuf)>, PathBuf) = if a.input.is_dir() {
        let found: Vec<_> = SplitName::ALL
            .iter()
            .map(|s| (s.file_stem().to_string(), a.input.join(format!("{}.jsonl", s.file_stem()))))
            .filter(|(_, p)| p.exists())
            .collect();
        if found.is_empty() {
            return Err(CliError::MissingFile(a.input.join("train.jsonl")));
        }
        (found, a.input.clone())
    } else {
        let stem = a
            .input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("corpus")
            .to_string();
        let parent = a.input.parent().map(Path::to_path_buf).unwrap_or_default();
        (vec![(stem, a.input.clone())], parent)
    };
    let out = a.out.clone().unwrap_or(default_out);
    echo(
        "corrupt",
        &[
            ("in", a.input.display().to_string()),
            ("out", out.display().to_string()),
            ("mode", a.mode.to_string()),
            ("rates", format!("{rates:?}")),
            ("seed", a.seed.to_string()),
            ("jobs", a.jobs.to_string()),
        ],
    );
    let specs: Vec<CorruptionSpec> = rates
        .iter()
        .map(|&r| {
            if (0.0..1.0).contains(&r) {
                Ok(CorruptionSpec::new(a.mode, r, a.seed))
            } else {
                Err(CliError::Usage(format!("--rates: {r} is outside [0, 1)")))
            }
        })
        .collect::<Result<_>>()?;
    let pool = data::pool(a.jobs)?;
    for (stem, path) in sources {
        let glyphs = data::read_glyphs(&path)?;
        let pairs: Vec<_> = pool.install(|| {
            glyphs
                .par_iter()
                .map(|g| corrupt_corpus(std::slice::from_ref(g), &specs))
                .collect::<Vec<_>>()
        });
        let pairs: Vec<_> = pairs.into_iter().flatten().collect();
        let skipped = glyphs.len() * specs.len() - pairs.len();
        if skipped > 0 {
            warn!("{stem}: {skipped} glyph/rate combinations skipped");
        }
        write_jsonl(
            &paired_path(&out, &stem, data::INPUT_SUFFIX),
            pairs.iter().map(|p| SequenceLine::from_glyph(&p.input)),
        )?;
        write_jsonl(
            &paired_path(&out, &stem, data::TARGET_SUFFIX),
            pairs.iter().map(|p| SequenceLine::from_glyph(&p.target)),
        )?;
        write_jsonl(
            &paired_path(&out, &stem, data::ORACLE_SUFFIX),
            pairs.iter().map(|p| OracleLine {
                font_id: p.input.font_id.clone(),
                glyph_label: p.input.glyph_label,
                meta: p.input.meta.clone().expect("corrupted glyphs carry metadata"),
            }),
        )?;
        println!("{stem}: {} pairs from {} glyphs", pairs.len(), glyphs.len());
    }
    let manifest = a.input.join(data::MANIFEST);
    if a.input.is_dir() && manifest.exists() && out != a.input {
        std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
        std::fs::copy(&manifest, out.join(data::MANIFEST))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", manifest.display())))?;
    }
    Ok(())
}

/// Defaults, then flags, then the config file.
pub fn resolve_run_config(a: &TrainArgs) -> Result<RunConfig> {
    let flags = ConfigFile {
        architecture: a.architecture,
        d_model: a.d_model,
        layers: a.layers,
        heads: a.heads,
        ffn_width: a.ffn_width,
        dropout: a.dropout,
        positional_encoding: a.positional_encoding,
        max_len: a.max_len,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        patience: a.patience,
        max_epochs: a.max_epochs,
        seed: a.seed,
        clip_norm: a.clip_norm,
    };
    let mut run = RunConfig::default();
    flags.apply(&mut run);
    if let Some(path) = &a.config {
        require(path)?;
        ConfigFile::load(path)?.apply(&mut run);
    }
    run.validate()?;
    Ok(run)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let run = resolve_run_config(&a)?;
    let metrics = a
        .metrics
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.metrics.jsonl", a.out.display())));
    echo(
        "train",
        &[
            ("data", a.data.display().to_string()),
            ("out", a.out.display().to_string()),
            ("metrics", metrics.display().to_string()),
        ],
    );
    eprintln!("{run}");
    require(&a.data)?;
    let train_pairs = data::load_pairs(&a.data, SplitName::Train.file_stem())?;
    let val_pairs = data::load_pairs(&a.data, SplitName::Validation.file_stem())?;
    if run.model.architecture == Architecture::Baseline && train_pairs.iter().any(|p| p.input.meta.is_none()) {
        return Err(CliError::Data("the baseline needs oracle files next to the training pairs".into()));
    }
    let mut model = CompletionModel::<f32>::new(run.model.clone(), run.train.seed)?;
    eprintln!("parameters = {}", model.parameter_count());
    let outputs = TrainOutputs {
        checkpoint: Some(a.out.clone()),
        metrics: Some(metrics),
    };
    let report = contourfill_net::train(&mut model, &train_pairs, &val_pairs, &run.train, &outputs)?;
    println!(
        "trained {} epochs ({} steps, {} clipped); best validation loss {:.6} at epoch {}{}",
        report.epochs_run,
        report.steps,
        report.clipped_steps,
        report.best_val,
        report.best_epoch,
        if report.stopped_early { ", stopped early" } else { "" }
    );
    Ok(())
}

pub fn complete(a: CompleteArgs) -> Result<()> {
    echo(
        "complete",
        &[
            ("ckpt", a.ckpt.display().to_string()),
            ("in", a.input.display().to_string()),
            ("out", a.out.display().to_string()),
            ("baseline", a.baseline.to_string()),
            ("oracle", a.oracle.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("max_len", a.max_len.to_string()),
            ("jobs", a.jobs.to_string()),
        ],
    );
    require(&a.ckpt)?;
    let mut inputs = data::read_glyphs(&a.input)?;
    let (model, _) = checkpoint::load::<f32>(&a.ckpt)?;
    let arch = model.config().architecture;
    let wanted = if a.baseline { Architecture::Baseline } else { Architecture::EncoderDecoder };
    if arch != wanted {
        return Err(CliError::Mismatch(format!(
            "{} holds a {arch} model but {wanted} was requested",
            a.ckpt.display()
        )));
    }
    if let Some(path) = &a.oracle {
        data::attach_oracle(&mut inputs, data::read_oracle(path)?)?;
    }
    let failed = AtomicUsize::new(0);
    let lines: Vec<SequenceLine> = data::pool(a.jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|g| {
                let result = if a.baseline {
                    complete_baseline(&model, g, g.meta.as_ref())
                } else {
                    complete_one(&model, g, a.max_len)
                };
                match result {
                    Ok(c) => SequenceLine::from_glyph(&c.glyph).with_completion(c.meta),
                    Err(e) => {
                        failed.fetch_add(1, Ordering::Relaxed);
                        warn!("{}/{}: {e}", g.font_id, g.glyph_label);
                        // keeps the output line-aligned with the input
                        let empty = GlyphSequence::new(g.font_id.clone(), g.glyph_label, Vec::new());
                        SequenceLine::from_glyph(&empty).with_completion(CompletionMeta::default())
                    }
                }
            })
            .collect()
    });
    let unterminated = lines
        .iter()
        .filter(|l| l.completion.as_ref().is_some_and(|c| c.unterminated))
        .count();
    write_jsonl(&a.out, &lines)?;
    println!("completed {} glyphs ({unterminated} unterminated)", lines.len());
    match failed.into_inner() {
        0 => Ok(()),
        n => Err(CliError::GlyphFailures {
            failed: n,
            total: lines.len(),
        }),
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let oracle_path = a.oracle.clone().or_else(|| data::sibling(&a.input, data::ORACLE_SUFFIX).filter(|p| p.exists()));
    let manifest_path = a.manifest.clone().or_else(|| {
        let p = a.target.parent()?.join(data::MANIFEST);
        p.exists().then_some(p)
    });
    echo(
        "evaluate",
        &[
            ("pred", a.pred.display().to_string()),
            ("target", a.target.display().to_string()),
            ("input", a.input.display().to_string()),
            ("report", a.report.display().to_string()),
            ("oracle", oracle_path.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("manifest", manifest_path.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("jobs", a.jobs.to_string()),
        ],
    );
    let preds = data::read_glyphs(&a.pred)?;
    let targets = data::read_glyphs(&a.target)?;
    let inputs = data::read_glyphs(&a.input)?;
    data::check_aligned("prediction/target", &data::keys(&preds), &data::keys(&targets))?;
    data::check_aligned("input/target", &data::keys(&inputs), &data::keys(&targets))?;
    let oracle = match &oracle_path {
        Some(p) => {
            let o = data::read_oracle(p)?;
            data::check_aligned("oracle/target", &data::oracle_keys(&o), &data::keys(&targets))?;
            Some(o)
        }
        None => None,
    };
    let styles: HashMap<String, String> = match &manifest_path {
        Some(p) => data::read_styles(p)?,
        None => HashMap::new(),
    };
    let rows = data::pool(a.jobs)?.install(|| {
        (0..targets.len())
            .into_par_iter()
            .map(|i| {
                let (mode, rate) = match &oracle {
                    Some(o) => (o[i].meta.mode.to_string(), o[i].meta.rate),
                    None => {
                        let n = targets[i].len().max(1) as f64;
                        ("unknown".to_string(), (targets[i].len() - inputs[i].len().min(targets[i].len())) as f64 / n)
                    }
                };
                evaluate_item(&EvalItem {
                    input: &inputs[i],
                    prediction: &preds[i],
                    target: &targets[i],
                    style: styles
                        .get(&targets[i].font_id)
                        .cloned()
                        .unwrap_or_else(|| "unknown".into()),
                    mode,
                    rate,
                })
            })
            .collect::<Vec<_>>()
    });
    let report = EvalReport { rows };
    report.write_csv(&a.report)?;
    let side = |name: &str| {
        let stem = a.report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        a.report.with_file_name(format!("{stem}.{name}.csv"))
    };
    report.write_curves(&side("curves"))?;
    write_rows(&side("by_rate"), &report.by_rate())?;
    write_rows(&side("by_style"), &report.by_style())?;
    write_rows(&side("by_character"), &report.by_character())?;
    println!("rate      n  l1_input   l1_pred  hd_input   hd_pred");
    for agg in report.by_rate() {
        println!(
            "{:<5} {:>5} {:>9.1} {:>9.1} {:>9.4} {:>9.4}",
            agg.key, agg.count, agg.l1_input, agg.l1_pred, agg.hausdorff_input, agg.hausdorff_pred
        );
    }
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn render(a: RenderArgs) -> Result<()> {
    echo(
        "render",
        &[
            ("in", a.input.display().to_string()),
            ("out", a.out.display().to_string()),
            ("oracle", a.oracle.as_ref().map_or("-".into(), |p| p.display().to_string())),
            ("jobs", a.jobs.to_string()),
        ],
    );
    let glyphs = data::read_glyphs(&a.input)?;
    let deleted: Vec<Option<Vec<DeletedPoint>>> = match &a.oracle {
        Some(p) => {
            let o = data::read_oracle(p)?;
            data::check_aligned("input/oracle", &data::keys(&glyphs), &data::oracle_keys(&o))?;
            o.into_iter().map(|l| Some(l.meta.deleted)).collect()
        }
        None => vec![None; glyphs.len()],
    };
    let palette = Palette::default();
    let failed = AtomicUsize::new(0);
    data::pool(a.jobs)?.install(|| {
        glyphs.par_iter().zip(&deleted).enumerate().for_each(|(i, (g, d))| {
            let name = format!("{i:05}_{}_{}.png", file_safe(&g.font_id), file_safe(&g.glyph_label.to_string()));
            if let Err(e) = draw_glyph(g, &a.out.join(name), &palette, d.as_deref()) {
                failed.fetch_add(1, Ordering::Relaxed);
                warn!("{}/{}: {e}", g.font_id, g.glyph_label);
            }
        })
    });
    println!("rendered {} glyphs into {}", glyphs.len(), a.out.display());
    match failed.into_inner() {
        0 => Ok(()),
        n => Err(CliError::GlyphFailures {
            failed: n,
            total: glyphs.len(),
        }),
    }
}
