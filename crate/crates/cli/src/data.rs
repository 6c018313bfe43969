//! File layout conventions shared by the subcommands.
//!
//! A corpus directory holds `train.jsonl`, `validation.jsonl`,
//! `test.jsonl` and `manifest.csv`. Corrupting split `s` writes
//! `s.input.jsonl`, `s.target.jsonl` and `s.oracle.jsonl`, line-aligned.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use contourfill_core::ingest::read_manifest;
use contourfill_core::io::{read_jsonl, read_sequences, OracleLine};
use contourfill_core::GlyphSequence;
use contourfill_net::TrainingPair;

use crate::error::{CliError, Result};

pub const INPUT_SUFFIX: &str = "input.jsonl";
pub const TARGET_SUFFIX: &str = "target.jsonl";
pub const ORACLE_SUFFIX: &str = "oracle.jsonl";
pub const MANIFEST: &str = "manifest.csv";

pub fn paired_path(dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{stem}.{suffix}"))
}

pub fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}

pub fn read_glyphs(path: &Path) -> Result<Vec<GlyphSequence>> {
    require(path)?;
    Ok(read_sequences(path)?)
}

pub fn read_oracle(path: &Path) -> Result<Vec<OracleLine>> {
    require(path)?;
    Ok(read_jsonl(path)?)
}

/// Checks that two line-aligned files describe the same glyphs.
pub fn check_aligned(what: &str, a: &[(&str, char)], b: &[(&str, char)]) -> Result<()> {
    if a.len() != b.len() {
        return Err(CliError::Data(format!("{what}: {} lines vs {}", a.len(), b.len())));
    }
    if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
        return Err(CliError::Data(format!(
            "{what}: line {} is {}/{} in one file and {}/{} in the other",
            i + 1,
            a[i].0,
            a[i].1,
            b[i].0,
            b[i].1
        )));
    }
    Ok(())
}

pub fn keys(glyphs: &[GlyphSequence]) -> Vec<(&str, char)> {
    glyphs.iter().map(|g| (g.font_id.as_str(), g.glyph_label)).collect()
}

pub fn oracle_keys(oracle: &[OracleLine]) -> Vec<(&str, char)> {
    oracle.iter().map(|o| (o.font_id.as_str(), o.glyph_label)).collect()
}

/// Moves the corruption metadata of `oracle` onto the matching inputs.
pub fn attach_oracle(inputs: &mut [GlyphSequence], oracle: Vec<OracleLine>) -> Result<()> {
    check_aligned("input/oracle", &keys(inputs), &oracle_keys(&oracle))?;
    for (g, o) in inputs.iter_mut().zip(oracle) {
        g.meta = Some(o.meta);
    }
    Ok(())
}

/// Corrupted pairs of one split, with oracle metadata attached to inputs.
pub fn load_pairs(dir: &Path, stem: &str) -> Result<Vec<TrainingPair>> {
    let mut inputs = read_glyphs(&paired_path(dir, stem, INPUT_SUFFIX))?;
    let targets = read_glyphs(&paired_path(dir, stem, TARGET_SUFFIX))?;
    check_aligned("input/target", &keys(&inputs), &keys(&targets))?;
    let oracle = paired_path(dir, stem, ORACLE_SUFFIX);
    if oracle.exists() {
        attach_oracle(&mut inputs, read_oracle(&oracle)?)?;
    }
    Ok(inputs
        .into_iter()
        .zip(targets)
        .map(|(input, target)| TrainingPair { input, target })
        .collect())
}

/// Font id to style name from a corpus manifest.
pub fn read_styles(path: &Path) -> Result<HashMap<String, String>> {
    require(path)?;
    Ok(read_manifest(path)?
        .into_iter()
        .map(|r| (r.font_id, r.style.to_string()))
        .collect())
}

/// `a.b.c` split into three shares.
pub fn parse_split(s: &str) -> Result<[f64; 3]> {
    let parts = parse_list(s, "--split")?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Usage(format!("--split needs three shares, got {}", v.len())))
}

pub fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: `{p}` is not a number")))
        })
        .collect()
}

/// For `dir/x.input.jsonl`, the sibling `dir/x.<suffix>`.
pub fn sibling(input: &Path, suffix: &str) -> Option<PathBuf> {
    let name = input.file_name()?.to_str()?;
    let stem = name.strip_suffix(INPUT_SUFFIX)?;
    Some(input.with_file_name(format!("{stem}{suffix}")))
}

pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

/// Prints the resolved settings of a command, one `key = value` per line.
pub fn echo(command: &str, settings: &[(&str, String)]) {
    eprintln!("# {command}");
    for (k, v) in settings {
        eprintln!("{k} = {v}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_parsing() {
        assert_eq!(parse_split("0.8,0.1,0.1").unwrap(), [0.8, 0.1, 0.1]);
        assert!(matches!(parse_split("0.8,0.2"), Err(CliError::Usage(_))));
        assert!(matches!(parse_split("a,b,c"), Err(CliError::Usage(_))));
    }

    #[test]
    fn sibling_of_input_file() {
        let p = Path::new("/d/test.input.jsonl");
        assert_eq!(sibling(p, ORACLE_SUFFIX).unwrap(), Path::new("/d/test.oracle.jsonl"));
        assert!(sibling(Path::new("/d/pred.jsonl"), ORACLE_SUFFIX).is_none());
    }
}
