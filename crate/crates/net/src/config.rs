//! Flat `key = value` run configuration covering model and training
//! settings.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::model::{Architecture, ModelConfig};
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Every key is optional; only the keys present override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub architecture: Option<Architecture>,
    pub d_model: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub ffn_width: Option<usize>,
    pub dropout: Option<f64>,
    pub positional_encoding: Option<bool>,
    pub max_len: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub patience: Option<usize>,
    pub max_epochs: Option<usize>,
    pub seed: Option<u64>,
    pub clip_norm: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NetError::io(path, e))?;
        Self::parse(&text).map_err(|message| NetError::ConfigFile {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Overrides the fields of `run` named in this file. Setting `d_model`
    /// without `ffn_width` keeps the feed-forward width at `4 * d_model`.
    pub fn apply(&self, run: &mut RunConfig) {
        let m = &mut run.model;
        if let Some(d) = self.d_model {
            *m = m.clone().with_width(d);
        }
        set(&mut m.architecture, self.architecture);
        set(&mut m.layers, self.layers);
        set(&mut m.heads, self.heads);
        set(&mut m.ffn_width, self.ffn_width);
        set(&mut m.dropout, self.dropout);
        set(&mut m.positional_encoding, self.positional_encoding);
        set(&mut m.max_len, self.max_len);
        let t = &mut run.train;
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.patience, self.patience);
        set(&mut t.max_epochs, self.max_epochs);
        set(&mut t.seed, self.seed);
        set(&mut t.clip_norm, self.clip_norm);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, t) = (&self.model, &self.train);
        writeln!(f, "architecture = \"{}\"", m.architecture)?;
        writeln!(f, "d_model = {}", m.d_model)?;
        writeln!(f, "layers = {}", m.layers)?;
        writeln!(f, "heads = {}", m.heads)?;
        writeln!(f, "ffn_width = {}", m.ffn_width)?;
        writeln!(f, "dropout = {}", m.dropout)?;
        writeln!(f, "positional_encoding = {}", m.positional_encoding)?;
        writeln!(f, "max_len = {}", m.max_len)?;
        writeln!(f, "batch_size = {}", t.batch_size)?;
        writeln!(f, "learning_rate = {}", t.learning_rate)?;
        writeln!(f, "patience = {}", t.patience)?;
        writeln!(f, "max_epochs = {}", t.max_epochs)?;
        writeln!(f, "seed = {}", t.seed)?;
        write!(f, "clip_norm = {}", t.clip_norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_overrides_only_named_keys() {
        let file = ConfigFile::parse("d_model = 128\nlayers = 2\nbatch_size = 32\narchitecture = \"baseline\"\n").unwrap();
        let mut run = RunConfig::default();
        file.apply(&mut run);
        assert_eq!(run.model.d_model, 128);
        assert_eq!(run.model.ffn_width, 512);
        assert_eq!(run.model.layers, 2);
        assert_eq!(run.model.heads, 4);
        assert_eq!(run.model.architecture, Architecture::Baseline);
        assert_eq!(run.train.batch_size, 32);
        assert_eq!(run.train.learning_rate, 1e-4);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(ConfigFile::parse("d_modle = 3").is_err());
    }

    #[test]
    fn display_round_trips() {
        let mut run = RunConfig::default();
        ConfigFile::parse("d_model = 64\nseed = 9\nlearning_rate = 0.001").unwrap().apply(&mut run);
        let mut back = RunConfig::default();
        ConfigFile::parse(&run.to_string()).unwrap().apply(&mut back);
        assert_eq!(back, run);
    }
}
