use std::path::{Path, PathBuf};

use dbap::encoder::DEFAULT_HASH_DIM;
use dbap::parser::{Decoder, Mode, ModelConfig, SegmentationMode, TrainConfig};
use serde::Deserialize;

use crate::args::RunOpts;
use crate::error::{CliError, Result};

/// Model-shape keys of a run configuration.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub arc_dim: Option<usize>,
    pub tag_dim: Option<usize>,
    pub dropout: Option<f64>,
    pub init_scale: Option<f64>,
    pub arc_bias_init: Option<f64>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<String>,
    pub segmentation: Option<String>,
    pub augmented: Option<bool>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub decoder: Option<String>,
    pub corpus: Option<PathBuf>,
    pub rst_dir: Option<PathBuf>,
    pub embeddings: Option<Vec<PathBuf>>,
    pub splits: Option<PathBuf>,
    pub hash_dim: Option<usize>,
    pub model: Option<ModelSection>,
    /// Partial tables are completed with the defaults.
    pub train: Option<TrainConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.corpus, &mut cfg.rst_dir, &mut cfg.splits]
            .into_iter()
            .flatten()
        {
            rebase(p);
        }
        for p in cfg.embeddings.iter_mut().flatten() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// A fully resolved run: flags over config file over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub mode: Mode,
    pub segmentation: SegmentationMode,
    pub augmented: bool,
    pub seed: u64,
    pub jobs: usize,
    pub decoder: Decoder,
    pub corpus: Option<PathBuf>,
    pub rst_dir: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
    pub splits: Option<PathBuf>,
    pub hash_dim: usize,
    pub model: ModelSection,
    pub train: TrainConfig,
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    s.parse().map_err(CliError::usage)
}

pub fn parse_segmentation(s: &str) -> Result<SegmentationMode> {
    s.parse().map_err(CliError::usage)
}

pub fn parse_decoder(s: &str) -> Result<Decoder> {
    match s {
        "mst" => Ok(Decoder::Mst),
        "greedy" => Ok(Decoder::Greedy),
        other => Err(CliError::usage(format!(
            "unknown decoder {other:?} (expected mst or greedy)"
        ))),
    }
}

impl Settings {
    pub fn resolve(opts: &RunOpts) -> Result<Settings> {
        let file = match &opts.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Settings::merge(opts, file)
    }

    pub fn merge(opts: &RunOpts, file: RunConfig) -> Result<Settings> {
        let mode = parse_mode(
            opts.mode
                .as_deref()
                .or(file.mode.as_deref())
                .unwrap_or("bap"),
        )?;
        let segmentation = parse_segmentation(
            opts.segmentation
                .as_deref()
                .or(file.segmentation.as_deref())
                .unwrap_or("gold"),
        )?;
        let decoder = parse_decoder(
            opts.decoder
                .as_deref()
                .or(file.decoder.as_deref())
                .unwrap_or("mst"),
        )?;
        let seed = opts.seed.or(file.seed).unwrap_or(0);
        let jobs = opts.jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        let mut train = file.train.unwrap_or_default();
        if let Some(e) = opts.max_epochs {
            train.max_epochs = e;
        }
        train.seed = seed;
        train.decoder = decoder;
        let hash_dim = opts.hash_dim.or(file.hash_dim).unwrap_or(DEFAULT_HASH_DIM);
        if hash_dim == 0 {
            return Err(CliError::usage("--hash-dim must be positive"));
        }
        Ok(Settings {
            mode,
            segmentation,
            augmented: opts.augmented || file.augmented.unwrap_or(false),
            seed,
            jobs,
            decoder,
            corpus: opts.corpus.clone().or(file.corpus),
            rst_dir: opts.rst_dir.clone().or(file.rst_dir),
            embeddings: if opts.embeddings.is_empty() {
                file.embeddings.unwrap_or_default()
            } else {
                opts.embeddings.clone()
            },
            splits: opts.splits.clone().or(file.splits),
            hash_dim,
            model: file.model.unwrap_or_default(),
            train,
        })
    }

    pub fn corpus(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::usage("--corpus is required (flag or config key `corpus`)"))
    }

    /// Model configuration for `mode` over `d_lm`-dimensional inputs.
    pub fn model_config(&self, mode: Mode, d_lm: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(mode, d_lm);
        cfg.segmentation = self.segmentation;
        cfg.seed = self.seed;
        let m = &self.model;
        cfg.arc_dim = m.arc_dim.unwrap_or(cfg.arc_dim);
        cfg.tag_dim = m.tag_dim.unwrap_or(cfg.tag_dim);
        cfg.dropout = m.dropout.unwrap_or(cfg.dropout);
        cfg.init_scale = m.init_scale.unwrap_or(cfg.init_scale);
        cfg.arc_bias_init = m.arc_bias_init.unwrap_or(cfg.arc_bias_init);
        cfg
    }
}
