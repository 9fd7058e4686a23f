//! Experiment configuration: flat `key = value` lines with `#` comments,
//! comma-separated lists. Unknown keys are rejected, every field has a
//! documented default, and every malformed input yields a diagnostic naming
//! the key and line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::heads::{HeadConfig, HeadFamily};
use crate::matrix::Activation;
use crate::training::TrainConfig;

/// Which embedder feeds the head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingKind {
    TfIdf,
    Random,
    Vectors(PathBuf),
    Precomputed(PathBuf),
}

impl EmbeddingKind {
    pub fn parse(value: &str) -> Result<EmbeddingKind> {
        match value {
            "tfidf" => Ok(EmbeddingKind::TfIdf),
            "random" => Ok(EmbeddingKind::Random),
            other => {
                if let Some(path) = other.strip_prefix("vectors:") {
                    Ok(EmbeddingKind::Vectors(PathBuf::from(path)))
                } else if let Some(path) = other.strip_prefix("precomputed:") {
                    Ok(EmbeddingKind::Precomputed(PathBuf::from(path)))
                } else {
                    Err(Error::Config(format!(
                        "unknown embedding '{other}' (expected tfidf, random, vectors:PATH, or precomputed:PATH)"
                    )))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            EmbeddingKind::TfIdf => "tfidf".into(),
            EmbeddingKind::Random => "random".into(),
            EmbeddingKind::Vectors(_) => "vectors".into(),
            EmbeddingKind::Precomputed(_) => "precomputed".into(),
        }
    }

    /// Precomputed-contextual runs use the short-epoch/small-batch recipe.
    pub fn is_precomputed(&self) -> bool {
        matches!(self, EmbeddingKind::Precomputed(_))
    }
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingKind::Vectors(p) => write!(f, "vectors:{}", p.display()),
            EmbeddingKind::Precomputed(p) => write!(f, "precomputed:{}", p.display()),
            other => f.write_str(&other.name()),
        }
    }
}

/// Everything a run needs, CLI-overridable for seed and output directory.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub embedding: EmbeddingKind,
    pub head: HeadFamily,
    /// Grid lists; default to the single configured embedding/head.
    pub embeddings: Option<Vec<EmbeddingKind>>,
    pub heads: Option<Vec<HeadFamily>>,

    pub grid_size: usize,
    pub spline_order: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub scaler: bool,
    pub silu: bool,
    pub l1_strength: f64,

    /// None means "use the recipe default for the embedding kind".
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub head_lr: f64,
    pub backbone_lr: f64,
    pub weight_decay: f64,
    pub clip_max_norm: f64,
    pub dropout: f64,
    pub patience: usize,
    pub seed: u64,
    pub out_dir: PathBuf,

    pub vocab_size: usize,
    pub embed_dim: usize,
    pub test_fraction: f64,

    pub bench_input_dim: usize,
    pub bench_output_dim: usize,
    pub bench_batch: usize,
    pub bench_warmup: usize,
    pub bench_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            embedding: EmbeddingKind::TfIdf,
            head: HeadFamily::Mlp,
            embeddings: None,
            heads: None,
            grid_size: 8,
            spline_order: 3,
            layers: 1,
            hidden_dim: 64,
            activation: Activation::Relu,
            scaler: true,
            silu: false,
            l1_strength: 0.0,
            epochs: None,
            batch_size: None,
            head_lr: 2e-4,
            backbone_lr: 2e-5,
            weight_decay: 0.01,
            clip_max_norm: 1.0,
            dropout: 0.3,
            patience: 3,
            seed: 42,
            out_dir: PathBuf::from("runs"),
            vocab_size: 8000,
            embed_dim: 300,
            test_fraction: 0.2,
            bench_input_dim: 100,
            bench_output_dim: 6,
            bench_batch: 32,
            bench_warmup: 10,
            bench_iters: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            config
                .apply(key, value)
                .map_err(|e| Error::Config(format!("line {}: key '{key}': {e}", lineno + 1)))?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "embedding" => self.embedding = EmbeddingKind::parse(value)?,
            "head" => self.head = HeadFamily::parse(value)?,
            "embeddings" => {
                self.embeddings = Some(
                    value
                        .split(',')
                        .map(|v| EmbeddingKind::parse(v.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "heads" => {
                self.heads = Some(
                    value
                        .split(',')
                        .map(|v| HeadFamily::parse(v.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "grid_size" => self.grid_size = parse_num(value)?,
            "spline_order" => self.spline_order = parse_num(value)?,
            "layers" => self.layers = parse_num(value)?,
            "hidden_dim" => self.hidden_dim = parse_num(value)?,
            "activation" => self.activation = Activation::parse(value)?,
            "scaler" => self.scaler = parse_bool(value)?,
            "silu" => self.silu = parse_bool(value)?,
            "l1_strength" => self.l1_strength = parse_num(value)?,
            "epochs" => self.epochs = Some(parse_num(value)?),
            "batch_size" => self.batch_size = Some(parse_num(value)?),
            "head_lr" => self.head_lr = parse_num(value)?,
            "backbone_lr" => self.backbone_lr = parse_num(value)?,
            "weight_decay" => self.weight_decay = parse_num(value)?,
            "clip_max_norm" => self.clip_max_norm = parse_num(value)?,
            "dropout" => self.dropout = parse_num(value)?,
            "patience" => self.patience = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "vocab_size" => self.vocab_size = parse_num(value)?,
            "embed_dim" => self.embed_dim = parse_num(value)?,
            "test_fraction" => self.test_fraction = parse_num(value)?,
            "bench_input_dim" => self.bench_input_dim = parse_num(value)?,
            "bench_output_dim" => self.bench_output_dim = parse_num(value)?,
            "bench_batch" => self.bench_batch = parse_num(value)?,
            "bench_warmup" => self.bench_warmup = parse_num(value)?,
            "bench_iters" => self.bench_iters = parse_num(value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn head_config(&self) -> HeadConfig {
        HeadConfig {
            family: self.head,
            layers: self.layers,
            hidden_dim: self.hidden_dim,
            activation: self.activation,
            grid_size: self.grid_size,
            spline_order: self.spline_order,
            use_scaler: self.scaler,
            use_silu_path: self.silu,
            l1_strength: self.l1_strength,
        }
    }

    /// Training recipe with epoch/batch defaults resolved by embedding kind.
    pub fn train_config(&self, embedding: &EmbeddingKind) -> TrainConfig {
        let base = if embedding.is_precomputed() {
            TrainConfig::precomputed_defaults()
        } else {
            TrainConfig::static_defaults()
        };
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            head_lr: self.head_lr,
            backbone_lr: self.backbone_lr,
            weight_decay: self.weight_decay,
            clip_max_norm: self.clip_max_norm,
            dropout: self.dropout,
            early_stop_patience: self.patience,
            seed: self.seed,
            l1_strength: self.l1_strength,
        }
    }

    /// Grid axes: configured lists, or the single head/embedding.
    pub fn grid_axes(&self) -> (Vec<HeadFamily>, Vec<EmbeddingKind>) {
        let heads = self.heads.clone().unwrap_or_else(|| vec![self.head]);
        let embeddings = self
            .embeddings
            .clone()
            .unwrap_or_else(|| vec![self.embedding.clone()]);
        (heads, embeddings)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse '{value}'")))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("cannot parse '{other}' as bool"))),
    }
}
