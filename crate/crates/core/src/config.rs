//! Flat `key = value` run configuration with command-line overrides. The
//! canonical rendering of every key (defaults included) is echoed into output
//! artifacts and hashed to identify a run.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::encoder::BaselineConfig;
use crate::error::{Error, Result};
use crate::matcher::NgramConfig;
use crate::spanmodel::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Baseline,
    Precomputed,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Baseline => "baseline",
            EncoderKind::Precomputed => "precomputed",
        }
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(EncoderKind::Baseline),
            "precomputed" => Ok(EncoderKind::Precomputed),
            _ => Err(Error::Config(format!(
                "encoder must be baseline or precomputed, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_corpus: Option<PathBuf>,
    pub dev_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub medic: Option<PathBuf>,
    /// Optional external abbreviation TSV (`doc_id, short, long`).
    pub abbreviations: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub lambda: f64,
    pub max_span_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub embedding_dim: usize,
    pub window: usize,
    pub hash_buckets: usize,
    pub width_dim: usize,
    pub hidden_dim: usize,
    pub ngram_sizes: Vec<usize>,
    pub binary_tf: bool,
    pub negative_ratio: f64,
    pub null_weight: f64,
    pub weight_decay: f64,
    pub word_dropout: f64,
    pub score_on_raw_g: bool,
    pub dict_top_k: usize,
    /// Train on train + dev (the BC5CDR protocol).
    pub merge_dev_into_train: bool,
    /// Add training mention surfaces to the dictionary.
    pub augment_dictionary: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let enc = BaselineConfig::default();
        let ngram = NgramConfig::default();
        RunConfig {
            train_corpus: None,
            dev_corpus: None,
            test_corpus: None,
            medic: None,
            abbreviations: None,
            embeddings: None,
            lambda: model.lambda,
            max_span_width: model.max_width,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            seed: train.seed,
            encoder: EncoderKind::Baseline,
            embedding_dim: enc.dim,
            window: enc.window,
            hash_buckets: enc.buckets,
            width_dim: model.width_dim,
            hidden_dim: model.hidden_dim,
            ngram_sizes: ngram.sizes,
            binary_tf: ngram.binary_tf,
            negative_ratio: train.negative_ratio,
            null_weight: train.null_weight,
            weight_decay: train.weight_decay,
            word_dropout: train.word_dropout,
            score_on_raw_g: model.score_on_raw_g,
            dict_top_k: model.dict_top_k,
            merge_dev_into_train: false,
            augment_dictionary: true,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Set one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "train_corpus" => self.train_corpus = opt_path(v),
            "dev_corpus" => self.dev_corpus = opt_path(v),
            "test_corpus" => self.test_corpus = opt_path(v),
            "medic" => self.medic = opt_path(v),
            "abbreviations" => self.abbreviations = opt_path(v),
            "embeddings" => self.embeddings = opt_path(v),
            "lambda" => self.lambda = parse_num("lambda", v)?,
            "max_span_width" => self.max_span_width = parse_num("max_span_width", v)?,
            "learning_rate" => self.learning_rate = parse_num("learning_rate", v)?,
            "batch_size" => self.batch_size = parse_num("batch_size", v)?,
            "epochs" => self.epochs = parse_num("epochs", v)?,
            "seed" => self.seed = parse_num("seed", v)?,
            "encoder" => self.encoder = v.parse()?,
            "embedding_dim" => self.embedding_dim = parse_num("embedding_dim", v)?,
            "window" => self.window = parse_num("window", v)?,
            "hash_buckets" => self.hash_buckets = parse_num("hash_buckets", v)?,
            "width_dim" => self.width_dim = parse_num("width_dim", v)?,
            "hidden_dim" => self.hidden_dim = parse_num("hidden_dim", v)?,
            "ngram_sizes" => {
                self.ngram_sizes = v
                    .split(',')
                    .map(|s| parse_num("ngram_sizes", s.trim()))
                    .collect::<Result<_>>()?
            }
            "binary_tf" => self.binary_tf = parse_bool("binary_tf", v)?,
            "negative_ratio" => self.negative_ratio = parse_num("negative_ratio", v)?,
            "null_weight" => self.null_weight = parse_num("null_weight", v)?,
            "weight_decay" => self.weight_decay = parse_num("weight_decay", v)?,
            "word_dropout" => self.word_dropout = parse_num("word_dropout", v)?,
            "score_on_raw_g" => self.score_on_raw_g = parse_bool("score_on_raw_g", v)?,
            "dict_top_k" => self.dict_top_k = parse_num("dict_top_k", v)?,
            "merge_dev_into_train" => {
                self.merge_dev_into_train = parse_bool("merge_dev_into_train", v)?
            }
            "augment_dictionary" => self.augment_dictionary = parse_bool("augment_dictionary", v)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown configuration key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of the current values. Blank lines
    /// and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Apply a single `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k, v)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Numeric range checks. Path existence is checked by the commands that
    /// need each path.
    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        self.train_config().validate()?;
        self.ngram_config().validate()?;
        if self.embedding_dim == 0 || self.hash_buckets == 0 {
            return Err(Error::Config(
                "embedding_dim and hash_buckets must be positive".into(),
            ));
        }
        if self.hash_buckets > u32::MAX as usize {
            return Err(Error::Config("hash_buckets must fit in 32 bits".into()));
        }
        Ok(())
    }

    /// Canonical rendering: every key, fixed order, defaults included.
    pub fn to_text(&self) -> String {
        let p = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let sizes: Vec<String> = self.ngram_sizes.iter().map(|n| n.to_string()).collect();
        let rows: Vec<(&str, String)> = vec![
            ("train_corpus", p(&self.train_corpus)),
            ("dev_corpus", p(&self.dev_corpus)),
            ("test_corpus", p(&self.test_corpus)),
            ("medic", p(&self.medic)),
            ("abbreviations", p(&self.abbreviations)),
            ("embeddings", p(&self.embeddings)),
            ("lambda", format!("{:?}", self.lambda)),
            ("max_span_width", self.max_span_width.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("encoder", self.encoder.as_str().to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("window", self.window.to_string()),
            ("hash_buckets", self.hash_buckets.to_string()),
            ("width_dim", self.width_dim.to_string()),
            ("hidden_dim", self.hidden_dim.to_string()),
            ("ngram_sizes", sizes.join(",")),
            ("binary_tf", self.binary_tf.to_string()),
            ("negative_ratio", format!("{:?}", self.negative_ratio)),
            ("null_weight", format!("{:?}", self.null_weight)),
            ("weight_decay", format!("{:?}", self.weight_decay)),
            ("word_dropout", format!("{:?}", self.word_dropout)),
            ("score_on_raw_g", self.score_on_raw_g.to_string()),
            ("dict_top_k", self.dict_top_k.to_string()),
            (
                "merge_dev_into_train",
                self.merge_dev_into_train.to_string(),
            ),
            ("augment_dictionary", self.augment_dictionary.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of the canonical rendering, hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            max_width: self.max_span_width,
            width_buckets: self.max_span_width.max(1),
            width_dim: self.width_dim,
            hidden_dim: self.hidden_dim,
            lambda: self.lambda,
            score_on_raw_g: self.score_on_raw_g,
            dict_top_k: self.dict_top_k,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            negative_ratio: self.negative_ratio,
            null_weight: self.null_weight,
            weight_decay: self.weight_decay,
            word_dropout: self.word_dropout,
        }
    }

    pub fn ngram_config(&self) -> NgramConfig {
        NgramConfig {
            sizes: self.ngram_sizes.clone(),
            binary_tf: self.binary_tf,
            ..NgramConfig::default()
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            dim: self.embedding_dim,
            window: self.window,
            buckets: self.hash_buckets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut c = RunConfig::default();
        c.apply_override("lambda=0.5").unwrap();
        c.apply_override("ngram_sizes=2,3,4").unwrap();
        c.apply_override("medic=/tmp/medic.tsv").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.lambda, c.max_span_width, c.batch_size), (0.9, 10, 32));
        assert_eq!(c.learning_rate, 1e-3);
        assert_eq!(c.negative_ratio, 20.0);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.apply_override("lamda=1").is_err());
        assert!(c.apply_override("lambda").is_err());
        assert!(c.apply_override("lambda=abc").is_err());
        c.apply_override("lambda=-1").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(
            RunConfig::from_text("# comment\n\nseed = 4\n")
                .unwrap()
                .seed
                == 4
        );
    }
}
