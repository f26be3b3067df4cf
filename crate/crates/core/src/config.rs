//! Training configuration and its `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    /// Pearson for rating dev sets, accuracy for ranking dev sets.
    #[default]
    Auto,
    Pearson,
    Accuracy,
}

impl std::fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMetric::Auto => "auto",
            SelectionMetric::Pearson => "pearson",
            SelectionMetric::Accuracy => "accuracy",
        })
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SelectionMetric::Auto),
            "pearson" => Ok(SelectionMetric::Pearson),
            "accuracy" => Ok(SelectionMetric::Accuracy),
            other => Err(Error::Config(format!("unknown selection metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Embedding and GRU cell width.
    pub width: usize,
    pub dropout_keep: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dense_layers: usize,
    pub dense_activation: Activation,
    pub max_epochs: usize,
    /// Synthetic instances are used for epochs `1..=synthetic_epochs` only.
    pub synthetic_epochs: usize,
    pub selection_metric: SelectionMetric,
    pub seed: u64,
    /// Clamp reported predictions to the rating scale.
    pub clamp: bool,
    pub min_count: usize,
    /// Delexicalise inputs with the checkpoint's rules.
    pub delex: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            width: 50,
            dropout_keep: 0.8,
            batch_size: 50,
            learning_rate: 0.0001,
            dense_layers: 1,
            dense_activation: Activation::Tanh,
            max_epochs: 100,
            synthetic_epochs: 50,
            selection_metric: SelectionMetric::Auto,
            seed: 0,
            clamp: false,
            min_count: 1,
            delex: false,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "width",
    "dropout_keep",
    "batch_size",
    "learning_rate",
    "dense_layers",
    "dense_activation",
    "max_epochs",
    "synthetic_epochs",
    "selection_metric",
    "seed",
    "clamp",
    "min_count",
    "delex",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl TrainConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "width" => self.width = parse_value(key, v)?,
            "dropout_keep" => self.dropout_keep = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "learning_rate" => self.learning_rate = parse_value(key, v)?,
            "dense_layers" => self.dense_layers = parse_value(key, v)?,
            "dense_activation" => self.dense_activation = v.parse()?,
            "max_epochs" => self.max_epochs = parse_value(key, v)?,
            "synthetic_epochs" => self.synthetic_epochs = parse_value(key, v)?,
            "selection_metric" => self.selection_metric = v.parse()?,
            "seed" => self.seed = parse_value(key, v)?,
            "clamp" => self.clamp = parse_value(key, v)?,
            "min_count" => self.min_count = parse_value(key, v)?,
            "delex" => self.delex = parse_value(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("batch_size", self.batch_size),
            ("dense_layers", self.dense_layers),
            ("max_epochs", self.max_epochs),
            ("min_count", self.min_count),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::Config("dropout_keep must be in (0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.synthetic_epochs > self.max_epochs {
            return Err(Error::Config("synthetic_epochs cannot exceed max_epochs".into()));
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, n + 1, "expected key = value"))?;
            self.set(k, v).map_err(|e| Error::parse(origin, n + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            writeln!(s, "{k} = {v}").expect("string write");
        };
        kv("width", &self.width);
        kv("dropout_keep", &self.dropout_keep);
        kv("batch_size", &self.batch_size);
        kv("learning_rate", &self.learning_rate);
        kv("dense_layers", &self.dense_layers);
        kv("dense_activation", &self.dense_activation);
        kv("max_epochs", &self.max_epochs);
        kv("synthetic_epochs", &self.synthetic_epochs);
        kv("selection_metric", &self.selection_metric);
        kv("seed", &self.seed);
        kv("clamp", &self.clamp);
        kv("min_count", &self.min_count);
        kv("delex", &self.delex);
        s
    }
}
