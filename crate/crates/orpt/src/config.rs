//! Experiment configuration and its `key = value` file format.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use orpt_core::nn::{AdamConfig, CellKind, Direction};

use crate::dataset::DatasetId;
use crate::error::{OrptError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetId,
    pub data_dir: PathBuf,
    pub divisor: usize,
    pub cell: CellKind,
    pub direction: Direction,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stops training after this many optimizer steps, if set.
    pub max_iterations: Option<usize>,
    pub seed: u64,
    pub learning_rate: f64,
    /// Global-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    /// Use only the first `n` training / test images.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Worker threads for batch evaluation; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub init_checkpoint: Option<PathBuf>,
    pub save_checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetId::Mnist,
            data_dir: PathBuf::from("data/mnist"),
            divisor: 2,
            cell: CellKind::Lstm,
            direction: Direction::Forward,
            hidden_dim: 128,
            batch_size: 128,
            epochs: 5,
            max_iterations: None,
            seed: 0,
            learning_rate: 1e-3,
            clip_norm: 1.0,
            train_limit: None,
            test_limit: None,
            threads: None,
            init_checkpoint: None,
            save_checkpoint: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| OrptError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// Desk-scale profile: hidden 64, 10000 train / 2000 test images, 2 epochs.
    pub fn quick(mut self) -> Self {
        self.hidden_dim = 64;
        self.train_limit = Some(10_000);
        self.test_limit = Some(2_000);
        self.epochs = 2;
        self
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            clip: (self.clip_norm > 0.0).then_some(self.clip_norm),
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let side = self.dataset.side();
        if self.divisor == 0 || !side.is_multiple_of(self.divisor) {
            return Err(OrptError::Config(format!(
                "divisor {} does not divide {} image side {side}",
                self.divisor,
                self.dataset.name()
            )));
        }
        let positive = [
            ("epochs", self.epochs),
            ("hidden", self.hidden_dim),
            ("batch", self.batch_size),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(OrptError::Config(format!("`{k}` must be at least 1")));
            }
        }
        if self.max_iterations == Some(0) || self.threads == Some(0) {
            return Err(OrptError::Config("`iterations` and `threads` must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(OrptError::Config("`lr` must be positive".into()));
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return Err(OrptError::Config("`clip` must be non-negative".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = value.parse()?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "divisor" | "d" => self.divisor = parse(key, value)?,
            "cell" => {
                self.cell = value
                    .parse()
                    .map_err(|_| OrptError::Config(format!("unknown cell `{value}`")))?
            }
            "direction" => {
                self.direction = value
                    .parse()
                    .map_err(|_| OrptError::Config(format!("unknown direction `{value}`")))?
            }
            "hidden" => self.hidden_dim = parse(key, value)?,
            "batch" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "iterations" => self.max_iterations = optional(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lr" => self.learning_rate = parse(key, value)?,
            "clip" => self.clip_norm = parse(key, value)?,
            "train_limit" => self.train_limit = optional(key, value)?,
            "test_limit" => self.test_limit = optional(key, value)?,
            "threads" => self.threads = optional(key, value)?,
            "init_checkpoint" => self.init_checkpoint = optional(key, value)?,
            "save_checkpoint" => self.save_checkpoint = optional(key, value)?,
            _ => return Err(OrptError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    /// Applies every setting in `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| OrptError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| OrptError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| OrptError::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn to_text(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
        }
        fn opt_path(v: &Option<PathBuf>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
        }
        let mut s = String::new();
        let rows = [
            ("dataset", self.dataset.name().to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("divisor", self.divisor.to_string()),
            ("cell", self.cell.name().to_string()),
            ("direction", self.direction.name().to_string()),
            ("hidden", self.hidden_dim.to_string()),
            ("batch", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("iterations", opt(&self.max_iterations)),
            ("seed", self.seed.to_string()),
            ("lr", self.learning_rate.to_string()),
            ("clip", self.clip_norm.to_string()),
            ("train_limit", opt(&self.train_limit)),
            ("test_limit", opt(&self.test_limit)),
            ("threads", opt(&self.threads)),
            ("init_checkpoint", opt_path(&self.init_checkpoint)),
            ("save_checkpoint", opt_path(&self.save_checkpoint)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
