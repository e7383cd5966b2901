//! TOML run configuration shared by the `train` and `eval` commands.
//!
//! ```toml
//! seed = 0
//! output_dir = "runs/synth"   # relative paths resolve against the config file
//! scale = false               # min-max scale features, fit on the train split
//! split_ratio = 0.5
//!
//! [data]
//! path = "data/synth"         # a dataset directory, or instead:
//! # [data.synth]
//! # views = 2
//! # classes = 4
//! # samples_per_class = 100
//! # latent_dim = 4
//! # noise_std = 0.3
//! # view_dims = [20, 20]
//!
//! [arch]
//! encoder_dims = [16, 8, 4]
//! head_dims = [16, 8]         # the class count is appended from the data
//! joint_dim = 8               # defaults to the latent width
//!
//! [train]
//! epochs = 5
//! r1 = 300
//! r2 = 300
//! lr_ae = 0.5
//! lr_sup = 0.9
//! patience = 200
//! batch_size = "full"
//!
//! [eval]
//! lr_iters = 500
//! ```
//!
//! Every table and key other than `data` and `arch` is optional. Unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cotrain::{BatchSize, TrainConfig};
use crate::data::{load_dataset, synth_multiview, LoadOptions, MultiViewDataset, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::ProtocolConfig;
use crate::network::ArchSpec;
use crate::optim::{DEFAULT_EPS, DEFAULT_RHO};
use crate::rng::RngSeed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: RngSeed,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub scale: bool,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    pub data: DataSource,
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub header: bool,
    #[serde(default)]
    pub strict: bool,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub encoder_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub joint_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub r1: usize,
    pub r2: usize,
    pub lr_ae: f64,
    pub lr_sup: f64,
    pub rho: f64,
    pub eps: f64,
    pub patience: usize,
    pub early_stopping: bool,
    pub batch_size: BatchSize,
    pub cotrain: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 10,
            r1: 1000,
            r2: 1000,
            lr_ae: 0.5,
            lr_sup: 0.9,
            rho: DEFAULT_RHO,
            eps: DEFAULT_EPS,
            patience: 200,
            early_stopping: true,
            batch_size: BatchSize::Full,
            cotrain: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub lr_iters: usize,
    pub lr_rate: f64,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            lr_iters: 500,
            lr_rate: 0.5,
            gmm_max_iters: 200,
            gmm_tol: 1e-6,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("acmvl-out")
}

fn default_split_ratio() -> f64 {
    0.5
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses TOML text; `path` only labels errors.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(1, |s| line_of(text, s.start)),
            msg: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, parses and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                cfg.data.path = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    /// Checks everything that does not depend on the dataset.
    pub fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "data.path and data.synth are mutually exclusive".into(),
                ))
            }
            (None, None) => return Err(Error::Config("data needs either path or synth".into())),
            (None, Some(spec)) => spec.validate().map_err(|e| Error::Config(e.to_string()))?,
            _ => {}
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.arch.head_dims.len() != 2 {
            return Err(Error::Config(format!(
                "arch.head_dims needs 2 widths (the class count is appended), got {:?}",
                self.arch.head_dims
            )));
        }
        if self.eval.lr_iters == 0
            || self.eval.lr_rate.is_nan()
            || self.eval.lr_rate <= 0.0
            || self.eval.gmm_max_iters == 0
        {
            return Err(Error::Config(
                "eval.lr_iters, eval.lr_rate and eval.gmm_max_iters must be positive".into(),
            ));
        }
        // a placeholder input width is enough to check the training section
        self.train_config(&[1], 2)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn arch_for(&self, view_dims: &[usize], classes: usize) -> ArchSpec {
        let mut supervised_dims = self.arch.head_dims.clone();
        supervised_dims.push(classes);
        ArchSpec {
            view_input_dims: view_dims.to_vec(),
            encoder_dims: self.arch.encoder_dims.clone(),
            joint_dim: self
                .arch
                .joint_dim
                .unwrap_or_else(|| self.arch.encoder_dims.last().copied().unwrap_or(0)),
            supervised_dims,
        }
    }

    pub fn train_config(&self, view_dims: &[usize], classes: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            r1: t.r1,
            r2: t.r2,
            lr_ae: t.lr_ae,
            lr_sup: t.lr_sup,
            rho: t.rho,
            eps: t.eps,
            patience: t.patience,
            early_stopping: t.early_stopping,
            batch_size: t.batch_size,
            seed: self.seed,
            arch: self.arch_for(view_dims, classes),
            cotrain: t.cotrain,
        }
    }

    pub fn protocol_config(&self, train: TrainConfig) -> ProtocolConfig {
        ProtocolConfig {
            dataset_name: self.dataset_name(),
            split_ratio: self.split_ratio,
            split_seed: self.seed,
            lr_iters: self.eval.lr_iters,
            lr_rate: self.eval.lr_rate,
            gmm_max_iters: self.eval.gmm_max_iters,
            gmm_tol: self.eval.gmm_tol,
            gmm_seed: self.seed,
            train,
        }
    }

    pub fn dataset_name(&self) -> String {
        if let Some(n) = &self.data.name {
            return n.clone();
        }
        match &self.data.path {
            Some(p) => p
                .file_name()
                .map_or("dataset".into(), |n| n.to_string_lossy().into_owned()),
            None => "synthetic".into(),
        }
    }

    /// Loads the dataset directory or generates the synthetic one.
    pub fn load_data(&self) -> Result<MultiViewDataset> {
        match (&self.data.path, &self.data.synth) {
            (Some(p), None) => load_dataset(
                p,
                LoadOptions {
                    header: self.data.header,
                    strict: self.data.strict,
                },
            ),
            (None, Some(spec)) => synth_multiview(spec, self.seed),
            _ => Err(Error::Config(
                "data needs exactly one of path or synth".into(),
            )),
        }
    }
}
