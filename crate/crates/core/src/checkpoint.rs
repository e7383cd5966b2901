//! JSON checkpoints of a [`SnapshotBank`].
//!
//! Layout (all matrices as `{"rows", "cols", "values"}` with row-major `values`):
//!
//! ```json
//! {
//!   "format": "acmvl-checkpoint",
//!   "version": 1,
//!   "seed": 7,
//!   "epoch": 5,
//!   "arch": { "view_input_dims": [..], "encoder_dims": [..], "supervised_dims": [..], "joint_dim": 4 },
//!   "scaling": null,
//!   "bank": { "best_enc": [..], "best_dec": [..], "best_sup": {..}, .. }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed back exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cotrain::SnapshotBank;
use crate::data::MinMaxScaler;
use crate::error::{Error, Result};
use crate::network::ArchSpec;
use crate::rng::RngSeed;

pub const FORMAT: &str = "acmvl-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: RngSeed,
    pub epoch: usize,
    pub arch: ArchSpec,
    pub scaling: Option<MinMaxScaler>,
    pub bank: SnapshotBank,
}

impl Checkpoint {
    pub fn new(
        arch: ArchSpec,
        seed: RngSeed,
        epoch: usize,
        scaling: Option<MinMaxScaler>,
        bank: SnapshotBank,
    ) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed,
            epoch,
            arch,
            scaling,
            bank,
        }
    }

    /// Checks that the bank's matrices match the stored architecture.
    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::arg(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        self.arch.validate()?;
        let bank = &self.bank;
        if bank.best_enc.len() != self.arch.views() || bank.best_dec.len() != self.arch.views() {
            return Err(Error::shape(
                "checkpoint bank view count differs from its arch",
            ));
        }
        for v in 0..self.arch.views() {
            let enc = bank.best_enc[v].weights.iter().map(|m| m.shape());
            let dec = bank.best_dec[v].weights.iter().map(|m| m.shape());
            if !enc.eq(self.arch.encoder_shapes(v)) || !dec.eq(self.arch.decoder_shapes(v)) {
                return Err(Error::shape(format!(
                    "checkpoint view {v} weights do not match its arch"
                )));
            }
        }
        let sup = bank.best_sup.head.iter().map(|m| m.shape());
        if bank.best_sup.w_share.shape() != self.arch.share_shape()
            || !sup.eq(self.arch.head_shapes())
        {
            return Err(Error::shape(
                "checkpoint supervised weights do not match its arch",
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}
