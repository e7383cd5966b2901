//! Handlers behind the `acmvl` subcommands. Each returns what it wrote so the
//! binary stays a thin argument parser.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::cotrain::{run_cotraining_with, write_trace_csv, StageReport};
use crate::data::{
    load_dataset, save_dataset, split, synth_multiview, write_matrix_csv, LoadOptions,
    MinMaxScaler, SynthSpec,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_protocol, MetricsReport};
use crate::network::{encode_latent, joint_latent};
use crate::rng::RngSeed;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "loss_trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn epoch_checkpoint_file(epoch: usize) -> String {
    format!("checkpoint_epoch_{epoch}.json")
}

/// Best loss of one stage run, as recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub epoch: usize,
    pub stage: u64,
    /// `-1` for the supervised stage.
    pub view: i64,
    pub rounds: usize,
    pub best_round: usize,
    pub best_loss: f64,
    pub stopped_early: bool,
}

impl From<&StageReport> for StageSummary {
    fn from(r: &StageReport) -> Self {
        Self {
            epoch: r.epoch,
            stage: r.stage.number(),
            view: r.view.map_or(-1, |v| v as i64),
            rounds: r.trace.rounds(),
            best_round: r.trace.best_round,
            best_loss: r.trace.best_loss,
            stopped_early: r.stopped_early,
        }
    }
}

/// Everything needed to rerun a training run exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: RngSeed,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub config: RunConfig,
    pub dataset: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub stages: Vec<StageSummary>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains on the train split described by `config_path` and writes
/// checkpoints, the loss trace and the manifest to its output directory.
pub fn cmd_train(config_path: &Path) -> Result<Manifest> {
    let cfg = RunConfig::load(config_path)?;
    let text = fs::read(config_path).map_err(|e| Error::io(config_path, e))?;
    let data = cfg.load_data()?;
    let (mut train, test) = split(&data, cfg.split_ratio, cfg.seed)?;
    let scaling = if cfg.scale {
        let s = MinMaxScaler::fit(&train)?;
        train = train.scaled(&s)?;
        Some(s)
    } else {
        None
    };
    let tc = cfg.train_config(&data.view_dims(), data.class_count());
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    log::info!(
        "training on {} of {} rows, {} views, {} classes; writing to {}",
        train.len(),
        data.len(),
        data.view_count(),
        data.class_count(),
        out.display()
    );

    let model = run_cotraining_with(&train, &tc, |epoch, bank| {
        let ckpt = Checkpoint::new(
            tc.arch.clone(),
            cfg.seed,
            epoch,
            scaling.clone(),
            bank.clone(),
        );
        ckpt.save(&out.join(epoch_checkpoint_file(epoch)))?;
        log::info!("epoch {epoch} done");
        Ok(())
    })?;
    let ckpt = Checkpoint::new(
        tc.arch.clone(),
        cfg.seed,
        tc.epochs,
        scaling,
        model.bank.clone(),
    );
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    write_trace_csv(&model.reports, &out.join(TRACE_FILE))?;

    let manifest = Manifest {
        seed: cfg.seed,
        config_sha256: sha256_hex(&text),
        dataset: cfg.dataset_name(),
        train_rows: train.len(),
        test_rows: test.len(),
        stages: model.reports.iter().map(StageSummary::from).collect(),
        config: cfg,
    };
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Files written by [`cmd_export_latent`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportedLatents {
    pub views: Vec<PathBuf>,
    pub joint: PathBuf,
    pub rows: usize,
}

/// Writes `h_{v}.csv` per view and `z.csv` for every row of the dataset in
/// `data_dir`, using the checkpoint's scaling if it has one.
pub fn cmd_export_latent(
    checkpoint: &Path,
    data_dir: &Path,
    out_dir: &Path,
    opts: LoadOptions,
) -> Result<ExportedLatents> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let data = load_dataset(data_dir, opts)?;
    let expected = &ckpt.arch.view_input_dims;
    if data.view_count() != expected.len() {
        return Err(Error::shape(format!(
            "dataset has {} views, checkpoint expects {}",
            data.view_count(),
            expected.len()
        )));
    }
    for (v, (&got, &want)) in data.view_dims().iter().zip(expected).enumerate() {
        if got != want {
            return Err(Error::shape(format!(
                "view {v} has {got} columns, checkpoint expects {want}"
            )));
        }
    }
    let data = match &ckpt.scaling {
        Some(s) => data.scaled(s)?,
        None => data,
    };
    create_dir(out_dir)?;
    let mut views = Vec::new();
    for v in 0..data.view_count() {
        let h = encode_latent(data.view(v), &ckpt.bank.best_enc[v])?;
        let path = out_dir.join(format!("h_{v}.csv"));
        write_matrix_csv(&path, &h)?;
        views.push(path);
    }
    let z = joint_latent(data.views(), &ckpt.bank.best_enc, &ckpt.bank.best_sup)?;
    let joint = out_dir.join("z.csv");
    write_matrix_csv(&joint, &z)?;
    Ok(ExportedLatents {
        views,
        joint,
        rows: data.len(),
    })
}

/// Runs the evaluation protocol for the run described by `config_path`.
///
/// `checkpoint` defaults to the run's final checkpoint, `data_dir` to the
/// config's data source, `out_dir` to the run's output directory.
pub fn cmd_eval(
    config_path: &Path,
    checkpoint: Option<&Path>,
    data_dir: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<MetricsReport> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(d) = data_dir {
        cfg.data.path = Some(d.to_path_buf());
        cfg.data.synth = None;
    }
    let ckpt_path =
        checkpoint.map_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE), Path::to_path_buf);
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let data = cfg.load_data()?;
    let tc = cfg.train_config(&data.view_dims(), data.class_count());
    let report = evaluate_protocol(&data, &ckpt, &cfg.protocol_config(tc))?;
    let out = out_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf);
    create_dir(&out)?;
    report.write_csv(&out.join(METRICS_FILE))?;
    Ok(report)
}

/// Generates a synthetic dataset from a TOML [`SynthSpec`] file.
pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: RngSeed) -> Result<()> {
    if !spec_path.exists() {
        return Err(Error::MissingFile(spec_path.to_path_buf()));
    }
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec: SynthSpec = toml::from_str(&text).map_err(|e| Error::Parse {
        path: spec_path.to_path_buf(),
        line: e
            .span()
            .map_or(1, |s| text[..s.start].matches('\n').count() + 1),
        msg: e.message().trim().to_string(),
    })?;
    let ds = synth_multiview(&spec, seed)?;
    save_dataset(&ds, out_dir)
}
