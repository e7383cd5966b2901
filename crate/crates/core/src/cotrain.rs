//! The alternating two-stage training schedule.
//!
//! Every epoch runs stage 1 (each view's autoencoder on reconstruction loss)
//! and then stage 2 (the fusion network on cross-entropy, updating the shared
//! head and every encoder). Each stage keeps the weights of its best round in
//! the [`SnapshotBank`], and the next stage starts from the bank:
//!
//! | stage   | encoder starts from            | other params start from          |
//! |---------|--------------------------------|----------------------------------|
//! | 1, e=1  | Xavier init                    | decoder: Xavier init             |
//! | 1, e>1  | best of stage 2, epoch e-1     | decoder: best of stage 1, e-1    |
//! | 2, e    | best of stage 1, epoch e       | head: best of stage 2, e-1 (or init) |
//!
//! Optimizer accumulators are fresh at the start of every stage.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{batches, MultiViewDataset};
use crate::error::{Error, Result};
use crate::loss::one_hot;
use crate::network::{
    ae_backward, ae_forward, init_model, sup_backward, sup_forward, ArchSpec, DecoderParams,
    EncoderParams, ModelParams, SupervisedParams,
};
use crate::optim::{AdaDeltaConfig, AdaDeltaGroup, DEFAULT_EPS, DEFAULT_RHO};
use crate::rng::RngSeed;
use crate::tensor::Matrix;

/// Rows per optimizer step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BatchSize {
    #[default]
    Full,
    Rows(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Rows(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Rows(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "full" => Ok(BatchSize::Full),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "batch_size must be \"full\" or a positive integer, got \"{w}\""
            ))),
            Raw::Rows(0) => Err(serde::de::Error::custom("batch_size must be positive")),
            Raw::Rows(n) => Ok(BatchSize::Rows(n as usize)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Rounds of stage 1, per view and epoch.
    pub r1: usize,
    /// Rounds of stage 2 per epoch.
    pub r2: usize,
    pub lr_ae: f64,
    pub lr_sup: f64,
    pub rho: f64,
    pub eps: f64,
    /// Rounds without a strict improvement before a stage stops.
    pub patience: usize,
    pub early_stopping: bool,
    pub batch_size: BatchSize,
    pub seed: RngSeed,
    pub arch: ArchSpec,
    /// Run stage 2. With `false`, each autoencoder trains alone.
    pub cotrain: bool,
}

impl TrainConfig {
    /// Defaults: `r1 = r2 = 1000`, patience 200, learning rates 0.5 (autoencoders)
    /// and 0.9 (fusion network), full batch, 10 epochs.
    pub fn new(arch: ArchSpec) -> Self {
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
            seed: RngSeed(0),
            arch,
            cotrain: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be at least 1"));
        }
        if self.r1 == 0 || self.r2 == 0 {
            return Err(Error::arg(format!(
                "r1 and r2 must be at least 1, got r1={} r2={}",
                self.r1, self.r2
            )));
        }
        if self.patience == 0 {
            return Err(Error::arg("patience must be at least 1"));
        }
        if self.batch_size == BatchSize::Rows(0) {
            return Err(Error::arg("batch_size must be positive"));
        }
        self.ae_optimizer()?;
        self.sup_optimizer()?;
        self.arch.validate()
    }

    fn ae_optimizer(&self) -> Result<AdaDeltaConfig> {
        AdaDeltaConfig::new(self.rho, self.eps, self.lr_ae)
    }

    fn sup_optimizer(&self) -> Result<AdaDeltaConfig> {
        AdaDeltaConfig::new(self.rho, self.eps, self.lr_sup)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Init,
    Stage1,
    Stage2,
}

impl Stage {
    pub fn number(self) -> u64 {
        match self {
            Stage::Init => 0,
            Stage::Stage1 => 1,
            Stage::Stage2 => 2,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Init => f.write_str("init"),
            Stage::Stage1 => f.write_str("stage 1"),
            Stage::Stage2 => f.write_str("stage 2"),
        }
    }
}

/// Where a banked bundle was captured. `Init` bundles carry epoch 0, round 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub epoch: usize,
    pub stage: Stage,
    pub round: usize,
}

impl Provenance {
    pub const INIT: Provenance = Provenance {
        epoch: 0,
        stage: Stage::Init,
        round: 0,
    };
}

/// Best-so-far parameters handed between stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotBank {
    pub best_enc: Vec<EncoderParams>,
    pub best_dec: Vec<DecoderParams>,
    pub best_sup: SupervisedParams,
    pub enc_provenance: Vec<Provenance>,
    pub dec_provenance: Vec<Provenance>,
    pub sup_provenance: Provenance,
}

impl SnapshotBank {
    pub fn from_init(params: ModelParams) -> Result<Self> {
        if params.encoders.len() != params.decoders.len() || params.encoders.is_empty() {
            return Err(Error::state(format!(
                "bank needs one encoder and decoder per view, got {} and {}",
                params.encoders.len(),
                params.decoders.len()
            )));
        }
        let views = params.encoders.len();
        Ok(Self {
            best_enc: params.encoders,
            best_dec: params.decoders,
            best_sup: params.sup,
            enc_provenance: vec![Provenance::INIT; views],
            dec_provenance: vec![Provenance::INIT; views],
            sup_provenance: Provenance::INIT,
        })
    }

    /// Xavier-initialized bank for `arch`.
    pub fn initialize(arch: &ArchSpec, seed: RngSeed) -> Result<Self> {
        Self::from_init(init_model(arch, seed)?)
    }

    pub fn views(&self) -> usize {
        self.best_enc.len()
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            encoders: self.best_enc.clone(),
            decoders: self.best_dec.clone(),
            sup: self.best_sup.clone(),
        }
    }

    pub fn fingerprints(&self) -> ParamFingerprints {
        ParamFingerprints {
            enc: self
                .best_enc
                .iter()
                .map(EncoderParams::fingerprint)
                .collect(),
            dec: self
                .best_dec
                .iter()
                .map(DecoderParams::fingerprint)
                .collect(),
            sup: Some(self.best_sup.fingerprint()),
        }
    }
}

/// Per-round losses of one stage run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub values: Vec<f64>,
    /// 1-based round of the first minimum; 0 while empty.
    pub best_round: usize,
    pub best_loss: f64,
}

impl LossTrace {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            best_round: 0,
            best_loss: f64::INFINITY,
        }
    }

    /// Appends a round's loss; returns whether it strictly improved the best.
    pub fn push(&mut self, loss: f64) -> bool {
        self.values.push(loss);
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_round = self.values.len();
            true
        } else {
            false
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut t = Self::new();
        for &v in values {
            t.push(v);
        }
        t
    }

    pub fn rounds(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EarlyStop {
    Continue,
    Stop,
}

/// Stop once at least `patience` rounds have run and the best loss is
/// `patience` or more rounds old.
pub fn early_stop_check(trace: &LossTrace, patience: usize) -> EarlyStop {
    let rounds = trace.rounds();
    if rounds >= patience && rounds - trace.best_round >= patience {
        EarlyStop::Stop
    } else {
        EarlyStop::Continue
    }
}

/// Fingerprints of the bundles a stage touched.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamFingerprints {
    pub enc: Vec<String>,
    pub dec: Vec<String>,
    pub sup: Option<String>,
}

/// What one stage run started from, ended with, and the losses in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub epoch: usize,
    pub stage: Stage,
    /// View trained in stage 1; `None` for stage 2.
    pub view: Option<usize>,
    pub start: ParamFingerprints,
    pub end: ParamFingerprints,
    pub trace: LossTrace,
    pub stopped_early: bool,
}

fn step_batches(
    n: usize,
    batch: BatchSize,
    seed: RngSeed,
    path: [u64; 4],
) -> Option<Vec<Vec<usize>>> {
    match batch {
        BatchSize::Rows(b) if b < n => Some(batches(n, b, seed.derive(&path))),
        _ => None,
    }
}

/// Trains view `view`'s autoencoder for up to `cfg.r1` rounds from the banked
/// weights and writes the best round back to the bank.
pub fn run_stage1(
    view: usize,
    train_x: &Matrix,
    bank: &mut SnapshotBank,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<StageReport> {
    if view >= bank.views() {
        return Err(Error::state(format!(
            "bank holds {} views, asked for view {view}",
            bank.views()
        )));
    }
    if epoch == 0 {
        return Err(Error::state("epochs are numbered from 1"));
    }
    let (enc_prov, dec_prov) = (bank.enc_provenance[view], bank.dec_provenance[view]);
    let expected_enc_stage = match (epoch, cfg.cotrain) {
        (1, _) => Stage::Init,
        (_, true) => Stage::Stage2,
        (_, false) => Stage::Stage1,
    };
    let expected_dec_stage = if epoch == 1 {
        Stage::Init
    } else {
        Stage::Stage1
    };
    if enc_prov.epoch != epoch - 1
        || enc_prov.stage != expected_enc_stage
        || dec_prov.epoch != epoch - 1
        || dec_prov.stage != expected_dec_stage
    {
        return Err(Error::state(format!(
            "stage 1 of epoch {epoch}, view {view}: bank encoder is from {} of epoch {} and \
             decoder from {} of epoch {}",
            enc_prov.stage, enc_prov.epoch, dec_prov.stage, dec_prov.epoch
        )));
    }

    let mut enc = bank.best_enc[view].clone();
    let mut dec = bank.best_dec[view].clone();
    let start = ParamFingerprints {
        enc: vec![enc.fingerprint()],
        dec: vec![dec.fingerprint()],
        sup: None,
    };
    let opt_cfg = cfg.ae_optimizer()?;
    let mut enc_opt = AdaDeltaGroup::for_params(&enc.weights, opt_cfg);
    let mut dec_opt = AdaDeltaGroup::for_params(&dec.weights, opt_cfg);

    let mut step = |x: &Matrix, enc: &mut EncoderParams, dec: &mut DecoderParams| -> Result<f64> {
        let cache = ae_forward(x, enc, dec)?;
        let g = ae_backward(&cache, x, enc, dec)?;
        enc_opt.step(&mut enc.weights, &g.enc)?;
        dec_opt.step(&mut dec.weights, &g.dec)?;
        Ok(g.loss)
    };
    let eval = |x: &Matrix, enc: &EncoderParams, dec: &DecoderParams| -> Result<f64> {
        crate::network::ae_loss(x, enc, dec)
    };

    let mut trace = LossTrace::new();
    let mut best: Option<(EncoderParams, DecoderParams, usize)> = None;
    let mut stopped_early = false;
    let n = train_x.rows();
    for round in 1..=cfg.r1 {
        let loss = match step_batches(
            n,
            cfg.batch_size,
            cfg.seed,
            [epoch as u64, 1, view as u64, round as u64],
        ) {
            None => {
                step(train_x, &mut enc, &mut dec)?;
                eval(train_x, &enc, &dec)?
            }
            Some(bs) => {
                let mut total = 0.0;
                for idx in &bs {
                    total += step(&train_x.select_rows(idx), &mut enc, &mut dec)?;
                }
                total / bs.len() as f64
            }
        };
        if !loss.is_finite() {
            return Err(Error::state(format!(
                "reconstruction loss diverged at round {round} of view {view}"
            )));
        }
        if trace.push(loss) {
            best = Some((enc.clone(), dec.clone(), round));
        }
        if cfg.early_stopping && early_stop_check(&trace, cfg.patience) == EarlyStop::Stop {
            stopped_early = round < cfg.r1;
            break;
        }
    }

    let (best_enc, best_dec, round) = best.expect("at least one round runs");
    let prov = Provenance {
        epoch,
        stage: Stage::Stage1,
        round,
    };
    let end = ParamFingerprints {
        enc: vec![best_enc.fingerprint()],
        dec: vec![best_dec.fingerprint()],
        sup: None,
    };
    bank.best_enc[view] = best_enc;
    bank.best_dec[view] = best_dec;
    bank.enc_provenance[view] = prov;
    bank.dec_provenance[view] = prov;
    Ok(StageReport {
        epoch,
        stage: Stage::Stage1,
        view: Some(view),
        start,
        end,
        trace,
        stopped_early,
    })
}

/// Trains the fusion network (head, shared transform and all encoders) for up
/// to `cfg.r2` rounds and writes the best round's encoders and head to the bank.
pub fn run_stage2(
    train_views: &[Matrix],
    labels: &[usize],
    bank: &mut SnapshotBank,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<StageReport> {
    if epoch == 0 {
        return Err(Error::state("epochs are numbered from 1"));
    }
    if train_views.len() != bank.views() {
        return Err(Error::arg(format!(
            "{} views given, bank holds {}",
            train_views.len(),
            bank.views()
        )));
    }
    for (v, p) in bank.enc_provenance.iter().enumerate() {
        if p.epoch != epoch || p.stage != Stage::Stage1 {
            return Err(Error::state(format!(
                "stage 2 of epoch {epoch} needs view {v}'s encoder from stage 1 of the same \
                 epoch, bank has {} of epoch {}",
                p.stage, p.epoch
            )));
        }
    }
    let sp = bank.sup_provenance;
    let expected = if epoch == 1 {
        Stage::Init
    } else {
        Stage::Stage2
    };
    if sp.epoch != epoch - 1 || sp.stage != expected {
        return Err(Error::state(format!(
            "stage 2 of epoch {epoch}: bank head is from {} of epoch {}",
            sp.stage, sp.epoch
        )));
    }

    let classes = bank.best_sup.head[2].cols();
    let y = one_hot(labels, classes)?;
    let mut encoders = bank.best_enc.clone();
    let mut sup = bank.best_sup.clone();
    let start = ParamFingerprints {
        enc: encoders.iter().map(EncoderParams::fingerprint).collect(),
        dec: Vec::new(),
        sup: Some(sup.fingerprint()),
    };
    let opt_cfg = cfg.sup_optimizer()?;
    let mut sup_opt = AdaDeltaGroup::for_params(sup.matrices(), opt_cfg);
    let mut enc_opts: Vec<AdaDeltaGroup> = encoders
        .iter()
        .map(|e| AdaDeltaGroup::for_params(&e.weights, opt_cfg))
        .collect();

    let mut step = |views: &[Matrix],
                    y: &Matrix,
                    encoders: &mut [EncoderParams],
                    sup: &mut SupervisedParams|
     -> Result<f64> {
        let cache = sup_forward(views, encoders, sup)?;
        let g = sup_backward(&cache, views, y, encoders, sup)?;
        sup_opt.step(sup.matrices_mut(), g.sup_matrices())?;
        for ((opt, enc), grads) in enc_opts.iter_mut().zip(encoders.iter_mut()).zip(&g.enc) {
            opt.step(&mut enc.weights, grads)?;
        }
        Ok(g.loss)
    };

    let mut trace = LossTrace::new();
    let mut best: Option<(Vec<EncoderParams>, SupervisedParams, usize)> = None;
    let mut stopped_early = false;
    let n = labels.len();
    for round in 1..=cfg.r2 {
        let loss = match step_batches(
            n,
            cfg.batch_size,
            cfg.seed,
            [epoch as u64, 2, 0, round as u64],
        ) {
            None => {
                step(train_views, &y, &mut encoders, &mut sup)?;
                crate::network::sup_loss(train_views, &y, &encoders, &sup)?
            }
            Some(bs) => {
                let mut total = 0.0;
                for idx in &bs {
                    let views: Vec<Matrix> =
                        train_views.iter().map(|m| m.select_rows(idx)).collect();
                    total += step(&views, &y.select_rows(idx), &mut encoders, &mut sup)?;
                }
                total / bs.len() as f64
            }
        };
        if !loss.is_finite() {
            return Err(Error::state(format!(
                "supervised loss diverged at round {round}"
            )));
        }
        if trace.push(loss) {
            best = Some((encoders.clone(), sup.clone(), round));
        }
        if cfg.early_stopping && early_stop_check(&trace, cfg.patience) == EarlyStop::Stop {
            stopped_early = round < cfg.r2;
            break;
        }
    }

    let (best_enc, best_sup, round) = best.expect("at least one round runs");
    let prov = Provenance {
        epoch,
        stage: Stage::Stage2,
        round,
    };
    let end = ParamFingerprints {
        enc: best_enc.iter().map(EncoderParams::fingerprint).collect(),
        dec: Vec::new(),
        sup: Some(best_sup.fingerprint()),
    };
    bank.best_enc = best_enc;
    bank.best_sup = best_sup;
    bank.enc_provenance = vec![prov; bank.views()];
    bank.sup_provenance = prov;
    Ok(StageReport {
        epoch,
        stage: Stage::Stage2,
        view: None,
        start,
        end,
        trace,
        stopped_early,
    })
}

/// Final bank plus every stage report, in execution order.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub arch: ArchSpec,
    pub bank: SnapshotBank,
    pub reports: Vec<StageReport>,
}

impl TrainedModel {
    /// Stage-1 reports of `view`, one per epoch.
    pub fn stage1_reports(&self, view: usize) -> impl Iterator<Item = &StageReport> {
        self.reports
            .iter()
            .filter(move |r| r.stage == Stage::Stage1 && r.view == Some(view))
    }

    pub fn stage2_reports(&self) -> impl Iterator<Item = &StageReport> {
        self.reports.iter().filter(|r| r.stage == Stage::Stage2)
    }
}

fn check_dataset(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let present = ds.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::arg(format!(
            "training needs at least 2 classes, found {present}"
        )));
    }
    if ds.view_dims() != cfg.arch.view_input_dims {
        return Err(Error::arg(format!(
            "dataset view dims {:?} do not match the architecture's {:?}",
            ds.view_dims(),
            cfg.arch.view_input_dims
        )));
    }
    if ds.class_count() != cfg.arch.classes() {
        return Err(Error::arg(format!(
            "dataset has {} classes, the architecture outputs {}",
            ds.class_count(),
            cfg.arch.classes()
        )));
    }
    Ok(())
}

/// Runs the full schedule. `on_epoch` sees the bank after each completed epoch.
pub fn run_cotraining_with(
    dataset: &MultiViewDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &SnapshotBank) -> Result<()>,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_dataset(dataset, cfg)?;
    let mut bank = SnapshotBank::initialize(&cfg.arch, cfg.seed)?;
    let mut reports = Vec::new();
    let context = |epoch: usize, stage: String| {
        move |e: Error| Error::Training {
            epoch,
            stage,
            source: Box::new(e),
        }
    };
    for epoch in 1..=cfg.epochs {
        for v in 0..dataset.view_count() {
            let r = run_stage1(v, dataset.view(v), &mut bank, cfg, epoch)
                .map_err(context(epoch, format!("stage 1 view {v}")))?;
            log::debug!(
                "epoch {epoch} stage 1 view {v}: best {:.6e} at round {}/{}",
                r.trace.best_loss,
                r.trace.best_round,
                r.trace.rounds()
            );
            reports.push(r);
        }
        if cfg.cotrain {
            let r = run_stage2(dataset.views(), dataset.labels(), &mut bank, cfg, epoch)
                .map_err(context(epoch, "stage 2".into()))?;
            log::debug!(
                "epoch {epoch} stage 2: best {:.6e} at round {}/{}",
                r.trace.best_loss,
                r.trace.best_round,
                r.trace.rounds()
            );
            reports.push(r);
        }
        on_epoch(epoch, &bank)?;
    }
    Ok(TrainedModel {
        arch: cfg.arch.clone(),
        bank,
        reports,
    })
}

pub fn run_cotraining(dataset: &MultiViewDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    run_cotraining_with(dataset, cfg, |_, _| Ok(()))
}

/// Loss traces as CSV with header `epoch,stage,view,round,loss`; stage-2 rows
/// carry `view = -1`.
pub fn trace_csv(reports: &[StageReport]) -> String {
    let mut out = String::from("epoch,stage,view,round,loss\n");
    for r in reports {
        let view = r.view.map_or(-1, |v| v as i64);
        for (i, loss) in r.trace.values.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{:?}\n",
                r.epoch,
                r.stage.number(),
                view,
                i + 1,
                loss
            ));
        }
    }
    out
}

pub fn write_trace_csv(reports: &[StageReport], path: &Path) -> Result<()> {
    fs::write(path, trace_csv(reports)).map_err(|e| Error::io(path, e))
}
