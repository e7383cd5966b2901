//! Downstream evaluation of learned representations.
//!
//! [`evaluate_protocol`] scores four feature sets on a stratified train/test
//! split: raw view features, per-view autoencoder latents trained without the
//! supervised stage, per-view latents from the co-trained encoders, and the
//! joint latent. Each is scored by logistic regression (fit on train rows,
//! ACC and macro-F1 on test rows) and by a GMM clustering of the test rows
//! (NMI and Jaccard against test labels).

pub mod gmm;
pub mod logreg;
pub mod metrics;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::cotrain::{run_cotraining, Stage, TrainConfig};
use crate::data::{split, MultiViewDataset};
use crate::error::{Error, Result};
use crate::network::{encode_latent, joint_latent, EncoderParams};
use crate::rng::RngSeed;
use crate::tensor::Matrix;

pub use gmm::{fit_gmm, GmmModel};
pub use logreg::{predict_logreg, train_logreg, LogRegModel};
pub use metrics::{accuracy, jaccard, macro_f1, nmi};

/// Column labels of the classification and clustering tables.
pub const LR_RAW: &str = "LR";
pub const LR_AE: &str = "LR-AE";
pub const LR_AE_COTRAINED: &str = "LR-AE-ACMVL";
pub const LR_JOINT: &str = "LR-ACMVL";
pub const GMM_RAW: &str = "GMM";
pub const GMM_AE: &str = "GMM-AE";
pub const GMM_AE_COTRAINED: &str = "GMM-AE-ACMVL";
pub const GMM_JOINT: &str = "GMM-ACMVL";

pub const JOINT_VIEW: &str = "joint";

pub fn view_name(v: usize) -> String {
    format!("view_{v}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub view: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<MetricRecord>,
}

impl MetricsReport {
    fn push(&mut self, dataset: &str, view: &str, method: &str, metric: &str, value: f64) {
        self.records.push(MetricRecord {
            dataset: dataset.into(),
            view: view.into(),
            method: method.into(),
            metric: metric.into(),
            value,
        });
    }

    pub fn get(&self, view: &str, method: &str, metric: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.view == view && r.method == method && r.metric == metric)
            .map(|r| r.value)
    }

    /// One record per line: `dataset,view,method,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,view,method,metric,value\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:?}",
                r.dataset, r.view, r.method, r.metric, r.value
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table grouped by metric family, for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let groups = [
            (
                "classification",
                [LR_RAW, LR_AE, LR_AE_COTRAINED, LR_JOINT],
                ["ACC", "F1"],
            ),
            (
                "clustering",
                [GMM_RAW, GMM_AE, GMM_AE_COTRAINED, GMM_JOINT],
                ["NMI", "JC"],
            ),
        ];
        let mut views: Vec<&str> = Vec::new();
        for r in &self.records {
            if !views.contains(&r.view.as_str()) {
                views.push(&r.view);
            }
        }
        for (title, methods, metrics) in groups {
            let _ = write!(out, "{title:<16}");
            for m in methods {
                for k in metrics {
                    let _ = write!(out, "{:>17}", format!("{m} {k}"));
                }
            }
            out.push('\n');
            for view in &views {
                let _ = write!(out, "{view:<16}");
                for m in methods {
                    for k in metrics {
                        match self.get(view, m, k) {
                            Some(v) => {
                                let _ = write!(out, "{v:>17.4}");
                            }
                            None => {
                                let _ = write!(out, "{:>17}", "-");
                            }
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Settings of the evaluation protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub dataset_name: String,
    pub split_ratio: f64,
    pub split_seed: RngSeed,
    pub lr_iters: usize,
    pub lr_rate: f64,
    pub gmm_max_iters: usize,
    pub gmm_tol: f64,
    pub gmm_seed: RngSeed,
    /// Training settings reused for the autoencoder-only baseline.
    pub train: TrainConfig,
}

impl ProtocolConfig {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            dataset_name: "dataset".into(),
            split_ratio: 0.5,
            split_seed: train.seed,
            lr_iters: 500,
            lr_rate: 0.5,
            gmm_max_iters: 200,
            gmm_tol: 1e-6,
            gmm_seed: train.seed,
            train,
        }
    }
}

/// Z-scores both matrices with the mean and deviation of `train`;
/// constant columns become 0.
pub fn standardize(train: &Matrix, test: &Matrix) -> Result<(Matrix, Matrix)> {
    if train.cols() != test.cols() {
        return Err(Error::shape(format!(
            "train has {} features, test has {}",
            train.cols(),
            test.cols()
        )));
    }
    let n = train.rows().max(1) as f64;
    let d = train.cols();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for j in 0..d {
        mean[j] = (0..train.rows()).map(|i| train.get(i, j)).sum::<f64>() / n;
        sd[j] = ((0..train.rows())
            .map(|i| (train.get(i, j) - mean[j]).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
    }
    let apply = |m: &Matrix| {
        Matrix::from_fn(m.rows(), d, |i, j| {
            if sd[j] > 1e-12 {
                (m.get(i, j) - mean[j]) / sd[j]
            } else {
                0.0
            }
        })
    };
    Ok((apply(train), apply(test)))
}

/// Classification and clustering scores of one feature set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScores {
    pub acc: f64,
    pub f1: f64,
    pub nmi: f64,
    pub jc: f64,
}

/// Fits LR on `(train_x, train_y)` and clusters `test_x`; both scored on `test_y`.
pub fn score_features(
    train_x: &Matrix,
    train_y: &[usize],
    test_x: &Matrix,
    test_y: &[usize],
    classes: usize,
    cfg: &ProtocolConfig,
) -> Result<FeatureScores> {
    let (tr, te) = standardize(train_x, test_x)?;
    let lr = train_logreg(&tr, train_y, classes, cfg.lr_iters, cfg.lr_rate)?;
    let pred = predict_logreg(&lr, &te)?;
    let present = {
        let mut seen = vec![false; classes];
        for &l in test_y {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count().max(1)
    };
    let k = present.min(te.rows().max(1));
    let gmm = fit_gmm(&te, k, cfg.gmm_seed, cfg.gmm_max_iters, cfg.gmm_tol)?;
    let clusters = gmm.predict(&te)?;
    Ok(FeatureScores {
        acc: accuracy(&pred, test_y)?,
        f1: macro_f1(&pred, test_y)?,
        nmi: nmi(&clusters, test_y)?,
        jc: jaccard(&clusters, test_y)?,
    })
}

fn latents(views: &[Matrix], encoders: &[EncoderParams]) -> Result<Vec<Matrix>> {
    views
        .iter()
        .zip(encoders)
        .map(|(x, e)| encode_latent(x, e))
        .collect()
}

/// Runs the four-column protocol on `dataset` with the co-trained model in `model`.
///
/// The dataset is split with `cfg.split_ratio` and `cfg.split_seed`, which must
/// match the split the model was trained on. The autoencoder-only baseline is
/// trained here on the same training rows with stage 2 disabled.
pub fn evaluate_protocol(
    dataset: &MultiViewDataset,
    model: &Checkpoint,
    cfg: &ProtocolConfig,
) -> Result<MetricsReport> {
    model.validate()?;
    if model.bank.sup_provenance.stage != Stage::Stage2 {
        return Err(Error::state(
            "model has no trained supervised stage; run co-training first",
        ));
    }
    if dataset.view_dims() != model.arch.view_input_dims {
        return Err(Error::shape(format!(
            "dataset view dims {:?} differ from the model's {:?}",
            dataset.view_dims(),
            model.arch.view_input_dims
        )));
    }
    let (mut train, mut test) = split(dataset, cfg.split_ratio, cfg.split_seed)?;
    if let Some(scaler) = &model.scaling {
        train = train.scaled(scaler)?;
        test = test.scaled(scaler)?;
    }
    let classes = dataset.class_count();
    let (ytr, yte) = (train.labels(), test.labels());
    let name = cfg.dataset_name.as_str();

    let baseline_cfg = TrainConfig {
        cotrain: false,
        arch: model.arch.clone(),
        ..cfg.train.clone()
    };
    let baseline = run_cotraining(&train, &baseline_cfg)?;

    let ae_tr = latents(train.views(), &baseline.bank.best_enc)?;
    let ae_te = latents(test.views(), &baseline.bank.best_enc)?;
    let co_tr = latents(train.views(), &model.bank.best_enc)?;
    let co_te = latents(test.views(), &model.bank.best_enc)?;

    let mut report = MetricsReport::default();
    let mut record = |view: &str, lr_method: &str, gmm_method: &str, s: FeatureScores| {
        report.push(name, view, lr_method, "ACC", s.acc);
        report.push(name, view, lr_method, "F1", s.f1);
        report.push(name, view, gmm_method, "NMI", s.nmi);
        report.push(name, view, gmm_method, "JC", s.jc);
    };
    for v in 0..dataset.view_count() {
        let view = view_name(v);
        let raw = score_features(train.view(v), ytr, test.view(v), yte, classes, cfg)?;
        record(&view, LR_RAW, GMM_RAW, raw);
        let ae = score_features(&ae_tr[v], ytr, &ae_te[v], yte, classes, cfg)?;
        record(&view, LR_AE, GMM_AE, ae);
        let co = score_features(&co_tr[v], ytr, &co_te[v], yte, classes, cfg)?;
        record(&view, LR_AE_COTRAINED, GMM_AE_COTRAINED, co);
    }
    let z_tr = joint_latent(train.views(), &model.bank.best_enc, &model.bank.best_sup)?;
    let z_te = joint_latent(test.views(), &model.bank.best_enc, &model.bank.best_sup)?;
    let joint = score_features(&z_tr, ytr, &z_te, yte, classes, cfg)?;
    record(JOINT_VIEW, LR_JOINT, GMM_JOINT, joint);
    Ok(report)
}
