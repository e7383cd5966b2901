//! Runs every example through its `run_example` entry point.

#[path = "../examples/adadelta_trace.rs"]
mod adadelta_trace;
#[path = "../examples/cli_pipeline.rs"]
mod cli_pipeline;
#[path = "../examples/clustering_metrics.rs"]
mod clustering_metrics;
#[path = "../examples/dataset_io.rs"]
mod dataset_io;
#[path = "../examples/evaluate_protocol.rs"]
mod evaluate_protocol;
#[path = "../examples/gradient_check.rs"]
mod gradient_check;
#[path = "../examples/train_synthetic.rs"]
mod train_synthetic;

#[test]
fn adadelta_descends() {
    let trace = adadelta_trace::run_example(10).unwrap();
    assert_eq!(trace.len(), 10);
    assert!(trace.windows(2).all(|w| w[1] < w[0]));
    assert!(trace[9] > 0.0);
}

#[test]
fn gradients_agree() {
    let (ae, sup) = gradient_check::run_example().unwrap();
    assert!(ae < 1e-6, "{ae}");
    assert!(sup < 1e-6, "{sup}");
}

#[test]
fn clustering_recovers_blobs() {
    let (nmi, jc, iters) = clustering_metrics::run_example().unwrap();
    assert!(nmi > 0.95 && jc > 0.9, "{nmi} {jc}");
    assert!(iters >= 1);
}

#[test]
fn dataset_split_is_stratified() {
    let (train, test) = dataset_io::run_example().unwrap();
    assert_eq!(train.iter().sum::<usize>(), 11);
    assert!(train
        .iter()
        .zip(&test)
        .all(|(a, b)| a + b == 7 && *a >= 1 && *b >= 1));
}

#[test]
fn protocol_report_is_complete() {
    let r = evaluate_protocol::run_example().unwrap();
    // 3 views x 3 feature sets x 4 metrics, plus 4 for the joint latent
    assert_eq!(r.records.len(), 40);
    assert!(r.records.iter().all(|m| (0.0..=1.0).contains(&m.value)));
    assert!(r.get("joint", "LR-ACMVL", "ACC").unwrap() >= 0.9);
}

#[test]
fn cli_pipeline_runs() {
    let r = cli_pipeline::run_example().unwrap();
    assert_eq!(r.records.len(), 28);
    assert!(r.records.iter().all(|m| m.dataset == "data"));
}

#[test]
fn synthetic_training_learns() {
    let out = train_synthetic::run_example().unwrap();
    assert!(out.joint_acc >= 0.9, "{out:?}");
    for v in 0..2 {
        assert!(out.last_recon[v] < out.first_recon[v]);
    }
}
