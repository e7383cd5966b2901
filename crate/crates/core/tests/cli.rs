use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use acmvl::checkpoint::Checkpoint;
use acmvl::data::{load_dataset, read_matrix_csv, LoadOptions};
use acmvl::network::encode_latent;
use tempfile::tempdir;

fn acmvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acmvl"))
        .args(args)
        .env("ACMVL_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SPEC: &str = "views = 2\nclasses = 3\nsamples_per_class = 12\nlatent_dim = 2\nnoise_std = 0.1\nview_dims = [6, 5]\n";

fn config(extra_train: &str) -> String {
    format!(
        r#"seed = 4
output_dir = "out"

[data]
path = "data"

[arch]
encoder_dims = [5, 4, 2]
head_dims = [6, 4]
joint_dim = 3

[train]
epochs = 2
r1 = 40
r2 = 40
{extra_train}
"#
    )
}

fn setup(root: &Path, extra_train: &str) {
    fs::write(root.join("spec.toml"), SPEC).unwrap();
    let o = acmvl(&[
        "synth",
        root.join("spec.toml").to_str().unwrap(),
        "--out",
        root.join("data").to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(root.join("run.toml"), config(extra_train)).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_writes_artifacts_and_repeats_exactly() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    let o = acmvl(&["train", p(&root.join("run.toml"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "checkpoint.json",
        "checkpoint_epoch_1.json",
        "checkpoint_epoch_2.json",
        "manifest.json",
    ] {
        assert!(root.join("out").join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(root.join("out/loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("epoch,stage,view,round,loss"));
    let mut stages: Vec<(String, String, String)> = trace
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].into())
        })
        .collect();
    stages.dedup();
    // epochs x (V + 1) stage traces
    assert_eq!(stages.len(), 2 * 3);
    assert!(stages.iter().filter(|s| s.1 == "2").all(|s| s.2 == "-1"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["stages"].as_array().unwrap().len(), 6);

    fs::rename(root.join("out"), root.join("first")).unwrap();
    let o = acmvl(&["train", p(&root.join("run.toml"))]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(root.join("first/loss_trace.csv")).unwrap(),
        fs::read(root.join("out/loss_trace.csv")).unwrap()
    );
    assert_eq!(
        fs::read(root.join("first/checkpoint.json")).unwrap(),
        fs::read(root.join("out/checkpoint.json")).unwrap()
    );
}

#[test]
fn zero_rounds_fail_before_training() {
    let dir = tempdir().unwrap();
    setup(dir.path(), "");
    fs::write(
        dir.path().join("run.toml"),
        config("").replace("r1 = 40", "r1 = 0"),
    )
    .unwrap();
    let o = acmvl(&["train", p(&dir.path().join("run.toml"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(
        err.starts_with("error[config]:") && err.contains("r1"),
        "{err}"
    );
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempdir().unwrap();
    setup(dir.path(), "momentum = 0.9");
    let o = acmvl(&["train", p(&dir.path().join("run.toml"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    let line = config("momentum = 0.9")
        .lines()
        .position(|l| l.starts_with("momentum"))
        .unwrap()
        + 1;
    assert!(err.starts_with("error[parse]:"), "{err}");
    assert!(err.contains(&format!("run.toml:{line}:")), "{err}");
}

#[test]
fn export_matches_in_process_encoding() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    assert!(acmvl(&["train", p(&root.join("run.toml"))])
        .status
        .success());
    let o = acmvl(&[
        "export-latent",
        "--checkpoint",
        p(&root.join("out/checkpoint.json")),
        "--data",
        p(&root.join("data")),
        "--out",
        p(&root.join("lat")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = Checkpoint::load(&root.join("out/checkpoint.json")).unwrap();
    let ds = load_dataset(&root.join("data"), LoadOptions::default()).unwrap();
    for v in 0..2 {
        let exported = read_matrix_csv(&root.join(format!("lat/h_{v}.csv")), false).unwrap();
        assert_eq!(
            exported,
            encode_latent(ds.view(v), &ckpt.bank.best_enc[v]).unwrap()
        );
    }
    let z = read_matrix_csv(&root.join("lat/z.csv"), false).unwrap();
    assert_eq!(z.shape(), (36, 3));
}

#[test]
fn export_of_zero_rows_gives_zero_latents() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    assert!(acmvl(&["train", p(&root.join("run.toml"))])
        .status
        .success());
    let zeros = root.join("zeros");
    fs::create_dir(&zeros).unwrap();
    fs::write(zeros.join("view_0.csv"), "0,0,0,0,0,0\n0,0,0,0,0,0\n").unwrap();
    fs::write(zeros.join("view_1.csv"), "0,0,0,0,0\n0,0,0,0,0\n").unwrap();
    fs::write(zeros.join("labels.csv"), "0\n1\n").unwrap();
    let o = acmvl(&[
        "export-latent",
        "--checkpoint",
        p(&root.join("out/checkpoint.json")),
        "--data",
        p(&zeros),
        "--out",
        p(&root.join("lat")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let z = read_matrix_csv(&root.join("lat/z.csv"), false).unwrap();
    assert!(z.values().iter().all(|&v| v == 0.0));
    let h = read_matrix_csv(&root.join("lat/h_1.csv"), false).unwrap();
    assert!(h.values().iter().all(|&v| v == 0.0));
}

#[test]
fn export_rejects_mismatched_dims() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    assert!(acmvl(&["train", p(&root.join("run.toml"))])
        .status
        .success());
    let bad = root.join("bad");
    fs::create_dir(&bad).unwrap();
    fs::write(bad.join("view_0.csv"), "1,2,3,4,5,6\n").unwrap();
    fs::write(bad.join("view_1.csv"), "1,2,3\n").unwrap();
    fs::write(bad.join("labels.csv"), "0\n").unwrap();
    let o = acmvl(&[
        "export-latent",
        "--checkpoint",
        p(&root.join("out/checkpoint.json")),
        "--data",
        p(&bad),
        "--out",
        p(&root.join("lat")),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(
        err.starts_with("error[shape]:")
            && err.contains("view 1")
            && err.contains('3')
            && err.contains('5'),
        "{err}"
    );
}

#[test]
fn sparse_labels_warn_or_fail_under_strict() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    assert!(acmvl(&["train", p(&root.join("run.toml"))])
        .status
        .success());
    let sparse = root.join("sparse");
    fs::create_dir(&sparse).unwrap();
    fs::write(sparse.join("view_0.csv"), "1,2,3,4,5,6\n1,2,3,4,5,6\n").unwrap();
    fs::write(sparse.join("view_1.csv"), "1,2,3,4,5\n1,2,3,4,5\n").unwrap();
    fs::write(sparse.join("labels.csv"), "0\n5\n").unwrap();
    let (ckpt, lat) = (root.join("out/checkpoint.json"), root.join("lat"));
    let args = [
        "export-latent",
        "--checkpoint",
        p(&ckpt),
        "--data",
        p(&sparse),
        "--out",
        p(&lat),
    ];
    assert!(acmvl(&args).status.success());
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = acmvl(&strict);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[label]:"), "{}", stderr(&o));
}

#[test]
fn eval_reports_all_columns() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    setup(root, "");
    assert!(acmvl(&["train", p(&root.join("run.toml"))])
        .status
        .success());
    let o = acmvl(&["eval", p(&root.join("run.toml"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    for col in [
        "LR ACC",
        "LR-AE F1",
        "LR-AE-ACMVL ACC",
        "LR-ACMVL F1",
        "GMM NMI",
        "GMM-AE JC",
        "GMM-AE-ACMVL NMI",
        "GMM-ACMVL JC",
    ] {
        assert!(table.contains(col), "{col}");
    }
    let csv = fs::read_to_string(root.join("out/metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 * 4 + 4);
    for r in rows {
        let v: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v), "{r}");
    }
    assert!(csv.contains("data,joint,GMM-ACMVL,NMI,"));
}

#[test]
fn eval_without_checkpoint_fails() {
    let dir = tempdir().unwrap();
    setup(dir.path(), "");
    let o = acmvl(&["eval", p(&dir.path().join("run.toml"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[missing-file]:"));
}

#[test]
fn synth_is_deterministic_and_loads_back() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    fs::write(
        root.join("spec.toml"),
        SPEC.replace("views = 2", "views = 3")
            .replace("[6, 5]", "[6, 5, 2]"),
    )
    .unwrap();
    for out in ["a", "b"] {
        let o = acmvl(&[
            "synth",
            p(&root.join("spec.toml")),
            "--out",
            p(&root.join(out)),
            "--seed",
            "8",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["view_0.csv", "view_1.csv", "view_2.csv", "labels.csv"] {
        assert_eq!(
            fs::read(root.join("a").join(f)).unwrap(),
            fs::read(root.join("b").join(f)).unwrap()
        );
    }
    assert!(!root.join("a/view_3.csv").exists());
    let ds = load_dataset(&root.join("a"), LoadOptions::default()).unwrap();
    assert_eq!(ds.view_dims(), vec![6, 5, 2]);
    assert_eq!(ds.len(), 36);
}

#[test]
fn synth_into_unwritable_dir_fails() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("spec.toml"), SPEC).unwrap();
    fs::write(root.join("file"), "").unwrap();
    let o = acmvl(&[
        "synth",
        p(&root.join("spec.toml")),
        "--out",
        p(&root.join("file/sub")),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[io]:"), "{}", stderr(&o));
}
