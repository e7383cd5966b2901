//! The `synth`, `train`, `export-latent` and `eval` commands run back to back
//! in a temporary directory.

use std::fs;

use acmvl::cli::{cmd_eval, cmd_export_latent, cmd_synth, cmd_train};
use acmvl::data::LoadOptions;
use acmvl::eval::MetricsReport;
use acmvl::{Result, RngSeed};

const SPEC: &str = "\
views = 2
classes = 3
samples_per_class = 40
latent_dim = 3
noise_std = 0.2
view_dims = [12, 10]
";

const CONFIG: &str = r#"
seed = 5
output_dir = "run"

[data]
path = "data"

[arch]
encoder_dims = [10, 6, 3]
head_dims = [8, 6]
joint_dim = 6

[train]
epochs = 3
r1 = 150
r2 = 150
"#;

pub fn run_example() -> Result<MetricsReport> {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    fs::write(root.join("spec.toml"), SPEC).expect("write spec");
    fs::write(root.join("run.toml"), CONFIG).expect("write config");

    cmd_synth(&root.join("spec.toml"), &root.join("data"), RngSeed(5))?;
    let manifest = cmd_train(&root.join("run.toml"))?;
    println!(
        "trained {} stage runs, config sha256 {}",
        manifest.stages.len(),
        manifest.config_sha256
    );
    let exported = cmd_export_latent(
        &root.join("run/checkpoint.json"),
        &root.join("data"),
        &root.join("latents"),
        LoadOptions::default(),
    )?;
    println!(
        "exported {} rows of latents to {}",
        exported.rows,
        exported.joint.display()
    );
    cmd_eval(&root.join("run.toml"), None, None, None)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?.table());
    Ok(())
}
