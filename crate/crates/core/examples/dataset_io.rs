//! Writes a dataset directory, reads it back and makes a stratified split.
//!
//! Layout: `view_0.csv`, `view_1.csv`, ... (one row per sample, comma
//! separated) and `labels.csv` (one integer class id per line).

use acmvl::data::{
    load_dataset, save_dataset, split, synth_multiview, LoadOptions, MinMaxScaler, SynthSpec,
};
use acmvl::{Result, RngSeed};

pub fn run_example() -> Result<(Vec<usize>, Vec<usize>)> {
    let spec = SynthSpec {
        views: 2,
        classes: 3,
        samples_per_class: 7,
        latent_dim: 2,
        noise_std: 0.1,
        view_dims: vec![4, 3],
    };
    let ds = synth_multiview(&spec, RngSeed(9))?;
    let dir = tempfile::tempdir().expect("temp dir");
    save_dataset(&ds, dir.path())?;
    let back = load_dataset(dir.path(), LoadOptions::default())?;
    assert_eq!(back, ds, "CSV round trip is exact");

    let (train, test) = split(&back, 0.5, RngSeed(9))?;
    let scaler = MinMaxScaler::fit(&train)?;
    let scaled_test = test.scaled(&scaler)?;
    println!(
        "scaled test view 0 first row: {:?}",
        scaled_test.view(0).row(0)
    );
    Ok((train.class_counts(), test.class_counts()))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let (train, test) = run_example()?;
    println!("train rows per class {train:?}");
    println!("test rows per class  {test:?}");
    Ok(())
}
