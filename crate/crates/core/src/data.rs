//! Multi-view datasets on disk and in memory.
//!
//! A dataset directory holds `view_0.csv` .. `view_{V-1}.csv` and `labels.csv`.
//! Each view line is one sample as comma-separated decimal floats; each label line
//! is one nonnegative integer. Line `i` of every file describes the same instance.
//! No header is expected unless [`LoadOptions::header`] is set.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Vec<usize>,
    class_count: usize,
    scaling: Option<MinMaxScaler>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::arg("a dataset needs at least one view"));
        }
        let n = labels.len();
        for (v, m) in views.iter().enumerate() {
            if m.rows() != n {
                return Err(Error::Alignment {
                    file: format!("view {v}"),
                    found: m.rows(),
                    reference: "labels".into(),
                    expected: n,
                });
            }
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Label(format!(
                "label {l} at row {i} is not below the class count {class_count}"
            )));
        }
        Ok(Self {
            views,
            labels,
            class_count,
            scaling: None,
        })
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    /// Scaling applied to this dataset, if any.
    pub fn scaling(&self) -> Option<&MinMaxScaler> {
        self.scaling.as_ref()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows `indices` of every view and the labels, in the given order.
    pub fn subset(&self, indices: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            views: self.views.iter().map(|m| m.select_rows(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            scaling: self.scaling.clone(),
        }
    }

    /// Applies `scaler` to every view and records it.
    pub fn scaled(&self, scaler: &MinMaxScaler) -> Result<MultiViewDataset> {
        Ok(MultiViewDataset {
            views: scaler.transform(&self.views)?,
            labels: self.labels.clone(),
            class_count: self.class_count,
            scaling: Some(scaler.clone()),
        })
    }
}

/// Parsing switches for [`load_dataset`].
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Skip the first line of every file.
    pub header: bool,
    /// Reject label sets with unused class ids below the maximum.
    pub strict: bool,
}

fn read_lines(path: &Path, header: bool) -> Result<Vec<(usize, String)>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .skip(usize::from(header))
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

/// Reads one numeric CSV file into a matrix.
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Matrix> {
    let lines = read_lines(path, header)?;
    let mut values = Vec::new();
    let mut cols = None;
    for (line_no, line) in &lines {
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: *line_no,
            msg,
        };
        let mut count = 0;
        for (c, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(format!(
                    "column {}: '{}' is not a number",
                    c + 1,
                    cell.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!("column {}: non-finite value", c + 1)));
            }
            values.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(expected) if expected != count => {
                return Err(parse_err(format!("{count} columns, expected {expected}")));
            }
            _ => {}
        }
    }
    Matrix::new(lines.len(), cols.unwrap_or(0), values)
}

fn read_labels(path: &Path, header: bool) -> Result<Vec<usize>> {
    read_lines(path, header)?
        .into_iter()
        .map(|(line, text)| {
            text.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("'{text}' is not a nonnegative integer label"),
            })
        })
        .collect()
}

pub fn view_file(dir: &Path, v: usize) -> PathBuf {
    dir.join(format!("view_{v}.csv"))
}

pub fn labels_file(dir: &Path) -> PathBuf {
    dir.join("labels.csv")
}

/// Loads a dataset directory. Views are discovered as `view_0.csv`, `view_1.csv`, ...
/// until the first missing index.
pub fn load_dataset(dir: &Path, opts: LoadOptions) -> Result<MultiViewDataset> {
    let first = view_file(dir, 0);
    if !first.exists() {
        return Err(Error::MissingFile(first));
    }
    let labels_path = labels_file(dir);
    let labels = read_labels(&labels_path, opts.header)?;
    let mut views = Vec::new();
    while view_file(dir, views.len()).exists() {
        let path = view_file(dir, views.len());
        let m = read_matrix_csv(&path, opts.header)?;
        if let Some(first) = views.first().map(Matrix::rows) {
            if m.rows() != first {
                return Err(Error::Alignment {
                    file: format!("view_{}.csv", views.len()),
                    found: m.rows(),
                    reference: "view_0.csv".into(),
                    expected: first,
                });
            }
        }
        views.push(m);
    }
    if views[0].rows() != labels.len() {
        return Err(Error::Alignment {
            file: "labels.csv".into(),
            found: labels.len(),
            reference: "view_0.csv".into(),
            expected: views[0].rows(),
        });
    }
    if labels.is_empty() {
        return Err(Error::arg(format!("dataset in {} is empty", dir.display())));
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; class_count];
    for &l in &labels {
        present[l] = true;
    }
    let missing: Vec<usize> = (0..class_count).filter(|&k| !present[k]).collect();
    if !missing.is_empty() {
        let msg = format!(
            "class ids {missing:?} never occur; class count taken as {class_count} from the largest label"
        );
        if opts.strict {
            return Err(Error::Label(msg));
        }
        warn!("{}: {msg}", labels_path.display());
    }
    MultiViewDataset::new(views, labels, class_count)
}

/// Writes `m` as headerless CSV; values use the shortest text that parses back
/// to the identical `f64`.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(m.values().len() * 20);
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the dataset directory layout read by [`load_dataset`].
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (v, m) in ds.views.iter().enumerate() {
        write_matrix_csv(&view_file(dir, v), m)?;
    }
    let labels: String = ds.labels.iter().map(|l| format!("{l}\n")).collect();
    let path = labels_file(dir);
    fs::write(&path, labels).map_err(|e| Error::io(path, e))
}

/// Row indices of a train/test partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Class-stratified partition of `labels`.
///
/// One seeded shuffle of all row indices fixes the order; each class then
/// contributes its first `n_c_train` shuffled members to train, where the
/// per-class counts add up to `ceil(ratio * N)` whenever the constraint that
/// every class keeps at least one row on each side allows it.
pub fn split_indices(labels: &[usize], ratio: f64, seed: RngSeed) -> Result<SplitIndices> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::arg(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = labels.len();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some((k, &c)) = counts.iter().enumerate().find(|(_, &c)| c == 1) {
        return Err(Error::arg(format!(
            "class {k} has {c} sample; stratified splitting needs at least 2"
        )));
    }

    let target = (ratio * n as f64).ceil() as usize;
    let mut quota = vec![0usize; classes];
    let mut frac = vec![0f64; classes];
    for k in 0..classes {
        if counts[k] == 0 {
            continue;
        }
        let exact = ratio * counts[k] as f64;
        quota[k] = (exact.floor() as usize).clamp(1, counts[k] - 1);
        frac[k] = exact - quota[k] as f64;
    }
    let mut order: Vec<usize> = (0..classes).filter(|&k| counts[k] > 0).collect();
    let mut assigned: usize = quota.iter().sum();
    // hand out the remaining rows by largest fractional part, ties to lower class id
    order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    while assigned < target {
        let Some(&k) = order.iter().find(|&&k| quota[k] + 1 < counts[k]) else {
            break;
        };
        quota[k] += 1;
        frac[k] -= 1.0;
        assigned += 1;
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    }
    while assigned > target {
        let Some(&k) = order.iter().rev().find(|&&k| quota[k] > 1) else {
            break;
        };
        quota[k] -= 1;
        frac[k] += 1.0;
        assigned -= 1;
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed.rng());
    let mut taken = vec![0usize; classes];
    let mut split = SplitIndices {
        train: Vec::with_capacity(assigned),
        test: Vec::with_capacity(n - assigned),
    };
    for i in perm {
        let k = labels[i];
        if taken[k] < quota[k] {
            taken[k] += 1;
            split.train.push(i);
        } else {
            split.test.push(i);
        }
    }
    Ok(split)
}

/// Stratified train/test split applied identically to every view and the labels.
pub fn split(
    ds: &MultiViewDataset,
    ratio: f64,
    seed: RngSeed,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    let idx = split_indices(&ds.labels, ratio, seed)?;
    Ok((ds.subset(&idx.train), ds.subset(&idx.test)))
}

/// Seeded permutation of `0..n_rows` cut into consecutive chunks of
/// `batch_size`; the last chunk may be short.
pub fn batches(n_rows: usize, batch_size: usize, seed: RngSeed) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut seed.rng());
    perm.chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Per-view, per-feature min-max scaling fit on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<Vec<f64>>,
    pub maxs: Vec<Vec<f64>>,
}

impl MinMaxScaler {
    pub fn fit(ds: &MultiViewDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::arg("cannot fit scaling on an empty dataset"));
        }
        let mut mins = Vec::new();
        let mut maxs = Vec::new();
        for m in &ds.views {
            let mut lo = vec![f64::INFINITY; m.cols()];
            let mut hi = vec![f64::NEG_INFINITY; m.cols()];
            for row in m.row_iter() {
                for (j, &v) in row.iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            mins.push(lo);
            maxs.push(hi);
        }
        Ok(Self { mins, maxs })
    }

    /// `(x - min) / (max - min)` per feature; constant features map to 0.
    pub fn transform(&self, views: &[Matrix]) -> Result<Vec<Matrix>> {
        if views.len() != self.mins.len() {
            return Err(Error::shape(format!(
                "scaler fit on {} views, given {}",
                self.mins.len(),
                views.len()
            )));
        }
        views
            .iter()
            .enumerate()
            .map(|(v, m)| {
                let (lo, hi) = (&self.mins[v], &self.maxs[v]);
                if m.cols() != lo.len() {
                    return Err(Error::shape(format!(
                        "view {v}: scaler fit on {} features, given {}",
                        lo.len(),
                        m.cols()
                    )));
                }
                Ok(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
                    let range = hi[j] - lo[j];
                    if range > 0.0 {
                        (m.get(i, j) - lo[j]) / range
                    } else {
                        0.0
                    }
                }))
            })
            .collect()
    }
}

/// Parameters of the synthetic multi-view generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub views: usize,
    pub classes: usize,
    pub samples_per_class: usize,
    pub latent_dim: usize,
    pub noise_std: f64,
    pub view_dims: Vec<usize>,
}

/// Spread of samples around their class center in latent space.
pub const SYNTH_LATENT_STD: f64 = 0.1;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.views == 0
            || self.classes == 0
            || self.samples_per_class == 0
            || self.latent_dim == 0
        {
            return Err(Error::arg("synthetic spec counts must all be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::arg(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if self.view_dims.len() != self.views {
            return Err(Error::arg(format!(
                "{} views but {} view dims",
                self.views,
                self.view_dims.len()
            )));
        }
        if self.view_dims.contains(&0) {
            return Err(Error::arg("view dims must be at least 1"));
        }
        Ok(())
    }
}

/// Class-structured multi-view data.
///
/// Class `k` gets a center `c_k ~ U[-1, 1]^latent_dim`; each sample draws
/// `z = c_k + N(0, 0.1^2)` and view `v` observes `A_v z + N(0, noise_std^2)`,
/// where `A_v` is a fixed `M^v x latent_dim` map with `N(0, 1)` entries.
/// Rows are ordered class by class.
pub fn synth_multiview(spec: &SynthSpec, seed: RngSeed) -> Result<MultiViewDataset> {
    spec.validate()?;
    let d = spec.latent_dim;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut center_rng = seed.derive(&[0]).rng();
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..d)
                .map(|_| center_rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();

    let n = spec.classes * spec.samples_per_class;
    let mut latent_rng = seed.derive(&[1]).rng();
    let mut latents = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            latents.extend(
                c.iter()
                    .map(|&ci| ci + SYNTH_LATENT_STD * std_normal.sample(&mut latent_rng)),
            );
            labels.push(k);
        }
    }
    let latents = Matrix::new(n, d, latents)?;

    let mut views = Vec::with_capacity(spec.views);
    for (v, &m_v) in spec.view_dims.iter().enumerate() {
        let mut map_rng = seed.derive(&[2, v as u64]).rng();
        let map = Matrix::from_fn(d, m_v, |_, _| std_normal.sample(&mut map_rng));
        let mut x = latents.matmul(&map)?;
        if spec.noise_std > 0.0 {
            let mut noise_rng = seed.derive(&[3, v as u64]).rng();
            for val in x.values_mut() {
                *val += spec.noise_std * std_normal.sample(&mut noise_rng);
            }
        }
        views.push(x);
    }
    MultiViewDataset::new(views, labels, spec.classes)
}
