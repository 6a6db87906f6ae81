//! Datasets: CIFAR-10 binary ingestion, synthetic Gaussian blobs, one-hot
//! encoding and seeded mini-batching.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::seed;

pub const CIFAR_CLASSES: usize = 10;
pub const CIFAR_PIXELS: usize = 3072;
pub const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;
pub const CIFAR_RECORDS_PER_FILE: usize = 10_000;
pub const CIFAR_FILE_BYTES: u64 = (CIFAR_RECORD * CIFAR_RECORDS_PER_FILE) as u64;
pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

/// Feature matrix (`n × dim`, values in `[0, 1]`) with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape("Dataset::new", features.rows(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::usage(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if features.as_slice().iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::usage("features must be finite and lie in [0, 1]"));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Features and one-hot labels for the given sample indices.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Matrix) {
        let x = self.features.select_rows(indices);
        let mut y = Matrix::zeros(indices.len(), self.class_count);
        for (r, &i) in indices.iter().enumerate() {
            y.set(r, self.labels[i], 1.0);
        }
        (x, y)
    }

    /// First `n` samples (all of them if `n` exceeds the length).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            name: self.name.clone(),
            features: self.features.slice_rows(0, n),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
        }
    }

    /// Splits into the first `n` samples and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let tail = Dataset {
            name: self.name.clone(),
            features: self.features.slice_rows(n, self.len()),
            labels: self.labels[n..].to_vec(),
            class_count: self.class_count,
        };
        (self.take(n), tail)
    }
}

pub fn one_hot(label: usize, class_count: usize) -> Result<Vec<f64>> {
    if label >= class_count {
        return Err(Error::usage(format!(
            "label {label} out of range for {class_count} classes"
        )));
    }
    let mut v = vec![0.0; class_count];
    v[label] = 1.0;
    Ok(v)
}

/// Loads the full CIFAR-10 binary distribution: 50,000 training samples from
/// the five `data_batch_*.bin` files and 10,000 validation samples from
/// `test_batch.bin`. Pixels are scaled by `1/255`, channel planes kept in file order.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    load_cifar10_limited(dir, None, None)
}

/// Like [`load_cifar10`] but keeps only the first `train_limit` / `val_limit`
/// records. Every file is still size-checked.
pub fn load_cifar10_limited(
    dir: &Path,
    train_limit: Option<usize>,
    val_limit: Option<usize>,
) -> Result<(Dataset, Dataset)> {
    let train_paths: Vec<PathBuf> = CIFAR_TRAIN_FILES.iter().map(|f| dir.join(f)).collect();
    let test_path = dir.join(CIFAR_TEST_FILE);
    for p in train_paths.iter().chain([&test_path]) {
        check_cifar_file(p)?;
    }
    let train_cap = train_limit
        .unwrap_or(usize::MAX)
        .min(5 * CIFAR_RECORDS_PER_FILE);
    let mut features = Vec::with_capacity(train_cap * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(train_cap);
    for p in &train_paths {
        let remaining = train_cap - labels.len();
        if remaining == 0 {
            break;
        }
        read_cifar_records(p, remaining, &mut features, &mut labels)?;
    }
    let train = Dataset {
        name: "cifar10-train".into(),
        features: Matrix::from_vec(labels.len(), CIFAR_PIXELS, features)?,
        labels,
        class_count: CIFAR_CLASSES,
    };

    let val_cap = val_limit.unwrap_or(usize::MAX).min(CIFAR_RECORDS_PER_FILE);
    let mut features = Vec::with_capacity(val_cap * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(val_cap);
    read_cifar_records(&test_path, val_cap, &mut features, &mut labels)?;
    let val = Dataset {
        name: "cifar10-validation".into(),
        features: Matrix::from_vec(labels.len(), CIFAR_PIXELS, features)?,
        labels,
        class_count: CIFAR_CLASSES,
    };
    Ok((train, val))
}

fn check_cifar_file(path: &Path) -> Result<()> {
    let meta = std::fs::metadata(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        offset: 0,
        message: format!("cannot open: {e}"),
    })?;
    if meta.len() != CIFAR_FILE_BYTES {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            offset: meta.len(),
            message: format!(
                "expected {CIFAR_FILE_BYTES} bytes, found {} bytes",
                meta.len()
            ),
        });
    }
    Ok(())
}

fn read_cifar_records(
    path: &Path,
    max_records: usize,
    features: &mut Vec<f64>,
    labels: &mut Vec<usize>,
) -> Result<()> {
    let n = max_records.min(CIFAR_RECORDS_PER_FILE);
    let mut buf = vec![0u8; n * CIFAR_RECORD];
    let ingest = |offset: u64, message: String| Error::Ingest {
        path: path.to_path_buf(),
        offset,
        message,
    };
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut buf))
        .map_err(|e| ingest(0, format!("read failed: {e}")))?;
    for (k, record) in buf.chunks_exact(CIFAR_RECORD).enumerate() {
        let label = record[0];
        if label as usize >= CIFAR_CLASSES {
            return Err(ingest(
                (k * CIFAR_RECORD) as u64,
                format!("label byte {label} is not a class in 0..=9"),
            ));
        }
        labels.push(label as usize);
        features.extend(record[1..].iter().map(|&b| f64::from(b) / 255.0));
    }
    Ok(())
}

/// Axis-aligned Gaussian clusters: class `c` is centred at `separation · e_c`
/// with unit variance, then the whole set is min-max rescaled into `[0, 1]`.
/// Samples are interleaved by class so every prefix is near-balanced.
pub fn make_blobs(
    per_class: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if per_class == 0 || classes == 0 || dim == 0 {
        return Err(Error::usage("make_blobs needs positive sizes"));
    }
    if dim < classes {
        return Err(Error::usage(format!(
            "axis-aligned means need dim >= classes, got dim {dim} < {classes}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::usage(format!(
            "separation must be non-negative, got {separation}"
        )));
    }
    let mut rng = seed::rng_for(seed, &[seed::stream::BLOBS]);
    let n = per_class * classes;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..per_class {
        for c in 0..classes {
            for d in 0..dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let mean = if d == c { separation } else { 0.0 };
                data.push(mean + noise);
            }
            labels.push(c);
        }
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for x in &mut data {
        *x = if span > 0.0 {
            ((*x - lo) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    Dataset::new("blobs", Matrix::from_vec(n, dim, data)?, labels, classes)
}

/// Mini-batch schedule: a fresh seeded permutation per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub seed: u64,
}

impl BatchPlan {
    pub fn new(batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::usage("batch size must be positive"));
        }
        Ok(Self { batch_size, seed })
    }

    /// Sample order for `epoch`, a function of `(seed, epoch)` only.
    pub fn order(&self, n: usize, epoch: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = seed::rng_for(self.seed, &[seed::stream::SHUFFLE, epoch as u64]);
        idx.shuffle(&mut rng);
        idx
    }

    /// Index groups for `epoch`; the last one may be short.
    pub fn index_batches(&self, n: usize, epoch: usize) -> Vec<Vec<usize>> {
        self.order(n, epoch)
            .chunks(self.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }
}

/// `(features, one-hot labels)` batches covering every sample exactly once.
pub fn batches<'a>(
    dataset: &'a Dataset,
    plan: &BatchPlan,
    epoch: usize,
) -> impl Iterator<Item = (Matrix, Matrix)> + 'a {
    plan.index_batches(dataset.len(), epoch)
        .into_iter()
        .map(move |idx| dataset.gather(&idx))
}
