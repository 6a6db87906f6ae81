use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::regularizers::{
    RegularizerConfig, RegularizerKind, DEFAULT_MIN_DELTA, DEFAULT_PATIENCE,
};

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 512;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_SNAPSHOT_EPOCHS: [usize; 3] = [1, 10, 20];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    /// 3 hidden layers × 512 units.
    Arch1,
    /// 10 hidden layers × 128 units.
    Arch2,
    /// 10 hidden layers × 64 units.
    Arch3,
    Custom(Vec<usize>),
}

impl Architecture {
    pub fn hidden_widths(&self) -> Vec<usize> {
        match self {
            Architecture::Arch1 => vec![512; 3],
            Architecture::Arch2 => vec![128; 10],
            Architecture::Arch3 => vec![64; 10],
            Architecture::Custom(w) => w.clone(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Arch1 => f.write_str("arch1"),
            Architecture::Arch2 => f.write_str("arch2"),
            Architecture::Arch3 => f.write_str("arch3"),
            Architecture::Custom(w) => write!(f, "custom:{}", join(w)),
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arch1" => Ok(Architecture::Arch1),
            "arch2" => Ok(Architecture::Arch2),
            "arch3" => Ok(Architecture::Arch3),
            _ => {
                let Some(list) = s.strip_prefix("custom:") else {
                    return Err(Error::config(format!(
                        "unknown architecture {s:?} (expected arch1|arch2|arch3|custom:<w1,w2,...>)"
                    )));
                };
                let widths = parse_list(list)
                    .map_err(|_| Error::config(format!("bad custom widths {list:?}")))?;
                if widths.is_empty() || widths.contains(&0) {
                    return Err(Error::config(format!(
                        "custom architecture needs positive widths, got {list:?}"
                    )));
                }
                Ok(Architecture::Custom(widths))
            }
        }
    }
}

/// Synthetic blob dataset settings; the blob pool is split into train/validation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobsConfig {
    pub per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    /// Fraction of the pool held out for validation.
    pub val_fraction: f64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self {
            per_class: 250,
            classes: 4,
            dim: 16,
            separation: 10.0,
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Cifar10 {
        dir: PathBuf,
        train_limit: Option<usize>,
        val_limit: Option<usize>,
    },
    Synthetic(BlobsConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub architecture: Architecture,
    pub regularizer: RegularizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub snapshot_epochs: Vec<usize>,
    pub patience: usize,
    pub min_delta: f64,
    pub data: DataSource,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for everything except the pieces every run must name.
    pub fn new(
        architecture: Architecture,
        kind: RegularizerKind,
        data: DataSource,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            architecture,
            regularizer: RegularizerConfig {
                kind,
                ..RegularizerConfig::default()
            },
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: 0,
            snapshot_epochs: DEFAULT_SNAPSHOT_EPOCHS.to_vec(),
            patience: DEFAULT_PATIENCE,
            min_delta: DEFAULT_MIN_DELTA,
            data,
            output_dir: output_dir.into(),
        }
    }

    /// Sets the run seed and the regularizer seed together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.regularizer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.regularizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::config("min_delta must be non-negative"));
        }
        if self.snapshot_epochs.contains(&0) {
            return Err(Error::config("snapshot epochs are 1-based"));
        }
        let widths = self.architecture.hidden_widths();
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::config("architecture needs positive hidden widths"));
        }
        if self.regularizer.kind == RegularizerKind::Dynamic
            && widths.iter().any(|&w| w != widths[0])
        {
            return Err(Error::config(format!(
                "dynamic dropout needs equal hidden widths, got {widths:?}"
            )));
        }
        if let DataSource::Synthetic(b) = &self.data {
            if b.per_class == 0 || b.classes == 0 || b.dim < b.classes {
                return Err(Error::config(
                    "synthetic data needs positive sizes and dim >= classes",
                ));
            }
            if !(b.val_fraction > 0.0 && b.val_fraction < 1.0) {
                return Err(Error::config(
                    "synthetic validation fraction must lie in (0, 1)",
                ));
            }
        }
        Ok(())
    }

    /// Key-value text capturing every field needed to rerun the experiment.
    pub fn manifest(&self) -> String {
        let r = &self.regularizer;
        let mut lines = vec![
            "# dyndrop run manifest".to_string(),
            format!("arch = {}", self.architecture),
            format!("layers = {}", join(&self.architecture.hidden_widths())),
            format!("reg = {}", r.kind),
            format!("rate = {}", r.rate),
            format!("lattice_density = {}", r.lattice_density),
            format!("reactivation_fraction = {}", r.reactivation_fraction),
            format!("patience = {}", self.patience),
            format!("min_delta = {}", self.min_delta),
            format!("epochs = {}", self.epochs),
            format!("batch = {}", self.batch_size),
            format!("lr = {}", self.learning_rate),
            format!("seed = {}", self.seed),
            format!("reg_seed = {}", r.seed),
            format!("snapshot_epochs = {}", join(&self.snapshot_epochs)),
            "optimizer = sgd".to_string(),
            "init = he-normal".to_string(),
            "shuffle = per-epoch".to_string(),
        ];
        match &self.data {
            DataSource::Cifar10 {
                dir,
                train_limit,
                val_limit,
            } => {
                lines.push("data = cifar10".into());
                lines.push(format!("data_dir = {}", dir.display()));
                lines.push(format!("train_limit = {}", limit_str(*train_limit)));
                lines.push(format!("val_limit = {}", limit_str(*val_limit)));
            }
            DataSource::Synthetic(b) => {
                lines.push("data = synthetic".into());
                lines.push(format!("blobs_per_class = {}", b.per_class));
                lines.push(format!("blobs_classes = {}", b.classes));
                lines.push(format!("blobs_dim = {}", b.dim));
                lines.push(format!("blobs_separation = {}", b.separation));
                lines.push(format!("blobs_val_fraction = {}", b.val_fraction));
            }
        }
        lines.push(format!("output_dir = {}", self.output_dir.display()));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        fs::write(path, self.manifest()).map_err(|e| Error::io(path, e))
    }

    /// Inverse of [`RunConfig::manifest`].
    pub fn parse_manifest(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("manifest line without '=': {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&str> {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::config(format!("manifest is missing {k:?}")))
        };
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::config(format!("manifest value for {k:?} is invalid: {v:?}")))
        }
        let architecture: Architecture = get("arch")?.parse()?;
        let layers = parse_list(get("layers")?)
            .map_err(|_| Error::config("manifest layers list is invalid"))?;
        if layers != architecture.hidden_widths() {
            return Err(Error::config(format!(
                "manifest layers {layers:?} disagree with arch {architecture}"
            )));
        }
        let data = match get("data")? {
            "cifar10" => DataSource::Cifar10 {
                dir: PathBuf::from(get("data_dir")?),
                train_limit: parse_limit(get("train_limit")?)?,
                val_limit: parse_limit(get("val_limit")?)?,
            },
            "synthetic" => DataSource::Synthetic(BlobsConfig {
                per_class: num("blobs_per_class", get("blobs_per_class")?)?,
                classes: num("blobs_classes", get("blobs_classes")?)?,
                dim: num("blobs_dim", get("blobs_dim")?)?,
                separation: num("blobs_separation", get("blobs_separation")?)?,
                val_fraction: num("blobs_val_fraction", get("blobs_val_fraction")?)?,
            }),
            other => return Err(Error::config(format!("unknown data source {other:?}"))),
        };
        let snapshot_epochs = parse_list(get("snapshot_epochs")?)
            .map_err(|_| Error::config("manifest snapshot_epochs is invalid"))?;
        let config = RunConfig {
            architecture,
            regularizer: RegularizerConfig {
                kind: get("reg")?.parse()?,
                rate: num("rate", get("rate")?)?,
                lattice_density: num("lattice_density", get("lattice_density")?)?,
                reactivation_fraction: num("reactivation_fraction", get("reactivation_fraction")?)?,
                seed: num("reg_seed", get("reg_seed")?)?,
            },
            epochs: num("epochs", get("epochs")?)?,
            batch_size: num("batch", get("batch")?)?,
            learning_rate: num("lr", get("lr")?)?,
            seed: num("seed", get("seed")?)?,
            snapshot_epochs,
            patience: num("patience", get("patience")?)?,
            min_delta: num("min_delta", get("min_delta")?)?,
            data,
            output_dir: PathBuf::from(get("output_dir")?),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses `1,10,20`; an empty string is an empty list.
pub fn parse_list(s: &str) -> std::result::Result<Vec<usize>, std::num::ParseIntError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn limit_str(limit: Option<usize>) -> String {
    limit.map_or_else(|| "all".to_string(), |n| n.to_string())
}

fn parse_limit(s: &str) -> Result<Option<usize>> {
    if s == "all" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::config(format!("invalid sample limit {s:?}")))
}
