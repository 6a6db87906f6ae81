//! Dropout strategies applied at the hidden-layer pre-activation site, and
//! the validation-loss stagnation monitor that drives lattice reactivation.
//!
//! The baselines (classical, Gaussian, alpha) use their usual scaling and
//! noise laws. Dynamic dropout applies the lattice row as a plain binary mask
//! `z ⊙ (1 − L_l)` with no compensation on surviving units.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::nn::{Matrix, SiteTransform};
use crate::seed;

/// `-λα` of the self-normalizing activation: the value dropped units take in alpha dropout.
pub const ALPHA_PRIME: f64 = -1.7580993408473766;

pub const DEFAULT_PATIENCE: usize = 5;
pub const DEFAULT_MIN_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    None,
    Classical,
    Gaussian,
    Alpha,
    Dynamic,
}

impl RegularizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::Classical => "classical",
            RegularizerKind::Gaussian => "gaussian",
            RegularizerKind::Alpha => "alpha",
            RegularizerKind::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => RegularizerKind::None,
            "classical" => RegularizerKind::Classical,
            "gaussian" => RegularizerKind::Gaussian,
            "alpha" => RegularizerKind::Alpha,
            "dynamic" => RegularizerKind::Dynamic,
            other => {
                return Err(Error::config(format!(
                    "unknown regularizer {other:?} (expected none|classical|gaussian|alpha|dynamic)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerConfig {
    pub kind: RegularizerKind,
    /// Drop rate for the baselines, in `[0, 1)`.
    pub rate: f64,
    /// Initial live density of the lattice, in `[0, 1]`.
    pub lattice_density: f64,
    /// Fraction of dead cells revived on a stagnation trigger, in `(0, 1]`.
    pub reactivation_fraction: f64,
    pub seed: u64,
}

impl Default for RegularizerConfig {
    fn default() -> Self {
        Self {
            kind: RegularizerKind::None,
            rate: 0.5,
            lattice_density: 0.5,
            reactivation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl RegularizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rate) {
            return Err(Error::config(format!(
                "rate must lie in [0, 1), got {}",
                self.rate
            )));
        }
        if !(0.0..=1.0).contains(&self.lattice_density) {
            return Err(Error::config(format!(
                "lattice density must lie in [0, 1], got {}",
                self.lattice_density
            )));
        }
        if !(self.reactivation_fraction > 0.0 && self.reactivation_fraction <= 1.0) {
            return Err(Error::config(format!(
                "reactivation fraction must lie in (0, 1], got {}",
                self.reactivation_fraction
            )));
        }
        Ok(())
    }

    /// Cells revived when the monitor fires on a lattice with `dead` dead cells.
    pub fn reactivation_count(&self, dead: usize) -> usize {
        (self.reactivation_fraction * dead as f64).ceil() as usize
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::usage(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Inverted dropout: zero with probability `rate`, scale survivors by `1/(1−rate)`.
pub fn classical_transform(
    rows: usize,
    cols: usize,
    rate: f64,
    seed: u64,
) -> Result<SiteTransform> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(SiteTransform::Identity);
    }
    let mut rng = seed::rng_for(seed, &[seed::stream::NOISE]);
    let keep_scale = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random_bool(rate) {
                0.0
            } else {
                keep_scale
            }
        })
        .collect();
    Ok(SiteTransform::Affine {
        scale: Matrix::from_vec(rows, cols, data)?,
        shift: None,
    })
}

/// Multiplicative noise drawn from `Normal(1, rate/(1−rate))`.
pub fn gaussian_transform(rows: usize, cols: usize, rate: f64, seed: u64) -> Result<SiteTransform> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(SiteTransform::Identity);
    }
    let normal =
        Normal::new(1.0, (rate / (1.0 - rate)).sqrt()).map_err(|e| Error::usage(e.to_string()))?;
    let mut rng = seed::rng_for(seed, &[seed::stream::NOISE]);
    let data = (0..rows * cols).map(|_| normal.sample(&mut rng)).collect();
    Ok(SiteTransform::Affine {
        scale: Matrix::from_vec(rows, cols, data)?,
        shift: None,
    })
}

/// Affine correction `(a, b)` for alpha dropout at keep probability `1 − rate`.
pub fn alpha_affine(rate: f64) -> (f64, f64) {
    let p = 1.0 - rate;
    let a = (p + ALPHA_PRIME * ALPHA_PRIME * p * (1.0 - p)).powf(-0.5);
    let b = -a * (1.0 - p) * ALPHA_PRIME;
    (a, b)
}

/// Alpha dropout: dropped units take `α′`, then `a·x + b` restores mean and variance.
pub fn alpha_transform(rows: usize, cols: usize, rate: f64, seed: u64) -> Result<SiteTransform> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(SiteTransform::Identity);
    }
    let (a, b) = alpha_affine(rate);
    let mut rng = seed::rng_for(seed, &[seed::stream::NOISE]);
    let mut scale = Matrix::zeros(rows, cols);
    let mut shift = Matrix::zeros(rows, cols);
    for (s, t) in scale.as_mut_slice().iter_mut().zip(shift.as_mut_slice()) {
        if rng.random_bool(rate) {
            *s = 0.0;
            *t = a * ALPHA_PRIME + b;
        } else {
            *s = a;
            *t = b;
        }
    }
    Ok(SiteTransform::Affine {
        scale,
        shift: Some(shift),
    })
}

fn apply_stochastic(
    z: &Matrix,
    training: bool,
    rate: f64,
    build: impl FnOnce() -> Result<SiteTransform>,
) -> Result<Matrix> {
    check_rate(rate)?;
    if !training {
        return Ok(z.clone());
    }
    build()?.apply(z)
}

pub fn apply_classical(z: &Matrix, rate: f64, seed: u64, training: bool) -> Result<Matrix> {
    apply_stochastic(z, training, rate, || {
        classical_transform(z.rows(), z.cols(), rate, seed)
    })
}

pub fn apply_gaussian(z: &Matrix, rate: f64, seed: u64, training: bool) -> Result<Matrix> {
    apply_stochastic(z, training, rate, || {
        gaussian_transform(z.rows(), z.cols(), rate, seed)
    })
}

pub fn apply_alpha(z: &Matrix, rate: f64, seed: u64, training: bool) -> Result<Matrix> {
    apply_stochastic(z, training, rate, || {
        alpha_transform(z.rows(), z.cols(), rate, seed)
    })
}

/// Patience-based detector of non-improving validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct OverfitMonitor {
    pub patience: usize,
    pub min_delta: f64,
    pub best_val_loss: f64,
    pub epochs_since_improvement: usize,
}

impl Default for OverfitMonitor {
    fn default() -> Self {
        Self::new(DEFAULT_PATIENCE, DEFAULT_MIN_DELTA).expect("defaults are valid")
    }
}

impl OverfitMonitor {
    pub fn new(patience: usize, min_delta: f64) -> Result<Self> {
        if patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !(min_delta >= 0.0 && min_delta.is_finite()) {
            return Err(Error::config(format!(
                "min_delta must be a non-negative number, got {min_delta}"
            )));
        }
        Ok(Self {
            patience,
            min_delta,
            best_val_loss: f64::INFINITY,
            epochs_since_improvement: 0,
        })
    }

    /// Feeds one epoch's validation loss. Returns the updated monitor and
    /// whether the stagnation trigger fired; after firing the counter re-arms.
    pub fn update(&self, val_loss: f64) -> Result<(Self, bool)> {
        if val_loss.is_nan() {
            return Err(Error::usage("validation loss is NaN"));
        }
        let mut next = self.clone();
        if val_loss < self.best_val_loss - self.min_delta {
            next.best_val_loss = val_loss;
            next.epochs_since_improvement = 0;
            return Ok((next, false));
        }
        next.epochs_since_improvement += 1;
        if next.epochs_since_improvement >= next.patience {
            next.epochs_since_improvement = 0;
            return Ok((next, true));
        }
        Ok((next, false))
    }
}

/// Mask for hidden layer `layer_index` during training. The lattice must have
/// one row per maskable layer.
pub fn mask_for_epoch_dynamic(
    lattice: &Lattice,
    layer_index: usize,
    maskable_layers: usize,
) -> Result<Vec<u8>> {
    if lattice.rows() != maskable_layers {
        return Err(Error::config(format!(
            "lattice has {} rows but the network has {maskable_layers} maskable layers",
            lattice.rows()
        )));
    }
    lattice.layer_mask(layer_index)
}

/// Epoch-end hook: monitor, then reactivation if triggered, then one generation.
/// Returns the next lattice, the updated monitor and the number of revived cells.
pub fn on_epoch_end_dynamic(
    lattice: &Lattice,
    monitor: &OverfitMonitor,
    val_loss: f64,
    config: &RegularizerConfig,
) -> Result<(Lattice, OverfitMonitor, usize)> {
    let (monitor, triggered) = monitor.update(val_loss)?;
    let mut revived = 0;
    let current = if triggered {
        let count = config.reactivation_count(lattice.dead_count());
        let seed = seed::derive(config.seed, &[lattice.epoch()]);
        let next = lattice.reactivate(count, seed);
        revived = next.live_count() - lattice.live_count();
        next
    } else {
        lattice.clone()
    };
    Ok((current.step(), monitor, revived))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReactivationEvent {
    /// 1-based training epoch at whose end the cells were revived.
    pub epoch: usize,
    pub cells: usize,
}

/// Lattice-driven dropout state carried across a training run.
#[derive(Debug, Clone)]
pub struct DynamicDropout {
    lattice: Lattice,
    monitor: OverfitMonitor,
    config: RegularizerConfig,
    events: Vec<ReactivationEvent>,
}

impl DynamicDropout {
    /// Lattice sized `hidden layers × units per layer`; all hidden layers must share a width.
    pub fn new(
        config: &RegularizerConfig,
        hidden_widths: &[usize],
        monitor: OverfitMonitor,
    ) -> Result<Self> {
        config.validate()?;
        let Some(&width) = hidden_widths.first() else {
            return Err(Error::config(
                "dynamic dropout needs at least one hidden layer",
            ));
        };
        if hidden_widths.iter().any(|&w| w != width) {
            return Err(Error::config(format!(
                "dynamic dropout needs equal hidden widths for its lattice, got {hidden_widths:?}"
            )));
        }
        let lattice = Lattice::init_random(
            hidden_widths.len(),
            width,
            config.lattice_density,
            config.seed,
        )?;
        Ok(Self {
            lattice,
            monitor,
            config: config.clone(),
            events: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn monitor(&self) -> &OverfitMonitor {
        &self.monitor
    }

    pub fn events(&self) -> &[ReactivationEvent] {
        &self.events
    }

    /// Training masks for the current epoch, one per hidden layer.
    pub fn masks(&self) -> Result<Vec<Vec<u8>>> {
        (0..self.lattice.rows())
            .map(|l| mask_for_epoch_dynamic(&self.lattice, l, self.lattice.rows()))
            .collect()
    }

    /// Runs the epoch-end hook and returns the number of cells revived.
    pub fn end_epoch(&mut self, epoch: usize, val_loss: f64) -> Result<usize> {
        let (lattice, monitor, revived) =
            on_epoch_end_dynamic(&self.lattice, &self.monitor, val_loss, &self.config)?;
        if revived > 0 {
            self.events.push(ReactivationEvent {
                epoch,
                cells: revived,
            });
        }
        self.lattice = lattice;
        self.monitor = monitor;
        Ok(revived)
    }
}

/// The configured strategy, ready to produce per-batch site transforms.
#[derive(Debug, Clone)]
pub enum Regularizer {
    None,
    Classical { rate: f64, seed: u64 },
    Gaussian { rate: f64, seed: u64 },
    Alpha { rate: f64, seed: u64 },
    Dynamic(DynamicDropout),
}

impl Regularizer {
    pub fn new(
        config: &RegularizerConfig,
        hidden_widths: &[usize],
        monitor: OverfitMonitor,
    ) -> Result<Self> {
        config.validate()?;
        let (rate, seed) = (config.rate, config.seed);
        Ok(match config.kind {
            RegularizerKind::None => Regularizer::None,
            RegularizerKind::Classical => Regularizer::Classical { rate, seed },
            RegularizerKind::Gaussian => Regularizer::Gaussian { rate, seed },
            RegularizerKind::Alpha => Regularizer::Alpha { rate, seed },
            RegularizerKind::Dynamic => {
                Regularizer::Dynamic(DynamicDropout::new(config, hidden_widths, monitor)?)
            }
        })
    }

    /// Training-mode transforms for one batch. Baselines draw fresh noise per
    /// (epoch, batch, layer); dynamic dropout reuses the epoch's lattice masks.
    pub fn batch_transforms(
        &self,
        epoch: usize,
        batch_index: usize,
        batch_rows: usize,
        hidden_widths: &[usize],
    ) -> Result<Vec<SiteTransform>> {
        let noise =
            |rate: f64, seed: u64, f: fn(usize, usize, f64, u64) -> Result<SiteTransform>| {
                hidden_widths
                    .iter()
                    .enumerate()
                    .map(|(l, &w)| {
                        let s = seed::derive(seed, &[epoch as u64, batch_index as u64, l as u64]);
                        f(batch_rows, w, rate, s)
                    })
                    .collect::<Result<Vec<_>>>()
            };
        match self {
            Regularizer::None => Ok(vec![SiteTransform::Identity; hidden_widths.len()]),
            Regularizer::Classical { rate, seed } => noise(*rate, *seed, classical_transform),
            Regularizer::Gaussian { rate, seed } => noise(*rate, *seed, gaussian_transform),
            Regularizer::Alpha { rate, seed } => noise(*rate, *seed, alpha_transform),
            Regularizer::Dynamic(dd) => {
                Ok(dd.masks()?.into_iter().map(SiteTransform::Mask).collect())
            }
        }
    }

    pub fn dynamic(&self) -> Option<&DynamicDropout> {
        match self {
            Regularizer::Dynamic(dd) => Some(dd),
            _ => None,
        }
    }

    /// Live fraction of the lattice driving the current epoch (0 for baselines).
    pub fn live_fraction(&self) -> f64 {
        self.dynamic()
            .map_or(0.0, |dd| dd.lattice().live_fraction())
    }

    /// Epoch-end bookkeeping; returns cells revived (always 0 for baselines).
    pub fn end_epoch(&mut self, epoch: usize, val_loss: f64) -> Result<usize> {
        match self {
            Regularizer::Dynamic(dd) => dd.end_epoch(epoch, val_loss),
            _ => Ok(0),
        }
    }
}
