//! Experiment driver: builds the network and regularizer from a
//! [`RunConfig`], runs the epoch loop, and records metrics and snapshots.

mod config;
mod report;

use std::fs;
use std::path::PathBuf;

pub use config::{
    parse_list, Architecture, BlobsConfig, DataSource, RunConfig, DEFAULT_BATCH, DEFAULT_EPOCHS,
    DEFAULT_LEARNING_RATE, DEFAULT_SNAPSHOT_EPOCHS,
};
pub use report::{
    compare, format_events, format_metrics, format_summary, parse_metrics, read_metrics,
    summarize_run, write_events, write_metrics, EpochMetrics, RunSummary, EVENTS_FILE,
    EVENTS_HEADER, MANIFEST_FILE, METRICS_FILE, METRICS_HEADER, SUMMARY_HEADER,
};

use crate::data::{self, BatchPlan, Dataset};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::nn::{self, backward, forward_with, init_network, sgd_step, Network};
use crate::regularizers::{OverfitMonitor, ReactivationEvent, Regularizer};
use crate::seed;

/// Rows per forward pass during evaluation.
const EVAL_CHUNK: usize = 1000;

/// Mean cross-entropy and argmax accuracy with every regularizer disabled.
pub fn evaluate(network: &Network, dataset: &Dataset) -> Result<(f64, f64)> {
    if dataset.dim() != network.input_dim() || dataset.class_count != network.class_count() {
        return Err(Error::shape(
            "evaluate",
            format!(
                "{} features / {} classes",
                network.input_dim(),
                network.class_count()
            ),
            format!("{} / {}", dataset.dim(), dataset.class_count),
        ));
    }
    if dataset.is_empty() {
        return Err(Error::usage("cannot evaluate on an empty dataset"));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..dataset.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, y) = dataset.gather(chunk);
        let probs = network.predict(&x)?;
        loss_sum += nn::cross_entropy(&y, &probs)? * chunk.len() as f64;
        correct += nn::argmax_rows(&probs)
            .iter()
            .zip(chunk)
            .filter(|(&p, &i)| p == dataset.labels[i])
            .count();
    }
    let n = dataset.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub events: Vec<ReactivationEvent>,
    /// `(epoch, lattice used during that epoch)` for each requested snapshot.
    pub snapshots: Vec<(usize, Lattice)>,
    pub network: Network,
}

/// Loads the configured data as `(train, validation)`.
pub fn load_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    match &config.data {
        DataSource::Cifar10 {
            dir,
            train_limit,
            val_limit,
        } => data::load_cifar10_limited(dir, *train_limit, *val_limit),
        DataSource::Synthetic(b) => {
            let pool = data::make_blobs(
                b.per_class,
                b.classes,
                b.dim,
                b.separation,
                seed::derive(config.seed, &[seed::stream::BLOBS]),
            )?;
            let n_val = ((pool.len() as f64) * b.val_fraction).round() as usize;
            let n_val = n_val.clamp(1, pool.len() - 1);
            let (mut train, mut val) = pool.split_at(pool.len() - n_val);
            train.name = "blobs-train".into();
            val.name = "blobs-validation".into();
            Ok((train, val))
        }
    }
}

/// Trains on in-memory data. No files are touched.
pub fn train(config: &RunConfig, train_set: &Dataset, val_set: &Dataset) -> Result<RunOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::config(
            "training and validation sets must be non-empty",
        ));
    }
    if train_set.dim() != val_set.dim() || train_set.class_count != val_set.class_count {
        return Err(Error::config(
            "training and validation sets disagree on shape",
        ));
    }
    let widths = config.architecture.hidden_widths();
    let mut network = init_network(&widths, train_set.dim(), train_set.class_count, config.seed)?;
    let monitor = OverfitMonitor::new(config.patience, config.min_delta)?;
    let mut regularizer = Regularizer::new(&config.regularizer, &widths, monitor)?;
    let plan = BatchPlan::new(config.batch_size, config.seed)?;

    let mut metrics = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    for epoch in 1..=config.epochs {
        if let Some(dd) = regularizer.dynamic() {
            if config.snapshot_epochs.contains(&epoch) {
                snapshots.push((epoch, dd.lattice().clone()));
            }
        }
        let live_fraction = regularizer.live_fraction();
        for (b, idx) in plan
            .index_batches(train_set.len(), epoch)
            .iter()
            .enumerate()
        {
            let (x, y) = train_set.gather(idx);
            let transforms = regularizer.batch_transforms(epoch, b, idx.len(), &widths)?;
            let (_, trace) = forward_with(&network, &x, transforms)?;
            let grads = backward(&network, &trace, &y)?;
            network = sgd_step(network, &grads, config.learning_rate)?;
        }
        let train_eval = evaluate(&network, train_set)?;
        let val_eval = evaluate(&network, val_set)?;
        let revived = regularizer.end_epoch(epoch, val_eval.0)?;
        metrics.push(EpochMetrics::new(
            epoch,
            train_eval,
            val_eval,
            live_fraction,
            revived,
        ));
    }
    let events = regularizer
        .dynamic()
        .map(|dd| dd.events().to_vec())
        .unwrap_or_default();
    Ok(RunOutcome {
        metrics,
        events,
        snapshots,
        network,
    })
}

/// Full run: validates, loads data, writes the manifest, trains, then writes
/// `metrics.csv`, `events.csv` and `lattice_epoch_<t>.pbm` into the output directory.
/// With zero epochs only the manifest is written.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let (train_set, val_set) = load_data(config)?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    config.write_manifest(&out.join(MANIFEST_FILE))?;
    if config.epochs == 0 {
        let network = init_network(
            &config.architecture.hidden_widths(),
            train_set.dim(),
            train_set.class_count,
            config.seed,
        )?;
        return Ok(RunOutcome {
            metrics: Vec::new(),
            events: Vec::new(),
            snapshots: Vec::new(),
            network,
        });
    }
    let outcome = train(config, &train_set, &val_set)?;
    write_outputs(config, &outcome)?;
    Ok(outcome)
}

fn write_outputs(config: &RunConfig, outcome: &RunOutcome) -> Result<Vec<PathBuf>> {
    let out = &config.output_dir;
    let mut written = vec![out.join(METRICS_FILE)];
    write_metrics(&outcome.metrics, &written[0])?;
    if config.regularizer.kind == crate::regularizers::RegularizerKind::Dynamic {
        let events = out.join(EVENTS_FILE);
        write_events(&outcome.events, &events)?;
        written.push(events);
    }
    for (epoch, lattice) in &outcome.snapshots {
        written.push(lattice.write_snapshot(out, *epoch)?);
    }
    Ok(written)
}
