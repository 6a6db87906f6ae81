use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dyndrop::harness::{
    self, parse_list, Architecture, BlobsConfig, DataSource, RunConfig, METRICS_FILE,
};
use dyndrop::nn::save_checkpoint;
use dyndrop::regularizers::{RegularizerKind, DEFAULT_MIN_DELTA, DEFAULT_PATIENCE};

#[derive(Parser)]
#[command(
    name = "dyndrop",
    version,
    about = "Game-of-Life dropout experiments on dense networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Train one configuration and write metrics, manifest and lattice snapshots.
    Train(TrainArgs),
    /// Summarize finished runs into one CSV table.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "summary.csv")]
        out: PathBuf,
    },
    /// Repeat a run from its manifest.
    Rerun {
        manifest: PathBuf,
        /// Output directory (defaults to the one recorded in the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// arch1 | arch2 | arch3 | custom:<w1,w2,...>
    #[arg(long)]
    arch: String,
    /// none | classical | gaussian | alpha | dynamic
    #[arg(long, default_value = "none")]
    reg: String,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = harness::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = harness::DEFAULT_BATCH)]
    batch: usize,
    #[arg(long, default_value_t = harness::DEFAULT_LEARNING_RATE)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory holding the CIFAR-10 binary batches.
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    data_dir: Option<PathBuf>,
    /// Use seeded Gaussian blobs instead of CIFAR-10.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "1,10,20")]
    snapshot_epochs: String,
    #[arg(long, default_value_t = DEFAULT_PATIENCE)]
    patience: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_DELTA)]
    min_delta: f64,
    #[arg(long, default_value_t = 0.1)]
    reactivation_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    lattice_density: f64,
    /// Keep only the first N training records.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Keep only the first N validation records.
    #[arg(long)]
    val_limit: Option<usize>,
    #[arg(long, default_value_t = BlobsConfig::default().per_class)]
    blobs_per_class: usize,
    #[arg(long, default_value_t = BlobsConfig::default().classes)]
    blobs_classes: usize,
    #[arg(long, default_value_t = BlobsConfig::default().dim)]
    blobs_dim: usize,
    #[arg(long, default_value_t = BlobsConfig::default().separation)]
    blobs_separation: f64,
    /// Also dump the trained weights as weights.ldnn.
    #[arg(long)]
    save_weights: bool,
}

impl TrainArgs {
    fn to_config(&self) -> Result<RunConfig> {
        let architecture: Architecture = self.arch.parse()?;
        let kind: RegularizerKind = self.reg.parse()?;
        let data = match &self.data_dir {
            Some(dir) => DataSource::Cifar10 {
                dir: dir.clone(),
                train_limit: self.train_limit,
                val_limit: self.val_limit,
            },
            None => DataSource::Synthetic(BlobsConfig {
                per_class: self.blobs_per_class,
                classes: self.blobs_classes,
                dim: self.blobs_dim,
                separation: self.blobs_separation,
                ..BlobsConfig::default()
            }),
        };
        let mut config = RunConfig::new(architecture, kind, data, &self.out).with_seed(self.seed);
        config.regularizer.rate = self.rate;
        config.regularizer.lattice_density = self.lattice_density;
        config.regularizer.reactivation_fraction = self.reactivation_fraction;
        config.epochs = self.epochs;
        config.batch_size = self.batch;
        config.learning_rate = self.lr;
        config.patience = self.patience;
        config.min_delta = self.min_delta;
        config.snapshot_epochs = parse_list(&self.snapshot_epochs)
            .with_context(|| format!("invalid --snapshot-epochs {:?}", self.snapshot_epochs))?;
        config.validate()?;
        Ok(config)
    }
}

fn train(config: &RunConfig, save_weights: bool) -> Result<()> {
    let outcome = harness::run(config)?;
    if config.epochs == 0 {
        eprintln!("epochs = 0: wrote manifest only");
        return Ok(());
    }
    if save_weights {
        save_checkpoint(&outcome.network, &config.output_dir.join("weights.ldnn"))?;
    }
    if let Some(last) = outcome.metrics.last() {
        eprintln!(
            "epoch {}: train acc {:.4}, val acc {:.4}, gap {:.4} -> {}",
            last.epoch,
            last.train_acc,
            last.val_acc,
            last.gap,
            config.output_dir.join(METRICS_FILE).display()
        );
    }
    Ok(())
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let config = args.to_config()?;
            train(&config, args.save_weights)
        }
        Command::Compare { dirs, out } => {
            let rows = harness::compare(&dirs, &out)?;
            eprintln!("summarized {} run(s) into {}", rows.len(), out.display());
            Ok(())
        }
        Command::Rerun { manifest, out } => {
            let text = fs::read_to_string(&manifest)
                .with_context(|| format!("reading {}", manifest.display()))?;
            let mut config = RunConfig::parse_manifest(&text)?;
            if let Some(out) = out {
                config.output_dir = out;
            }
            if config.output_dir.as_os_str().is_empty() {
                bail!("manifest does not name an output directory");
            }
            train(&config, false)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
