//! Metrics CSV, reactivation event log, and the cross-run summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::regularizers::ReactivationEvent;

pub const METRICS_HEADER: &str =
    "epoch,train_loss,val_loss,train_acc,val_acc,gap,live_mask_fraction,reactivated_cells";
pub const EVENTS_HEADER: &str = "epoch,event,cells";
pub const SUMMARY_HEADER: &str = "run,arch,reg,epochs,final_train_acc,final_val_acc,final_train_loss,final_val_loss,max_val_acc,final_gap";

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    /// `train_acc − val_acc`.
    pub gap: f64,
    /// Live fraction of the lattice that masked this epoch (0 for other regularizers).
    pub live_mask_fraction: f64,
    pub reactivated_cells: usize,
}

impl EpochMetrics {
    pub fn new(
        epoch: usize,
        (train_loss, train_acc): (f64, f64),
        (val_loss, val_acc): (f64, f64),
        live_mask_fraction: f64,
        reactivated_cells: usize,
    ) -> Self {
        Self {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            gap: train_acc - val_acc,
            live_mask_fraction,
            reactivated_cells,
        }
    }
}

pub fn format_metrics(history: &[EpochMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for m in history {
        writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            m.epoch,
            m.train_loss,
            m.val_loss,
            m.train_acc,
            m.val_acc,
            m.gap,
            m.live_mask_fraction,
            m.reactivated_cells
        )
        .expect("writing to a String");
    }
    s
}

pub fn write_metrics(history: &[EpochMetrics], path: &Path) -> Result<()> {
    fs::write(path, format_metrics(history)).map_err(|e| Error::io(path, e))
}

pub fn parse_metrics(text: &str, path: &Path) -> Result<Vec<EpochMetrics>> {
    let malformed = |message: String| Error::Malformed {
        what: "metrics file",
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(malformed("missing or unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(malformed(format!("line {} has {} fields", k + 2, f.len())));
            }
            let real = |i: usize| -> Result<f64> {
                f[i].parse()
                    .map_err(|_| malformed(format!("line {}: bad number {:?}", k + 2, f[i])))
            };
            let int = |i: usize| -> Result<usize> {
                f[i].parse()
                    .map_err(|_| malformed(format!("line {}: bad integer {:?}", k + 2, f[i])))
            };
            Ok(EpochMetrics {
                epoch: int(0)?,
                train_loss: real(1)?,
                val_loss: real(2)?,
                train_acc: real(3)?,
                val_acc: real(4)?,
                gap: real(5)?,
                live_mask_fraction: real(6)?,
                reactivated_cells: int(7)?,
            })
        })
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text, path)
}

pub fn format_events(events: &[ReactivationEvent]) -> String {
    let mut s = String::from(EVENTS_HEADER);
    s.push('\n');
    for e in events {
        writeln!(s, "{},reactivate,{}", e.epoch, e.cells).expect("writing to a String");
    }
    s
}

pub fn write_events(events: &[ReactivationEvent], path: &Path) -> Result<()> {
    fs::write(path, format_events(events)).map_err(|e| Error::io(path, e))
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: String,
    pub arch: String,
    pub reg: String,
    pub epochs: usize,
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub max_val_acc: f64,
    pub final_gap: f64,
}

impl RunSummary {
    pub fn from_history(
        run: &str,
        arch: &str,
        reg: &str,
        history: &[EpochMetrics],
    ) -> Option<Self> {
        let last = history.last()?;
        Some(Self {
            run: run.to_string(),
            arch: arch.to_string(),
            reg: reg.to_string(),
            epochs: history.len(),
            final_train_acc: last.train_acc,
            final_val_acc: last.val_acc,
            final_train_loss: last.train_loss,
            final_val_loss: last.val_loss,
            max_val_acc: history
                .iter()
                .map(|m| m.val_acc)
                .fold(f64::NEG_INFINITY, f64::max),
            final_gap: last.train_acc - last.val_acc,
        })
    }
}

pub fn summarize_run(dir: &Path) -> Result<RunSummary> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let field = |key: &str| -> Result<String> {
        manifest
            .lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
            .ok_or_else(|| Error::Malformed {
                what: "manifest",
                path: manifest_path.clone(),
                message: format!("missing {key:?}"),
            })
    };
    let (arch, reg) = (field("arch")?, field("reg")?);
    let metrics_path = dir.join(METRICS_FILE);
    let history = read_metrics(&metrics_path)?;
    RunSummary::from_history(&dir.display().to_string(), &arch, &reg, &history).ok_or_else(|| {
        Error::Malformed {
            what: "metrics file",
            path: metrics_path,
            message: "no epochs recorded".into(),
        }
    })
}

pub fn format_summary(rows: &[RunSummary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.run,
            r.arch,
            r.reg,
            r.epochs,
            r.final_train_acc,
            r.final_val_acc,
            r.final_train_loss,
            r.final_val_loss,
            r.max_val_acc,
            r.final_gap
        )
        .expect("writing to a String");
    }
    s
}

/// Summarizes each run directory and writes the table to `out`.
pub fn compare(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<RunSummary>> {
    if run_dirs.is_empty() {
        return Err(Error::usage("compare needs at least one run directory"));
    }
    let rows = run_dirs
        .iter()
        .map(|d| summarize_run(d))
        .collect::<Result<Vec<_>>>()?;
    fs::write(out, format_summary(&rows)).map_err(|e| Error::io(out, e))?;
    Ok(rows)
}
