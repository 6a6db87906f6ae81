use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dyndrop");

fn dyndrop(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn dyndrop")
}

fn train_synthetic(out: &Path, reg: &str, epochs: &str) -> Output {
    let args = [
        "train",
        "--arch",
        "custom:8,8",
        "--reg",
        reg,
        "--synthetic",
        "--epochs",
        epochs,
        "--batch",
        "32",
        "--lr",
        "0.05",
        "--seed",
        "3",
        "--snapshot-epochs",
        "1,5,10",
        "--blobs-per-class",
        "40",
        "--out",
        out.to_str().unwrap(),
    ];
    dyndrop(&args)
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn dynamic_run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dd");
    let res = train_synthetic(&out, "dynamic", "12");
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(
        sorted_files(&out),
        [
            "events.csv",
            "lattice_epoch_1.pbm",
            "lattice_epoch_10.pbm",
            "lattice_epoch_5.pbm",
            "manifest.txt",
            "metrics.csv"
        ]
    );
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,train_loss,val_loss,train_acc,val_acc,gap,live_mask_fraction,reactivated_cells"
    );
    assert_eq!(lines.count(), 12);
    let pbm = fs::read_to_string(out.join("lattice_epoch_1.pbm")).unwrap();
    assert!(pbm.starts_with("P1\n8 2\n"), "{pbm}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for reg in ["dynamic", "classical", "gaussian", "alpha"] {
        let a = dir.path().join(format!("{reg}_a"));
        let b = dir.path().join(format!("{reg}_b"));
        assert!(train_synthetic(&a, reg, "12").status.success());
        assert!(train_synthetic(&b, reg, "12").status.success());
        for name in sorted_files(&a) {
            if name == "manifest.txt" {
                continue; // records the output directory
            }
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{reg}: {name} differs"
            );
        }
    }
}

#[test]
fn zero_epochs_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    let res = train_synthetic(&out, "dynamic", "0");
    assert!(res.status.success());
    assert_eq!(sorted_files(&out), ["manifest.txt"]);
}

#[test]
fn unknown_preset_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let res = dyndrop(&[
        "train",
        "--arch",
        "arch9",
        "--synthetic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("arch9"));
    assert!(!out.exists());

    let res = dyndrop(&[
        "train",
        "--arch",
        "arch1",
        "--reg",
        "bogus",
        "--synthetic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn dynamic_rejects_unequal_widths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let res = dyndrop(&[
        "train",
        "--arch",
        "custom:8,4",
        "--reg",
        "dynamic",
        "--synthetic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn missing_data_dir_is_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let res = dyndrop(&[
        "train",
        "--arch",
        "arch3",
        "--data-dir",
        dir.path().join("nowhere").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
}

#[test]
fn compare_summarizes_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("none");
    let b = dir.path().join("dynamic");
    assert!(train_synthetic(&a, "none", "12").status.success());
    assert!(train_synthetic(&b, "dynamic", "12").status.success());
    let summary = dir.path().join("summary.csv");
    let res = dyndrop(&[
        "compare",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(summary).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "run,arch,reg,epochs,final_train_acc,final_val_acc,final_train_loss,final_val_loss,max_val_acc,final_gap"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",none,12,"));
    assert!(lines[2].contains(",dynamic,12,"));

    let res = dyndrop(&["compare", dir.path().join("absent").to_str().unwrap()]);
    assert!(!res.status.success());
}

#[test]
fn rerun_reproduces_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(train_synthetic(&first, "dynamic", "12").status.success());
    let second = dir.path().join("second");
    let res = dyndrop(&[
        "rerun",
        first.join("manifest.txt").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for name in ["metrics.csv", "events.csv", "lattice_epoch_10.pbm"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap()
        );
    }
}
