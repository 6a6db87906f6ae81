use std::fs;
use std::path::Path;

use dyndrop::data::{
    load_cifar10_limited, CIFAR_FILE_BYTES, CIFAR_RECORD, CIFAR_RECORDS_PER_FILE, CIFAR_TEST_FILE,
    CIFAR_TRAIN_FILES,
};
use dyndrop::Error;

/// Record `k` of file `f`: label `(k + f) % 10`, red plane all 255, green plane
/// a ramp, blue plane zero.
fn write_fake_file(path: &Path, f: usize) {
    let mut buf = Vec::with_capacity(CIFAR_FILE_BYTES as usize);
    for k in 0..CIFAR_RECORDS_PER_FILE {
        buf.push(((k + f) % 10) as u8);
        buf.extend(std::iter::repeat_n(255u8, 1024));
        buf.extend((0..1024).map(|p| (p % 256) as u8));
        buf.extend(std::iter::repeat_n(0u8, 1024));
    }
    fs::write(path, buf).unwrap();
}

fn fake_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (f, name) in CIFAR_TRAIN_FILES.iter().enumerate() {
        write_fake_file(&dir.path().join(name), f);
    }
    write_fake_file(&dir.path().join(CIFAR_TEST_FILE), 7);
    dir
}

#[test]
fn ingestion_contract() {
    let dir = fake_dir();

    let (train, val) = load_cifar10_limited(dir.path(), Some(10_005), Some(12)).unwrap();
    assert_eq!(train.len(), 10_005);
    assert_eq!(val.len(), 12);
    assert_eq!(train.dim(), 3072);
    // the limit spills into the second file, whose labels are shifted by one
    assert_eq!(train.labels[0], 0);
    assert_eq!(train.labels[10_000], 1);
    assert_eq!(val.labels[0], 7);
    let row = train.features.row(3);
    assert_eq!(row[0], 1.0);
    assert_eq!(row[1023], 1.0);
    assert_eq!(row[1024], 0.0);
    assert_eq!(row[1024 + 255], 1.0);
    assert_eq!(row[1024 + 1], 1.0 / 255.0);
    assert_eq!(row[2048], 0.0);
    assert!(train
        .features
        .as_slice()
        .iter()
        .all(|x| (0.0..=1.0).contains(x)));

    // label byte out of range, reported with its byte offset
    let bad = dir.path().join(CIFAR_TRAIN_FILES[0]);
    let mut bytes = fs::read(&bad).unwrap();
    bytes[5 * CIFAR_RECORD] = 10;
    fs::write(&bad, &bytes).unwrap();
    match load_cifar10_limited(dir.path(), Some(100), Some(1)) {
        Err(Error::Ingest { path, offset, .. }) => {
            assert_eq!(path, bad);
            assert_eq!(offset, (5 * CIFAR_RECORD) as u64);
        }
        other => panic!("expected ingestion error, got {other:?}"),
    }
    bytes[5 * CIFAR_RECORD] = 3;
    fs::write(&bad, &bytes).unwrap();

    // truncated by one byte
    let victim = dir.path().join(CIFAR_TRAIN_FILES[3]);
    fs::write(&victim, &bytes[..bytes.len() - 1]).unwrap();
    let err = load_cifar10_limited(dir.path(), Some(1), Some(1)).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Ingest { .. }));
    assert!(msg.contains("data_batch_4.bin"), "{msg}");
    assert!(
        msg.contains("30730000") && msg.contains("30729999"),
        "{msg}"
    );

    // missing file
    fs::remove_file(&victim).unwrap();
    let err = load_cifar10_limited(dir.path(), Some(1), Some(1)).unwrap_err();
    assert!(err.to_string().contains("data_batch_4.bin"));
}
