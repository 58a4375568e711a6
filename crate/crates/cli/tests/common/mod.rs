#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sqnet"))
}

/// Runs the binary against `data`, panicking with its stderr on failure.
pub fn sqnet(data: &Path, args: &[&str]) -> Output {
    let out = bin().env("SQNET_DATA_DIR", data).env("RUST_LOG", "warn").args(args).output().unwrap();
    assert!(
        out.status.success(),
        "sqnet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Fresh scratch directory below the cargo target dir.
pub fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A small dataset taken through every stage up to a saved index.
pub fn small_pipeline(data: &Path) {
    sqnet(data, &["toygen", "--classes", "3", "--colors", "3", "--per-class", "12", "--seed", "5"]);
    sqnet(data, &["variants"]);
    sqnet(data, &["sketchify", "--seed", "5"]);
    let quick = ["--epochs", "2", "--samples-per-epoch", "48", "--seed", "5", "--embed-dim", "8", "--input-side", "16"];
    for stage in ["1", "2", "3"] {
        let mut a = vec!["train", "--stage", stage];
        a.extend_from_slice(&quick);
        sqnet(data, &a);
    }
    sqnet(data, &["index"]);
}
