#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn semprox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semprox"))
        .args(args)
        .env_remove("ANNOT_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Writes `value` as `config.json` inside `dir` and returns its path.
pub fn write_config(dir: &Path, value: &serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Gold TSV with `n` synthetic rows, labels cycling over the scale.
pub fn synthetic_gold(n: usize) -> String {
    let mut out = String::from("instance_id\tlemma\tsentence1\tsentence2\ttarget_offsets1\ttarget_offsets2\tgold_label\tannotator_count\n");
    for i in 0..n {
        out.push_str(&format!("s{i:04}\tword{}\tfirst use {i}\tsecond use {i}\t\t\t{}\t2\n", i % 17, i % 4 + 1));
    }
    out
}
