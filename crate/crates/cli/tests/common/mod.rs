#![allow(dead_code)]

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use veclstm::ingest::write_dataset_csv;
use veclstm::synthetic::{separable_dataset, SyntheticConfig};
use veclstm::vectorizer::VectorizationConfig;

pub fn veclstm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veclstm"))
        .args(args)
        .env_remove("VECLSTM_STORE")
        .output()
        .expect("binary runs")
}

pub fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

pub fn write_dataset(dir: &Path, cfg: &SyntheticConfig) -> PathBuf {
    let ds = separable_dataset(cfg, &VectorizationConfig::default()).unwrap();
    let path = dir.join("dataset.csv");
    write_dataset_csv(&ds, File::create(&path).unwrap()).unwrap();
    path
}

/// A config with reduced widths so end-to-end runs take seconds.
pub fn small_config(dir: &Path, epochs: usize, batch_size: usize) -> PathBuf {
    let path = dir.join("config.json");
    let json = serde_json::json!({
        "train": { "epochs": epochs, "batch_size": batch_size, "learning_rate": 0.01 },
        "model": { "lstm_units": [12, 6], "conv_filters": 8, "fusion_units": 16 }
    });
    fs::write(&path, serde_json::to_vec_pretty(&json).unwrap()).unwrap();
    path
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
