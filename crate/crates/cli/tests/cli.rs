mod common;

use std::fs;

use common::*;
use veclstm::features::{segment_dataset, segment_records, vectorize_segments, SegmentConfig};
use veclstm::ingest::read_dataset_csv;
use veclstm::synthetic::{write_geolife_fixture, GeolifeFixture, SyntheticConfig};
use veclstm::vecstore::{open_store, RecordFilter};
use veclstm::vectorizer::VectorizationConfig;
use veclstm_cli::read_bench_csv;

#[test]
fn ingest_counts_match_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("geolife");
    let counts = write_geolife_fixture(&archive, &GeolifeFixture::default()).unwrap();
    let out = dir.path().join("out");
    let run = veclstm(&["ingest", s(&archive), "--out-dir", s(&out)]);
    assert!(run.status.success(), "{}", text(&run));
    assert!(text(&run).contains(&format!("{} rows from 2 users", counts.labeled_points)));
    let report = read_json(&out.join("ingest_report.json"));
    assert_eq!(report["rows"], counts.labeled_points);
    assert_eq!(report["run"]["command"], "ingest");
    let ds = read_dataset_csv(fs::File::open(out.join("dataset.csv")).unwrap()).unwrap();
    assert_eq!(ds.label_counts(), counts.label_counts);
}

#[test]
fn archive_without_labels_gives_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("geolife");
    write_geolife_fixture(
        &archive,
        &GeolifeFixture {
            users: 1,
            unlabeled_last_user: true,
            ..Default::default()
        },
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = veclstm(&["ingest", s(&archive), "--out-dir", s(&out)]);
    assert!(run.status.success(), "{}", text(&run));
    assert!(text(&run).contains("warning: no labelled points"));
    assert_eq!(fs::read_to_string(out.join("dataset.csv")).unwrap().trim(), "time,lat,lon,alt,label,user,metadata");
    assert_eq!(read_json(&out.join("ingest_report.json"))["rows"], 0);
}

#[test]
fn strict_ingest_fails_on_a_malformed_file() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("geolife");
    let counts = write_geolife_fixture(&archive, &GeolifeFixture::default()).unwrap();
    fs::write(
        archive.join("Data/000/Trajectory/20090101000000.plt"),
        "1\n2\n3\n4\n5\n6\nnot,a,valid,row\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let lenient = veclstm(&["ingest", s(&archive), "--out-dir", s(&out)]);
    assert!(lenient.status.success(), "{}", text(&lenient));
    assert!(text(&lenient).contains("20090101000000.plt"));
    assert_eq!(read_json(&out.join("ingest_report.json"))["rows"], counts.labeled_points);

    let strict = veclstm(&["ingest", s(&archive), "--out-dir", s(&out), "--strict"]);
    assert!(!strict.status.success());
    assert!(text(&strict).contains("--strict"), "{}", text(&strict));
}

#[test]
fn vectorize_grows_the_store_by_the_segment_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(
        dir.path(),
        &SyntheticConfig {
            segments: 9,
            points_per_segment: 12,
            users: 3,
            ..Default::default()
        },
    );
    for store in [format!("{}", dir.path().join("vectors.vlvs").display()), format!("sqlite://{}", dir.path().join("v.db").display())] {
        for round in 1..=2u64 {
            let run = veclstm(&["vectorize", s(&data), "--store", &store, "--out-dir", s(dir.path())]);
            assert!(run.status.success(), "{}", text(&run));
            let report = read_json(&dir.path().join("vectorize_report.json"));
            assert_eq!(report["segments"], 9);
            assert_eq!(report["store_count_before"], 9 * (round - 1));
            assert_eq!(report["store_count_after"], 9 * round);
            assert!(report["vectorization_seconds"].as_f64().unwrap() >= 0.0);
        }
    }
}

#[test]
fn store_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 3, points_per_segment: 5, ..Default::default() });
    let store = dir.path().join("env.vlvs");
    let run = std::process::Command::new(env!("CARGO_BIN_EXE_veclstm"))
        .args(["vectorize", s(&data), "--out-dir", s(dir.path())])
        .env("VECLSTM_STORE", &store)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", text(&run));
    assert!(store.exists());
    let missing = veclstm(&["vectorize", s(&data), "--out-dir", s(dir.path())]);
    assert!(!missing.status.success());
    assert!(text(&missing).contains("VECLSTM_STORE"));
}

#[test]
fn file_store_survives_the_process() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 12, points_per_segment: 10, ..Default::default() });
    let store = dir.path().join("vectors.vlvs");
    let run = veclstm(&["vectorize", s(&data), "--store", s(&store), "--out-dir", s(dir.path())]);
    assert!(run.status.success(), "{}", text(&run));

    let ds = read_dataset_csv(fs::File::open(&data).unwrap()).unwrap();
    let index = segment_dataset(&ds, &SegmentConfig::default());
    let grids = vectorize_segments(&ds, &index, &VectorizationConfig::default()).unwrap();
    let expected = segment_records(&index, &grids);

    let mut handle = open_store(s(&store), 10).unwrap();
    handle.init_schema().unwrap();
    let stored = handle.fetch(&RecordFilter::default()).unwrap();
    assert_eq!(stored.len(), expected.len());
    for (i, (got, want)) in stored.iter().zip(&expected).enumerate() {
        assert_eq!(got.record_id, i as u64 + 1);
        assert_eq!((&got.user, got.label, got.created_at), (&want.user, want.label, want.created_at));
        assert!(got.vector.iter().zip(&want.vector).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
    let bytes = fs::read(&store).unwrap();
    handle.close().unwrap();
    assert_eq!(fs::read(&store).unwrap(), bytes, "reading must not rewrite the file");

    // a second process trains from the stored heatmaps
    let cfg = small_config(dir.path(), 2, 32);
    let out = dir.path().join("train");
    let train = veclstm(&["train", s(&data), "--arch", "hybrid", "--store", s(&store), "--config", s(&cfg), "--out-dir", s(&out)]);
    assert!(train.status.success(), "{}", text(&train));
}

#[test]
fn unknown_architecture_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 3, points_per_segment: 5, ..Default::default() });
    let run = veclstm(&["train", s(&data), "--arch", "gru"]);
    assert_eq!(run.status.code(), Some(2));
    assert!(text(&run).contains("invalid value 'gru'"), "{}", text(&run));
}

#[test]
fn missing_input_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let run = veclstm(&["train", "/no/such/dataset.csv", "--arch", "lstm", "--out-dir", s(&out)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn hybrid_separates_the_small_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 15, points_per_segment: 20, ..Default::default() });
    let cfg = small_config(dir.path(), 20, 32);
    let out = dir.path().join("out");
    let run = veclstm(&["train", s(&data), "--arch", "hybrid", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert!(run.status.success(), "{}", text(&run));
    let metrics = read_json(&out.join("metrics.json"));
    assert!(metrics["test"]["accuracy"].as_f64().unwrap() >= 0.9, "{}", metrics["test"]);
    for f in ["confusion.csv", "roc_micro.csv", "train_report.json", "model.ckpt", "model.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn repeated_training_writes_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 12, points_per_segment: 15, ..Default::default() });
    let cfg = small_config(dir.path(), 3, 32);
    let out = dir.path().join("out");
    for arch in ["lstm", "veclstm", "hybrid"] {
        let args = ["train", s(&data), "--arch", arch, "--config", s(&cfg), "--seed", "9", "--out-dir", s(&out)];
        assert!(veclstm(&args).status.success());
        let first = fs::read(out.join("metrics.json")).unwrap();
        let ckpt = fs::read(out.join("model.ckpt")).unwrap();
        assert!(veclstm(&args).status.success());
        assert_eq!(fs::read(out.join("metrics.json")).unwrap(), first, "{arch}");
        assert_eq!(fs::read(out.join("model.ckpt")).unwrap(), ckpt, "{arch}");
        let text = String::from_utf8(first).unwrap();
        assert!(!text.contains("seconds"), "timings leaked into metrics.json");
        assert_eq!(read_json(&out.join("metrics.json"))["run"]["seed"], 9);
    }
}

#[test]
fn bench_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), &SyntheticConfig { segments: 12, points_per_segment: 15, ..Default::default() });
    let cfg = small_config(dir.path(), 2, 32);
    let out = dir.path().join("out");
    let store = format!("sqlite://{}", dir.path().join("bench.db").display());
    let run = veclstm(&["bench", s(&data), "--config", s(&cfg), "--store", &store, "--out-dir", s(&out)]);
    assert!(run.status.success(), "{}", text(&run));

    let rows = read_bench_csv(&out.join("bench.csv")).unwrap();
    let variants: Vec<&str> = rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(variants, ["lstm", "veclstm", "hybrid_novec", "hybrid"]);
    let json = read_json(&out.join("bench.json"));
    for p in json["pipelines"].as_array().unwrap() {
        let time = |name: &serde_json::Value| rows.iter().find(|r| r.variant == name.as_str().unwrap()).unwrap().train_seconds;
        let (novec, vec) = (time(&p["novec_variant"]), time(&p["vec_variant"]));
        let recomputed = 100.0 * (novec - vec) / novec;
        assert!((recomputed - p["reduction_pct"].as_f64().unwrap()).abs() < 1e-9, "{p}");
    }
    let workload = &json["store_workload"];
    assert_eq!(workload["backend"], "sql");
    assert_eq!(workload["records_inserted"], 12);
    assert_eq!(workload["records_fetched"], 12);
}
