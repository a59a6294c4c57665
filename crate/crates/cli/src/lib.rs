//! Subcommands behind the `veclstm` binary.
//!
//! Every command writes a JSON report that embeds the full effective
//! [`RunConfig`], so a report is enough to rerun it.

mod report;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use veclstm::features::{
    grids_from_records, segment_dataset, segment_records, vectorize_segments, FeatureLayout, FeatureSource,
    OnTheFlyFeatures, SegmentConfig, SegmentIndex, VectorizedFeatures,
};
use veclstm::ingest::{self, ActivityLabel, Dataset};
use veclstm::metrics::{self, MetricsBundle, RegressionBasis};
use veclstm::models::{
    build_hybrid_with, build_lstm_stack, build_veclstm, Architecture, HybridSizes, ModelDescription, ModelSpec,
};
use veclstm::nn::{write_checkpoint, OutputActivation, ParamBlocks};
use veclstm::trainer::{
    benchmark_pipelines, evaluate_indices, make_splits, predict_proba, train_model, BenchmarkReport, EpochStats, TrainConfig,
    TrainOutcome, TrainReport,
};
use veclstm::vecstore::{open_store, RecordFilter};
use veclstm::vectorizer::VectorizationConfig;

pub use report::{read_bench_csv, BenchRow, BENCH_CSV_HEADER};

/// Environment variable supplying the default `--store`.
pub const STORE_ENV: &str = "VECLSTM_STORE";

#[derive(Debug, Parser)]
#[command(name = "veclstm", version, about = "GPS trajectory vectorization and activity recognition")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run seed; overrides `train.seed` from --config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with `train`, `vectorization`, `segments`, `model` and
    /// `regression_basis` sections; omitted fields keep their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `sqlite://<path>`, `sqlite::memory:` or a file path for the binary store.
    #[arg(long, global = true, env = STORE_ENV)]
    pub store: Option<String>,
    /// Treat per-file ingest errors as fatal.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a GeoLife archive into the dataset CSV.
    Ingest {
        geolife_dir: PathBuf,
        /// Defaults to `<out-dir>/dataset.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute segment heatmaps and write them to the store.
    Vectorize { dataset: PathBuf },
    /// Train and evaluate one architecture.
    Train {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        arch: Arch,
    },
    /// Time every architecture with and without precomputed features.
    Bench { dataset: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Lstm,
    Veclstm,
    Hybrid,
}

impl Arch {
    pub fn architecture(self) -> Architecture {
        match self {
            Arch::Lstm => Architecture::LstmBaseline,
            Arch::Veclstm => Architecture::VecLstm,
            Arch::Hybrid => Architecture::Hybrid,
        }
    }
}

/// Optional model size overrides; unset fields keep the default sizes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub lstm_units: Option<Vec<usize>>,
    pub lstm_output_activation: OutputActivation,
    pub conv_filters: Option<usize>,
    pub fusion_units: Option<usize>,
}

/// Everything configurable from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub vectorization: VectorizationConfig,
    pub segments: SegmentConfig,
    pub model: ModelOverrides,
    pub regression_basis: RegressionBasis,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn model_spec(&self, arch: Arch) -> ModelSpec {
        let mut spec = match arch {
            Arch::Lstm => build_lstm_stack(1),
            Arch::Veclstm => build_veclstm(1),
            Arch::Hybrid => {
                let mut sizes = HybridSizes::default();
                sizes.grid.grid_size = self.vectorization.grid_size;
                build_hybrid_with(&sizes)
            }
        };
        if let Some(units) = &self.model.lstm_units {
            spec.lstm_units = units.clone();
        }
        spec.lstm_output_activation = self.model.lstm_output_activation;
        if let (Some(g), Some(filters)) = (&mut spec.grid, self.model.conv_filters) {
            g.filters = filters;
        }
        if let (Some(f), Some(units)) = (&mut spec.fusion_units, self.model.fusion_units) {
            *f = units;
        }
        spec
    }
}

/// The effective configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub store: Option<String>,
    pub strict: bool,
    pub arch: Option<Arch>,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut pipeline = match &cli.common.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = cli.common.seed {
            pipeline.train.seed = seed;
        }
        let (command, input, output, arch) = match &cli.command {
            Command::Ingest { geolife_dir, output } => ("ingest", geolife_dir.clone(), output.clone(), None),
            Command::Vectorize { dataset } => ("vectorize", dataset.clone(), None, None),
            Command::Train { dataset, arch } => ("train", dataset.clone(), None, Some(*arch)),
            Command::Bench { dataset } => ("bench", dataset.clone(), None, None),
        };
        Ok(RunConfig {
            command: command.into(),
            input,
            output,
            out_dir: cli.common.out_dir.clone(),
            store: cli.common.store.clone(),
            strict: cli.common.strict,
            arch,
            seed: pipeline.train.seed,
            pipeline,
        })
    }

    /// Checks inputs exist and the output directory is usable.
    pub fn validate_paths(&self) -> Result<()> {
        if !self.input.exists() {
            bail!("input {} does not exist", self.input.display());
        }
        if self.command == "ingest" && !self.input.is_dir() {
            bail!("{} is not a directory", self.input.display());
        }
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        Ok(())
    }
}

/// Parses arguments and runs the selected command.
pub fn run(cli: Cli) -> Result<()> {
    let run = RunConfig::from_cli(&cli)?;
    run.validate_paths()?;
    match run.command.as_str() {
        "ingest" => cmd_ingest(&run).map(|s| println!("{}", s.summary_line())),
        "vectorize" => cmd_vectorize(&run).map(|s| println!("{}", s.summary_line())),
        "train" => cmd_train(&run).map(|s| println!("{}", s.summary_line())),
        "bench" => cmd_bench(&run).map(|s| println!("{}", s.summary_line())),
        other => bail!("unknown command {other}"),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    ingest::read_dataset_csv(BufReader::new(file)).with_context(|| format!("reading dataset {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub run: RunConfig,
    pub dataset_path: PathBuf,
    pub users_seen: usize,
    pub users_with_labels: usize,
    pub points_seen: usize,
    pub rows: usize,
    pub rejected_modes: usize,
    pub label_counts: Vec<(String, usize)>,
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

impl IngestSummary {
    pub fn summary_line(&self) -> String {
        let labels: Vec<String> = self.label_counts.iter().map(|(l, n)| format!("{l}={n}")).collect();
        format!(
            "ingest: {} rows from {} users ({} with labels); {}",
            self.rows,
            self.users_seen,
            self.users_with_labels,
            labels.join(" ")
        )
    }
}

/// Parses the archive and writes the 7-column dataset CSV.
pub fn cmd_ingest(run: &RunConfig) -> Result<IngestSummary> {
    let scan = ingest::scan_geolife(&run.input).context("ingest: scanning archive")?;
    let failures: Vec<String> = scan.failures.iter().map(|f| f.to_string()).collect();
    for f in &failures {
        eprintln!("warning: {f}");
    }
    if run.strict && !failures.is_empty() {
        bail!("ingest: {} file(s) failed to parse (--strict)", failures.len());
    }
    let mut warnings = Vec::new();
    let users_with_labels = scan.groups.len();
    let (users_seen, points_seen, rejected_modes) = (scan.users_seen, scan.points_seen, scan.rejected_modes);
    let dataset_path = run.output.clone().unwrap_or_else(|| run.out_dir.join("dataset.csv"));
    let file = File::create(&dataset_path).with_context(|| format!("ingest: creating {}", dataset_path.display()))?;
    let (rows, counts) = if scan.labeled_points() == 0 {
        let msg = "no labelled points found; wrote an empty dataset".to_string();
        eprintln!("warning: {msg}");
        warnings.push(msg);
        csv::Writer::from_writer(file).write_record(ingest::DATASET_CSV_HEADER)?;
        (0, [0; ActivityLabel::COUNT])
    } else {
        let dataset = ingest::build_dataset(scan.groups, &run.pipeline.vectorization).context("ingest: building dataset")?;
        ingest::write_dataset_csv(&dataset, BufWriter::new(file)).context("ingest: writing dataset")?;
        (dataset.len(), dataset.label_counts())
    };
    let summary = IngestSummary {
        run: run.clone(),
        dataset_path,
        users_seen,
        users_with_labels,
        points_seen,
        rows,
        rejected_modes,
        label_counts: ActivityLabel::ALL.iter().map(|l| (l.name().to_string(), counts[l.code() as usize])).collect(),
        failures,
        warnings,
    };
    write_json(&run.out_dir.join("ingest_report.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorizeSummary {
    pub run: RunConfig,
    pub backend: String,
    pub samples: usize,
    pub segments: usize,
    pub records_inserted: usize,
    pub store_count_before: u64,
    pub store_count_after: u64,
    pub vectorization_seconds: f64,
    pub insert_seconds: f64,
}

impl VectorizeSummary {
    pub fn summary_line(&self) -> String {
        format!(
            "vectorize: {} samples -> {} segment heatmaps in {:.3}s; store count {} -> {}",
            self.samples, self.segments, self.vectorization_seconds, self.store_count_before, self.store_count_after
        )
    }
}

fn store_descriptor(run: &RunConfig) -> Result<&str> {
    run.store
        .as_deref()
        .with_context(|| format!("no store given; pass --store or set {STORE_ENV}"))
}

/// Computes one heatmap per trajectory segment and appends them to the store.
pub fn cmd_vectorize(run: &RunConfig) -> Result<VectorizeSummary> {
    let descriptor = store_descriptor(run)?;
    let dataset = load_dataset(&run.input).context("vectorize: loading")?;
    let cfg = &run.pipeline.vectorization;
    let mut store = open_store(descriptor, cfg.grid_size).context("vectorize: opening store")?;
    store.init_schema().context("vectorize: initializing store")?;
    let before = store.count()?;

    let started = Instant::now();
    let index = segment_dataset(&dataset, &run.pipeline.segments);
    let grids = vectorize_segments(&dataset, &index, cfg).context("vectorize: computing heatmaps")?;
    let vectorization_seconds = started.elapsed().as_secs_f64();

    let records = segment_records(&index, &grids);
    let started = Instant::now();
    let inserted = store.insert_batch(&records).context("vectorize: writing store")?;
    let insert_seconds = started.elapsed().as_secs_f64();
    let after = store.count()?;
    let backend = store.backend().to_string();
    store.close().context("vectorize: closing store")?;

    let summary = VectorizeSummary {
        run: run.clone(),
        backend,
        samples: dataset.len(),
        segments: index.segments.len(),
        records_inserted: inserted,
        store_count_before: before,
        store_count_after: after,
        vectorization_seconds,
        insert_seconds,
    };
    write_json(&run.out_dir.join("vectorize_report.json"), &summary)?;
    Ok(summary)
}

/// Deterministic part of a training run; contains no timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub run: RunConfig,
    pub model: ModelDescription,
    pub pipeline: String,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub test_samples: usize,
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
    pub validation_accuracy: f64,
    pub test: MetricsBundle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub metrics: MetricsDocument,
    pub report: TrainReport,
    pub outputs: Vec<PathBuf>,
}

impl TrainSummary {
    pub fn summary_line(&self) -> String {
        format!(
            "train {}: test accuracy {:.4}, weighted F1 {:.4}, {:.2}s training",
            self.metrics.model.architecture.cli_name(),
            self.metrics.test.accuracy,
            self.metrics.test.weighted_f1,
            self.report.timing.train_seconds
        )
    }
}

/// Features for one architecture, plus the one-time vectorization cost.
fn vectorized_source(
    run: &RunConfig,
    dataset: &Dataset,
    index: &SegmentIndex,
    layout: FeatureLayout,
) -> Result<(VectorizedFeatures, f64)> {
    let cfg = &run.pipeline.vectorization;
    let started = Instant::now();
    let features = match (&run.store, layout.grid_size) {
        (Some(descriptor), Some(grid)) => {
            let mut store = open_store(descriptor, grid).context("opening store")?;
            store.init_schema().context("initializing store")?;
            let records = store.fetch(&RecordFilter::default()).context("reading store")?;
            store.close()?;
            let grids = grids_from_records(index, &records).map_err(|seg| {
                let s = &index.segments[seg];
                anyhow::anyhow!(
                    "store has no heatmap for user {} segment starting at {} ({}); run `vectorize` first",
                    s.user,
                    s.start_time,
                    s.label
                )
            })?;
            VectorizedFeatures::with_grids(dataset, index, layout, cfg, grids)?
        }
        _ => VectorizedFeatures::compute(dataset, index, layout, cfg)?,
    };
    Ok((features, started.elapsed().as_secs_f64()))
}

fn layout_for(spec: &ModelSpec) -> FeatureLayout {
    FeatureLayout {
        meta_width: spec.seq_width(),
        grid_size: spec.grid.map(|g| g.grid_size),
    }
}

fn write_model(dir: &Path, spec: &ModelSpec, outcome: &TrainOutcome, seed: u64) -> Result<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct ModelFile<'a> {
        description: ModelDescription,
        spec: &'a ModelSpec,
        scaler: &'a veclstm::trainer::StandardScaler,
    }
    let ckpt = dir.join("model.ckpt");
    let file = File::create(&ckpt).with_context(|| format!("creating {}", ckpt.display()))?;
    let blocks = outcome.params.blocks();
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, blocks.iter().map(|(n, t)| (n.as_str(), *t)))?;
    use std::io::Write;
    w.flush()?;
    let json = dir.join("model.json");
    write_json(
        &json,
        &ModelFile {
            description: spec.describe(seed),
            spec,
            scaler: &outcome.scaler,
        },
    )?;
    Ok(vec![ckpt, json])
}

/// split → oversample → scale → train → evaluate, then writes every report.
///
/// `lstm` recomputes features for every batch; `veclstm` and `hybrid` use
/// features vectorized once (or read from the store when one is given).
pub fn cmd_train(run: &RunConfig) -> Result<TrainSummary> {
    let arch = run.arch.context("train: no architecture given")?;
    let pipeline = &run.pipeline;
    let spec = pipeline.model_spec(arch);
    spec.validate().context("train: model")?;
    let dataset = load_dataset(&run.input).context("train: loading")?;
    let labels = dataset.labels();
    let index = segment_dataset(&dataset, &pipeline.segments);
    let layout = layout_for(&spec);
    let splits = make_splits(&labels, &pipeline.train).context("train: split")?;

    let live;
    let precomputed;
    let (source, vectorization_seconds, pipeline_name): (&dyn FeatureSource, Option<f64>, &str) = match arch {
        Arch::Lstm => {
            live = OnTheFlyFeatures {
                dataset: &dataset,
                index: &index,
                layout,
                config: pipeline.vectorization.clone(),
            };
            (&live, None, "novec")
        }
        Arch::Veclstm | Arch::Hybrid => {
            let (features, secs) = vectorized_source(run, &dataset, &index, layout).context("train: vectorize")?;
            precomputed = features;
            (&precomputed, Some(secs), "vec")
        }
    };

    let mut outcome = train_model(&spec, source, &labels, &splits, &pipeline.train).context("train: train")?;
    outcome.report.timing.vectorization_seconds = vectorization_seconds;
    let probs = predict_proba(&spec, &outcome.params, &outcome.scaler, source, &splits.test).context("train: evaluate")?;
    let truth: Vec<usize> = splits.test.iter().map(|&i| labels[i]).collect();
    let test = metrics::evaluate(&probs, &truth, pipeline.regression_basis).context("train: evaluate")?;

    let r = &outcome.report;
    let metrics = MetricsDocument {
        run: run.clone(),
        model: spec.describe(run.seed),
        pipeline: pipeline_name.into(),
        train_samples: r.train_samples,
        validation_samples: r.validation_samples,
        test_samples: r.test_samples,
        initial_loss: r.initial_loss,
        epochs: r.epochs.clone(),
        validation_accuracy: r.validation_accuracy,
        test,
    };
    let dir = &run.out_dir;
    let mut outputs = report::write_metrics_files(dir, &metrics.test, &probs, &truth).context("train: writing metrics")?;
    let metrics_path = dir.join("metrics.json");
    write_json(&metrics_path, &metrics)?;
    outputs.push(metrics_path);
    #[derive(Serialize)]
    struct ReportFile<'a> {
        run: &'a RunConfig,
        model: ModelDescription,
        report: &'a TrainReport,
    }
    let report_path = dir.join("train_report.json");
    write_json(
        &report_path,
        &ReportFile {
            run,
            model: spec.describe(run.seed),
            report: &outcome.report,
        },
    )?;
    outputs.push(report_path);
    outputs.extend(write_model(dir, &spec, &outcome, run.seed).context("train: writing checkpoint")?);
    Ok(TrainSummary {
        metrics,
        report: outcome.report,
        outputs,
    })
}

/// Timing comparison of one network trained both ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineComparison {
    pub network: String,
    pub novec_variant: String,
    pub vec_variant: String,
    #[serde(flatten)]
    pub timing: BenchmarkReport,
}

/// Insert and fetch timings for the store, on a workload defined here: all
/// segment heatmaps of the dataset in one batch, then one fetch per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreWorkload {
    pub workload: String,
    pub backend: String,
    pub records_inserted: usize,
    pub insert_seconds: f64,
    pub fetch_queries: usize,
    pub records_fetched: usize,
    pub fetch_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub run: RunConfig,
    pub rows: Vec<BenchRow>,
    pub pipelines: Vec<PipelineComparison>,
    pub store_workload: Option<StoreWorkload>,
}

impl BenchSummary {
    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self
            .pipelines
            .iter()
            .map(|p| format!("{}: {:.1}% faster with vectorization", p.network, p.timing.reduction_pct))
            .collect();
        format!("bench: {}", parts.join("; "))
    }
}

fn bench_row(
    variant: &str,
    spec: &ModelSpec,
    outcome: &TrainOutcome,
    source: &dyn FeatureSource,
    labels: &[usize],
    test: &[usize],
    basis: RegressionBasis,
) -> Result<BenchRow> {
    let m = evaluate_indices(spec, outcome, source, labels, test, basis)?;
    Ok(BenchRow {
        variant: variant.into(),
        train_seconds: outcome.report.timing.train_seconds,
        vectorize_seconds: outcome.report.timing.vectorization_seconds.unwrap_or(0.0),
        val_acc: outcome.report.validation_accuracy,
        test_acc: m.accuracy,
        weighted_f1: m.weighted_f1,
        rmse: m.rmse,
        mae: m.mae,
        mse: m.mse,
    })
}

fn store_workload(descriptor: &str, dataset: &Dataset, index: &SegmentIndex, cfg: &VectorizationConfig) -> Result<StoreWorkload> {
    let grids = vectorize_segments(dataset, index, cfg)?;
    let records = segment_records(index, &grids);
    let mut store = open_store(descriptor, cfg.grid_size)?;
    store.init_schema()?;
    let started = Instant::now();
    let inserted = store.insert_batch(&records)?;
    let insert_seconds = started.elapsed().as_secs_f64();
    let mut users: Vec<&str> = index.segments.iter().map(|s| s.user.as_str()).collect();
    users.dedup();
    let started = Instant::now();
    let mut fetched = 0;
    for user in &users {
        let filter = RecordFilter {
            user: Some(user.to_string()),
            ..Default::default()
        };
        fetched += store.fetch(&filter)?.len();
    }
    let fetch_seconds = started.elapsed().as_secs_f64();
    let backend = store.backend().to_string();
    store.close()?;
    Ok(StoreWorkload {
        workload: "insert every segment heatmap in one batch, then fetch by each user".into(),
        backend,
        records_inserted: inserted,
        insert_seconds,
        fetch_queries: users.len(),
        records_fetched: fetched,
        fetch_seconds,
    })
}

/// Trains the LSTM stack and the hybrid model with and without
/// precomputed features and writes `bench.json` and `bench.csv`.
pub fn cmd_bench(run: &RunConfig) -> Result<BenchSummary> {
    let pipeline = &run.pipeline;
    let dataset = load_dataset(&run.input).context("bench: loading")?;
    let labels = dataset.labels();
    let index = segment_dataset(&dataset, &pipeline.segments);
    let basis = pipeline.regression_basis;
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();

    for (network, novec_name, vec_name, arch) in
        [("lstm_stack", "lstm", "veclstm", Arch::Lstm), ("hybrid", "hybrid_novec", "hybrid", Arch::Hybrid)]
    {
        let spec = pipeline.model_spec(arch);
        let bench = benchmark_pipelines(&dataset, &index, &spec, &pipeline.vectorization, &pipeline.train)
            .with_context(|| format!("bench: {network}"))?;
        let layout = layout_for(&spec);
        let live = OnTheFlyFeatures {
            dataset: &dataset,
            index: &index,
            layout,
            config: pipeline.vectorization.clone(),
        };
        rows.push(bench_row(novec_name, &spec, &bench.novec, &live, &labels, &bench.splits.test, basis)?);
        rows.push(bench_row(vec_name, &spec, &bench.vec, &bench.features, &labels, &bench.splits.test, basis)?);
        comparisons.push(PipelineComparison {
            network: network.into(),
            novec_variant: novec_name.into(),
            vec_variant: vec_name.into(),
            timing: bench.report,
        });
    }

    let store_workload = match &run.store {
        Some(d) => Some(store_workload(d, &dataset, &index, &pipeline.vectorization).context("bench: store workload")?),
        None => None,
    };
    let summary = BenchSummary {
        run: run.clone(),
        rows,
        pipelines: comparisons,
        store_workload,
    };
    write_json(&run.out_dir.join("bench.json"), &summary)?;
    report::write_bench_csv(&run.out_dir.join("bench.csv"), &summary.rows)?;
    Ok(summary)
}
