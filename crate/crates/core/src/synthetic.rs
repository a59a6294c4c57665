//! Generated data for tests, benchmarks and demos.
//!
//! [`separable_dataset`] draws every trajectory segment from a class-specific
//! shape, so segment heatmaps separate the classes. [`write_geolife_fixture`]
//! writes a small archive in the GeoLife directory layout with known counts.

use std::f64::consts::TAU;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::DateTime;
use rand::Rng;

use crate::ingest::{self, ActivityLabel, Dataset, IngestError, LabeledSample};
use crate::nn::seeded_rng;
use crate::vectorizer::VectorizationConfig;

/// Start of generated timelines (2008-10-23 00:00:00 UTC).
pub const EPOCH_START: i64 = 1_224_720_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Number of classes used, taken in code order (at most 7).
    pub classes: usize,
    pub segments: usize,
    pub points_per_segment: usize,
    pub users: usize,
    /// Uniform noise added to shape coordinates, in units of the segment extent.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 3,
            segments: 60,
            points_per_segment: 50,
            users: 4,
            jitter: 0.02,
            seed: 0,
        }
    }
}

/// Point `t ∈ [0, 1]` along the outline of class `class`, in the unit square
/// as `(row, column)`.
pub fn shape_point(class: usize, t: f64) -> (f64, f64) {
    match class % ActivityLabel::COUNT {
        0 => (t, t),
        1 => (t, 1.0 - t),
        2 => (0.5 + 0.5 * (TAU * t).cos(), 0.5 + 0.5 * (TAU * t).sin()),
        3 if t < 0.5 => (0.0, 2.0 * t),
        3 => (2.0 * t - 1.0, 1.0),
        4 if t < 0.8 => (0.1 * t, 0.1 * t),
        4 => (5.0 * t - 4.0, 5.0 * t - 4.0),
        5 => {
            let phase = (3.0 * t).fract();
            (1.0 - (2.0 * phase - 1.0).abs(), t)
        }
        _ if t < 0.5 => (0.5, 2.0 * t),
        _ => (2.0 * t - 1.0, 0.5),
    }
}

/// Rows for [`separable_dataset`], in generation order.
pub fn separable_samples(cfg: &SyntheticConfig) -> Vec<LabeledSample> {
    assert!((1..=ActivityLabel::COUNT).contains(&cfg.classes), "1 to 7 classes");
    assert!(cfg.users > 0 && cfg.points_per_segment > 1, "need users and at least 2 points per segment");
    let mut rng = seeded_rng(cfg.seed);
    let mut clock = vec![EPOCH_START; cfg.users];
    let mut out = Vec::with_capacity(cfg.segments * cfg.points_per_segment);
    for seg in 0..cfg.segments {
        let class = seg % cfg.classes;
        let user = seg % cfg.users;
        let base_lat = rng.gen_range(39.7..40.1);
        let base_lon = rng.gen_range(116.1..116.6);
        let extent = rng.gen_range(0.005..0.05);
        let n = cfg.points_per_segment;
        for k in 0..n {
            let t = k as f64 / (n - 1) as f64;
            let (row, col) = shape_point(class, t);
            let jitter = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(-cfg.jitter..=cfg.jitter);
            let lat = base_lat + extent * (row + jitter(&mut rng));
            let lon = base_lon + extent * (col + jitter(&mut rng));
            out.push(LabeledSample {
                time: clock[user],
                lat,
                lon,
                alt: rng.gen_bool(0.9).then(|| rng.gen_range(30.0..80.0)),
                label: ActivityLabel::ALL[class],
                user: format!("{user:03}"),
                metadata: 0.0,
            });
            clock[user] += 5;
        }
        // a long pause so consecutive segments never merge
        clock[user] += 3600;
    }
    out
}

pub fn separable_dataset(cfg: &SyntheticConfig, vectorization: &VectorizationConfig) -> Result<Dataset, IngestError> {
    ingest::dataset_from_samples(separable_samples(cfg), vectorization)
}

/// Layout of a generated GeoLife archive.
#[derive(Debug, Clone, PartialEq)]
pub struct GeolifeFixture {
    pub users: usize,
    pub files_per_user: usize,
    pub points_per_file: usize,
    /// The last user gets no `labels.txt`, as in the real archive.
    pub unlabeled_last_user: bool,
    pub seed: u64,
}

impl Default for GeolifeFixture {
    fn default() -> Self {
        GeolifeFixture {
            users: 2,
            files_per_user: 3,
            points_per_file: 40,
            unlabeled_last_user: false,
            seed: 0,
        }
    }
}

/// What a correct ingest of the fixture must produce.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FixtureCounts {
    pub users: usize,
    pub points: usize,
    pub labeled_points: usize,
    pub label_counts: [usize; ActivityLabel::COUNT],
    pub rejected_spans: usize,
}

/// Modes cycled through the label spans; `boat` and `airplane` are not among
/// the seven classes.
pub const FIXTURE_MODES: [&str; 9] = ["walk", "bus", "car", "boat", "bike", "subway", "taxi", "train", "airplane"];

fn plt_stamp(ts: i64) -> (String, String) {
    let dt = DateTime::from_timestamp(ts, 0).expect("fixture time in range").naive_utc();
    (dt.format("%Y-%m-%d").to_string(), dt.format("%H:%M:%S").to_string())
}

fn label_stamp(ts: i64) -> String {
    let dt = DateTime::from_timestamp(ts, 0).expect("fixture time in range").naive_utc();
    dt.format("%Y/%m/%d %H:%M:%S").to_string()
}

/// Writes `root/Data/<user>/Trajectory/*.plt` and `labels.txt` files.
///
/// Each file's label span covers points `n/5 ..= 4n/5` of that file, so
/// counts follow from index arithmetic alone.
pub fn write_geolife_fixture(root: &Path, fx: &GeolifeFixture) -> io::Result<FixtureCounts> {
    let mut rng = seeded_rng(fx.seed);
    let mut counts = FixtureCounts {
        users: fx.users,
        ..Default::default()
    };
    let n = fx.points_per_file;
    let mut span_no = 0;
    for u in 0..fx.users {
        let user = format!("{u:03}");
        let traj = root.join("Data").join(&user).join("Trajectory");
        fs::create_dir_all(&traj)?;
        let labeled = !(fx.unlabeled_last_user && u + 1 == fx.users);
        let mut labels = String::from("Start Time\tEnd Time\tTransportation Mode\n");
        for f in 0..fx.files_per_user {
            let start = EPOCH_START + u as i64 * 86_400 + f as i64 * 3 * 3600;
            let name = DateTime::from_timestamp(start, 0).expect("in range").naive_utc().format("%Y%m%d%H%M%S");
            let mut plt = String::from(
                "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n",
            );
            let (base_lat, base_lon) = (rng.gen_range(39.8..40.0), rng.gen_range(116.2..116.5));
            for k in 0..n {
                let ts = start + 5 * k as i64;
                let (date, time) = plt_stamp(ts);
                let alt = if k % 7 == 3 { -777.0 } else { rng.gen_range(50.0..400.0f64).round() };
                let days = 25569.0 + ts as f64 / 86_400.0;
                plt.push_str(&format!(
                    "{:.6},{:.6},0,{alt},{days:.10},{date},{time}\n",
                    base_lat + 0.0005 * k as f64,
                    base_lon + 0.0003 * k as f64
                ));
            }
            fs::write(traj.join(format!("{name}.plt")), plt)?;
            counts.points += n;

            let mode = FIXTURE_MODES[span_no % FIXTURE_MODES.len()];
            span_no += 1;
            let (a, b) = (n / 5, 4 * n / 5);
            labels.push_str(&format!(
                "{}\t{}\t{mode}\n",
                label_stamp(start + 5 * a as i64),
                label_stamp(start + 5 * b as i64)
            ));
            if !labeled {
                continue;
            }
            match ingest::map_mode(mode) {
                Some(label) => {
                    let covered = b.min(n - 1) + 1 - a;
                    counts.labeled_points += covered;
                    counts.label_counts[label.code() as usize] += covered;
                }
                None => counts.rejected_spans += 1,
            }
        }
        if labeled {
            let mut file = fs::File::create(root.join("Data").join(&user).join("labels.txt"))?;
            file.write_all(labels.as_bytes())?;
        }
    }
    Ok(counts)
}
