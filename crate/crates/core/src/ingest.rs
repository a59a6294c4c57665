//! GeoLife archive ingestion.
//!
//! A GeoLife download is laid out as `Data/<user>/Trajectory/*.plt` with an
//! optional `Data/<user>/labels.txt` listing transportation-mode spans. This
//! module parses both formats, joins spans onto GPS fixes and assembles the
//! seven-column dataset (`time,lat,lon,alt,label,user,metadata`).

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorizer::{self, NormalizationStats, VectorizationConfig, VectorizeError};

/// Number of header lines at the top of every PLT file.
pub const PLT_HEADER_LINES: usize = 6;
/// GeoLife altitude sentinel for "no valid altitude".
pub const PLT_MISSING_ALTITUDE_FEET: f64 = -777.0;
pub const FEET_TO_METERS: f64 = 0.3048;

const PLT_TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
const LABEL_TIME_FORMAT: &str = "%Y/%m/%d %H:%M:%S";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("truncated header: expected {expected} header lines, found {found}")]
    TruncatedHeader { expected: usize, found: usize },
    #[error("inverted label span on line {line_no}: start is after end")]
    InvertedSpan { line_no: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("input is not valid UTF-8")]
    NotText,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("unknown activity label {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    fn malformed(line_no: usize, reason: impl Into<String>) -> Self {
        IngestError::MalformedLine {
            line_no,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// One timestamped GPS fix.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// Meters; `None` when the source recorded no valid altitude.
    pub alt: Option<f64>,
    pub user_id: String,
}

/// A labelled time interval from a `labels.txt` file. Both ends are inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpan {
    pub start: i64,
    pub end: i64,
    pub mode: String,
}

impl LabelSpan {
    pub fn contains(&self, timestamp: i64) -> bool {
        self.start <= timestamp && timestamp <= self.end
    }
}

/// The seven transportation modes kept for classification, in code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityLabel {
    Walk = 0,
    Bike = 1,
    Bus = 2,
    Car = 3,
    Taxi = 4,
    Subway = 5,
    Train = 6,
}

impl ActivityLabel {
    pub const COUNT: usize = 7;
    pub const ALL: [ActivityLabel; 7] = [
        ActivityLabel::Walk,
        ActivityLabel::Bike,
        ActivityLabel::Bus,
        ActivityLabel::Car,
        ActivityLabel::Taxi,
        ActivityLabel::Subway,
        ActivityLabel::Train,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivityLabel::Walk => "walk",
            ActivityLabel::Bike => "bike",
            ActivityLabel::Bus => "bus",
            ActivityLabel::Car => "car",
            ActivityLabel::Taxi => "taxi",
            ActivityLabel::Subway => "subway",
            ActivityLabel::Train => "train",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityLabel {
    type Err = IngestError;

    /// Accepts either a canonical mode name (any case) or an integer code.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(code) = s.parse::<u8>() {
            return ActivityLabel::from_code(code).ok_or_else(|| IngestError::UnknownLabel(s.into()));
        }
        map_mode(s).ok_or_else(|| IngestError::UnknownLabel(s.into()))
    }
}

/// Maps a raw GeoLife mode string onto one of the seven kept classes.
///
/// Lookup is case-insensitive; anything outside the canonical set (boat, run,
/// airplane, motorcycle, composite modes, ...) yields `None` and the sample is
/// dropped.
pub fn map_mode(mode: &str) -> Option<ActivityLabel> {
    let mode = mode.trim();
    ActivityLabel::ALL
        .into_iter()
        .find(|label| label.name().eq_ignore_ascii_case(mode))
}

/// One row of the assembled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub time: i64,
    pub lat: f64,
    pub lon: f64,
    pub alt: Option<f64>,
    pub label: ActivityLabel,
    pub user: String,
    /// Vectorized per-sample feature in `[0, 1]`.
    pub metadata: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub stats: NormalizationStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.code() as usize).collect()
    }

    /// Number of rows per label code.
    pub fn label_counts(&self) -> [usize; ActivityLabel::COUNT] {
        let mut counts = [0; ActivityLabel::COUNT];
        for s in &self.samples {
            counts[s.label.code() as usize] += 1;
        }
        counts
    }

    pub fn user_count(&self) -> usize {
        let mut users: Vec<&str> = self.samples.iter().map(|s| s.user.as_str()).collect();
        users.sort_unstable();
        users.dedup();
        users.len()
    }
}

fn to_text(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|_| IngestError::NotText)
}

fn parse_field<T: FromStr>(field: &str, line_no: usize, name: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| IngestError::malformed(line_no, format!("{name} is not numeric: {field:?}")))
}

/// Parses a GeoLife PLT file.
///
/// Data rows are `lat,lon,0,alt_feet,days,yyyy-MM-dd,HH:mm:ss`. Altitude is
/// converted from feet to meters and the `-777` sentinel becomes `None`.
/// Line numbers in errors are 1-based and count the header.
pub fn parse_plt(contents: &[u8], user_id: &str) -> Result<Vec<TrajectoryPoint>> {
    let text = to_text(contents)?;
    let mut lines = text.lines();
    for found in 0..PLT_HEADER_LINES {
        if lines.next().is_none() {
            return Err(IngestError::TruncatedHeader {
                expected: PLT_HEADER_LINES,
                found,
            });
        }
    }

    let mut points = Vec::new();
    for (offset, line) in lines.enumerate() {
        let line_no = PLT_HEADER_LINES + offset + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(IngestError::malformed(
                line_no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let lat: f64 = parse_field(fields[0], line_no, "latitude")?;
        let lon: f64 = parse_field(fields[1], line_no, "longitude")?;
        let _: f64 = parse_field(fields[2], line_no, "third field")?;
        let alt_feet: f64 = parse_field(fields[3], line_no, "altitude")?;
        let _: f64 = parse_field(fields[4], line_no, "day count")?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(IngestError::malformed(
                line_no,
                format!("coordinate out of range: ({lat}, {lon})"),
            ));
        }
        let stamp = format!("{} {}", fields[5].trim(), fields[6].trim());
        let timestamp = NaiveDateTime::parse_from_str(&stamp, PLT_TIME_FORMAT)
            .map_err(|_| IngestError::malformed(line_no, format!("bad date/time {stamp:?}")))?
            .and_utc()
            .timestamp();
        let alt = if alt_feet == PLT_MISSING_ALTITUDE_FEET || !alt_feet.is_finite() {
            None
        } else {
            Some(alt_feet * FEET_TO_METERS)
        };
        points.push(TrajectoryPoint {
            timestamp,
            lat,
            lon,
            alt,
            user_id: user_id.to_owned(),
        });
    }
    Ok(points)
}

/// Parses a GeoLife `labels.txt` file (tab separated, one header row).
pub fn parse_labels(contents: &[u8]) -> Result<Vec<LabelSpan>> {
    let text = to_text(contents)?;
    let mut spans = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(IngestError::malformed(
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let parse_time = |field: &str| {
            NaiveDateTime::parse_from_str(field.trim(), LABEL_TIME_FORMAT)
                .map(|t| t.and_utc().timestamp())
                .map_err(|_| IngestError::malformed(line_no, format!("bad timestamp {field:?}")))
        };
        let start = parse_time(fields[0])?;
        let end = parse_time(fields[1])?;
        if start > end {
            return Err(IngestError::InvertedSpan { line_no });
        }
        spans.push(LabelSpan {
            start,
            end,
            mode: fields[2].trim().to_owned(),
        });
    }
    Ok(spans)
}

/// Pairs each point with the mode of the span covering its timestamp.
///
/// Points outside every span are dropped. When spans overlap, the span with
/// the latest start wins, and among equal starts the one later in `spans`.
pub fn assign_labels(
    points: &[TrajectoryPoint],
    spans: &[LabelSpan],
) -> Vec<(TrajectoryPoint, String)> {
    if spans.is_empty() {
        return Vec::new();
    }
    // Sorting by start is stable, so equal starts keep file order and the
    // later one sits further right.
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by_key(|&i| spans[i].start);
    let starts: Vec<i64> = order.iter().map(|&i| spans[i].start).collect();
    let mut max_end = Vec::with_capacity(order.len());
    let mut running = i64::MIN;
    for &i in &order {
        running = running.max(spans[i].end);
        max_end.push(running);
    }

    let mut out = Vec::new();
    for point in points {
        let t = point.timestamp;
        let upper = starts.partition_point(|&s| s <= t);
        for k in (0..upper).rev() {
            if max_end[k] < t {
                break;
            }
            let span = &spans[order[k]];
            if span.end >= t {
                out.push((point.clone(), span.mode.clone()));
                break;
            }
        }
    }
    out
}

/// Assembles the dataset from labelled points grouped by user.
///
/// Rows are ordered by `(user, timestamp)` and each row's metadata column is
/// computed by [`vectorizer::vectorize_metadata`] over the whole dataset.
pub fn build_dataset(
    groups: Vec<(String, Vec<(TrajectoryPoint, ActivityLabel)>)>,
    config: &VectorizationConfig,
) -> Result<Dataset> {
    let mut samples: Vec<LabeledSample> = groups
        .into_iter()
        .flat_map(|(user, points)| {
            points.into_iter().map(move |(p, label)| LabeledSample {
                time: p.timestamp,
                lat: p.lat,
                lon: p.lon,
                alt: p.alt,
                label,
                user: user.clone(),
                metadata: 0.0,
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    samples.sort_by(compare_rows);
    finish_dataset(samples, config)
}

fn compare_rows(a: &LabeledSample, b: &LabeledSample) -> Ordering {
    a.user.cmp(&b.user).then(a.time.cmp(&b.time))
}

/// Fits normalization stats and fills the metadata column of already ordered rows.
fn finish_dataset(mut samples: Vec<LabeledSample>, config: &VectorizationConfig) -> Result<Dataset> {
    let coords: Vec<(f64, f64, Option<f64>)> =
        samples.iter().map(|s| (s.lat, s.lon, s.alt)).collect();
    let stats = vectorizer::fit_stats(&coords)?;
    let metadata = vectorizer::vectorize_metadata(&samples, config)?;
    for (sample, m) in samples.iter_mut().zip(metadata) {
        sample.metadata = m;
    }
    Ok(Dataset { samples, stats })
}

/// A PLT or labels file that could not be parsed.
#[derive(Debug)]
pub struct FileFailure {
    pub path: PathBuf,
    pub error: IngestError,
}

impl fmt::Display for FileFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.error)
    }
}

/// Outcome of scanning a GeoLife directory.
#[derive(Debug, Default)]
pub struct ArchiveScan {
    /// Mode-accepted labelled points per user, users in lexicographic order.
    pub groups: Vec<(String, Vec<(TrajectoryPoint, ActivityLabel)>)>,
    pub failures: Vec<FileFailure>,
    pub users_seen: usize,
    pub points_seen: usize,
    pub rejected_modes: usize,
}

impl ArchiveScan {
    pub fn labeled_points(&self) -> usize {
        self.groups.iter().map(|(_, pts)| pts.len()).sum()
    }
}

/// Resolves the `Data` directory: accepts either the archive root or `Data` itself.
fn data_dir(root: &Path) -> PathBuf {
    let nested = root.join("Data");
    if nested.is_dir() {
        nested
    } else {
        root.to_path_buf()
    }
}

struct UserScan {
    user: String,
    labeled: Vec<(TrajectoryPoint, ActivityLabel)>,
    failures: Vec<FileFailure>,
    points_seen: usize,
    rejected_modes: usize,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn wrap(path: &Path, error: IngestError) -> FileFailure {
    FileFailure {
        path: path.to_path_buf(),
        error,
    }
}

fn scan_user(user_dir: &Path, user: String) -> UserScan {
    let mut scan = UserScan {
        user,
        labeled: Vec::new(),
        failures: Vec::new(),
        points_seen: 0,
        rejected_modes: 0,
    };

    let labels_path = user_dir.join("labels.txt");
    let spans = if labels_path.is_file() {
        match read_file(&labels_path).and_then(|b| parse_labels(&b)) {
            Ok(spans) => spans,
            Err(e) => {
                scan.failures.push(wrap(&labels_path, e));
                Vec::new()
            }
        }
    } else {
        Vec::new()
    };

    let traj_dir = user_dir.join("Trajectory");
    let mut plt_files: Vec<PathBuf> = match fs::read_dir(&traj_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .map(|ext| ext.eq_ignore_ascii_case("plt"))
                    .unwrap_or(false)
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    plt_files.sort();

    let mut points = Vec::new();
    for path in plt_files {
        match read_file(&path).and_then(|b| parse_plt(&b, &scan.user)) {
            Ok(mut pts) => points.append(&mut pts),
            Err(e) => scan.failures.push(wrap(&path, e)),
        }
    }
    scan.points_seen = points.len();

    for (point, mode) in assign_labels(&points, &spans) {
        match map_mode(&mode) {
            Some(label) => scan.labeled.push((point, label)),
            None => scan.rejected_modes += 1,
        }
    }
    scan
}

/// Walks a GeoLife archive, parsing users in parallel.
///
/// Unparseable files are collected in [`ArchiveScan::failures`] and skipped;
/// callers decide whether that is fatal.
pub fn scan_geolife(root: &Path) -> Result<ArchiveScan> {
    let data = data_dir(root);
    let mut users: Vec<(String, PathBuf)> = fs::read_dir(&data)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .collect();
    users.sort();

    let scans: Vec<UserScan> = users
        .into_par_iter()
        .map(|(user, dir)| scan_user(&dir, user))
        .collect();

    let mut out = ArchiveScan {
        users_seen: scans.len(),
        ..Default::default()
    };
    for scan in scans {
        out.points_seen += scan.points_seen;
        out.rejected_modes += scan.rejected_modes;
        out.failures.extend(scan.failures);
        if !scan.labeled.is_empty() {
            out.groups.push((scan.user, scan.labeled));
        }
    }
    Ok(out)
}

pub const DATASET_CSV_HEADER: [&str; 7] = ["time", "lat", "lon", "alt", "label", "user", "metadata"];

/// Writes the dataset as CSV with header `time,lat,lon,alt,label,user,metadata`.
///
/// `time` is UTC epoch seconds, `label` the integer class code, and a missing
/// altitude is an empty field.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_CSV_HEADER)?;
    for s in &dataset.samples {
        w.write_record([
            s.time.to_string(),
            s.lat.to_string(),
            s.lon.to_string(),
            s.alt.map(|a| a.to_string()).unwrap_or_default(),
            s.label.code().to_string(),
            s.user.clone(),
            s.metadata.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV written by [`write_dataset_csv`].
///
/// Rows are re-sorted by `(user, time)` and normalization stats are refitted.
/// The stored metadata column is kept as is.
pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(DATASET_CSV_HEADER) {
        return Err(IngestError::malformed(
            1,
            format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        ));
    }
    let mut samples = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line_no = idx + 2;
        let record = record?;
        if record.len() != 7 {
            return Err(IngestError::malformed(line_no, "expected 7 columns"));
        }
        let alt_field = record[3].trim();
        let alt = if alt_field.is_empty() {
            None
        } else {
            Some(parse_field(alt_field, line_no, "alt")?)
        };
        let metadata: f64 = parse_field(&record[6], line_no, "metadata")?;
        if !metadata.is_finite() {
            return Err(IngestError::malformed(line_no, "metadata is not finite"));
        }
        samples.push(LabeledSample {
            time: parse_field(&record[0], line_no, "time")?,
            lat: parse_field(&record[1], line_no, "lat")?,
            lon: parse_field(&record[2], line_no, "lon")?,
            alt,
            label: record[4]
                .parse()
                .map_err(|_| IngestError::malformed(line_no, format!("bad label {:?}", &record[4])))?,
            user: record[5].to_owned(),
            metadata,
        });
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    samples.sort_by(compare_rows);
    let coords: Vec<(f64, f64, Option<f64>)> =
        samples.iter().map(|s| (s.lat, s.lon, s.alt)).collect();
    let stats = vectorizer::fit_stats(&coords)?;
    Ok(Dataset { samples, stats })
}

/// Builds a dataset directly from in-memory samples, recomputing metadata.
///
/// Used by synthetic fixtures; ordering and metadata follow [`build_dataset`].
pub fn dataset_from_samples(
    mut samples: Vec<LabeledSample>,
    config: &VectorizationConfig,
) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    samples.sort_by(compare_rows);
    finish_dataset(samples, config)
}
