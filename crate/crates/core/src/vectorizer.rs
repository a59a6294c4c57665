//! Min-max normalization and grid-heatmap vectorization of trajectories.
//!
//! A trajectory is normalized per dimension to `[0, 1]`, missing altitudes are
//! imputed, and the normalized `(lat, lon)` pairs are binned into a `G × G`
//! histogram. Cell `(i, j)` receives a point when
//! `i = min(⌊lat·G⌋, G−1)` and `j = min(⌊lon·G⌋, G−1)`; the last bin is
//! closed on the right so the maximum point lands inside the grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LabeledSample, TrajectoryPoint};

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("no input points")]
    EmptyInput,
    #[error("coordinate lists differ in length ({lat} latitudes, {lon} longitudes)")]
    LengthMismatch { lat: usize, lon: usize },
    #[error("grid size must be at least 1")]
    ZeroGrid,
}

pub type Result<T, E = VectorizeError> = std::result::Result<T, E>;

/// Anything carrying a GPS fix.
pub trait GeoFix {
    fn lat(&self) -> f64;
    fn lon(&self) -> f64;
    fn alt(&self) -> Option<f64>;
}

impl GeoFix for TrajectoryPoint {
    fn lat(&self) -> f64 {
        self.lat
    }
    fn lon(&self) -> f64 {
        self.lon
    }
    fn alt(&self) -> Option<f64> {
        self.alt
    }
}

impl GeoFix for LabeledSample {
    fn lat(&self) -> f64 {
        self.lat
    }
    fn lon(&self) -> f64 {
        self.lon
    }
    fn alt(&self) -> Option<f64> {
        self.alt
    }
}

impl GeoFix for (f64, f64, Option<f64>) {
    fn lat(&self) -> f64 {
        self.0
    }
    fn lon(&self) -> f64 {
        self.1
    }
    fn alt(&self) -> Option<f64> {
        self.2
    }
}

impl<T: GeoFix> GeoFix for &T {
    fn lat(&self) -> f64 {
        (*self).lat()
    }
    fn lon(&self) -> f64 {
        (*self).lon()
    }
    fn alt(&self) -> Option<f64> {
        (*self).alt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimStats {
    pub min: f64,
    pub max: f64,
}

impl DimStats {
    pub const UNIT: DimStats = DimStats { min: 0.0, max: 1.0 };

    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let mut stats: Option<DimStats> = None;
        for v in values.filter(|v| v.is_finite()) {
            let s = stats.get_or_insert(DimStats { min: v, max: v });
            s.min = s.min.min(v);
            s.max = s.max.max(v);
        }
        stats.unwrap_or(DimStats::UNIT)
    }
}

/// Per-dimension ranges used for min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub lat: DimStats,
    pub lon: DimStats,
    pub alt: DimStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValueMode {
    /// Raw point counts per cell.
    #[default]
    Count,
    /// Counts divided by the number of contributing points.
    Density,
}

/// Which scalar the per-sample metadata column carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataFeature {
    /// Count of the sample's heatmap cell over the maximum cell count.
    #[default]
    CellDensity,
    /// Min-max normalized altitude with imputation.
    Altitude,
    /// Min-max normalized ground speed from the previous fix of the same user.
    Speed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizationConfig {
    pub grid_size: usize,
    /// Value substituted for a missing coordinate, in normalized space.
    pub missing_default: f64,
    pub value_mode: ValueMode,
    pub metadata_feature: MetadataFeature,
}

impl Default for VectorizationConfig {
    fn default() -> Self {
        VectorizationConfig {
            grid_size: 10,
            missing_default: 0.5,
            value_mode: ValueMode::Count,
            metadata_feature: MetadataFeature::CellDensity,
        }
    }
}

/// A `G × G` histogram over normalized `(lat, lon)`, stored row-major with
/// latitude bins as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeatmap {
    pub grid_size: usize,
    pub values: Vec<f64>,
    pub value_mode: ValueMode,
    /// Points that were not finite or fell outside `[0, 1]`.
    pub dropped: usize,
}

impl GridHeatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.grid_size + col]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.grid_size)
    }

    /// Row-major flattening, length `G²`.
    pub fn into_vector(self) -> Vec<f64> {
        self.values
    }

    /// `G` lines of `G` comma-separated values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fits per-dimension min/max, ignoring missing and non-finite values.
///
/// A dimension with no usable value falls back to `(0, 1)`.
pub fn fit_stats<P: GeoFix>(points: &[P]) -> Result<NormalizationStats> {
    if points.is_empty() {
        return Err(VectorizeError::EmptyInput);
    }
    Ok(NormalizationStats {
        lat: DimStats::fit(points.iter().map(|p| p.lat())),
        lon: DimStats::fit(points.iter().map(|p| p.lon())),
        alt: DimStats::fit(points.iter().filter_map(|p| p.alt())),
    })
}

/// `(v − min) / (max − min)` clamped to `[0, 1]`; a degenerate range gives 0.
pub fn min_max_normalize(value: f64, stats: DimStats) -> f64 {
    let range = stats.max - stats.min;
    if range <= 0.0 || !range.is_finite() {
        return 0.0;
    }
    ((value - stats.min) / range).clamp(0.0, 1.0)
}

pub fn impute_missing(value: Option<f64>, config: &VectorizationConfig) -> f64 {
    value.unwrap_or(config.missing_default)
}

/// Cell coordinates of a normalized point.
pub fn cell_index(lat: f64, lon: f64, grid_size: usize) -> (usize, usize) {
    let bin = |v: f64| ((v * grid_size as f64).floor() as usize).min(grid_size - 1);
    (bin(lat), bin(lon))
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Bins normalized coordinate pairs into a `G × G` heatmap.
pub fn histogram2d(
    norm_lat: &[f64],
    norm_lon: &[f64],
    grid_size: usize,
    value_mode: ValueMode,
) -> Result<GridHeatmap> {
    if grid_size == 0 {
        return Err(VectorizeError::ZeroGrid);
    }
    if norm_lat.len() != norm_lon.len() {
        return Err(VectorizeError::LengthMismatch {
            lat: norm_lat.len(),
            lon: norm_lon.len(),
        });
    }
    let mut values = vec![0.0; grid_size * grid_size];
    let mut dropped = 0;
    for (&lat, &lon) in norm_lat.iter().zip(norm_lon) {
        if !in_unit(lat) || !in_unit(lon) {
            dropped += 1;
            continue;
        }
        let (i, j) = cell_index(lat, lon, grid_size);
        values[i * grid_size + j] += 1.0;
    }
    let contributed = norm_lat.len() - dropped;
    if value_mode == ValueMode::Density && contributed > 0 {
        let total = contributed as f64;
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(GridHeatmap {
        grid_size,
        values,
        value_mode,
        dropped,
    })
}

/// A trajectory after normalization and imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTrajectory {
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub alt: Vec<f64>,
}

pub fn normalize_trajectory<P: GeoFix>(
    points: &[P],
    stats: &NormalizationStats,
    config: &VectorizationConfig,
) -> NormalizedTrajectory {
    NormalizedTrajectory {
        lat: points.iter().map(|p| min_max_normalize(p.lat(), stats.lat)).collect(),
        lon: points.iter().map(|p| min_max_normalize(p.lon(), stats.lon)).collect(),
        alt: points
            .iter()
            .map(|p| impute_missing(p.alt().map(|a| min_max_normalize(a, stats.alt)), config))
            .collect(),
    }
}

/// Heatmap of one trajectory, normalized against its own ranges.
pub fn trajectory_heatmap<P: GeoFix>(points: &[P], config: &VectorizationConfig) -> Result<GridHeatmap> {
    let stats = fit_stats(points)?;
    let norm = normalize_trajectory(points, &stats, config);
    histogram2d(&norm.lat, &norm.lon, config.grid_size, config.value_mode)
}

/// Fits stats, normalizes, imputes and bins a trajectory, returning the
/// row-major flattened heatmap of length `G²`.
pub fn vectorize_trajectory<P: GeoFix>(points: &[P], config: &VectorizationConfig) -> Result<Vec<f64>> {
    trajectory_heatmap(points, config).map(GridHeatmap::into_vector)
}

/// Per-sample metadata scalars in `[0, 1]` for a whole dataset.
///
/// With the default [`MetadataFeature::CellDensity`], each sample gets the
/// count of its cell in the dataset-wide heatmap divided by the largest cell
/// count, so at least one sample scores exactly 1.
pub fn vectorize_metadata(samples: &[LabeledSample], config: &VectorizationConfig) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(VectorizeError::EmptyInput);
    }
    if config.grid_size == 0 {
        return Err(VectorizeError::ZeroGrid);
    }
    let stats = fit_stats(samples)?;
    match config.metadata_feature {
        MetadataFeature::CellDensity => Ok(cell_density(samples, &stats, config.grid_size)),
        MetadataFeature::Altitude => Ok(samples
            .iter()
            .map(|s| impute_missing(s.alt.map(|a| min_max_normalize(a, stats.alt)), config))
            .collect()),
        MetadataFeature::Speed => {
            let speeds = ground_speeds(samples);
            let range = DimStats::fit(speeds.iter().copied());
            Ok(speeds.into_iter().map(|v| min_max_normalize(v, range)).collect())
        }
    }
}

fn cell_density(samples: &[LabeledSample], stats: &NormalizationStats, grid_size: usize) -> Vec<f64> {
    let cells: Vec<usize> = samples
        .iter()
        .map(|s| {
            let (i, j) = cell_index(
                min_max_normalize(s.lat, stats.lat),
                min_max_normalize(s.lon, stats.lon),
                grid_size,
            );
            i * grid_size + j
        })
        .collect();
    let mut counts = vec![0u64; grid_size * grid_size];
    for &c in &cells {
        counts[c] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    cells.into_iter().map(|c| counts[c] as f64 / max).collect()
}

const EARTH_RADIUS_M: f64 = 6_371_008.8;

pub fn haversine_meters(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Meters per second from the preceding row of the same user; 0 for the
/// first fix of a user or a zero time step.
fn ground_speeds(samples: &[LabeledSample]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    for (idx, s) in samples.iter().enumerate() {
        let speed = match idx.checked_sub(1).map(|p| &samples[p]) {
            Some(prev) if prev.user == s.user && s.time > prev.time => {
                haversine_meters(prev.lat, prev.lon, s.lat, s.lon) / (s.time - prev.time) as f64
            }
            _ => 0.0,
        };
        out.push(speed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ActivityLabel;

    fn sample(lat: f64, lon: f64) -> LabeledSample {
        LabeledSample {
            time: 0,
            lat,
            lon,
            alt: None,
            label: ActivityLabel::Walk,
            user: "u".into(),
            metadata: 0.0,
        }
    }

    #[test]
    fn stats_fit() {
        let s = fit_stats(&[(0.0, 0.0, Some(0.0)), (1.0, 2.0, Some(3.0))]).unwrap();
        assert_eq!(s.lat, DimStats { min: 0.0, max: 1.0 });
        assert_eq!(s.lon, DimStats { min: 0.0, max: 2.0 });
        assert_eq!(s.alt, DimStats { min: 0.0, max: 3.0 });

        let single = fit_stats(&[(4.0, 5.0, Some(6.0))]).unwrap();
        assert_eq!(single.lat, DimStats { min: 4.0, max: 4.0 });
        assert_eq!(single.alt, DimStats { min: 6.0, max: 6.0 });
    }

    #[test]
    fn stats_missing_altitude_falls_back() {
        let s = fit_stats(&[(1.0, 1.0, None), (2.0, 2.0, None)]).unwrap();
        assert_eq!(s.alt, DimStats::UNIT);
        assert_eq!(fit_stats::<(f64, f64, Option<f64>)>(&[]), Err(VectorizeError::EmptyInput));
    }

    #[test]
    fn normalize_values() {
        let st = DimStats { min: 1.0, max: 3.0 };
        let got: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&v| min_max_normalize(v, st)).collect();
        assert_eq!(got, vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(5.0, DimStats { min: 5.0, max: 5.0 }), 0.0);
        assert_eq!(min_max_normalize(4.0, st), 1.0);
        assert_eq!(min_max_normalize(-4.0, st), 0.0);
    }

    #[test]
    fn imputation() {
        let cfg = VectorizationConfig::default();
        assert_eq!(impute_missing(None, &cfg), 0.5);
        assert_eq!(impute_missing(Some(0.3), &cfg), 0.3);
        let zero = VectorizationConfig {
            missing_default: 0.0,
            ..cfg
        };
        assert_eq!(impute_missing(None, &zero), 0.0);
    }

    #[test]
    fn histogram_corners() {
        let h = histogram2d(&[0.0], &[0.0], 10, ValueMode::Count).unwrap();
        assert_eq!(h.get(0, 0), 1.0);
        assert_eq!(h.total(), 1.0);
        let h = histogram2d(&[1.0], &[1.0], 10, ValueMode::Count).unwrap();
        assert_eq!(h.get(9, 9), 1.0);
        assert_eq!(h.total(), 1.0);
    }

    #[test]
    fn histogram_four_points() {
        let h = histogram2d(&[0.05, 0.95, 0.5, 0.5], &[0.05, 0.95, 0.5, 0.5], 10, ValueMode::Count).unwrap();
        assert_eq!(h.get(0, 0), 1.0);
        assert_eq!(h.get(9, 9), 1.0);
        assert_eq!(h.get(5, 5), 2.0);
        assert_eq!(h.total(), 4.0);
    }

    #[test]
    fn histogram_density_sums_to_one() {
        let h = histogram2d(&[0.1, 0.2, 0.7], &[0.3, 0.9, 0.0], 10, ValueMode::Density).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_errors_and_drops() {
        assert_eq!(
            histogram2d(&[0.1], &[], 10, ValueMode::Count),
            Err(VectorizeError::LengthMismatch { lat: 1, lon: 0 })
        );
        let h = histogram2d(&[0.1, f64::NAN, 1.5], &[0.1, 0.2, 0.3], 10, ValueMode::Count).unwrap();
        assert_eq!(h.dropped, 2);
        assert_eq!(h.total(), 1.0);
    }

    #[test]
    fn trajectory_vector_shape() {
        let v = vectorize_trajectory(&[(39.9, 116.4, None)], &VectorizationConfig::default()).unwrap();
        assert_eq!(v.len(), 100);
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), 99);
        assert_eq!(
            vectorize_trajectory::<TrajectoryPoint>(&[], &VectorizationConfig::default()),
            Err(VectorizeError::EmptyInput)
        );
    }

    #[test]
    fn heatmap_csv_shape() {
        let h = trajectory_heatmap(&[(0.0, 0.0, None), (1.0, 1.0, None)], &VectorizationConfig::default()).unwrap();
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.lines().all(|l| l.split(',').count() == 10));
        assert!(csv.starts_with("1,0,"));
    }

    #[test]
    fn metadata_single_cell() {
        let samples: Vec<_> = (0..5).map(|_| sample(40.0, 116.0)).collect();
        let m = vectorize_metadata(&samples, &VectorizationConfig::default()).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn metadata_two_cells() {
        let mut samples: Vec<_> = (0..4).map(|_| sample(0.0, 0.0)).collect();
        samples.extend((0..2).map(|_| sample(1.0, 1.0)));
        let m = vectorize_metadata(&samples, &VectorizationConfig::default()).unwrap();
        assert_eq!(m, vec![1.0, 1.0, 1.0, 1.0, 0.5, 0.5]);
    }

    #[test]
    fn metadata_alternatives_stay_in_unit_range() {
        let mut samples: Vec<_> = (0..6).map(|i| sample(40.0 + i as f64 * 0.001, 116.0)).collect();
        for (i, s) in samples.iter_mut().enumerate() {
            s.time = i as i64 * 10;
            s.alt = if i % 2 == 0 { Some(i as f64) } else { None };
        }
        for feature in [MetadataFeature::Altitude, MetadataFeature::Speed] {
            let cfg = VectorizationConfig {
                metadata_feature: feature,
                ..Default::default()
            };
            let m = vectorize_metadata(&samples, &cfg).unwrap();
            assert!(m.iter().all(|v| (0.0..=1.0).contains(v)), "{feature:?}: {m:?}");
        }
    }

    #[test]
    fn haversine_one_degree_latitude() {
        let d = haversine_meters(0.0, 0.0, 1.0, 0.0);
        assert!((d - 111_195.0).abs() < 10.0, "{d}");
    }
}
