//! Per-sample model inputs, produced either once up front or on demand.
//!
//! Every sample gets its metadata scalar and, for the hybrid model, the
//! heatmap of the trajectory segment it belongs to. A segment is a maximal
//! run of rows from one user with one label and no time gap above a
//! threshold; rows are already ordered by `(user, time)`.
//!
//! [`VectorizedFeatures`] computes everything once (the vectorized pipeline).
//! [`OnTheFlyFeatures`] recomputes the same values from raw rows for every
//! batch it is asked for (the non-vectorized pipeline). Both produce
//! bit-identical features.

use serde::{Deserialize, Serialize};

use crate::ingest::{ActivityLabel, Dataset};
use crate::vectorizer::{self, VectorizationConfig, VectorizeError};
use crate::vecstore::VectorRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub user: String,
    pub label: ActivityLabel,
    /// First row (inclusive).
    pub start: usize,
    /// Last row (exclusive).
    pub end: usize,
    /// Timestamp of the first row.
    pub start_time: i64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Largest gap between consecutive fixes inside one segment.
    pub max_gap_secs: i64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig { max_gap_secs: 1200 }
    }
}

/// Segments plus the segment of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentIndex {
    pub segments: Vec<Segment>,
    pub sample_segment: Vec<usize>,
}

pub fn segment_dataset(dataset: &Dataset, config: &SegmentConfig) -> SegmentIndex {
    let rows = &dataset.samples;
    let mut segments: Vec<Segment> = Vec::new();
    let mut sample_segment = Vec::with_capacity(rows.len());
    for (idx, row) in rows.iter().enumerate() {
        let continues = idx > 0 && {
            let prev = &rows[idx - 1];
            prev.user == row.user && prev.label == row.label && row.time - prev.time <= config.max_gap_secs
        };
        if continues {
            segments.last_mut().expect("continuing an open segment").end = idx + 1;
        } else {
            segments.push(Segment {
                user: row.user.clone(),
                label: row.label,
                start: idx,
                end: idx + 1,
                start_time: row.time,
            });
        }
        sample_segment.push(segments.len() - 1);
    }
    SegmentIndex {
        segments,
        sample_segment,
    }
}

/// Heatmap of every segment, in segment order.
pub fn vectorize_segments(
    dataset: &Dataset,
    index: &SegmentIndex,
    config: &VectorizationConfig,
) -> Result<Vec<Vec<f64>>, VectorizeError> {
    index
        .segments
        .iter()
        .map(|seg| vectorizer::vectorize_trajectory(&dataset.samples[seg.start..seg.end], config))
        .collect()
}

/// Store records for segment heatmaps; `created_at` is the segment start.
pub fn segment_records(index: &SegmentIndex, grids: &[Vec<f64>]) -> Vec<VectorRecord> {
    index
        .segments
        .iter()
        .zip(grids)
        .map(|(seg, grid)| VectorRecord {
            record_id: 0,
            user: seg.user.clone(),
            label: seg.label.code(),
            vector: grid.iter().map(|&v| v as f32).collect(),
            created_at: seg.start_time,
        })
        .collect()
}

/// Matches stored records back to segments by `(user, created_at, label)`.
///
/// Fails with the index of the first segment that has no stored record.
pub fn grids_from_records(index: &SegmentIndex, records: &[VectorRecord]) -> Result<Vec<Vec<f64>>, usize> {
    use std::collections::HashMap;
    let by_key: HashMap<(&str, i64, u8), &VectorRecord> = records
        .iter()
        .map(|r| ((r.user.as_str(), r.created_at, r.label), r))
        .collect();
    index
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            by_key
                .get(&(seg.user.as_str(), seg.start_time, seg.label.code()))
                .map(|r| r.vector.iter().map(|&v| v as f64).collect())
                .ok_or(i)
        })
        .collect()
}

/// Shape of one sample's features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Metadata scalars per sample (the model's `F`).
    pub meta_width: usize,
    /// Heatmap side length when the grid branch is used.
    pub grid_size: Option<usize>,
}

impl FeatureLayout {
    pub fn grid_width(&self) -> usize {
        self.grid_size.map_or(0, |g| g * g)
    }

    /// Width of the concatenated `[meta, grid]` row.
    pub fn row_width(&self) -> usize {
        self.meta_width + self.grid_width()
    }
}

/// Something that can produce feature rows for arbitrary sample indices.
pub trait FeatureSource {
    fn layout(&self) -> FeatureLayout;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends one `[meta, grid]` row per index to `out`.
    fn fill_rows(&self, indices: &[usize], out: &mut Vec<f64>) -> Result<(), VectorizeError>;
}

/// Features computed once and kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedFeatures {
    pub layout: FeatureLayout,
    /// Row-major, `layout.meta_width` values per sample.
    pub meta: Vec<f64>,
    pub segment_grids: Vec<Vec<f64>>,
    pub sample_segment: Vec<usize>,
}

impl VectorizedFeatures {
    /// Runs the full vectorization once.
    pub fn compute(
        dataset: &Dataset,
        index: &SegmentIndex,
        layout: FeatureLayout,
        config: &VectorizationConfig,
    ) -> Result<Self, VectorizeError> {
        let grids = match layout.grid_size {
            Some(_) => vectorize_segments(dataset, index, &grid_config(layout, config))?,
            None => Vec::new(),
        };
        Self::with_grids(dataset, index, layout, config, grids)
    }

    /// Uses previously computed (e.g. stored) segment heatmaps.
    pub fn with_grids(
        dataset: &Dataset,
        index: &SegmentIndex,
        layout: FeatureLayout,
        config: &VectorizationConfig,
        segment_grids: Vec<Vec<f64>>,
    ) -> Result<Self, VectorizeError> {
        assert_eq!(layout.meta_width, 1, "datasets carry one metadata scalar per sample");
        let meta = vectorizer::vectorize_metadata(&dataset.samples, config)?;
        Ok(VectorizedFeatures {
            layout,
            meta,
            segment_grids,
            sample_segment: index.sample_segment.clone(),
        })
    }
}

fn grid_config(layout: FeatureLayout, config: &VectorizationConfig) -> VectorizationConfig {
    VectorizationConfig {
        grid_size: layout.grid_size.unwrap_or(config.grid_size),
        ..config.clone()
    }
}

impl FeatureSource for VectorizedFeatures {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn len(&self) -> usize {
        self.sample_segment.len()
    }

    fn fill_rows(&self, indices: &[usize], out: &mut Vec<f64>) -> Result<(), VectorizeError> {
        let w = self.layout.meta_width;
        for &i in indices {
            out.extend_from_slice(&self.meta[i * w..(i + 1) * w]);
            if self.layout.grid_size.is_some() {
                out.extend_from_slice(&self.segment_grids[self.sample_segment[i]]);
            }
        }
        Ok(())
    }
}

/// Computes features from raw rows every time they are requested.
pub struct OnTheFlyFeatures<'a> {
    pub dataset: &'a Dataset,
    pub index: &'a SegmentIndex,
    pub layout: FeatureLayout,
    pub config: VectorizationConfig,
}

impl FeatureSource for OnTheFlyFeatures<'_> {
    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn len(&self) -> usize {
        self.dataset.len()
    }

    fn fill_rows(&self, indices: &[usize], out: &mut Vec<f64>) -> Result<(), VectorizeError> {
        assert_eq!(self.layout.meta_width, 1, "datasets carry one metadata scalar per sample");
        // The metadata scalar depends on the whole dataset's heatmap, so
        // nothing short of a full pass can produce it.
        let meta = vectorizer::vectorize_metadata(&self.dataset.samples, &self.config)?;
        let grid_cfg = grid_config(self.layout, &self.config);
        for &i in indices {
            out.push(meta[i]);
            if self.layout.grid_size.is_some() {
                let seg = &self.index.segments[self.index.sample_segment[i]];
                let grid = vectorizer::vectorize_trajectory(&self.dataset.samples[seg.start..seg.end], &grid_cfg)?;
                out.extend_from_slice(&grid);
            }
        }
        Ok(())
    }
}
