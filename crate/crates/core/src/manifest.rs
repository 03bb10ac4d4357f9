//! Frame records and the per-label / per-cardinality counts of a manifest.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::taxonomy::{LabelId, LabelSet, NUM_LABELS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_id: String,
    pub video_id: String,
    pub frame_index: u64,
    pub labels: LabelSet,
}

/// Ground-truth frames in file order. Frame ids are unique and every frame
/// carries at least one label.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    records: Vec<FrameRecord>,
    by_id: BTreeMap<String, usize>,
    source_path: String,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Manifest {
    pub fn new(source_path: impl Into<String>) -> Self {
        Manifest {
            records: Vec::new(),
            by_id: BTreeMap::new(),
            source_path: source_path.into(),
        }
    }

    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = FrameRecord>,
    {
        let mut m = Manifest::default();
        for r in records {
            m.push(r)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, record: FrameRecord) -> Result<()> {
        if record.labels.is_empty() {
            return Err(Error::EmptyLabelSet(record.frame_id));
        }
        if self.by_id.contains_key(&record.frame_id) {
            return Err(Error::DuplicateFrameId(record.frame_id));
        }
        self.by_id.insert(record.frame_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn index_of(&self, frame_id: &str) -> Option<usize> {
        self.by_id.get(frame_id).copied()
    }

    pub fn get(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.index_of(frame_id).map(|i| &self.records[i])
    }

    /// Distinct video ids in order of first appearance.
    pub fn video_ids(&self) -> Vec<&str> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.video_id.as_str(), ()).is_none() {
                out.push(r.video_id.as_str());
            }
        }
        out
    }
}

/// Counts behind the per-label and per-cardinality dataset tables.
///
/// `cardinality_histogram[k - 1]` is the number of frames carrying exactly
/// `k` labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub per_label_count: [u64; NUM_LABELS],
    pub cardinality_histogram: [u64; NUM_LABELS],
    pub total_frames: u64,
}

impl DatasetStats {
    pub fn add(&mut self, labels: LabelSet) {
        for l in labels.iter() {
            self.per_label_count[l.index()] += 1;
        }
        let k = labels.cardinality();
        if k > 0 {
            self.cardinality_histogram[k - 1] += 1;
        }
        self.total_frames += 1;
    }

    pub fn merge(&mut self, other: &DatasetStats) {
        for (a, b) in self.per_label_count.iter_mut().zip(&other.per_label_count) {
            *a += b;
        }
        for (a, b) in self
            .cardinality_histogram
            .iter_mut()
            .zip(&other.cardinality_histogram)
        {
            *a += b;
        }
        self.total_frames += other.total_frames;
    }

    pub fn label_count(&self, label: LabelId) -> u64 {
        self.per_label_count[label.index()]
    }

    /// Frames with exactly `k` labels, `k` in `1..=17`.
    pub fn frames_with_cardinality(&self, k: usize) -> u64 {
        match k {
            1..=NUM_LABELS => self.cardinality_histogram[k - 1],
            _ => 0,
        }
    }

    /// Both tables must describe the same frames: the histogram sums to the
    /// frame total, and its label-weighted sum equals the per-label total.
    pub fn check_consistency(&self) -> Result<()> {
        let frames: u64 = self.cardinality_histogram.iter().sum();
        if frames != self.total_frames {
            return Err(Error::Consistency(format!(
                "cardinality histogram sums to {frames} but total is {}",
                self.total_frames
            )));
        }
        let weighted: u64 = self
            .cardinality_histogram
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64 + 1) * c)
            .sum();
        let labels: u64 = self.per_label_count.iter().sum();
        if weighted != labels {
            return Err(Error::Consistency(format!(
                "histogram implies {weighted} label assignments but per-label counts sum to {labels}"
            )));
        }
        Ok(())
    }
}

pub fn compute_stats(records: &[FrameRecord]) -> DatasetStats {
    let mut s = DatasetStats::default();
    for r in records {
        s.add(r.labels);
    }
    s
}
