//! Stats report: `{"per_label": {name: count}, "cardinality_histogram":
//! {"1": count, ..., "17": count}, "total": count}`, labels in frozen order.

use std::path::Path;

use capsule_core::taxonomy::{LabelId, NUM_LABELS};
use capsule_core::DatasetStats;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{read_json, write_json};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsReport {
    per_label: IndexMap<String, u64>,
    cardinality_histogram: IndexMap<String, u64>,
    total: u64,
}

/// Refuses to write stats whose two views disagree.
pub fn write_stats_report(stats: &DatasetStats, path: impl AsRef<Path>) -> Result<()> {
    stats.check_consistency().map_err(Error::from_core)?;
    let report = StatsReport {
        per_label: LabelId::all()
            .map(|l| (l.canonical_name().to_string(), stats.label_count(l)))
            .collect(),
        cardinality_histogram: (1..=NUM_LABELS)
            .map(|k| (k.to_string(), stats.frames_with_cardinality(k)))
            .collect(),
        total: stats.total_frames,
    };
    write_json(&report, path.as_ref())
}

pub fn read_stats_report(path: impl AsRef<Path>) -> Result<DatasetStats> {
    let report: StatsReport = read_json(path.as_ref())?;
    let expected_labels: Vec<&str> = LabelId::all().map(LabelId::canonical_name).collect();
    if report.per_label.keys().map(String::as_str).ne(expected_labels.iter().copied()) {
        return Err(Error::SchemaMismatch("per_label must list the 17 labels in order".into()));
    }
    let expected_k: Vec<String> = (1..=NUM_LABELS).map(|k| k.to_string()).collect();
    if report.cardinality_histogram.keys().ne(expected_k.iter()) {
        return Err(Error::SchemaMismatch("cardinality_histogram must have keys \"1\"..\"17\"".into()));
    }
    let mut stats = DatasetStats {
        total_frames: report.total,
        ..Default::default()
    };
    for (slot, v) in stats.per_label_count.iter_mut().zip(report.per_label.values()) {
        *slot = *v;
    }
    for (slot, v) in stats.cardinality_histogram.iter_mut().zip(report.cardinality_histogram.values()) {
        *slot = *v;
    }
    stats.check_consistency().map_err(Error::from_core)?;
    Ok(stats)
}
