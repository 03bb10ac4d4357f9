//! Score-thresholded average precision and per-video mAP.
//!
//! For one class, let `P` be the number of positive frames. Entries scoring
//! below `tau` are dropped; the rest are ranked by score descending with ties
//! broken by frame id ascending. AP is `(1/P) * sum(precision@k)` over the
//! ranks `k` holding a positive, and is undefined when `P == 0`.
//!
//! A video's mAP@tau averages AP over the classes that have at least one
//! positive frame in that video. The overall figure is the unweighted mean over
//! videos.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::taxonomy::NUM_LABELS;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [0.5, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub frame_id: String,
    pub video_id: String,
    pub scores: [f64; NUM_LABELS],
}

/// Classifier output, one row per frame in the frozen label order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    pub rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for row in &self.rows {
            check_scores(&row.frame_id, &row.scores)?;
            if !seen.insert(row.frame_id.as_str()) {
                return Err(Error::DuplicatePrediction(row.frame_id.clone()));
            }
        }
        Ok(())
    }
}

pub fn check_scores(frame_id: &str, scores: &[f64]) -> Result<()> {
    if scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)) {
        Ok(())
    } else {
        Err(Error::InvalidScore(frame_id.into()))
    }
}

fn check_threshold(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("threshold {tau} is outside [0, 1]")))
    }
}

/// Descending score, then ascending frame id.
fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// AP of one class. `Ok(None)` when there are no positives.
pub fn average_precision<S: AsRef<str>>(
    scores: &[(S, f64)],
    positives: &BTreeSet<&str>,
    tau: f64,
) -> Result<Option<f64>> {
    check_threshold(tau)?;
    let mut retained = Vec::with_capacity(scores.len());
    for (id, s) in scores {
        let id = id.as_ref();
        if s.is_nan() {
            return Err(Error::InvalidScore(id.into()));
        }
        if *s >= tau {
            retained.push((id, *s, positives.contains(id)));
        }
    }
    Ok(ranked_ap(retained, positives.len()))
}

fn ranked_ap(mut retained: Vec<(&str, f64, bool)>, num_positives: usize) -> Option<f64> {
    if num_positives == 0 {
        return None;
    }
    retained.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
    let mut hits = 0u64;
    let mut sum = 0.0;
    for (k, &(_, _, positive)) in retained.iter().enumerate() {
        if positive {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / num_positives as f64)
}

/// Mean of the defined APs; `None` if every class is absent.
pub fn mean_defined(aps: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = aps.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Unweighted mean of per-video mAP values, summed in the given order.
pub fn overall_map(per_video: &[f64]) -> Option<f64> {
    if per_video.is_empty() {
        None
    } else {
        Some(per_video.iter().sum::<f64>() / per_video.len() as f64)
    }
}

/// Rounds half-up to four decimals, the precision the results table prints.
pub fn round4(x: f64) -> f64 {
    libm::floor(x * 10_000.0 + 0.5) / 10_000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoReport {
    pub video_id: String,
    /// mAP per threshold, parallel to [`EvalReport::thresholds`].
    pub map_at: Vec<f64>,
    /// Per threshold, AP per label (`None`: no positives in this video).
    pub per_class_ap: Vec<[Option<f64>; NUM_LABELS]>,
    /// Per threshold, number of labels left out of the mean.
    pub excluded_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Sorted by video id.
    pub per_video: Vec<VideoReport>,
    pub overall: Vec<f64>,
}

/// Joins predictions to ground truth: every ground-truth frame needs exactly
/// one prediction under the same video, and no prediction may name an unknown
/// frame. Returns the prediction row for each manifest record.
fn align<'a>(pred: &'a PredictionSet, truth: &Manifest) -> Result<Vec<&'a PredictionRow>> {
    pred.validate()?;
    let mut slots: Vec<Option<&PredictionRow>> = alloc::vec![None; truth.len()];
    for row in &pred.rows {
        let i = truth
            .index_of(&row.frame_id)
            .ok_or_else(|| Error::UnknownFrame(row.frame_id.clone()))?;
        let rec = &truth.records()[i];
        if rec.video_id != row.video_id {
            return Err(Error::VideoMismatch {
                frame_id: row.frame_id.clone(),
                truth: rec.video_id.clone(),
                predicted: row.video_id.clone(),
            });
        }
        slots[i] = Some(row);
    }
    slots
        .into_iter()
        .zip(truth.records())
        .map(|(slot, rec)| slot.ok_or_else(|| Error::MissingPrediction(rec.frame_id.clone())))
        .collect()
}

fn video_report(
    video_id: &str,
    frames: &[usize],
    truth: &Manifest,
    rows: &[&PredictionRow],
    thresholds: &[f64],
) -> VideoReport {
    let records = truth.records();
    let mut num_pos = [0usize; NUM_LABELS];
    for &i in frames {
        for l in records[i].labels.iter() {
            num_pos[l.index()] += 1;
        }
    }
    let mut report = VideoReport {
        video_id: video_id.into(),
        map_at: Vec::with_capacity(thresholds.len()),
        per_class_ap: Vec::with_capacity(thresholds.len()),
        excluded_classes: Vec::with_capacity(thresholds.len()),
    };
    for &tau in thresholds {
        let aps: [Option<f64>; NUM_LABELS] = core::array::from_fn(|c| {
            let retained = frames
                .iter()
                .filter(|&&i| rows[i].scores[c] >= tau)
                .map(|&i| {
                    let positive = records[i].labels.bits() & (1 << c) != 0;
                    (records[i].frame_id.as_str(), rows[i].scores[c], positive)
                })
                .collect();
            ranked_ap(retained, num_pos[c])
        });
        report.map_at.push(mean_defined(&aps).unwrap_or(0.0));
        report.excluded_classes.push(aps.iter().filter(|a| a.is_none()).count());
        report.per_class_ap.push(aps);
    }
    report
}

fn group_by_video(truth: &Manifest) -> BTreeMap<&str, Vec<usize>> {
    let mut videos: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in truth.records().iter().enumerate() {
        videos.entry(r.video_id.as_str()).or_default().push(i);
    }
    videos
}

/// mAP of one video at one threshold.
pub fn map_at(pred: &PredictionSet, truth: &Manifest, video: &str, tau: f64) -> Result<f64> {
    check_threshold(tau)?;
    let rows = align(pred, truth)?;
    let videos = group_by_video(truth);
    let frames = videos
        .get(video)
        .ok_or_else(|| Error::UnknownVideo(video.into()))?;
    Ok(video_report(video, frames, truth, &rows, &[tau]).map_at[0])
}

pub fn evaluate(pred: &PredictionSet, truth: &Manifest, thresholds: &[f64]) -> Result<EvalReport> {
    if thresholds.is_empty() {
        return Err(Error::InvalidConfig("no thresholds given".into()));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let rows = align(pred, truth)?;
    let per_video: Vec<VideoReport> = group_by_video(truth)
        .iter()
        .map(|(id, frames)| video_report(id, frames, truth, &rows, thresholds))
        .collect();
    let overall = (0..thresholds.len())
        .map(|t| {
            let values: Vec<f64> = per_video.iter().map(|v| v.map_at[t]).collect();
            overall_map(&values).unwrap_or(0.0)
        })
        .collect();
    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        per_video,
        overall,
    })
}
