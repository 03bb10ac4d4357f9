//! Evaluation report JSON:
//! `{"thresholds": [...], "per_video": {id: {"map": {tau: value},
//! "per_class_ap": {tau: {label: ap | null}}, "excluded_classes": {tau: n}}},
//! "overall": {tau: value}}`. Threshold keys use the shortest decimal form
//! (`"0.5"`, `"0.95"`).

use std::path::Path;

use capsule_core::metrics::{EvalReport, VideoReport};
use capsule_core::taxonomy::{LabelId, NUM_LABELS};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{read_json, write_json};

pub fn threshold_key(tau: f64) -> String {
    tau.to_string()
}

pub fn report_to_json(report: &EvalReport) -> Value {
    let keys: Vec<String> = report.thresholds.iter().map(|&t| threshold_key(t)).collect();
    let per_tau = |f: &dyn Fn(usize) -> Value| -> Value {
        Value::Object(keys.iter().enumerate().map(|(i, k)| (k.clone(), f(i))).collect())
    };
    let per_video: Map<String, Value> = report
        .per_video
        .iter()
        .map(|v| {
            let body = json!({
                "map": per_tau(&|i| json!(v.map_at[i])),
                "per_class_ap": per_tau(&|i| {
                    Value::Object(
                        LabelId::all()
                            .map(|l| (l.canonical_name().to_string(), json!(v.per_class_ap[i][l.index()])))
                            .collect(),
                    )
                }),
                "excluded_classes": per_tau(&|i| json!(v.excluded_classes[i])),
            });
            (v.video_id.clone(), body)
        })
        .collect();
    json!({
        "thresholds": report.thresholds,
        "per_video": per_video,
        "overall": per_tau(&|i| json!(report.overall[i])),
    })
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    write_json(&report_to_json(report), path.as_ref())
}

fn schema(msg: impl Into<String>) -> Error {
    Error::SchemaMismatch(msg.into())
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| schema(format!("missing key {key:?}")))
}

fn per_tau<'a>(v: &'a Value, keys: &[String], what: &str) -> Result<Vec<&'a Value>> {
    let obj = v.as_object().ok_or_else(|| schema(format!("{what} must be an object")))?;
    if obj.len() != keys.len() {
        return Err(schema(format!("{what} must have one entry per threshold")));
    }
    keys.iter()
        .map(|k| obj.get(k).ok_or_else(|| schema(format!("{what} has no entry for threshold {k}"))))
        .collect()
}

fn number(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(format!("{what} must be a number")))
}

pub fn report_from_json(v: &Value) -> Result<EvalReport> {
    let thresholds: Vec<f64> = field(v, "thresholds")?
        .as_array()
        .ok_or_else(|| schema("thresholds must be an array"))?
        .iter()
        .map(|t| number(t, "threshold"))
        .collect::<Result<_>>()?;
    let keys: Vec<String> = thresholds.iter().map(|&t| threshold_key(t)).collect();
    let videos = field(v, "per_video")?
        .as_object()
        .ok_or_else(|| schema("per_video must be an object"))?;
    let mut per_video = Vec::with_capacity(videos.len());
    for (id, body) in videos {
        let map_at = per_tau(field(body, "map")?, &keys, "map")?
            .into_iter()
            .map(|x| number(x, "map"))
            .collect::<Result<_>>()?;
        let excluded_classes = per_tau(field(body, "excluded_classes")?, &keys, "excluded_classes")?
            .into_iter()
            .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(|| schema("excluded_classes must be counts")))
            .collect::<Result<_>>()?;
        let mut per_class_ap = Vec::with_capacity(keys.len());
        for aps in per_tau(field(body, "per_class_ap")?, &keys, "per_class_ap")? {
            let obj = aps.as_object().ok_or_else(|| schema("per_class_ap entries must be objects"))?;
            if obj.len() != NUM_LABELS {
                return Err(schema("per_class_ap must list all 17 labels"));
            }
            let mut row = [None; NUM_LABELS];
            for l in LabelId::all() {
                let x = obj
                    .get(l.canonical_name())
                    .ok_or_else(|| schema(format!("per_class_ap is missing {l}")))?;
                row[l.index()] = if x.is_null() { None } else { Some(number(x, "AP")?) };
            }
            per_class_ap.push(row);
        }
        per_video.push(VideoReport {
            video_id: id.clone(),
            map_at,
            per_class_ap,
            excluded_classes,
        });
    }
    let overall = per_tau(field(v, "overall")?, &keys, "overall")?
        .into_iter()
        .map(|x| number(x, "overall"))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        thresholds,
        per_video,
        overall,
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let v: Value = read_json(path.as_ref())?;
    report_from_json(&v)
}
