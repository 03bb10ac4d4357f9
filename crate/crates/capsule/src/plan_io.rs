//! Selection plan JSON.
//!
//! ```text
//! {"config": {target_per_class, full_inclusion_min_cardinality,
//!             validation_fraction, seed, split_seed},
//!  "manifest": path, "selected": [id...], "train": [id...],
//!  "validation": [id...],
//!  "per_class": {label: {selected, train, validation}}}
//! ```

use std::path::Path;

use capsule_core::sampler::{SamplingConfig, SelectionPlan};
use capsule_core::taxonomy::{LabelId, NUM_LABELS};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{read_json, write_json};

/// A plan together with the manifest its frame ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub plan: SelectionPlan,
    pub manifest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigJson {
    target_per_class: u64,
    full_inclusion_min_cardinality: usize,
    validation_fraction: f64,
    seed: u64,
    split_seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassCounts {
    selected: u64,
    train: u64,
    validation: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanJson {
    config: ConfigJson,
    manifest: String,
    selected: Vec<String>,
    train: Vec<String>,
    validation: Vec<String>,
    per_class: IndexMap<String, ClassCounts>,
}

pub fn write_plan(file: &PlanFile, path: impl AsRef<Path>) -> Result<()> {
    let plan = &file.plan;
    plan.check_consistency().map_err(Error::from_core)?;
    let c = plan.config;
    let json = PlanJson {
        config: ConfigJson {
            target_per_class: c.target_per_class,
            full_inclusion_min_cardinality: c.full_inclusion_min_cardinality,
            validation_fraction: c.validation_fraction,
            seed: c.seed,
            split_seed: c.split_seed,
        },
        manifest: file.manifest.clone(),
        selected: plan.selected.clone(),
        train: plan.train.clone(),
        validation: plan.validation.clone(),
        per_class: LabelId::all()
            .map(|l| {
                let i = l.index();
                let counts = ClassCounts {
                    selected: plan.per_class_selected[i],
                    train: plan.per_class_train[i],
                    validation: plan.per_class_validation[i],
                };
                (l.canonical_name().to_string(), counts)
            })
            .collect(),
    };
    write_json(&json, path.as_ref())
}

/// Parses and checks internal consistency. Counts against the manifest labels
/// are checked separately with [`SelectionPlan::verify_against`].
pub fn read_plan(path: impl AsRef<Path>) -> Result<PlanFile> {
    let json: PlanJson = read_json(path.as_ref())?;
    let names: Vec<&str> = LabelId::all().map(LabelId::canonical_name).collect();
    if json.per_class.keys().map(String::as_str).ne(names.iter().copied()) {
        return Err(Error::SchemaMismatch("per_class must list the 17 labels in order".into()));
    }
    let mut per_class = [[0u64; NUM_LABELS]; 3];
    for (i, counts) in json.per_class.values().enumerate() {
        per_class[0][i] = counts.selected;
        per_class[1][i] = counts.train;
        per_class[2][i] = counts.validation;
    }
    let c = json.config;
    let plan = SelectionPlan {
        config: SamplingConfig {
            target_per_class: c.target_per_class,
            full_inclusion_min_cardinality: c.full_inclusion_min_cardinality,
            validation_fraction: c.validation_fraction,
            seed: c.seed,
            split_seed: c.split_seed,
        },
        selected: json.selected,
        train: json.train,
        validation: json.validation,
        per_class_selected: per_class[0],
        per_class_train: per_class[1],
        per_class_validation: per_class[2],
    };
    plan.check_consistency().map_err(Error::from_core)?;
    Ok(PlanFile { plan, manifest: json.manifest })
}
