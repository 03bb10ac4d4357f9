//! Cardinality-ordered random under-sampling and the train/validation split.
//!
//! Selection walks label-cardinality buckets from 17 down to 1. Buckets at or
//! above [`SamplingConfig::full_inclusion_min_cardinality`] are taken whole.
//! Each lower bucket is shuffled (see [`crate::rng`]) and scanned; a frame is
//! kept when at least one of its labels is still below
//! [`SamplingConfig::target_per_class`]. Kept frames may push other labels past
//! the target; nothing is removed afterwards.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::rng::{self, Stream};
use crate::taxonomy::{LabelSet, NUM_LABELS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub target_per_class: u64,
    pub full_inclusion_min_cardinality: usize,
    pub validation_fraction: f64,
    /// Seed of the under-sampling shuffle.
    pub seed: u64,
    /// Seed of the split shuffle, set once the plan has been split.
    pub split_seed: Option<u64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            target_per_class: 3000,
            full_inclusion_min_cardinality: 4,
            validation_fraction: 0.2,
            seed: 0,
            split_seed: None,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_per_class < 1 {
            return Err(Error::InvalidConfig("target_per_class must be at least 1".into()));
        }
        if !(1..=NUM_LABELS).contains(&self.full_inclusion_min_cardinality) {
            return Err(Error::InvalidConfig(format!(
                "full_inclusion_min_cardinality must be in 1..=17, got {}",
                self.full_inclusion_min_cardinality
            )));
        }
        let f = self.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must be in (0, 1), got {f}"
            )));
        }
        Ok(())
    }
}

/// Selected frames and, once split, their train/validation partition.
///
/// `selected` keeps selection order. `train` and `validation` keep the same
/// relative order and are empty until [`split_train_val`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPlan {
    pub config: SamplingConfig,
    pub selected: Vec<String>,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub per_class_selected: [u64; NUM_LABELS],
    pub per_class_train: [u64; NUM_LABELS],
    pub per_class_validation: [u64; NUM_LABELS],
}

impl SelectionPlan {
    pub fn is_split(&self) -> bool {
        self.config.split_seed.is_some()
    }

    /// Structural checks that need no manifest: no duplicates, disjoint
    /// partition covering the selection, and per-class counts that add up.
    pub fn check_consistency(&self) -> Result<()> {
        self.config.validate()?;
        let selected = unique_set("selected", &self.selected)?;
        let train = unique_set("train", &self.train)?;
        let validation = unique_set("validation", &self.validation)?;
        if let Some(id) = train.intersection(&validation).next() {
            return Err(Error::Consistency(format!(
                "frame {id:?} is in both train and validation"
            )));
        }
        if self.is_split() {
            if train.len() + validation.len() != selected.len()
                || !train.iter().chain(validation.iter()).all(|id| selected.contains(id))
            {
                return Err(Error::Consistency(
                    "train and validation do not partition the selection".into(),
                ));
            }
        } else if !train.is_empty() || !validation.is_empty() {
            return Err(Error::Consistency(
                "plan has no split seed but lists train/validation frames".into(),
            ));
        }
        for c in 0..NUM_LABELS {
            if self.per_class_selected[c] != self.per_class_train[c] + self.per_class_validation[c]
                && self.is_split()
            {
                return Err(Error::Consistency(format!(
                    "class {c}: selected {} != train {} + validation {}",
                    self.per_class_selected[c], self.per_class_train[c], self.per_class_validation[c]
                )));
            }
            if !self.is_split() && (self.per_class_train[c] != 0 || self.per_class_validation[c] != 0) {
                return Err(Error::Consistency(format!(
                    "class {c} has train/validation counts in an unsplit plan"
                )));
            }
            if self.per_class_selected[c] > self.selected.len() as u64 {
                return Err(Error::Consistency(format!(
                    "class {c} count {} exceeds the {} selected frames",
                    self.per_class_selected[c],
                    self.selected.len()
                )));
            }
        }
        Ok(())
    }

    /// Recomputes every per-class count from the manifest's labels.
    pub fn verify_against(&self, manifest: &Manifest) -> Result<()> {
        self.check_consistency()?;
        let count = |ids: &[String]| -> Result<[u64; NUM_LABELS]> {
            let mut counts = [0u64; NUM_LABELS];
            for id in ids {
                let rec = manifest.get(id).ok_or_else(|| {
                    Error::Consistency(format!("plan frame {id:?} is not in the manifest"))
                })?;
                add_counts(&mut counts, rec.labels);
            }
            Ok(counts)
        };
        let expected = [
            ("selected", count(&self.selected)?, &self.per_class_selected),
            ("train", count(&self.train)?, &self.per_class_train),
            ("validation", count(&self.validation)?, &self.per_class_validation),
        ];
        for (what, recomputed, stored) in expected {
            if &recomputed != stored {
                return Err(Error::Consistency(format!(
                    "{what} per-class counts do not match the manifest labels"
                )));
            }
        }
        Ok(())
    }
}

fn unique_set<'a>(what: &str, ids: &'a [String]) -> Result<BTreeSet<&'a str>> {
    let mut set = BTreeSet::new();
    for id in ids {
        if !set.insert(id.as_str()) {
            return Err(Error::Consistency(format!("frame {id:?} listed twice in {what}")));
        }
    }
    Ok(set)
}

fn add_counts(counts: &mut [u64; NUM_LABELS], labels: LabelSet) {
    for l in labels.iter() {
        counts[l.index()] += 1;
    }
}

/// Manifest positions of the selected frames, in selection order.
pub fn select_indices(manifest: &Manifest, cfg: &SamplingConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); NUM_LABELS + 1];
    for (i, r) in manifest.records().iter().enumerate() {
        buckets[r.labels.cardinality()].push(i);
    }
    let records = manifest.records();
    let target = cfg.target_per_class;
    let mut counts = [0u64; NUM_LABELS];
    let mut below_target = NUM_LABELS;
    let mut selected = Vec::new();

    let mut take = |i: usize, counts: &mut [u64; NUM_LABELS], below: &mut usize| {
        for l in records[i].labels.iter() {
            let c = &mut counts[l.index()];
            *c += 1;
            if *c == target {
                *below -= 1;
            }
        }
        selected.push(i);
    };

    let min_full = cfg.full_inclusion_min_cardinality;
    for k in (min_full..=NUM_LABELS).rev() {
        for &i in &buckets[k] {
            take(i, &mut counts, &mut below_target);
        }
    }

    let mut rng = rng::stream_rng(cfg.seed, Stream::UnderSample);
    for k in (1..min_full).rev() {
        let bucket = &mut buckets[k];
        rng::shuffle(bucket, &mut rng);
        for &i in bucket.iter() {
            // Once every class is at target no later frame can qualify.
            if below_target == 0 {
                break;
            }
            if records[i].labels.iter().any(|l| counts[l.index()] < target) {
                take(i, &mut counts, &mut below_target);
            }
        }
    }
    Ok(selected)
}

/// Selection only; the split fields of the returned plan are empty.
pub fn under_sample(manifest: &Manifest, cfg: &SamplingConfig) -> Result<SelectionPlan> {
    let indices = select_indices(manifest, cfg)?;
    let records = manifest.records();
    let mut per_class_selected = [0u64; NUM_LABELS];
    let mut selected = Vec::with_capacity(indices.len());
    for &i in &indices {
        add_counts(&mut per_class_selected, records[i].labels);
        selected.push(records[i].frame_id.clone());
    }
    Ok(SelectionPlan {
        config: SamplingConfig {
            split_seed: None,
            ..*cfg
        },
        selected,
        train: Vec::new(),
        validation: Vec::new(),
        per_class_selected,
        per_class_train: [0; NUM_LABELS],
        per_class_validation: [0; NUM_LABELS],
    })
}

/// Partitions the selection into train and validation.
///
/// The selection is shuffled with the split stream of `seed`, then stably
/// ordered so frames whose rarest label is rarest come first. A first walk
/// sends a frame to validation when every one of its labels is below
/// `round(fraction * n_c)`; for single-label data this is already exact.
/// Multi-label frames can leave some classes short, so [`rebalance`] then
/// moves frames across while that lowers the total deviation penalty.
pub fn split_train_val(
    plan: &SelectionPlan,
    manifest: &Manifest,
    validation_fraction: f64,
    seed: u64,
) -> Result<SelectionPlan> {
    let config = SamplingConfig {
        validation_fraction,
        split_seed: Some(seed),
        ..plan.config
    };
    config.validate()?;

    let mut labels = Vec::with_capacity(plan.selected.len());
    for id in &plan.selected {
        let rec = manifest.get(id).ok_or_else(|| {
            Error::Consistency(format!("plan frame {id:?} is not in the manifest"))
        })?;
        labels.push(rec.labels);
    }

    let mut n = [0u64; NUM_LABELS];
    for &s in &labels {
        add_counts(&mut n, s);
    }
    let ideal: [f64; NUM_LABELS] = core::array::from_fn(|c| validation_fraction * n[c] as f64);
    let quota: [u64; NUM_LABELS] = core::array::from_fn(|c| libm::floor(ideal[c] + 0.5) as u64);

    let mut order: Vec<usize> = (0..labels.len()).collect();
    rng::shuffle(&mut order, &mut rng::stream_rng(seed, Stream::Split));
    let rarest = |s: LabelSet| s.iter().map(|l| n[l.index()]).min().unwrap_or(0);
    order.sort_by_key(|&i| rarest(labels[i]));

    let mut in_validation = vec![false; labels.len()];
    let mut val = [0u64; NUM_LABELS];
    for &i in &order {
        if labels[i].iter().all(|l| val[l.index()] < quota[l.index()]) {
            in_validation[i] = true;
            add_counts(&mut val, labels[i]);
        }
    }
    rebalance(&labels, &order, &ideal, &mut in_validation, &mut val);

    let mut out = SelectionPlan {
        config,
        selected: plan.selected.clone(),
        train: Vec::new(),
        validation: Vec::new(),
        per_class_selected: n,
        per_class_train: [0; NUM_LABELS],
        per_class_validation: val,
    };
    for (i, id) in plan.selected.iter().enumerate() {
        if in_validation[i] {
            out.validation.push(id.clone());
        } else {
            out.train.push(id.clone());
            add_counts(&mut out.per_class_train, labels[i]);
        }
    }
    Ok(out)
}

/// Cost of a class whose validation count is `dev` frames off its ideal.
/// Quadratic inside the ±1 band, steeply so outside it.
fn deviation_cost(dev: f64) -> f64 {
    let outside = (libm::fabs(dev) - 1.0).max(0.0);
    dev * dev + 100.0 * outside * outside
}

const MAX_REBALANCE_ROUNDS: usize = 64;
/// Upper bound on pair evaluations in [`rebalance`], for very large selections.
const PAIR_BUDGET: u64 = 50_000_000;

struct Balance<'a> {
    labels: &'a [LabelSet],
    ideal: &'a [f64; NUM_LABELS],
    in_validation: &'a mut [bool],
    val: &'a mut [u64; NUM_LABELS],
}

impl Balance<'_> {
    fn step(&self, i: usize) -> i64 {
        if self.in_validation[i] {
            -1
        } else {
            1
        }
    }

    /// Cost change of moving frame `i`, given pending per-class offsets.
    fn delta(&self, i: usize, offset: &[i64; NUM_LABELS]) -> f64 {
        let step = self.step(i) as f64;
        self.labels[i]
            .iter()
            .map(|l| {
                let c = l.index();
                let dev = self.val[c] as f64 + offset[c] as f64 - self.ideal[c];
                deviation_cost(dev + step) - deviation_cost(dev)
            })
            .sum()
    }

    fn apply(&mut self, i: usize) {
        let step = self.step(i);
        self.in_validation[i] = !self.in_validation[i];
        for l in self.labels[i].iter() {
            self.val[l.index()] = (self.val[l.index()] as i64 + step) as u64;
        }
    }

    fn out_of_band(&self, i: usize) -> bool {
        self.labels[i]
            .iter()
            .any(|l| libm::fabs(self.val[l.index()] as f64 - self.ideal[l.index()]) > 1.0)
    }

    fn single_moves(&mut self, order: &[usize]) {
        let none = [0i64; NUM_LABELS];
        for _ in 0..MAX_REBALANCE_ROUNDS {
            let mut moved = false;
            for &i in order {
                if self.delta(i, &none) < -1e-9 {
                    self.apply(i);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }

    /// First improving pair `(a, b)` with `a` touching an out-of-band class
    /// and `b` sharing a label with `a`; disjoint pairs cannot improve on
    /// single moves.
    fn find_pair(&self, order: &[usize], budget: &mut u64) -> Option<(usize, usize)> {
        for &a in order {
            if !self.out_of_band(a) {
                continue;
            }
            let mut offset = [0i64; NUM_LABELS];
            for l in self.labels[a].iter() {
                offset[l.index()] = self.step(a);
            }
            let da = self.delta(a, &[0; NUM_LABELS]);
            for &b in order {
                if b == a || self.labels[a].bits() & self.labels[b].bits() == 0 {
                    continue;
                }
                if *budget == 0 {
                    return None;
                }
                *budget -= 1;
                if da + self.delta(b, &offset) < -1e-9 {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

/// Local search over frame moves in `order`: single moves while one strictly
/// lowers `sum_c deviation_cost(val_c - ideal_c)`, then improving pair moves
/// around classes still outside ±1. Every accepted move lowers the cost, so
/// the search terminates and depends only on its inputs.
fn rebalance(
    labels: &[LabelSet],
    order: &[usize],
    ideal: &[f64; NUM_LABELS],
    in_validation: &mut [bool],
    val: &mut [u64; NUM_LABELS],
) {
    let mut b = Balance { labels, ideal, in_validation, val };
    let mut budget = PAIR_BUDGET;
    b.single_moves(order);
    while let Some((x, y)) = b.find_pair(order, &mut budget) {
        b.apply(x);
        b.apply(y);
        b.single_moves(order);
    }
}
