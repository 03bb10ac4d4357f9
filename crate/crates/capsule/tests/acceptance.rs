//! Acceptance checks, one PASS/FAIL line per criterion.

#[path = "../../core/tests/common/ap_oracle.rs"]
mod ap_oracle;
#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ap_oracle::brute_force_ap;
use capsule::checkpoint::{load_checkpoint, save_checkpoint};
use capsule::manifest_io::{compute_stats_parallel, read_manifest, write_manifest};
use capsule::plan_io::{read_plan, write_plan, PlanFile};
use capsule::report_io::{read_report, write_report};
use capsule_core::manifest::{compute_stats, FrameRecord, Manifest};
use capsule_core::metrics::{average_precision, evaluate, overall_map, round4, PredictionRow, PredictionSet};
use capsule_core::rng::{self, Stream};
use capsule_core::sampler::{split_train_val, under_sample, SamplingConfig, SelectionPlan};
use capsule_core::synth::{synth_manifest, synth_manifest_with, REFERENCE_LABEL_COUNTS, REFERENCE_CARDINALITY_COUNTS};
use capsule_core::taxonomy::{labelset_from_names, LabelId, LabelSet, NUM_LABELS};
use capsule_core::vit::{self, attention_probs, patch_embed, ModelParams, ViTConfig};
use common::{gradient_check, perturbed_params, random_image};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

fn map_aggregation() -> Outcome {
    let at05 = round4(overall_map(&[0.0596, 0.0018, 0.0001]).unwrap());
    let at095 = round4(overall_map(&[0.0589, 0.0001, 0.0]).unwrap());
    ensure(at05 == 0.0205, || format!("mAP@0.5 = {at05}, expected 0.0205"))?;
    ensure(at095 == 0.0197, || format!("mAP@0.95 = {at095}, expected 0.0197"))?;
    ensure((at095 - 0.0196).abs() <= 0.0001 + 1e-12, || format!("mAP@0.95 = {at095} not within 0.0001 of 0.0196"))?;
    Ok(format!("mAP@0.5 = {at05}, mAP@0.95 = {at095} (within 0.0001 of the reference 0.0196)"))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn ap_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    // Distinct levels straddling every threshold, and a tied variant.
    let distinct = [1.0, 0.96, 0.95, 0.62, 0.5, 0.05];
    let tied = [0.95, 0.95, 0.5, 0.5, 0.2, 0.2];
    let mut cases = 0u64;
    for levels in [&distinct, &tied] {
        for n in 1..=6 {
            for perm in permutations(n) {
                for mask in 0u32..(1 << n) {
                    for tau in [0.0, 0.5, 0.95] {
                        let entries: Vec<(String, f64, bool)> = (0..n)
                            .map(|i| (format!("f{i}"), levels[perm[i]], mask >> i & 1 == 1))
                            .collect();
                        let scores: Vec<(&str, f64)> = entries.iter().map(|e| (e.0.as_str(), e.1)).collect();
                        let pos: BTreeSet<&str> = entries.iter().filter(|e| e.2).map(|e| e.0.as_str()).collect();
                        let formula = average_precision(&scores, &pos, tau).map_err(|e| e.to_string())?;
                        let oracle = brute_force_ap(&entries, tau);
                        ensure(formula == oracle, || format!("{entries:?} tau {tau}: {formula:?} vs {oracle:?}"))?;
                        cases += 1;
                    }
                }
            }
        }
    }
    ensure(cases >= 10_000, || format!("only {cases} cases"))?;
    within(start.elapsed(), 30)?;
    Ok(format!("{cases} cases equal exactly in {:.1}s", start.elapsed().as_secs_f64()))
}

fn threshold_monotonicity() -> Outcome {
    let mut worst_gap = f64::INFINITY;
    for case in 0..1000u64 {
        let mut r = rng::stream_rng(case, Stream::Synth);
        let mut below = |n: u64| rng::uniform_below(&mut r, n) as usize;
        let frames = 5 + below(60);
        let videos = 1 + below(4);
        let label_sets: Vec<LabelSet> = (0..frames)
            .map(|_| {
                (0..1 + below(3))
                    .map(|_| LabelId::new(below(NUM_LABELS as u64)).unwrap())
                    .collect()
            })
            .collect();
        let records: Vec<FrameRecord> = (0..frames)
            .map(|i| FrameRecord {
                frame_id: format!("f{i:03}"),
                video_id: format!("v{}", i % videos),
                frame_index: i as u64,
                labels: label_sets[i],
            })
            .collect();
        let truth = Manifest::from_records(records).map_err(|e| e.to_string())?;
        let rows = truth
            .records()
            .iter()
            .map(|f| PredictionRow {
                frame_id: f.frame_id.clone(),
                video_id: f.video_id.clone(),
                scores: std::array::from_fn(|_| rng::unit_f64(&mut r)),
            })
            .collect();
        let report = evaluate(&PredictionSet { rows }, &truth, &[0.5, 0.95]).map_err(|e| e.to_string())?;
        let gap = report.overall[0] - report.overall[1];
        ensure(gap >= 0.0, || format!("case {case}: mAP@0.95 {} > mAP@0.5 {}", report.overall[1], report.overall[0]))?;
        worst_gap = worst_gap.min(gap);
    }
    Ok(format!("1000 prediction sets, smallest mAP@0.5 - mAP@0.95 = {worst_gap:.4}"))
}

fn selection_ids(plan: &SelectionPlan) -> BTreeSet<&str> {
    plan.selected.iter().map(String::as_str).collect()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn sampler_suite() -> Outcome {
    let start = Instant::now();
    let rows = 1_000_000;
    let target = 3000;
    let m = synth_manifest_with(rows, 7, &REFERENCE_LABEL_COUNTS, &REFERENCE_CARDINALITY_COUNTS);
    let stats = compute_stats(m.records());
    let (rarest, commonest) = {
        let present: Vec<u64> = stats.per_label_count.iter().copied().filter(|&c| c > 0).collect();
        (*present.iter().min().unwrap(), *present.iter().max().unwrap())
    };
    ensure(commonest >= 1000 * rarest, || format!("skew only {commonest}/{rarest}"))?;

    // Streaming CSV round trip at full size.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("big.csv");
    write_manifest(&m, &path).map_err(|e| e.to_string())?;
    let back = read_manifest(&path).map_err(|e| e.to_string())?;
    ensure(back == m, || "manifest CSV round trip changed records".into())?;

    for threads in [1, 4, 8] {
        let s = compute_stats_parallel(&m, Some(threads)).map_err(|e| e.to_string())?;
        ensure(s == stats, || format!("stats differ with {threads} threads"))?;
    }

    let cfg = SamplingConfig { target_per_class: target, seed: 11, ..SamplingConfig::default() };
    let plan = in_pool(1, || under_sample(&m, &cfg)).map_err(|e| e.to_string())?;
    let again = in_pool(8, || under_sample(&m, &cfg)).map_err(|e| e.to_string())?;
    ensure(plan == again, || "selection differs between runs / thread counts".into())?;
    plan.verify_against(&m).map_err(|e| e.to_string())?;

    let selected = selection_ids(&plan);
    let mut singles = [0u64; NUM_LABELS];
    for r in m.records() {
        if r.labels.cardinality() >= 4 {
            ensure(selected.contains(r.frame_id.as_str()), || format!("{} has {} labels but was dropped", r.frame_id, r.labels.cardinality()))?;
        }
        if r.labels.cardinality() == 1 {
            singles[r.labels.iter().next().unwrap().index()] += 1;
        }
    }
    let mut quota_classes = 0;
    let mut full_classes = 0;
    for c in 0..NUM_LABELS {
        let name = LabelId::new(c).unwrap();
        if stats.per_label_count[c] <= target {
            full_classes += 1;
            ensure(plan.per_class_selected[c] == stats.per_label_count[c], || {
                format!("{name}: {} of {} under-target frames kept", plan.per_class_selected[c], stats.per_label_count[c])
            })?;
        }
        if singles[c] >= target {
            quota_classes += 1;
            ensure(plan.per_class_selected[c] >= target, || format!("{name}: only {} selected", plan.per_class_selected[c]))?;
        }
    }

    let bigger = SamplingConfig { target_per_class: 4000, ..cfg };
    let grown = under_sample(&m, &bigger).map_err(|e| e.to_string())?;
    ensure(selected.is_subset(&selection_ids(&grown)), || "raising the target dropped frames".into())?;

    within(start.elapsed(), 60)?;
    Ok(format!(
        "{rows} rows (skew {commonest}/{rarest}), {} selected, {full_classes} classes fully kept, {quota_classes} at quota, {:.1}s",
        plan.selected.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn check_split(plan: &SelectionPlan, what: &str) -> Result<(), String> {
    plan.check_consistency().map_err(|e| e.to_string())?;
    for c in 0..NUM_LABELS {
        let n = plan.per_class_selected[c];
        if n >= 5 {
            let v = plan.per_class_validation[c] as f64;
            ensure((v - 0.2 * n as f64).abs() <= 1.0, || {
                format!("{what}: {} has {v} of {n} in validation", LabelId::new(c).unwrap())
            })?;
        }
    }
    Ok(())
}

fn split_ratios() -> Outcome {
    let cfg = |seed| SamplingConfig { seed, ..SamplingConfig::default() };
    let mut checked = 0;
    for seed in 0..3u64 {
        let m = synth_manifest_with(200_000, 100 + seed, &REFERENCE_LABEL_COUNTS, &REFERENCE_CARDINALITY_COUNTS);
        let plan = under_sample(&m, &cfg(seed)).map_err(|e| e.to_string())?;
        let split = split_train_val(&plan, &m, 0.2, seed).map_err(|e| e.to_string())?;
        check_split(&split, &format!("reference-shaped seed {seed}"))?;
        checked += 1;
    }
    let z = labelset_from_names(&["z_line"]).map_err(|e| e.to_string())?;
    let m = Manifest::from_records((0..122).map(|i| FrameRecord {
        frame_id: format!("z{i:03}"),
        video_id: "v".into(),
        frame_index: i,
        labels: z,
    }))
    .map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    for seed in 0..20 {
        let plan = under_sample(&m, &cfg(seed)).map_err(|e| e.to_string())?;
        let split = split_train_val(&plan, &m, 0.2, seed).map_err(|e| e.to_string())?;
        let v = split.per_class_validation[5];
        ensure(v == 24 || v == 25, || format!("z-line validation {v}"))?;
        check_split(&split, "z-line")?;
        seen.insert(v);
    }
    Ok(format!("{checked} reference-shaped splits within 1 frame; z-line validation {seen:?} (reference 24)"))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let cfg = ViTConfig::toy();
    let target = labelset_from_names(&["stomach", "erosion", "polyp"]).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in [1u64, 2, 3] {
        let params = perturbed_params(&ModelParams::init(&cfg, seed).unwrap(), 100 + seed, 0.05);
        let image = random_image(&[cfg.channels, cfg.image_size, cfg.image_size], 200 + seed);
        for check in gradient_check(&image, target, &params, 1e-5) {
            ensure(check.rel_error < 1e-4, || format!("seed {seed}: {check:?}"))?;
            worst = worst.max(check.rel_error);
        }
    }
    within(start.elapsed(), 120)?;
    Ok(format!("3 seeds, worst per-tensor relative error {worst:.2e}, {:.1}s", start.elapsed().as_secs_f64()))
}

fn shapes_and_normalization() -> Outcome {
    let full = ViTConfig { num_layers: 1, ..ViTConfig::base_16() };
    let params = perturbed_params(&ModelParams::init(&full, 5).unwrap(), 6, 0.5);
    let tokens = patch_embed(&random_image(&[3, 224, 224], 7), &params).map_err(|e| e.to_string())?;
    ensure(tokens.shape() == [197, 768], || format!("token shape {:?}", tokens.shape()))?;
    ensure(ViTConfig::base_16().num_tokens() == 197, || "base config token count".into())?;

    let probs = attention_probs(&tokens, &params.layers[0], full.num_heads).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for row in probs.data().chunks(197) {
        worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-12, || format!("softmax row sum off by {worst:e}"))?;

    let toy = ViTConfig::toy();
    let (mut lo, mut hi) = (1.0f64, 0.0f64);
    for seed in 0..8 {
        let p = perturbed_params(&ModelParams::init(&toy, seed).unwrap(), seed, 0.3);
        let image = random_image(&[3, 32, 32], seed);
        for s in vit::forward(&image, &p).map_err(|e| e.to_string())? {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    ensure(lo > 0.0 && hi < 1.0, || format!("outputs span [{lo}, {hi}]"))?;
    Ok(format!("197x768 tokens, softmax rows within {worst:.1e} of 1, outputs in [{lo:.3}, {hi:.3}]"))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["capsule"];
    argv.extend_from_slice(args);
    match capsule::cli::run(&argv) {
        0 => Ok(()),
        code => Err(format!("`capsule {}` exited {code}", args.join(" "))),
    }
}

fn end_to_end_overfit() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    cli(&["synth", "--frames", "32", "--seed", "3", "-o", &p("frames.csv")])?;
    cli(&["sample", &p("frames.csv"), "--target", "3000", "--seed", "3", "-o", &p("plan.json")])?;
    cli(&["split", &p("plan.json"), "--val-fraction", "0.2", "--seed", "3"])?;
    std::fs::write(p("train.toml"), "epochs = 200\nbatch_size = 8\nseed = 3\ncheckpoint = \"model.json\"\n")
        .map_err(|e| e.to_string())?;
    cli(&["train", &p("plan.json"), "--config", &p("train.toml")])?;

    // Score the training frames only.
    let plan = read_plan(p("plan.json")).map_err(|e| e.to_string())?.plan;
    let all = read_manifest(p("frames.csv")).map_err(|e| e.to_string())?;
    let train: BTreeSet<&str> = plan.train.iter().map(String::as_str).collect();
    let train_manifest = Manifest::from_records(all.records().iter().filter(|r| train.contains(r.frame_id.as_str())).cloned())
        .map_err(|e| e.to_string())?;
    write_manifest(&train_manifest, p("train.csv")).map_err(|e| e.to_string())?;
    cli(&["predict", &p("model.json"), &p("train.csv"), "-o", &p("preds.csv")])?;
    cli(&["eval", &p("preds.csv"), &p("train.csv"), "--thresholds", "0.5,0.95", "-o", &p("report.json")])?;

    let report = read_report(p("report.json")).map_err(|e| e.to_string())?;
    let map = report.overall[0];
    let curve = std::fs::read_to_string(p("model.loss.csv")).map_err(|e| e.to_string())?;
    let last_loss = curve.lines().last().unwrap_or("").to_string();
    ensure(map >= 0.95, || format!("train-set mAP@0.5 = {map:.4}; last epoch,loss = {last_loss}"))?;
    within(start.elapsed(), 300)?;
    Ok(format!(
        "{} training frames, train-set mAP@0.5 = {:.4} after 200 epochs, {:.1}s",
        plan.train.len(),
        round4(map),
        start.elapsed().as_secs_f64()
    ))
}

fn rewrite_identical(path: &Path, rewrite: impl Fn(&Path, &Path) -> Result<(), String>) -> Result<(), String> {
    let copy = path.with_extension("again");
    rewrite(path, &copy)?;
    let a = std::fs::read(path).map_err(|e| e.to_string())?;
    let b = std::fs::read(&copy).map_err(|e| e.to_string())?;
    ensure(a == b, || format!("{} changed on rewrite", path.display()))
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let m = synth_manifest(500, 21);
    let manifest_path = dir.path().join("m.csv");
    write_manifest(&m, &manifest_path).map_err(|e| e.to_string())?;
    rewrite_identical(&manifest_path, |a, b| {
        write_manifest(&read_manifest(a).map_err(|e| e.to_string())?, b).map_err(|e| e.to_string())
    })?;

    let plan = under_sample(&m, &SamplingConfig { target_per_class: 40, seed: 2, ..SamplingConfig::default() })
        .and_then(|p| split_train_val(&p, &m, 0.2, 5))
        .map_err(|e| e.to_string())?;
    let plan_path = dir.path().join("plan.json");
    write_plan(&PlanFile { plan, manifest: "m.csv".into() }, &plan_path).map_err(|e| e.to_string())?;
    rewrite_identical(&plan_path, |a, b| {
        write_plan(&read_plan(a).map_err(|e| e.to_string())?, b).map_err(|e| e.to_string())
    })?;

    let params = perturbed_params(&ModelParams::init(&ViTConfig::toy(), 8).unwrap(), 9, 0.1);
    let ck = dir.path().join("model.json");
    save_checkpoint(&params, &ck).map_err(|e| e.to_string())?;
    ensure(load_checkpoint(&ck).map_err(|e| e.to_string())? == params, || "checkpoint values changed".into())?;
    rewrite_identical(&ck, |a, b| {
        save_checkpoint(&load_checkpoint(a).map_err(|e| e.to_string())?, b).map_err(|e| e.to_string())
    })?;

    let mut r = rng::stream_rng(4, Stream::Synth);
    let rows = m
        .records()
        .iter()
        .map(|f| PredictionRow {
            frame_id: f.frame_id.clone(),
            video_id: f.video_id.clone(),
            scores: std::array::from_fn(|_| rng::unit_f64(&mut r)),
        })
        .collect();
    let report = evaluate(&PredictionSet { rows }, &m, &[0.5, 0.95]).map_err(|e| e.to_string())?;
    let report_path = dir.path().join("report.json");
    write_report(&report, &report_path).map_err(|e| e.to_string())?;
    ensure(read_report(&report_path).map_err(|e| e.to_string())? == report, || "report values changed".into())?;
    rewrite_identical(&report_path, |a, b| {
        write_report(&read_report(a).map_err(|e| e.to_string())?, b).map_err(|e| e.to_string())
    })?;
    Ok("manifest, plan, checkpoint and report rewrite byte-identically".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("per-video mAP aggregation", map_aggregation),
        ("AP oracle equivalence", ap_oracle_equivalence),
        ("threshold monotonicity", threshold_monotonicity),
        ("sampler invariants at 1e6 rows", sampler_suite),
        ("split ratios", split_ratios),
        ("gradient check", gradient_checks),
        ("shapes and normalization", shapes_and_normalization),
        ("end-to-end overfit", end_to_end_overfit),
        ("byte-identical round trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
