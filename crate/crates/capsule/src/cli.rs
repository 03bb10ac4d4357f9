//! The `capsule` command: `stats`, `sample`, `split`, `train`, `predict`,
//! `eval` and `synth`. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use capsule_core::metrics::{evaluate, round4};
use capsule_core::sampler::{split_train_val, under_sample, SamplingConfig};
use capsule_core::synth::{synth_manifest, SyntheticImages};
use capsule_core::trainer::{predict, train};
use clap::{Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::error::Error;
use crate::manifest_io::{compute_stats_parallel, read_manifest, write_manifest};
use crate::plan_io::{read_plan, write_plan, PlanFile};
use crate::predictions::{read_predictions, write_predictions};
use crate::report_io::{threshold_key, write_report};
use crate::stats_io::write_stats_report;
use crate::train_config::{read_train_config, write_loss_curve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "capsule", version, about = "Multi-label capsule endoscopy dataset curation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-label counts and label-cardinality histogram of a manifest.
    Stats {
        /// Manifest CSV (frame_id,video_id,frame_index,labels).
        manifest: PathBuf,
        /// Output stats JSON.
        #[arg(short, long)]
        output: PathBuf,
        /// Worker threads for counting (default: all cores). Output does not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Select a class-balanced subset by cardinality-prioritized under-sampling.
    Sample {
        /// Manifest CSV.
        manifest: PathBuf,
        /// Frames wanted per class.
        #[arg(long, default_value_t = 3000)]
        target: u64,
        /// Frames with at least this many labels are always kept.
        #[arg(long, default_value_t = 4)]
        min_full_cardinality: usize,
        /// Seed for the within-bucket shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output plan JSON. Records the manifest path as given.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Partition a plan's selection into train and validation.
    Split {
        /// Plan JSON written by `sample`.
        plan: PathBuf,
        /// Target validation fraction per class.
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        /// Seed for the split shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output plan JSON (default: overwrite the input plan).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train the ViT on a plan's training frames (synthetic images).
    Train {
        /// Plan JSON; trains on `train` if split, otherwise on `selected`.
        plan: PathBuf,
        /// Training config (TOML, or JSON by extension) naming the checkpoint path.
        #[arg(long)]
        config: PathBuf,
    },
    /// Score every frame of a manifest with a checkpoint.
    Predict {
        /// Model checkpoint JSON.
        checkpoint: PathBuf,
        /// Manifest CSV.
        manifest: PathBuf,
        /// Output predictions CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Per-video and overall mAP at score thresholds.
    Eval {
        /// Predictions CSV.
        predictions: PathBuf,
        /// Ground-truth manifest CSV.
        manifest: PathBuf,
        /// Comma-separated score thresholds in [0, 1].
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.95])]
        thresholds: Vec<f64>,
        /// Output report JSON.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a synthetic manifest with the reference label skew.
    Synth {
        /// Number of frames.
        #[arg(long)]
        frames: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Failures carry the exit code they map to.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<capsule_core::Error> for Failure {
    fn from(e: capsule_core::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

/// Prefixes a non-IO error with the file it came from (IO errors already name it).
fn at<T>(path: &Path, r: crate::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        e @ Error::Io { .. } => Failure::Data(e.to_string()),
        e => Failure::Data(format!("{}: {e}", path.display())),
    })
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let text = e.to_string();
                eprintln!("{}", one_line(text.split("\n\n").next().unwrap_or("invalid arguments")));
                EXIT_USAGE
            } else {
                print!("{e}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {}", one_line(&m));
            EXIT_USAGE
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {}", one_line(&m));
            EXIT_DATA
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Stats { manifest, output, threads } => {
            if threads == Some(0) {
                return Err(Failure::Usage("--threads must be at least 1".into()));
            }
            let m = at(&manifest, read_manifest(&manifest))?;
            let stats = compute_stats_parallel(&m, threads)?;
            write_stats_report(&stats, &output)?;
        }
        Command::Sample { manifest, target, min_full_cardinality, seed, output } => {
            let cfg = SamplingConfig {
                target_per_class: target,
                full_inclusion_min_cardinality: min_full_cardinality,
                seed,
                ..SamplingConfig::default()
            };
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let m = at(&manifest, read_manifest(&manifest))?;
            let plan = under_sample(&m, &cfg)?;
            let file = PlanFile { plan, manifest: manifest.to_string_lossy().into_owned() };
            write_plan(&file, &output)?;
        }
        Command::Split { plan, val_fraction, seed, output } => {
            if !(val_fraction > 0.0 && val_fraction < 1.0) {
                return Err(Failure::Usage(format!("--val-fraction must be in (0, 1), got {val_fraction}")));
            }
            let file = at(&plan, read_plan(&plan))?;
            let manifest_path = PathBuf::from(&file.manifest);
            let m = at(&manifest_path, read_manifest(&manifest_path))?;
            at(&plan, file.plan.verify_against(&m).map_err(Error::from_core))?;
            let split = split_train_val(&file.plan, &m, val_fraction, seed)?;
            let out = output.unwrap_or(plan);
            write_plan(&PlanFile { plan: split, manifest: file.manifest }, &out)?;
        }
        Command::Train { plan, config } => {
            let cfg = at(&config, read_train_config(&config))?;
            let file = at(&plan, read_plan(&plan))?;
            let manifest_path = PathBuf::from(&file.manifest);
            let m = at(&manifest_path, read_manifest(&manifest_path))?;
            at(&plan, file.plan.verify_against(&m).map_err(Error::from_core))?;
            let ids = if file.plan.is_split() { &file.plan.train } else { &file.plan.selected };
            let source = SyntheticImages::new(&cfg.model);
            let outcome = train(&m, ids, &source, &cfg.model, &cfg.train)?;
            for p in [&cfg.checkpoint_path, &cfg.loss_curve_path] {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
                }
            }
            save_checkpoint(&outcome.params, &cfg.checkpoint_path)?;
            write_loss_curve(&outcome.loss_curve, &cfg.loss_curve_path)?;
        }
        Command::Predict { checkpoint, manifest, output } => {
            let params = at(&checkpoint, load_checkpoint(&checkpoint))?;
            let m = at(&manifest, read_manifest(&manifest))?;
            let source = SyntheticImages::new(&params.config);
            let preds = predict(&params, m.records(), &source)?;
            write_predictions(&preds, &output)?;
        }
        Command::Eval { predictions, manifest, thresholds, output } => {
            if thresholds.is_empty() || thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Failure::Usage("--thresholds must be values in [0, 1]".into()));
            }
            let preds = at(&predictions, read_predictions(&predictions))?;
            let m = at(&manifest, read_manifest(&manifest))?;
            let report = evaluate(&preds, &m, &thresholds)?;
            write_report(&report, &output)?;
            print!("{}", format_table(&report));
        }
        Command::Synth { frames, seed, output } => {
            if frames == 0 {
                return Err(Failure::Usage("--frames must be at least 1".into()));
            }
            write_manifest(&synth_manifest(frames, seed), &output)?;
        }
    }
    Ok(())
}

fn format_table(report: &capsule_core::EvalReport) -> String {
    let mut out = format!("{:<16}", "video");
    for &t in &report.thresholds {
        out.push_str(&format!(" {:>10}", format!("mAP@{}", threshold_key(t))));
    }
    out.push('\n');
    let mut row = |name: &str, vals: &[f64]| {
        out.push_str(&format!("{name:<16}"));
        for v in vals {
            out.push_str(&format!(" {:>10.4}", round4(*v)));
        }
        out.push('\n');
    };
    for v in &report.per_video {
        row(&v.video_id, &v.map_at);
    }
    row("overall", &report.overall);
    out
}
