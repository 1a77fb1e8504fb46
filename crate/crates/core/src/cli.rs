//! Command-line front end: describe, eval, bench, thresholds.
//!
//! Exit codes: 0 on success, 1 when an evaluation produced no usable
//! pairs, 2 on input errors (including argument parsing). All data files
//! are byte-deterministic for identical inputs: fixed-precision floats,
//! stable ordering, no timestamps.

use crate::acontrario::{
    approx_threshold, exact_threshold, n_rect, slud_conditions_hold, AContrarioConfig,
    TestCountMode,
};
use crate::dataset::{
    discover_categories, frame_file_path, read_frames, read_homography, read_pgm, synth,
    write_frames, Image,
};
use crate::descriptor::{ClampPolicy, HistogramGrid};
use crate::evaluation::{FeatureFrame, Homography, PRPoint};
use crate::pipeline::{
    clamp_description, describe_image, describe_raw, evaluate_described_pair, DescribeConfig,
};
use crate::plot::pr_svg;
use crate::report::{
    build_report, render_json, render_pairs_csv, render_summary_csv, BenchReport, PairRow,
};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NoUsablePairs(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NoUsablePairs(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "siftclamp",
    version,
    about = "Gradient-orientation descriptors with statistically calibrated clamping"
)]
pub struct Cli {
    /// Worker threads for parallel sections (0 picks the machine default).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build descriptors for one image's frames and write a .desc file.
    Describe(DescribeArgs),
    /// Evaluate one image pair against a ground-truth homography.
    Eval(EvalArgs),
    /// Benchmark policies over a dataset root or the synthetic suite.
    Bench(BenchArgs),
    /// Print clamping thresholds for a given descriptor mass.
    Thresholds(ThresholdsArgs),
}

/// Options shared by every descriptor-building command.
#[derive(Args, Debug, Clone)]
pub struct DescriptorOpts {
    /// Histogram grid as NXxNYxNT.
    #[arg(long, default_value = "4x4x8")]
    pub grid: String,
    /// Cap for the lowe policy (applied to normalized bins).
    #[arg(long, default_value_t = 0.2)]
    pub clamp_c: f64,
    /// Meaningfulness level for the mc policies.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Measurement radius in units of frame scale.
    #[arg(long, default_value_t = 3.0)]
    pub magnification: f64,
}

impl DescriptorOpts {
    fn grid(&self) -> Result<HistogramGrid, CliError> {
        self.grid.parse::<HistogramGrid>().map_err(input)
    }

    fn describe_config(&self, policy: ClampPolicy) -> Result<DescribeConfig, CliError> {
        let cfg = DescribeConfig {
            grid: self.grid()?,
            policy,
            acontrario: AContrarioConfig {
                epsilon: self.epsilon,
                test_count_mode: TestCountMode::Rectangular,
            },
            magnification: self.magnification,
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }

    fn parse_policy(&self, name: &str) -> Result<ClampPolicy, CliError> {
        match name.trim() {
            "none" => Ok(ClampPolicy::None),
            "lowe" => Ok(ClampPolicy::Lowe { c: self.clamp_c }),
            "mc-exact" => Ok(ClampPolicy::MeaningfulExact),
            "mc-approx" => Ok(ClampPolicy::MeaningfulApprox),
            other => Err(CliError::Input(format!(
                "unknown policy {other:?}; expected none|lowe|mc-exact|mc-approx"
            ))),
        }
    }

    fn parse_policies(&self, list: &str) -> Result<Vec<ClampPolicy>, CliError> {
        let policies: Result<Vec<ClampPolicy>, CliError> =
            list.split(',').filter(|s| !s.trim().is_empty()).map(|s| self.parse_policy(s)).collect();
        let policies = policies?;
        if policies.is_empty() {
            return Err(CliError::Input("at least one policy is required".into()));
        }
        Ok(policies)
    }
}

#[derive(Args, Debug)]
pub struct DescribeArgs {
    /// Input image (8-bit PGM).
    #[arg(long)]
    pub image: PathBuf,
    /// Frame file (x y scale orientation per line).
    #[arg(long)]
    pub frames: PathBuf,
    /// Clamping policy: none|lowe|mc-exact|mc-approx.
    #[arg(long, default_value = "lowe")]
    pub policy: String,
    #[command(flatten)]
    pub opts: DescriptorOpts,
    /// Output directory (defaults to the image's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub image_a: PathBuf,
    #[arg(long)]
    pub frames_a: PathBuf,
    #[arg(long)]
    pub image_b: PathBuf,
    #[arg(long)]
    pub frames_b: PathBuf,
    /// Ground-truth homography file (nine numbers, row-major).
    #[arg(long)]
    pub homography: PathBuf,
    /// Comma-separated policies to evaluate.
    #[arg(long, default_value = "none,lowe,mc-approx")]
    pub policies: String,
    #[command(flatten)]
    pub opts: DescriptorOpts,
    /// Points on the distance-threshold sweep.
    #[arg(long, default_value_t = 100)]
    pub sweep_samples: usize,
    /// Directory for CSV/JSON/SVG output (stdout only when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Oxford-layout dataset root (category directories with img1..img6).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Use the built-in synthetic suite instead of a dataset.
    #[arg(long)]
    pub synth: bool,
    /// Number of synthetic pairs.
    #[arg(long, default_value_t = 5)]
    pub synth_pairs: usize,
    /// Seed for the synthetic suite.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Comma-separated policies to benchmark.
    #[arg(long, default_value = "none,lowe,mc-approx")]
    pub policies: String,
    #[command(flatten)]
    pub opts: DescriptorOpts,
    /// Points on the distance-threshold sweep.
    #[arg(long, default_value_t = 100)]
    pub sweep_samples: usize,
    /// Output directory for the report files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ThresholdsArgs {
    /// Descriptor mass M (total raw histogram weight).
    #[arg(long)]
    pub mass: f64,
    /// Histogram grid as NXxNYxNT.
    #[arg(long, default_value = "4x4x8")]
    pub grid: String,
    /// Meaningfulness level.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        // A failure means a pool already exists; that is fine for reruns
        // inside one process (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match cli.command {
        Command::Describe(args) => {
            let path = cmd_describe(&args)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            print!("{}", format_report_text(&report));
            Ok(())
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            print!("{}", format_report_text(&report));
            Ok(())
        }
        Command::Thresholds(args) => {
            let text = cmd_thresholds(&args)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

/// Builds and writes descriptors for one image; returns the output path.
pub fn cmd_describe(args: &DescribeArgs) -> Result<PathBuf, CliError> {
    let policy = args.opts.parse_policy(&args.policy)?;
    let cfg = args.opts.describe_config(policy)?;
    let image = read_pgm(&args.image).map_err(input)?;
    let frames =
        read_frames(&args.frames, Some(cfg.grid.bin_count())).map_err(input)?.frames;
    let outcome = describe_image(&image, &frames, &cfg).map_err(input)?;

    let out_dir = match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
            dir.clone()
        }
        None => args.image.parent().map(Path::to_path_buf).unwrap_or_else(|| ".".into()),
    };
    let out_path = out_dir.join(format!("{}.desc", file_stem(&args.image)));
    write_frames(&out_path, &outcome.set.frames, Some(&outcome.set.descriptors))
        .map_err(input)?;
    eprintln!(
        "described {} of {} frames ({} skipped at the border)",
        outcome.set.len(),
        frames.len(),
        outcome.skipped.len()
    );
    Ok(out_path)
}

/// One evaluation job: a pair of images with frames and ground truth.
struct BenchPair {
    category: String,
    pair: String,
    image_a: Arc<Image>,
    frames_a: Arc<Vec<FeatureFrame>>,
    image_b: Arc<Image>,
    frames_b: Arc<Vec<FeatureFrame>>,
    homography: Homography,
}

/// Rows plus named PR curves for one evaluated pair.
type PairEvaluation = (Vec<PairRow>, Vec<(String, Vec<PRPoint>)>);

fn evaluate_bench_pair(
    job: &BenchPair,
    policies: &[ClampPolicy],
    opts: &DescriptorOpts,
    sweep_samples: usize,
) -> Result<PairEvaluation, CliError> {
    let grid = opts.grid()?;
    let acontrario =
        AContrarioConfig { epsilon: opts.epsilon, test_count_mode: TestCountMode::Rectangular };
    acontrario.validate().map_err(input)?;
    let raw_a = describe_raw(&job.image_a, &job.frames_a, &grid, opts.magnification)
        .map_err(input)?;
    let raw_b = describe_raw(&job.image_b, &job.frames_b, &grid, opts.magnification)
        .map_err(input)?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for policy in policies {
        let a = clamp_description(&raw_a, *policy, &acontrario, &grid).map_err(input)?;
        let b = clamp_description(&raw_b, *policy, &acontrario, &grid).map_err(input)?;
        let outcome = evaluate_described_pair(&a, &b, &job.homography, sweep_samples)
            .map_err(input)?;
        rows.push(PairRow {
            category: job.category.clone(),
            pair: job.pair.clone(),
            policy: policy.label().to_string(),
            ap: outcome.ap.ap,
            correspondences: outcome.ap.correspondences,
            features_a: outcome.retained_a,
            features_b: outcome.retained_b,
            skipped_a: outcome.skipped_a,
            skipped_b: outcome.skipped_b,
        });
        curves.push((
            policy.label().to_string(),
            outcome.curve.map(|c| c.points).unwrap_or_default(),
        ));
    }
    Ok((rows, curves))
}

/// Evaluates one image pair under each requested policy; writes report
/// files when an output directory is given.
pub fn cmd_eval(args: &EvalArgs) -> Result<BenchReport, CliError> {
    let policies = args.opts.parse_policies(&args.policies)?;
    let image_a = read_pgm(&args.image_a).map_err(input)?;
    let image_b = read_pgm(&args.image_b).map_err(input)?;
    let frames_a = read_frames(&args.frames_a, None).map_err(input)?.frames;
    let frames_b = read_frames(&args.frames_b, None).map_err(input)?.frames;
    let homography = read_homography(&args.homography).map_err(input)?;
    let job = BenchPair {
        category: "eval".into(),
        pair: format!("{}-{}", file_stem(&args.image_a), file_stem(&args.image_b)),
        image_a: Arc::new(image_a),
        frames_a: Arc::new(frames_a),
        image_b: Arc::new(image_b),
        frames_b: Arc::new(frames_b),
        homography,
    };
    let (rows, curves) = evaluate_bench_pair(&job, &policies, &args.opts, args.sweep_samples)?;
    let title = format!("{} {}", job.category, job.pair);
    let report = build_report(rows, vec![]);
    if let Some(dir) = &args.out {
        write_report_files(dir, &report, &[(title, curves)])?;
    }
    Ok(report)
}

/// Runs the benchmark over a dataset root or the synthetic suite; writes
/// report files and returns the report.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let policies = args.opts.parse_policies(&args.policies)?;
    if args.dataset.is_some() == args.synth {
        return Err(CliError::Input(
            "exactly one of --dataset ROOT or --synth must be given".into(),
        ));
    }
    let mut skipped: Vec<String> = Vec::new();
    let mut jobs: Vec<BenchPair> = Vec::new();

    if args.synth {
        for pair in synth::default_suite(args.synth_pairs, args.seed) {
            jobs.push(BenchPair {
                category: "synth".into(),
                pair: pair.name,
                image_a: Arc::new(pair.image_a),
                frames_a: Arc::new(pair.frames_a),
                image_b: Arc::new(pair.image_b),
                frames_b: Arc::new(pair.frames_b),
                homography: pair.homography,
            });
        }
    } else {
        let root = args.dataset.as_ref().expect("checked above");
        let categories = discover_categories(root).map_err(input)?;
        if categories.is_empty() {
            skipped.push(format!("{}: no category directories found", root.display()));
        }
        for dir in categories {
            let name = file_stem(&dir);
            let sequence = match crate::dataset::load_sequence(&dir) {
                Ok(s) => s,
                Err(e) => {
                    skipped.push(format!("{name}: {e}"));
                    continue;
                }
            };
            let frames1 = match read_frames(&frame_file_path(&dir, 1), None) {
                Ok(f) => Arc::new(f.frames),
                Err(e) => {
                    skipped.push(format!("{name}: {e}"));
                    continue;
                }
            };
            let image1 = Arc::new(sequence.images[0].clone());
            for (i, image_k) in sequence.images.into_iter().enumerate().skip(1) {
                let k = i + 1;
                let frames_k = match read_frames(&frame_file_path(&dir, k), None) {
                    Ok(f) => f.frames,
                    Err(e) => {
                        skipped.push(format!("{name} 1-{k}: {e}"));
                        continue;
                    }
                };
                jobs.push(BenchPair {
                    category: name.clone(),
                    pair: format!("1-{k}"),
                    image_a: Arc::clone(&image1),
                    frames_a: Arc::clone(&frames1),
                    image_b: Arc::new(image_k),
                    frames_b: Arc::new(frames_k),
                    homography: sequence.homographies[i - 1],
                });
            }
        }
    }

    let evaluated: Vec<(String, Result<PairEvaluation, CliError>)> = jobs
        .par_iter()
        .map(|job| {
            let tag = format!("{} {}", job.category, job.pair);
            (tag, evaluate_bench_pair(job, &policies, &args.opts, args.sweep_samples))
        })
        .collect();

    let mut rows = Vec::new();
    let mut curve_sets = Vec::new();
    for (tag, result) in evaluated {
        match result {
            Ok((pair_rows, curves)) => {
                rows.extend(pair_rows);
                curve_sets.push((tag, curves));
            }
            Err(e) => skipped.push(format!("{tag}: {e}")),
        }
    }
    skipped.sort();
    curve_sets.sort_by(|a, b| a.0.cmp(&b.0));

    if rows.is_empty() {
        for s in &skipped {
            eprintln!("skipped: {s}");
        }
        return Err(CliError::NoUsablePairs("no usable pairs were evaluated".into()));
    }
    let report = build_report(rows, skipped);
    write_report_files(&args.out, &report, &curve_sets)?;
    Ok(report)
}

/// Exact and approximate thresholds for one descriptor mass, as a printed
/// table.
pub fn cmd_thresholds(args: &ThresholdsArgs) -> Result<String, CliError> {
    let grid = args.grid.parse::<HistogramGrid>().map_err(input)?;
    if !(args.mass.is_finite() && args.mass > 0.0) {
        return Err(CliError::Input(format!(
            "mass must be positive and finite, got {}",
            args.mass
        )));
    }
    let cfg = AContrarioConfig {
        epsilon: args.epsilon,
        test_count_mode: TestCountMode::Rectangular,
    };
    cfg.validate().map_err(input)?;
    let tests = n_rect(&grid);
    let p = grid.bin_probability();
    let alpha = tests.ln().sqrt();
    let exact = exact_threshold(&cfg, tests, args.mass, p).map_err(input)?;
    let approx = approx_threshold(tests, args.mass, p).map_err(input)?;
    let slud = slud_conditions_hold(p, approx / args.mass);
    let mut out = String::new();
    let _ = writeln!(out, "grid:        {} (L = {})", args.grid.trim(), grid.bin_count());
    let _ = writeln!(out, "p:           {:.6e}", p);
    let _ = writeln!(out, "tests:       {:.0}", tests);
    let _ = writeln!(out, "epsilon:     {}", args.epsilon);
    let _ = writeln!(out, "mass:        {}", args.mass);
    let _ = writeln!(out, "alpha:       {:.6}", alpha);
    let _ = writeln!(out, "approx:      {:.6}", approx);
    let _ = writeln!(out, "exact:       {}", exact.value);
    let _ = writeln!(out, "saturated:   {}", if exact.saturated { "yes" } else { "no" });
    let _ = writeln!(out, "slud_valid:  {}", if slud { "yes" } else { "no" });
    Ok(out)
}

fn sanitize_file_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_report_files(
    dir: &Path,
    report: &BenchReport,
    curve_sets: &[(String, Vec<(String, Vec<PRPoint>)>)],
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))?;
    write_text(&dir.join("pairs.csv"), &render_pairs_csv(report))?;
    write_text(&dir.join("summary.csv"), &render_summary_csv(report))?;
    write_text(&dir.join("report.json"), &render_json(report))?;
    for (title, curves) in curve_sets {
        let name = format!("pr_{}.svg", sanitize_file_name(title));
        write_text(&dir.join(name), &pr_svg(title, curves))?;
    }
    Ok(())
}

/// Human-readable report summary for stdout.
pub fn format_report_text(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "category  pair  policy  ap  correspondences");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{}  {}  {}  {:.6}  {}",
            r.category, r.pair, r.policy, r.ap, r.correspondences
        );
    }
    let _ = writeln!(out, "mean AP by policy:");
    for s in &report.overall {
        let _ = writeln!(out, "  {}  {:.6}  ({} pairs)", s.policy, s.mean_ap, s.pairs);
    }
    if !report.improvements.is_empty() {
        let _ = writeln!(out, "improvements:");
        for i in &report.improvements {
            let _ = writeln!(out, "  {} vs {}: {:+.2}%", i.policy, i.baseline, i.percent);
        }
    }
    if !report.skipped.is_empty() {
        let _ = writeln!(out, "skipped:");
        for s in &report.skipped {
            let _ = writeln!(out, "  - {s}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        let opts = DescriptorOpts {
            grid: "4x4x8".into(),
            clamp_c: 0.3,
            epsilon: 1.0,
            magnification: 3.0,
        };
        assert_eq!(opts.parse_policy("none").unwrap(), ClampPolicy::None);
        assert_eq!(opts.parse_policy("lowe").unwrap(), ClampPolicy::Lowe { c: 0.3 });
        assert_eq!(opts.parse_policy("mc-exact").unwrap(), ClampPolicy::MeaningfulExact);
        assert_eq!(opts.parse_policy("mc-approx").unwrap(), ClampPolicy::MeaningfulApprox);
        assert!(opts.parse_policy("ratio").is_err());
        let list = opts.parse_policies("none, lowe,mc-approx").unwrap();
        assert_eq!(list.len(), 3);
        assert!(opts.parse_policies("").is_err());
    }

    #[test]
    fn thresholds_text_for_the_default_grid() {
        let args = ThresholdsArgs { mass: 1000.0, grid: "4x4x8".into(), epsilon: 1.0 };
        let text = cmd_thresholds(&args).unwrap();
        assert!(text.contains("tests:       3600"));
        assert!(text.contains("approx:      15.779958"));
        assert!(text.contains("slud_valid:  yes"));
        let approx_line: f64 = 15.779958;
        let exact_line: u64 = text
            .lines()
            .find(|l| l.starts_with("exact:"))
            .and_then(|l| l.split_whitespace().nth(1))
            .and_then(|v| v.parse().ok())
            .unwrap();
        assert!(exact_line as f64 >= approx_line);
        assert!(cmd_thresholds(&ThresholdsArgs {
            mass: -3.0,
            grid: "4x4x8".into(),
            epsilon: 1.0
        })
        .is_err());
        assert!(cmd_thresholds(&ThresholdsArgs {
            mass: 10.0,
            grid: "4x4".into(),
            epsilon: 1.0
        })
        .is_err());
    }

    #[test]
    fn unit_grid_threshold_equals_the_mean() {
        // One test on a 1×1×1 grid: alpha = 0, the closed form collapses
        // to M·p = M.
        let args = ThresholdsArgs { mass: 25.0, grid: "1x1x1".into(), epsilon: 1.0 };
        let text = cmd_thresholds(&args).unwrap();
        assert!(text.contains("tests:       1"));
        assert!(text.contains("alpha:       0.000000"));
        assert!(text.contains("approx:      25.000000"));
    }
}
