//! `dtwalk` — deterministic tourist walk texture analysis from the command
//! line: feature extraction over image datasets, LDA cross-validation,
//! walk-stage benchmarks and small diagnostics (single walks, selection
//! masks).
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use dtwalk::bench::{emit_json, emit_report, run_bench};
use dtwalk::classify::{cross_validate, read_feature_csv};
use dtwalk::features::{extract_dataset, write_feature_csv, ExtractionConfig};
use dtwalk::image::{load_dataset, load_image, GrayImage, PixelCoord};
use dtwalk::sampling::{export_mask, KSpec};
use dtwalk::walk::{run_walk_with_path, Rule, WalkConfig};
use dtwalk::Error;

#[derive(Parser)]
#[command(
    name = "dtwalk",
    version,
    about = "Deterministic tourist walk texture analysis",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract walk features from a class-per-directory image dataset
    Extract(ExtractArgs),
    /// Cross-validate an LDA classifier on a feature CSV
    Classify(ClassifyArgs),
    /// Time the walk stage across start-point densities
    Bench(BenchArgs),
    /// Trace a single walk (diagnostic)
    Walk(WalkArgs),
    /// Write a start-point selection mask as a PGM (diagnostic)
    Mask(MaskArgs),
}

/// Memory sizes given as comma lists and/or inclusive ranges: `0-6`, `0,2,4`,
/// `0-2,5`.
#[derive(Clone, Debug)]
struct MuList(Vec<usize>);

impl FromStr for MuList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for token in s.split(',') {
            let token = token.trim();
            if let Some((a, b)) = token.split_once('-') {
                let a: usize = a.trim().parse().map_err(|_| format!("bad range start '{a}'"))?;
                let b: usize = b.trim().parse().map_err(|_| format!("bad range end '{b}'"))?;
                if a > b {
                    return Err(format!("empty range '{token}'"));
                }
                out.extend(a..=b);
            } else {
                out.push(token.parse().map_err(|_| format!("bad memory size '{token}'"))?);
            }
        }
        if out.is_empty() {
            return Err("memory-size list is empty".into());
        }
        out.sort_unstable();
        out.dedup();
        Ok(MuList(out))
    }
}

/// Movement rules as a comma list: `min`, `max` or `min,max`.
#[derive(Clone, Debug)]
struct RuleList(Vec<Rule>);

impl FromStr for RuleList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let rules: Result<Vec<Rule>, _> = s
            .split(',')
            .map(|tok| tok.parse::<Rule>().map_err(|e| e.to_string()))
            .collect();
        Ok(RuleList(rules?))
    }
}

fn parse_k_spec(s: &str) -> Result<KSpec, String> {
    s.parse::<KSpec>().map_err(|e| e.to_string())
}

/// Spec list for benchmarks: specs separated by commas, divisors inside a
/// composite spec joined with `+` (e.g. `all,10,5,2,2+3`).
#[derive(Clone, Debug)]
struct KSpecList(Vec<KSpec>);

impl FromStr for KSpecList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let specs: Result<Vec<KSpec>, String> = s
            .split(',')
            .map(|tok| parse_k_spec(tok.trim()))
            .collect();
        let specs = specs?;
        if specs.is_empty() {
            return Err("spec list is empty".into());
        }
        Ok(KSpecList(specs))
    }
}

/// Start pixel as `x,y` (row, column).
#[derive(Clone, Copy, Debug)]
struct StartCoord(u32, u32);

impl FromStr for StartCoord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| format!("expected 'x,y', got '{s}'"))?;
        Ok(StartCoord(
            x.trim().parse().map_err(|_| format!("bad row '{x}'"))?,
            y.trim().parse().map_err(|_| format!("bad column '{y}'"))?,
        ))
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Dataset root: one directory per class of PGM/PNG files
    #[arg(long)]
    input: PathBuf,
    /// Output feature CSV
    #[arg(long)]
    out: PathBuf,
    /// Start-point spec: `all` or a divisor list like `2,9`
    #[arg(long = "k-spec", value_parser = parse_k_spec, default_value = "all")]
    k_spec: KSpec,
    /// Memory sizes, e.g. `0-6` or `0,2,4`
    #[arg(long, default_value = "0-6")]
    mu: MuList,
    /// Movement rules, e.g. `min,max`
    #[arg(long, default_value = "min,max")]
    rules: RuleList,
    /// Histogram entries kept per (rule, mu) block
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Feature CSV produced by `extract`
    #[arg(long)]
    features: PathBuf,
    /// Output report CSV (`fold,accuracy` rows plus `overall,ccr`)
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation folds
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Fold-assignment shuffle seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write the confusion matrix CSV here
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of PGM/PNG images (flat)
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (or JSON with --json)
    #[arg(long)]
    out: PathBuf,
    /// Aggregate CSV path (default: `<out>` with extension `agg.csv`)
    #[arg(long)]
    aggregate: Option<PathBuf>,
    /// Specs to compare: comma-separated, `+` joins divisors of one spec
    #[arg(long = "k-specs", default_value = "all,10,5,2,2+3")]
    k_specs: KSpecList,
    /// Memory sizes
    #[arg(long, default_value = "0-6")]
    mu: MuList,
    /// Movement rules
    #[arg(long, default_value = "min")]
    rules: RuleList,
    /// Timed repetitions per cell (besides one discarded warm-up)
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Walk-stage threads (1 isolates algorithmic work reduction)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Emit one JSON document instead of the two CSVs
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WalkArgs {
    /// Image to walk on
    #[arg(long)]
    image: PathBuf,
    /// Start pixel as `x,y` (row, column)
    #[arg(long)]
    start: StartCoord,
    /// Memory size
    #[arg(long, default_value_t = 1)]
    mu: usize,
    /// Movement rule
    #[arg(long, default_value = "min")]
    rule: Rule,
    /// Step cap (default: pixel count of the image)
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct MaskArgs {
    /// Image whose dimensions the mask follows
    #[arg(long)]
    image: PathBuf,
    /// Start-point spec: `all` or a divisor list like `2,9`
    #[arg(long = "k-spec", value_parser = parse_k_spec)]
    k_spec: KSpec,
    /// Output PGM path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Internal(_) => ExitCode::from(4),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Walk(args) => cmd_walk(args),
        Command::Mask(args) => cmd_mask(args),
    }
}

fn create_output(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Error> {
    let dataset = load_dataset(&args.input)?;
    let config = ExtractionConfig::new(
        args.mu.0.iter().copied(),
        args.rules.0.iter().copied(),
        args.m,
        args.k_spec,
    )?;
    let rows = extract_dataset(&dataset, &config, args.threads)?;
    let mut out = create_output(&args.out)?;
    write_feature_csv(&rows, &mut out)?;
    out.flush().map_err(|e| Error::io(&args.out, e))?;
    println!(
        "extracted {} samples x {} features -> {}",
        rows.len(),
        config.dimension(),
        args.out.display()
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Error> {
    let matrix = read_feature_csv(&args.features)?;
    let report = cross_validate(&matrix, args.folds, args.seed)?;
    for (i, acc) in report.fold_accuracies().iter().enumerate() {
        println!("fold {:>2}: {:.4}", i + 1, acc);
    }
    println!("CCR {}", report.ccr_percent_label());
    let mut out = create_output(&args.out)?;
    report.write_report_csv(&mut out)?;
    out.flush().map_err(|e| Error::io(&args.out, e))?;
    if let Some(path) = args.confusion {
        let mut out = create_output(&path)?;
        report.write_confusion_csv(matrix.class_names(), &mut out)?;
        out.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn list_images(dir: &Path) -> Result<Vec<(String, GrayImage)>, Error> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some(ext) if ext.eq_ignore_ascii_case("pgm") || ext.eq_ignore_ascii_case("png")
                )
        })
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()));
    if files.is_empty() {
        return Err(Error::Invalid(format!(
            "no PGM/PNG images in {}",
            dir.display()
        )));
    }
    files
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((id, load_image(&p)?))
        })
        .collect()
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let images = list_images(&args.input)?;
    let suite = run_bench(
        &images,
        &args.k_specs.0,
        &args.mu.0,
        &args.rules.0,
        args.reps,
        args.threads,
    )?;
    if args.json {
        emit_json(&suite, &args.out)?;
        println!("wrote {} records -> {}", suite.records.len(), args.out.display());
    } else {
        let aggregate = args
            .aggregate
            .unwrap_or_else(|| args.out.with_extension("agg.csv"));
        emit_report(&suite, &args.out, &aggregate)?;
        println!(
            "wrote {} records -> {} (aggregate -> {})",
            suite.records.len(),
            args.out.display(),
            aggregate.display()
        );
    }
    Ok(())
}

fn cmd_walk(args: WalkArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    let mut config = WalkConfig::new(args.mu, args.rule);
    if let Some(cap) = args.cap {
        config = config.with_step_cap(cap);
    }
    let start = PixelCoord::new(args.start.0, args.start.1);
    let trajectory = run_walk_with_path(&image, start, &config)?;
    let mut out = String::new();
    for (step, p) in trajectory.path.as_deref().unwrap_or(&[]).iter().enumerate() {
        let code = dtwalk::image::pixel_code(*p, &image)?;
        writeln!(
            out,
            "{step} {} {} {code} {}",
            p.x,
            p.y,
            image.intensity(*p)
        )
        .expect("write to string");
    }
    write!(
        out,
        "tau={} rho={}",
        trajectory.transient_len, trajectory.attractor_period
    )
    .expect("write to string");
    println!("{out}");
    Ok(())
}

fn cmd_mask(args: MaskArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    export_mask(&image, &args.k_spec, &args.out)?;
    println!("wrote mask -> {}", args.out.display());
    Ok(())
}
