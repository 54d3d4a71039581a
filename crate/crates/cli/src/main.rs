//! Command-line front end: benchmarking, threshold tables, snapshot
//! fitting, scoring, and streaming detection.
//!
//! Exit codes are a stable contract for scripting: 0 success, 2 usage
//! errors, 3 data errors, 4 numerical failures.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use momentup::bench::{self, BenchConfig};
use momentup::{
    costmodel, score, DetectorConfig, Error, FitOptions, LearnPolicy, MomentState, StreamDetector,
    UpdateMethod,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_)
            | Error::InvalidDimension(_)
            | Error::DegreeTooLarge(_)
            | Error::BasisSizeOverflow { .. }
            | Error::MissingMatrix => EXIT_USAGE,
            Error::ShapeMismatch { .. }
            | Error::EmptyBatch
            | Error::MissingBasis
            | Error::Snapshot(_)
            | Error::Io(_) => EXIT_DATA,
            Error::RankDeficient { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::SingularUpdate { .. }
            | Error::EmptyState
            | Error::ConditioningFailure(_) => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "momentup",
    version,
    about = "Streaming moment-matrix inverse updates, outlier scoring, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the timing/error benchmark and emit a CSV of records
    Bench(BenchArgs),
    /// Benchmark a grid of sizes and report the fastest method per (s, k)
    Grid(GridArgs),
    /// Print crossover thresholds for a list of matrix sizes
    Thresholds(ThresholdsArgs),
    /// Score points from a CSV file against a fitted snapshot
    Score(ScoreArgs),
    /// Stream points through a detector: score, learn, optionally persist
    Stream(StreamArgs),
    /// Fit a snapshot from a CSV of points
    Snapshot(SnapshotArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment config; defaults reproduce the reference protocol
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Exit nonzero if any cell failed
    #[arg(long)]
    strict: bool,
    /// Keep every timed cell alone on the machine (disable with =false to
    /// spread sizes across threads)
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    serial_timing: bool,
}

#[derive(Args)]
struct GridArgs {
    /// JSON experiment config; defaults to the desk-scale grid protocol
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the full per-cell records CSV here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG heatmap of the winner grid here
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    serial_timing: bool,
}

#[derive(Args)]
struct ThresholdsArgs {
    /// Matrix sizes s
    #[arg(required = true)]
    sizes: Vec<usize>,
    /// Aligned human-readable table instead of CSV
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Fitted snapshot to score against
    #[arg(long)]
    model: PathBuf,
    /// CSV of points, one point per line, d columns
    points: PathBuf,
    /// Scoring threshold γ (default: basis size s)
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct StreamArgs {
    /// Snapshot to start from
    #[arg(long)]
    model: PathBuf,
    /// CSV of points, one point per line, d columns
    points: PathBuf,
    /// Scoring threshold γ (default: basis size s)
    #[arg(long)]
    gamma: Option<f64>,
    /// Batch size for rank-k learning
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Update method
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Which scored points to learn from
    #[arg(long, value_enum, default_value_t = PolicyArg::Inliers)]
    policy: PolicyArg,
    /// Persist the updated snapshot back to --model
    #[arg(long)]
    save: bool,
}

#[derive(Args)]
struct SnapshotArgs {
    /// Point dimension d
    #[arg(long)]
    d: usize,
    /// Maximum degree n
    #[arg(long)]
    n: usize,
    /// Ridge term λ
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Retain the moment matrix (needed for later DI updates)
    #[arg(long)]
    track_matrix: bool,
    /// Where to write the snapshot
    #[arg(long)]
    out: PathBuf,
    /// CSV of points, one point per line, d columns
    points: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Di,
    Ism,
    Wmi,
    Auto,
}

impl From<MethodArg> for UpdateMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Di => UpdateMethod::Di,
            MethodArg::Ism => UpdateMethod::Ism,
            MethodArg::Wmi => UpdateMethod::Wmi,
            MethodArg::Auto => UpdateMethod::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Always,
    Inliers,
    Never,
}

impl From<PolicyArg> for LearnPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Always => LearnPolicy::Always,
            PolicyArg::Inliers => LearnPolicy::InliersOnly,
            PolicyArg::Never => LearnPolicy::Never,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Thresholds(args) => cmd_thresholds(args),
        Command::Score(args) => cmd_score(args),
        Command::Stream(args) => cmd_stream(args),
        Command::Snapshot(args) => cmd_snapshot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&Path>, grid: bool) -> Result<BenchConfig, Failure> {
    match path {
        Some(p) => {
            let file = File::open(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            serde_json::from_reader(BufReader::new(file))
                .map_err(|e| Failure::usage(format!("malformed config {}: {e}", p.display())))
        }
        None if grid => Ok(BenchConfig::grid_default()),
        None => Ok(BenchConfig::default()),
    }
}

fn run_benchmark(
    config: &BenchConfig,
    serial: bool,
    strict: bool,
) -> Result<Vec<bench::BenchRecord>, Failure> {
    config.validate().map_err(Failure::from)?;
    for warning in config.soft_warnings() {
        eprintln!("warning: {warning}");
    }
    let records = bench::run_suite(config, !serial).map_err(Failure::from)?;
    let failed: Vec<&bench::BenchRecord> = records.iter().filter(|r| r.failure.is_some()).collect();
    for r in &failed {
        eprintln!(
            "warning: cell s={} k={} {} failed: {}",
            r.s,
            r.k,
            r.method,
            r.failure.as_deref().unwrap_or("unknown")
        );
    }
    if strict && !failed.is_empty() {
        return Err(Failure::numerical(format!(
            "{} benchmark cell(s) failed",
            failed.len()
        )));
    }
    Ok(records)
}

fn write_records(records: &[bench::BenchRecord], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path)?;
            bench::write_csv(records, BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            bench::write_csv(records, stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref(), false)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let records = run_benchmark(&config, args.serial_timing, args.strict)?;
    write_records(&records, args.out.as_deref())
}

fn cmd_grid(args: GridArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_deref(), true)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let records = run_benchmark(&config, args.serial_timing, args.strict)?;
    let outcome = bench::GridOutcome::from_records(records);

    if let Some(path) = &args.out {
        let file = File::create(path)?;
        bench::write_csv(&outcome.records, BufWriter::new(file))?;
    }
    if let Some(path) = &args.svg {
        let file = File::create(path)?;
        bench::write_svg_heatmap(&outcome, BufWriter::new(file))?;
    }

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "s,k,winner")?;
    for &(s, k, m) in &outcome.winners {
        writeln!(w, "{s},{k},{m}")?;
    }
    Ok(())
}

fn cmd_thresholds(args: ThresholdsArgs) -> Result<(), Failure> {
    struct Row {
        s: usize,
        di_ism: f64,
        di_wmi_cubic: f64,
        di_wmi_empirical: f64,
        boundary: usize,
    }
    let rows: Vec<Row> = args
        .sizes
        .iter()
        .map(|&s| {
            if s == 0 {
                return Err(Failure::usage("sizes must be >= 1"));
            }
            Ok(Row {
                s,
                di_ism: costmodel::threshold_di_over_ism(s),
                di_wmi_cubic: costmodel::threshold_di_over_wmi(s),
                di_wmi_empirical: costmodel::empirical_threshold_di_over_wmi(s),
                boundary: s / 3,
            })
        })
        .collect::<Result<_, _>>()?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if args.pretty {
        writeln!(
            w,
            "{:>8}  {:>14}  {:>16}  {:>20}  {:>14}",
            "s", "di_over_ism", "di_over_wmi_cubic", "di_over_wmi_empirical", "rule_boundary"
        )?;
        for r in rows {
            writeln!(
                w,
                "{:>8}  {:>14.3}  {:>16.3}  {:>20.3}  {:>14}",
                r.s, r.di_ism, r.di_wmi_cubic, r.di_wmi_empirical, r.boundary
            )?;
        }
    } else {
        writeln!(
            w,
            "s,di_over_ism,di_over_wmi_cubic,di_over_wmi_empirical,recommended_rule_boundary"
        )?;
        for r in rows {
            writeln!(
                w,
                "{},{:.3},{:.3},{:.3},{}",
                r.s, r.di_ism, r.di_wmi_cubic, r.di_wmi_empirical, r.boundary
            )?;
        }
    }
    let refit = costmodel::fit_empirical_ratio(&args.sizes);
    eprintln!(
        "refit empirical ratio over requested sizes: {refit:.4} (published constant {})",
        costmodel::EMPIRICAL_DI_WMI_RATIO
    );
    Ok(())
}

/// One point per line, d comma-separated decimal doubles. Blank lines are
/// skipped.
fn read_points(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let file = File::open(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let point: Vec<f64> = trimmed
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Failure::data(format!(
                        "{}:{}: not a number: {f:?}",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        if let Some(first) = points.first() {
            let expected: &Vec<f64> = first;
            if point.len() != expected.len() {
                return Err(Failure::data(format!(
                    "{}:{}: expected {} columns, got {}",
                    path.display(),
                    lineno + 1,
                    expected.len(),
                    point.len()
                )));
            }
        }
        points.push(point);
    }
    if points.is_empty() {
        return Err(Failure::data(format!(
            "{}: no points found",
            path.display()
        )));
    }
    Ok(points)
}

fn load_model(path: &Path) -> Result<MomentState, Failure> {
    let file = File::open(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    MomentState::load_snapshot(BufReader::new(file)).map_err(Failure::from)
}

const SCORE_HEADER: &str = "index,inverse_cf,score,is_outlier";

fn cmd_score(args: ScoreArgs) -> Result<(), Failure> {
    let state = load_model(&args.model)?;
    let points = read_points(&args.points)?;
    let gamma = args.gamma.unwrap_or(state.width() as f64);

    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "{SCORE_HEADER}")?;
    for (i, p) in points.iter().enumerate() {
        let report = score(&state, p, gamma)?;
        writeln!(
            w,
            "{i},{:.8e},{:.8e},{}",
            report.inverse_cf, report.score, report.is_outlier
        )?;
    }
    Ok(())
}

fn cmd_stream(args: StreamArgs) -> Result<(), Failure> {
    if args.k == 0 {
        return Err(Failure::usage("--k must be >= 1"));
    }
    let state = load_model(&args.model)?;
    let points = read_points(&args.points)?;
    let config = DetectorConfig {
        gamma: args.gamma,
        learn_policy: args.policy.into(),
        batch_size: args.k,
        method: args.method.into(),
    };
    let mut detector = StreamDetector::new(state, &config)?;

    let stdout = std::io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "{SCORE_HEADER}")?;
    for (i, p) in points.iter().enumerate() {
        let report = detector.step(p)?;
        writeln!(
            w,
            "{i},{:.8e},{:.8e},{}",
            report.inverse_cf, report.score, report.is_outlier
        )?;
    }
    // A partial batch would otherwise be dropped on exit.
    detector.flush_pending()?;

    if args.save {
        let file = File::create(&args.model)?;
        detector.state().save_snapshot(BufWriter::new(file))?;
    }
    Ok(())
}

fn cmd_snapshot(args: SnapshotArgs) -> Result<(), Failure> {
    let points = read_points(&args.points)?;
    let basis = momentup::MonomialBasis::new(args.d, args.n).map_err(Failure::from)?;
    let opts = FitOptions {
        lambda: args.lambda,
        track_matrix: args.track_matrix,
        ..FitOptions::default()
    };
    let state = MomentState::fit(&points, basis, &opts).map_err(Failure::from)?;
    let file = File::create(&args.out)?;
    state.save_snapshot(BufWriter::new(file)).map_err(Failure::from)?;
    eprintln!(
        "fitted snapshot: d={}, n={}, s={}, N={}",
        args.d,
        args.n,
        state.width(),
        state.sample_count()
    );
    Ok(())
}
