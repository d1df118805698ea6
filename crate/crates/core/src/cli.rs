//! The `segeval` command line: `eval`, `rank`, `synth` and `validate`.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 internal error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AccMode, InstanceTnMode, MetricConfig, NullMode};
use crate::error::{Error, Result};
use crate::ingest;
use crate::metrics::{summary_name, Level, MetricKind};
use crate::report::{self, ReportFormat, ValueTable};
use crate::synth::{self, ErrorModel, SizeLaw, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "segeval", version, about = "Fine-grained point cloud segmentation metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one method's predictions described by a manifest.
    Eval(EvalArgs),
    /// Compare method rankings under two metrics.
    Rank(RankArgs),
    /// Generate a synthetic dataset and emit it as manifest + binary label files.
    Synth(SynthArgs),
    /// Load and accumulate a manifest, reporting problems only.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Category id treated as unlabeled; overrides the manifest value.
    #[arg(long)]
    ignore_id: Option<u32>,
    #[arg(long, default_value_t = NullMode::default())]
    null_mode: NullMode,
    #[arg(long, default_value_t = AccMode::default())]
    acc_mode: AccMode,
    #[arg(long, default_value_t = InstanceTnMode::default())]
    instance_tn_mode: InstanceTnMode,
    /// Worker threads for loading clouds; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Method name recorded in the report.
    #[arg(long, default_value = "method")]
    method: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// Report files written by `eval`.
    #[arg(long, num_args = 1.., required_unless_present = "values", conflicts_with = "values")]
    reports: Vec<PathBuf>,
    /// CSV table with a method column and one column per metric.
    #[arg(long)]
    values: Option<PathBuf>,
    /// Metric pair `A:B`, e.g. `mIoU^D:mIoU^C`; repeatable. Defaults to every
    /// available level against the category-first level.
    #[arg(long = "pair")]
    pairs: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    emit: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    clouds: u32,
    #[arg(long, default_value_t = 4)]
    categories: u32,
    /// Presence probability per category, comma separated; one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    frequency: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    size_min: u32,
    #[arg(long, default_value_t = 1000)]
    size_max: u32,
    #[arg(long, default_value_t = 1.0)]
    skew: f64,
    #[arg(long, default_value_t = 3)]
    max_instances: u32,
    /// Miss rate per category, comma separated; one value applies to all.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    miss_rate: Vec<f64>,
    /// Confusion target per category; defaults to the next category id.
    #[arg(long, value_delimiter = ',')]
    target: Vec<u32>,
    /// Keep the N largest instances of every (cloud, category) uncorrupted.
    #[arg(long)]
    spare_largest: Option<usize>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Run the CLI on `argv` (including the program name) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = std::panic::catch_unwind(|| dispatch(cli));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_internal() {
                2
            } else {
                1
            }
        }
        Err(_) => 2,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(args) => eval(args),
        Command::Rank(args) => rank(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Validate(args) => validate(args),
    }
}

fn load(manifest: &PathBuf, config: &ConfigArgs) -> Result<(ingest::Manifest, MetricConfig, crate::stats::DatasetStats)> {
    let mut manifest = ingest::load_manifest(manifest)?;
    if let Some(id) = config.ignore_id {
        manifest.ignore_id = id;
    }
    let metric_config = MetricConfig {
        ignore_id: manifest.ignore_id,
        null_mode: config.null_mode,
        acc_mode: config.acc_mode,
        instance_tn_mode: config.instance_tn_mode,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::ConfigMismatch(format!("cannot start {} threads: {e}", config.threads)))?;
    let stats = pool.install(|| ingest::build_stats(&manifest, &metric_config))?;
    Ok((manifest, metric_config, stats))
}

fn eval(args: EvalArgs) -> Result<()> {
    let (manifest, config, stats) = load(&args.manifest, &args.config)?;
    let report = report::build_report(&args.method, &stats, &config)?.with_category_names(manifest.category_names);
    log_diagnostics(&report.diagnostics);
    report::write_report(&[report], args.format, args.out.as_deref())
}

fn log_diagnostics(d: &crate::metrics::Diagnostics) {
    eprintln!(
        "diagnostics: {} NULL cells, {} NULL categories, {} all-NULL clouds, {} instances, \
         {} unattributed FP points in {} pairs, {} points without instance id",
        d.null_cells,
        d.null_categories,
        d.skipped_clouds,
        d.instances,
        d.unattributed_fp_points,
        d.unattributed_fp_pairs,
        d.uncovered_instance_points
    );
}

fn rank(args: RankArgs) -> Result<()> {
    let table = match &args.values {
        Some(path) => ValueTable::read_csv(path)?,
        None => {
            let mut reports = Vec::new();
            for path in &args.reports {
                reports.extend(report::read_reports(path)?);
            }
            ValueTable::from_reports(&reports)?
        }
    };
    let pairs: Vec<(String, String)> = if args.pairs.is_empty() {
        default_pairs(&table)
    } else {
        args.pairs
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.trim().to_owned(), b.trim().to_owned()))
                    .ok_or_else(|| Error::Comparison(format!("pair {p:?} is not of the form A:B")))
            })
            .collect::<Result<_>>()?
    };
    if pairs.is_empty() {
        return Err(Error::Comparison("no metric pair to compare".into()));
    }
    let comparisons = pairs
        .iter()
        .map(|(a, b)| report::rank_methods(&table, a, b))
        .collect::<Result<Vec<_>>>()?;
    for cmp in &comparisons {
        eprintln!(
            "{} vs {}: tau-b {:.4}, top {} / {}, {} discordant pairs",
            cmp.metric_a,
            cmp.metric_b,
            cmp.kendall_tau,
            cmp.top_a.join("+"),
            cmp.top_b.join("+"),
            cmp.discordant_pairs.len()
        );
    }
    report::write_text(
        &report::render_comparisons(&comparisons, args.format),
        args.out.as_deref(),
    )
}

fn default_pairs(table: &ValueTable) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for kind in [MetricKind::IoU, MetricKind::Acc] {
        let anchor = summary_name(kind, Level::CategoryFirst);
        if !table.columns.contains(&anchor) {
            continue;
        }
        for level in [Level::Dataset, Level::CloudFirst, Level::Instance] {
            let other = summary_name(kind, level);
            let complete = table.columns.iter().position(|c| *c == other).is_some_and(|i| {
                table.rows.iter().all(|(_, v)| v.get(i).copied().flatten().is_some())
            });
            if complete {
                pairs.push((other, anchor.clone()));
            }
        }
    }
    pairs
}

fn broadcast<T: Copy>(values: &[T], n: u32, what: &str) -> Result<Vec<T>> {
    match values {
        [single] => Ok(vec![*single; n as usize]),
        many if many.len() == n as usize => Ok(many.to_vec()),
        many => Err(Error::Spec(format!("{} {what} values for {n} categories", many.len()))),
    }
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let c = args.categories;
    let target = if args.target.is_empty() {
        (0..c).map(|i| (i + 1) % c.max(1)).collect()
    } else {
        broadcast(&args.target, c, "target")?
    };
    let spec = SynthSpec {
        seed: args.seed,
        num_clouds: args.clouds,
        num_categories: c,
        category_frequency: broadcast(&args.frequency, c, "frequency")?,
        instance_size: SizeLaw {
            min: args.size_min,
            max: args.size_max,
            skew: args.skew,
        },
        max_instances: args.max_instances,
        error_model: ErrorModel {
            miss_rate: broadcast(&args.miss_rate, c, "miss-rate")?,
            confusion_target: target,
            spare_largest: args.spare_largest,
        },
    };
    let data = synth::generate(&spec)?;
    let predictions = synth::corrupt(&data, &spec.error_model, spec.seed)?;
    let manifest = synth::emit(&data, &predictions, &args.emit)?;
    let points: usize = data.clouds.iter().map(|c| c.gt.len()).sum();
    eprintln!(
        "wrote {} clouds, {points} points, manifest {}",
        data.clouds.len(),
        manifest.display()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let (manifest, config, stats) = load(&args.manifest, &args.config)?;
    let d = crate::metrics::diagnostics(&stats, &config);
    eprintln!(
        "{}: {} clouds listed, {} with valid points, {} valid points, {} categories",
        args.manifest.display(),
        manifest.clouds.len(),
        stats.clouds().len(),
        stats.valid_points(),
        stats.num_categories()
    );
    log_diagnostics(&d);
    Ok(())
}
