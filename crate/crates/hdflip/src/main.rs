use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdflip::io::{self, MaxTRecord, ResponseSource, SubsetRecord};
use hdflip::{run_experiment, Error, ExperimentConfig, Result};
use hdflip_core::combine::{closed_testing_tdp, maxt_adjusted, subset_test, MAX_TDP_SUBSET};
use hdflip_core::flip::make_flips;
use hdflip_core::multisplit::{multisplit_from_plan, DEFAULT_GAMMA_MIN};
use hdflip_core::rng::{derive_seed, Stream};
use hdflip_core::selection::capacity;
use hdflip_core::stats::{compute_stats, make_splits};
use hdflip_core::{Combiner, DesignData, Exec, Method, Selector};
use serde::Serialize;

/// Sign-flip score tests for high-dimensional linear regression.
#[derive(Parser)]
#[command(name = "hdflip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment from a JSON config and print its report.
    Simulate {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Leave out the per-replication records.
        #[arg(long)]
        summary: bool,
    },
    /// Compute the B × m statistic matrix of a dataset.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Number of sign flips, the identity included.
        #[arg(long = "flips", short = 'B', default_value_t = 1000)]
        b: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Approximate)]
        method: MethodArg,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Test a subset of coefficients from a statistic matrix.
    Test {
        /// Statistic matrix CSV written by `stats`.
        #[arg(long)]
        stats: PathBuf,
        /// 1-based variables, e.g. `1,4,7-9`, or `all`.
        #[arg(long, default_value = "all")]
        subset: String,
        #[arg(long, value_enum, default_value_t = CombinerArg::Max)]
        combiner: CombinerArg,
        /// Comma-separated weights for `--combiner weighted`, one per subset member.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also report the closed-testing lower bound on true discoveries.
        #[arg(long)]
        tdp: bool,
        /// Also report maxT-adjusted p-values for all variables.
        #[arg(long)]
        maxt: bool,
        /// Use the step-down variant of maxT.
        #[arg(long, requires = "maxt")]
        step_down: bool,
    },
    /// Multisplit p-values of a dataset.
    Multisplit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = DEFAULT_GAMMA_MIN)]
        gamma_min: f64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Design matrix CSV, one row per observation.
    #[arg(long)]
    design: PathBuf,
    /// Response CSV with a single column.
    #[arg(
        long,
        conflicts_with = "response_column",
        required_unless_present = "response_column"
    )]
    response: Option<PathBuf>,
    /// Column of the design file holding the response (header name or 1-based position).
    #[arg(long)]
    response_column: Option<String>,
}

#[derive(Args)]
struct SplitArgs {
    /// Number of random splits.
    #[arg(long = "splits", short = 'Q', default_value_t = 50)]
    q: usize,
    /// Variables selected per split; defaults to the largest allowed.
    #[arg(long)]
    select: Option<usize>,
    /// Known active variables (1-based); selects them plus random others
    /// instead of running the Lasso.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Approximate,
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    Max,
    Sum,
    Weighted,
}

fn load(args: &DataArgs) -> Result<DesignData> {
    let source = match (&args.response, &args.response_column) {
        (Some(p), _) => ResponseSource::File(p.clone()),
        (None, Some(c)) => ResponseSource::Column(c.clone()),
        (None, None) => unreachable!("clap requires one response source"),
    };
    io::load_dataset(&args.design, &source)
}

fn selector(args: &SplitArgs, data: &DesignData) -> Result<Selector> {
    let k = args.select.unwrap_or_else(|| capacity(data.n() / 2).min(data.m()));
    Ok(match &args.oracle {
        Some(spec) => {
            let active = io::parse_subset(spec, data.m())?;
            let extra = k.checked_sub(active.len()).ok_or_else(|| {
                Error::Input(format!(
                    "--select {k} is smaller than the {} oracle variables",
                    active.len()
                ))
            })?;
            Selector::Oracle { active, extra }
        }
        None => Selector::Lasso { k },
    })
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        })?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: &Option<PathBuf>) -> Result<()> {
    let target = path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let io_err = |source| Error::Io {
        path: target.clone(),
        source,
    };
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(e.into()))?;
    writeln!(out).map_err(io_err)
}

#[derive(Serialize)]
struct TestOutput {
    #[serde(flatten)]
    subset: SubsetRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    maxt: Option<MaxTRecord>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    fwer: f64,
    fwer_stderr: f64,
    mean_rejections: f64,
    completed: usize,
    failed: usize,
    wall_time_seconds: f64,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            output,
            summary,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            if summary {
                write_json(
                    &Summary {
                        config: &report.config,
                        fwer: report.fwer,
                        fwer_stderr: report.fwer_stderr,
                        mean_rejections: report.mean_rejections,
                        completed: report.completed,
                        failed: report.failed,
                        wall_time_seconds: report.wall_time_seconds,
                    },
                    &output,
                )
            } else {
                write_json(&report, &output)
            }
        }
        Command::Stats {
            data,
            split,
            b,
            method,
            output,
        } => {
            let d = load(&data)?;
            let sel = selector(&split, &d)?;
            let plan = make_splits(&d, split.q, &sel, split.seed)?;
            let flips = make_flips(d.n(), b, derive_seed(split.seed, Stream::Flips))?;
            let method = match method {
                MethodArg::Exact => Method::Exact,
                MethodArg::Approximate => Method::Approximate,
            };
            let g = compute_stats(&d, &plan, &flips, method, Exec::Parallel)?;
            let target = output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            io::write_stat_matrix(&g, sink(&output)?).map_err(|source| Error::Io { path: target, source })
        }
        Command::Test {
            stats,
            subset,
            combiner,
            weights,
            alpha,
            tdp,
            maxt,
            step_down,
        } => {
            let g = io::load_stat_matrix(&stats, Method::Approximate)?;
            let subset = io::parse_subset(&subset, g.m())?;
            let combiner = match combiner {
                CombinerArg::Max => Combiner::Max,
                CombinerArg::Sum => Combiner::Sum,
                CombinerArg::Weighted => Combiner::WeightedSum(weights),
            };
            let result = subset_test(&g, &subset, &combiner, alpha)?;
            let bound = if tdp {
                if subset.len() > MAX_TDP_SUBSET {
                    return Err(Error::Input(format!(
                        "--tdp supports at most {MAX_TDP_SUBSET} variables, got {}",
                        subset.len()
                    )));
                }
                Some(closed_testing_tdp(&g, &subset, &combiner, alpha)?)
            } else {
                None
            };
            let maxt = if maxt {
                Some(MaxTRecord::new(&maxt_adjusted(&g, alpha, step_down)?, step_down))
            } else {
                None
            };
            write_json(
                &TestOutput {
                    subset: SubsetRecord::new(&result, bound),
                    maxt,
                },
                &None,
            )
        }
        Command::Multisplit {
            data,
            split,
            gamma_min,
            output,
        } => {
            let d = load(&data)?;
            let sel = selector(&split, &d)?;
            let plan = make_splits(&d, split.q, &sel, split.seed)?;
            let table = multisplit_from_plan(&d, &plan, gamma_min)?;
            let target = output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            io::write_pvalue_table(&table, sink(&output)?).map_err(|source| Error::Io { path: target, source })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.category(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
