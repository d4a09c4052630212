//! `resid-arb`: summary statistics, backtests, run comparison and plotting.
//!
//! Exit codes: 0 success, 1 forecaster failure, 2 data, config or usage
//! error, 3 bridge failure.

// NaN-rejecting checks are written as `!(x > 0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::cmp::Ordering;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use resid_arb::backtest::{run_to_dir, BacktestError, ForecasterSpec};
use resid_arb::export::{
    load_equity_csv, read_metrics, render_equity_svg, Metrics, EQUITY_FILE, METRICS_FILE, PLOT_FILE,
};
use resid_arb::panel::{load_panel, summary_stats};
use serde::Serialize;

use config::Settings;

const EXIT_FORECASTER: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BRIDGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "resid-arb",
    version,
    about = "Backtest long/short strategies on daily residual returns"
)]
struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Moments of all non-missing residual returns in a dataset
    Stats {
        /// Dataset path, or a name looked up in $RESID_ARB_DATA
        #[arg(long)]
        dataset: String,
        /// ipca, pca or ff (default: from the file name)
        #[arg(long)]
        factor_model: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run a backtest and write equity.csv, weights.csv, metrics.json and equity.svg
    Run(Box<RunArgs>),
    /// Tabulate several metrics.json files, best gross Sharpe first
    Compare {
        /// metrics.json files or run directories
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-render the equity plot from equity.csv
    Plot {
        /// equity.csv or a run directory
        input: PathBuf,
        /// Output SVG (default: equity.svg next to the input)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

/// Every flag mirrors a config-file key (dashes become underscores).
#[derive(Args, Default)]
struct RunArgs {
    /// Flat key = value settings file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    factor_model: Option<String>,
    /// str, auto-arima or bridge
    #[arg(long)]
    forecaster: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long)]
    context_length: Option<String>,
    /// Shrink names with high trailing volatility
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    resize: Option<String>,
    /// median or half-n
    #[arg(long)]
    centering: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    cost_bps: Option<String>,
    #[arg(long)]
    start_date: Option<String>,
    #[arg(long)]
    end_date: Option<String>,
    #[arg(long)]
    annualization_days: Option<String>,
    /// Trade every n-th day
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    num_samples: Option<String>,
    #[arg(long)]
    finetune_tau: Option<String>,
    #[arg(long)]
    bridge_program: Option<String>,
    /// Whitespace-separated arguments for the bridge program
    #[arg(long, allow_hyphen_values = true)]
    bridge_args: Option<String>,
    #[arg(long)]
    bridge_timeout_secs: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// Worker threads for per-asset model fitting
    #[arg(long)]
    jobs: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Settings {
        let pairs = [
            ("dataset", &self.dataset),
            ("factor_model", &self.factor_model),
            ("forecaster", &self.forecaster),
            ("beta", &self.beta),
            ("alpha", &self.alpha),
            ("context_length", &self.context_length),
            ("resize", &self.resize),
            ("centering", &self.centering),
            ("cost_bps", &self.cost_bps),
            ("start_date", &self.start_date),
            ("end_date", &self.end_date),
            ("annualization_days", &self.annualization_days),
            ("stride", &self.stride),
            ("seed", &self.seed),
            ("num_samples", &self.num_samples),
            ("finetune_tau", &self.finetune_tau),
            ("bridge_program", &self.bridge_program),
            ("bridge_args", &self.bridge_args),
            ("bridge_timeout_secs", &self.bridge_timeout_secs),
            ("out_dir", &self.out_dir),
            ("jobs", &self.jobs),
        ];
        let mut s = Settings::default();
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.as_str()).expect("flag names are known keys");
            }
        }
        s
    }
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn data(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_DATA,
            error: error.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let outcome = match cli.command {
        Command::Stats {
            dataset,
            factor_model,
            format,
        } => cmd_stats(&dataset, factor_model, format),
        Command::Run(args) => cmd_run(&args),
        Command::Compare { inputs, csv } => cmd_compare(&inputs, csv.as_deref()),
        Command::Plot { input, out, title } => cmd_plot(&input, out, title),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct StatsReport {
    dataset: String,
    factor_model: String,
    count: usize,
    grid_cells: usize,
    mean: f64,
    sd: f64,
    skewness: f64,
    kurtosis: f64,
}

fn cmd_stats(dataset: &str, factor_model: Option<String>, format: Format) -> CmdResult {
    let mut s = Settings::default();
    s.set("dataset", dataset).map_err(Failure::data)?;
    if let Some(m) = factor_model {
        s.set("factor_model", m).map_err(Failure::data)?;
    }
    let path = s.dataset_path().map_err(Failure::data)?;
    let meta = s.dataset_meta(&path).map_err(Failure::data)?;
    let panel = load_panel::<f64>(&path, meta.clone())
        .with_context(|| format!("cannot load {}", path.display()))
        .map_err(Failure::data)?;
    let stats = summary_stats(&panel).map_err(Failure::data)?;
    let report = StatsReport {
        dataset: path.display().to_string(),
        factor_model: meta.factor_model.to_string(),
        count: stats.count,
        grid_cells: panel.n_dates() * panel.n_assets(),
        mean: stats.mean,
        sd: stats.sd,
        skewness: stats.skewness,
        kurtosis: stats.kurtosis,
    };
    match format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(Failure::data)?
        ),
        Format::Table => {
            println!("dataset      {}", report.dataset);
            println!("factor model {}", report.factor_model);
            println!("count        {}", report.count);
            println!("grid cells   {}", report.grid_cells);
            println!("mean         {:e}", report.mean);
            println!("sd           {}", report.sd);
            println!("skewness     {}", report.skewness);
            println!("kurtosis     {}", report.kurtosis);
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let mut settings = match &args.config {
        Some(p) => Settings::from_file(p).map_err(Failure::data)?,
        None => Settings::default(),
    };
    settings.merge(args.overrides());

    // validate everything before touching the data
    let path = settings.dataset_path().map_err(Failure::data)?;
    let meta = settings.dataset_meta(&path).map_err(Failure::data)?;
    let config = settings
        .backtest_config(meta.clone())
        .map_err(Failure::data)?;
    let jobs = settings.jobs().map_err(Failure::data)?;
    let out_dir = settings.out_dir();

    if let Some(n) = jobs {
        if n == 0 {
            return Err(Failure::data(anyhow!("jobs must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::data)?;
    }

    let panel = load_panel::<f64>(&path, meta)
        .with_context(|| format!("cannot load {}", path.display()))
        .map_err(Failure::data)?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(Failure::data)?;
    log::info!(
        "running {} on {} into {}",
        config.forecaster.label(),
        path.display(),
        out_dir.display()
    );

    match run_to_dir(&panel, &config, None, &out_dir) {
        Ok(result) => {
            println!(
                "{} {}: sharpe_gross={} sharpe_net={} t_stat={} n_days={}",
                config.forecaster.label(),
                config.dataset.factor_model,
                fmt_opt(result.sharpe_gross),
                fmt_opt(result.sharpe_net),
                fmt_opt(result.t_stat),
                result.n_days
            );
            Ok(())
        }
        Err(e) => {
            let code = match &e {
                _ if e.is_bridge_failure() => EXIT_BRIDGE,
                BacktestError::Aborted { .. } | BacktestError::Setup(_) => EXIT_FORECASTER,
                _ => EXIT_DATA,
            };
            let mut error = anyhow::Error::new(e);
            if code != EXIT_DATA {
                error = error.context(format!("partial results in {}", out_dir.display()));
            }
            Err(Failure { code, error })
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.3}"))
}

fn in_dir(input: &Path, file: &str) -> PathBuf {
    if input.is_dir() {
        input.join(file)
    } else {
        input.to_path_buf()
    }
}

#[derive(Debug, Serialize)]
struct CompareRow {
    forecaster: String,
    dataset: String,
    alpha: f64,
    beta: Option<f64>,
    tau: Option<u32>,
    resize: bool,
    sharpe_gross: Option<f64>,
    sharpe_net: Option<f64>,
    source: String,
}

impl CompareRow {
    fn of(m: &Metrics, source: &Path) -> Self {
        let (forecaster, beta, tau) = match &m.config.forecaster {
            ForecasterSpec::Str { beta } => ("STR", Some(*beta), None),
            ForecasterSpec::AutoArima => ("autoARIMA", None, None),
            ForecasterSpec::Bridge { finetune_tau, .. } => ("bridge", None, *finetune_tau),
        };
        CompareRow {
            forecaster: forecaster.into(),
            dataset: m.config.dataset.factor_model.to_string(),
            alpha: m.config.alpha,
            beta,
            tau,
            resize: m.config.resize,
            sharpe_gross: m.sharpe_gross,
            sharpe_net: m.sharpe_net,
            source: source.display().to_string(),
        }
    }
}

/// Descending by gross Sharpe; runs without one go last.
fn by_sharpe(a: &CompareRow, b: &CompareRow) -> Ordering {
    match (a.sharpe_gross, b.sharpe_gross) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn cmd_compare(inputs: &[PathBuf], csv_out: Option<&Path>) -> CmdResult {
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let path = in_dir(input, METRICS_FILE);
        let metrics = read_metrics(&path).map_err(Failure::data)?;
        rows.push(CompareRow::of(&metrics, &path));
    }
    rows.sort_by(by_sharpe);

    let opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.2}"));
    let mut out = std::io::stdout().lock();
    let header = format!(
        "{:<10} {:<7} {:>5} {:>5} {:>4} {:<6} {:>12} {:>10}",
        "forecaster", "dataset", "alpha", "beta", "tau", "resize", "sharpe_gross", "sharpe_net"
    );
    let mut text = vec![header];
    for r in &rows {
        text.push(format!(
            "{:<10} {:<7} {:>5} {:>5} {:>4} {:<6} {:>12} {:>10}",
            r.forecaster,
            r.dataset,
            r.alpha,
            r.beta.map_or_else(|| "-".into(), |b| b.to_string()),
            r.tau.map_or_else(|| "-".into(), |t| t.to_string()),
            r.resize,
            opt(r.sharpe_gross),
            opt(r.sharpe_net)
        ));
    }
    writeln!(out, "{}", text.join("\n")).map_err(Failure::data)?;

    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::data)?;
        for r in &rows {
            w.serialize(r).map_err(Failure::data)?;
        }
        w.flush().map_err(Failure::data)?;
    }
    Ok(())
}

fn cmd_plot(input: &Path, out: Option<PathBuf>, title: Option<String>) -> CmdResult {
    let path = in_dir(input, EQUITY_FILE);
    let rows = load_equity_csv(&path).map_err(Failure::data)?;
    let out = out.unwrap_or_else(|| path.with_file_name(PLOT_FILE));
    // default to the label the run itself used
    let title = title.unwrap_or_else(|| {
        read_metrics(&path.with_file_name(METRICS_FILE))
            .map(|m| m.config.forecaster.label())
            .unwrap_or_else(|_| "cumulative return".into())
    });
    std::fs::write(&out, render_equity_svg(&rows, &title))
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(Failure::data)?;
    println!("{}", out.display());
    Ok(())
}
