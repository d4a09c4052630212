//! Backtest artifacts: `equity.csv`, `weights.csv`, `metrics.json` and an SVG
//! equity-curve plot.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestConfig, BacktestResult, DailyRecord};
use crate::portfolio::write_weights_csv;
use crate::scalar::Scalar;

pub const EQUITY_FILE: &str = "equity.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PLOT_FILE: &str = "equity.svg";
pub const FAILURE_FILE: &str = "failure.json";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExportError + '_ {
    move |source| ExportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Contents of `metrics.json`. Undefined ratios serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sharpe_gross: Option<f64>,
    pub sharpe_net: Option<f64>,
    pub t_stat_gross: Option<f64>,
    pub ann_vol: Option<f64>,
    pub avg_turnover: Option<f64>,
    pub n_days: usize,
    pub config: BacktestConfig,
}

impl Metrics {
    pub fn of<T: Scalar>(result: &BacktestResult<T>) -> Self {
        Self {
            sharpe_gross: result.sharpe_gross.map(Scalar::as_f64),
            sharpe_net: result.sharpe_net.map(Scalar::as_f64),
            t_stat_gross: result.t_stat.map(Scalar::as_f64),
            ann_vol: result.ann_vol.map(Scalar::as_f64),
            avg_turnover: result.avg_turnover.map(Scalar::as_f64),
            n_days: result.n_days,
            config: result.config.clone(),
        }
    }
}

pub fn read_metrics(path: &Path) -> Result<Metrics, ExportError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| ExportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Paths written by [`export_result`].
#[derive(Debug, Clone)]
pub struct ExportedFiles {
    pub equity: PathBuf,
    pub weights: PathBuf,
    pub metrics: PathBuf,
    pub plot: PathBuf,
}

pub fn export_result<T: Scalar>(
    result: &BacktestResult<T>,
    out_dir: &Path,
) -> Result<ExportedFiles, ExportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = ExportedFiles {
        equity: out_dir.join(EQUITY_FILE),
        weights: out_dir.join(WEIGHTS_FILE),
        metrics: out_dir.join(METRICS_FILE),
        plot: out_dir.join(PLOT_FILE),
    };

    write_equity_csv(create(&files.equity)?, result).map_err(csv_err(&files.equity))?;
    write_weights_csv(create(&files.weights)?, &result.weights).map_err(csv_err(&files.weights))?;

    let mut json = serde_json::to_string_pretty(&Metrics::of(result)).expect("metrics serialize");
    json.push('\n');
    fs::write(&files.metrics, json).map_err(io_err(&files.metrics))?;

    let rows = equity_rows(result);
    fs::write(
        &files.plot,
        render_equity_svg(&rows, &result.config.forecaster.label()),
    )
    .map_err(io_err(&files.plot))?;
    Ok(files)
}

/// Record why a run stopped early.
pub fn write_failure_report(
    out_dir: &Path,
    date: NaiveDate,
    error: &str,
    completed_days: usize,
) -> Result<PathBuf, ExportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = out_dir.join(FAILURE_FILE);
    let report = serde_json::json!({
        "failed_on": date.format("%Y-%m-%d").to_string(),
        "error": error,
        "completed_days": completed_days,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

/// One line of `equity.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityRow {
    pub date: NaiveDate,
    pub gross_return: f64,
    pub net_return: f64,
    pub turnover: f64,
    pub equity_gross: f64,
    pub equity_net: f64,
}

fn equity_rows<T: Scalar>(result: &BacktestResult<T>) -> Vec<EquityRow> {
    result
        .daily
        .iter()
        .zip(result.equity_gross.iter().zip(&result.equity_net))
        .map(|(r, (&eg, &en))| EquityRow {
            date: r.date,
            gross_return: r.gross_return.as_f64(),
            net_return: r.net_return.as_f64(),
            turnover: r.turnover.as_f64(),
            equity_gross: eg.as_f64(),
            equity_net: en.as_f64(),
        })
        .collect()
}

pub fn write_equity_csv<T: Scalar, W: Write>(
    out: W,
    result: &BacktestResult<T>,
) -> Result<(), csv::Error> {
    // header written by hand so an empty result still gets one
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "date",
        "gross_return",
        "net_return",
        "turnover",
        "equity_gross",
        "equity_net",
    ])?;
    for row in equity_rows(result) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_equity_csv<R: Read>(input: R) -> Result<Vec<EquityRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn load_equity_csv(path: &Path) -> Result<Vec<EquityRow>, ExportError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_equity_csv(BufReader::new(file)).map_err(csv_err(path))
}

/// Daily records as stored in an equity file.
pub fn daily_from_rows(rows: &[EquityRow]) -> Vec<DailyRecord<f64>> {
    rows.iter()
        .map(|r| DailyRecord {
            date: r.date,
            gross_return: r.gross_return,
            net_return: r.net_return,
            turnover: r.turnover,
        })
        .collect()
}

/// One line of `weights.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub date: NaiveDate,
    pub asset_id: String,
    pub weight: f64,
}

pub fn read_weights_csv<R: Read>(input: R) -> Result<Vec<WeightRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Cumulative gross and net returns against date.
pub fn render_equity_svg(rows: &[EquityRow], title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 450.0;
    const PAD: f64 = 50.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    if rows.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let (lo, hi) = rows.iter().fold((0.0f64, 0.0f64), |(lo, hi), r| {
        (
            lo.min(r.equity_gross).min(r.equity_net),
            hi.max(r.equity_gross).max(r.equity_net),
        )
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = rows.len();
    let x = |k: usize| {
        PAD + (W - 2.0 * PAD)
            * if n > 1 {
                k as f64 / (n - 1) as f64
            } else {
                0.5
            }
    };
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / span;

    svg.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n",
        y(0.0),
        W - PAD
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#bbb\" points=\"{PAD},{PAD} {PAD},{0} {1},{0}\"/>\n",
        H - PAD,
        W - PAD
    ));
    for (label, color, pick) in [
        (
            "gross",
            "#1f77b4",
            (|r: &EquityRow| r.equity_gross) as fn(&EquityRow) -> f64,
        ),
        ("net", "#d62728", |r: &EquityRow| r.equity_net),
    ] {
        let pts: Vec<String> = rows
            .iter()
            .enumerate()
            .map(|(k, r)| format!("{:.2},{:.2}", x(k), y(pick(r))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>{label}</title></polyline>\n",
            pts.join(" ")
        ));
    }
    let label = |t: &str, xx: f64, yy: f64, anchor: &str| {
        format!("<text x=\"{xx:.2}\" y=\"{yy:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"{anchor}\">{t}</text>\n")
    };
    svg.push_str(&label(
        &rows[0].date.to_string(),
        PAD,
        H - PAD + 18.0,
        "start",
    ));
    svg.push_str(&label(
        &rows[n - 1].date.to_string(),
        W - PAD,
        H - PAD + 18.0,
        "end",
    ));
    svg.push_str(&label(&format!("{hi:.3}"), PAD - 4.0, PAD + 4.0, "end"));
    svg.push_str(&label(&format!("{lo:.3}"), PAD - 4.0, H - PAD, "end"));
    svg.push_str(
        &label("gross", W - PAD, PAD - 10.0, "end").replace("<text", "<text fill=\"#1f77b4\""),
    );
    svg.push_str(
        &label("net", W - PAD - 50.0, PAD - 10.0, "end").replace("<text", "<text fill=\"#d62728\""),
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
