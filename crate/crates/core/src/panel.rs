//! Residual-return panels: loading, validation, eligibility and windowing.
//!
//! A panel is a dates x assets grid of daily residual returns together with a
//! presence mask. A missing cell means the asset is outside the universe that
//! day; nothing is ever forward-filled.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default context length (trading days) handed to forecasters.
pub const DEFAULT_CONTEXT_LEN: usize = 100;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: cannot parse date {value:?}")]
    BadDate { line: u64, value: String },
    #[error("line {line}, column {column:?}: non-numeric cell {value:?}")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}, column {column:?}: non-finite return {value:?}")]
    NonFinite {
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("duplicate asset id {0:?}")]
    DuplicateAsset(String),
    #[error("invalid panel: {0}")]
    Invalid(String),
    #[error("date {0} is not a trading day of the panel")]
    UnknownDate(NaiveDate),
    #[error("date {date} has {available} trading days of history, {needed} required")]
    InsufficientHistory {
        date: NaiveDate,
        needed: usize,
        available: usize,
    },
    #[error("need at least 2 non-missing returns, found {0}")]
    InsufficientData(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FactorModel {
    Ipca,
    Pca,
    Ff,
}

impl FactorModel {
    pub const ALL: [FactorModel; 3] = [FactorModel::Ipca, FactorModel::Pca, FactorModel::Ff];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorModel::Ipca => "IPCA",
            FactorModel::Pca => "PCA",
            FactorModel::Ff => "FF",
        }
    }

    /// Guess the factor model from a dataset file name (`ipca.csv`, `ff_k5.csv`, ...).
    pub fn from_path(path: &Path) -> Option<Self> {
        let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
        let head = stem
            .split(|c: char| !c.is_ascii_alphanumeric())
            .next()
            .unwrap_or("");
        head.parse().ok()
    }
}

impl fmt::Display for FactorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ipca" => Ok(FactorModel::Ipca),
            "pca" => Ok(FactorModel::Pca),
            "ff" | "fama-french" | "famafrench" => Ok(FactorModel::Ff),
            other => Err(format!(
                "unknown factor model {other:?} (expected ipca, pca or ff)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub factor_model: FactorModel,
    pub num_factors: u32,
    pub source_path: String,
}

impl DatasetMeta {
    /// Metadata for one of the five-factor residual datasets.
    pub fn five_factor(factor_model: FactorModel, source_path: impl Into<String>) -> Self {
        Self {
            factor_model,
            num_factors: 5,
            source_path: source_path.into(),
        }
    }
}

/// Dates x assets matrix of daily residual returns with a universe mask.
///
/// Absent cells hold zero in `values`; `present` is the only source of truth
/// for membership.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel<T> {
    meta: DatasetMeta,
    dates: Vec<NaiveDate>,
    asset_ids: Vec<String>,
    values: Vec<T>,
    present: Vec<bool>,
    // consecutive-presence count ending at each cell, inclusive
    run_len: Vec<u32>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ResidualPanel<T> {
    /// Build a panel from row-major `values`/`present` (one row per date).
    ///
    /// Rows are sorted by date; values at absent cells are zeroed.
    pub fn new(
        meta: DatasetMeta,
        dates: Vec<NaiveDate>,
        asset_ids: Vec<String>,
        mut values: Vec<T>,
        present: Vec<bool>,
    ) -> Result<Self, PanelError> {
        let n_assets = asset_ids.len();
        let n_dates = dates.len();
        if values.len() != n_dates * n_assets || present.len() != n_dates * n_assets {
            return Err(PanelError::Invalid(format!(
                "expected {} cells for {n_dates} dates x {n_assets} assets, got {} values and {} mask entries",
                n_dates * n_assets,
                values.len(),
                present.len()
            )));
        }
        let mut index = HashMap::with_capacity(n_assets);
        for (i, id) in asset_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(PanelError::DuplicateAsset(id.clone()));
            }
        }
        for (k, (&p, v)) in present.iter().zip(values.iter_mut()).enumerate() {
            if p {
                if !v.is_finite() {
                    return Err(PanelError::Invalid(format!(
                        "non-finite return at date {}, asset {:?}",
                        dates[k / n_assets.max(1)],
                        asset_ids[k % n_assets.max(1)]
                    )));
                }
            } else {
                *v = T::zero();
            }
        }

        let mut order: Vec<usize> = (0..n_dates).collect();
        order.sort_by_key(|&k| dates[k]);
        for w in order.windows(2) {
            if dates[w[0]] == dates[w[1]] {
                return Err(PanelError::DuplicateDate(dates[w[0]]));
            }
        }
        let (dates, values, present) = if order.iter().enumerate().all(|(a, &b)| a == b) {
            (dates, values, present)
        } else {
            let mut sd = Vec::with_capacity(n_dates);
            let mut sv = Vec::with_capacity(values.len());
            let mut sp = Vec::with_capacity(present.len());
            for &k in &order {
                sd.push(dates[k]);
                sv.extend_from_slice(&values[k * n_assets..(k + 1) * n_assets]);
                sp.extend_from_slice(&present[k * n_assets..(k + 1) * n_assets]);
            }
            (sd, sv, sp)
        };

        let mut run_len = vec![0u32; present.len()];
        for d in 0..n_dates {
            for i in 0..n_assets {
                let k = d * n_assets + i;
                if present[k] {
                    run_len[k] = if d == 0 { 1 } else { run_len[k - n_assets] + 1 };
                }
            }
        }

        Ok(Self {
            meta,
            dates,
            asset_ids,
            values,
            present,
            run_len,
            index,
        })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    /// Row of raw values for date index `d` (absent cells are zero).
    pub fn row(&self, d: usize) -> &[T] {
        &self.values[d * self.n_assets()..(d + 1) * self.n_assets()]
    }

    /// Presence mask row for date index `d`.
    pub fn present_row(&self, d: usize) -> &[bool] {
        &self.present[d * self.n_assets()..(d + 1) * self.n_assets()]
    }

    pub fn is_present(&self, d: usize, asset: usize) -> bool {
        self.present[d * self.n_assets() + asset]
    }

    /// Return of `asset` on date index `d`, `None` if out of universe.
    pub fn get(&self, d: usize, asset: usize) -> Option<T> {
        let k = d * self.n_assets() + asset;
        self.present[k].then(|| self.values[k])
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Number of non-missing cells.
    pub fn count_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Number of trading days `asset` has been present without a break, ending at `d`.
    pub fn run_length(&self, d: usize, asset: usize) -> usize {
        self.run_len[d * self.n_assets() + asset] as usize
    }

    /// Same dates, assets and mask with new values (used for EMA-transformed copies).
    pub(crate) fn with_values(&self, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            meta: self.meta.clone(),
            dates: self.dates.clone(),
            asset_ids: self.asset_ids.clone(),
            values,
            present: self.present.clone(),
            run_len: self.run_len.clone(),
            index: self.index.clone(),
        }
    }

    fn check_history(&self, d: usize, len: usize) -> Result<(), PanelError> {
        if d >= self.n_dates() {
            return Err(PanelError::Invalid(format!(
                "date index {d} out of range ({} dates)",
                self.n_dates()
            )));
        }
        if len == 0 || d + 1 < len {
            return Err(PanelError::InsufficientHistory {
                date: self.dates[d],
                needed: len,
                available: d + 1,
            });
        }
        Ok(())
    }

    /// Indices of assets present on every one of the `len` trading days ending at `d`.
    pub fn eligible_indices(&self, d: usize, len: usize) -> Result<Vec<usize>, PanelError> {
        self.check_history(d, len)?;
        Ok((0..self.n_assets())
            .filter(|&i| self.run_length(d, i) >= len)
            .collect())
    }

    /// Asset ids eligible on `date` for a window of `len` days.
    pub fn eligible_assets(
        &self,
        date: NaiveDate,
        len: usize,
    ) -> Result<BTreeSet<String>, PanelError> {
        let d = self.date_index(date).ok_or(PanelError::UnknownDate(date))?;
        Ok(self
            .eligible_indices(d, len)?
            .into_iter()
            .map(|i| self.asset_ids[i].clone())
            .collect())
    }

    /// Column slice of `asset` over the `len` days ending at `d`, oldest first.
    pub(crate) fn window_slice(&self, d: usize, asset: usize, len: usize) -> Vec<T> {
        let n = self.n_assets();
        (d + 1 - len..=d)
            .map(|t| self.values[t * n + asset])
            .collect()
    }

    pub fn context_windows_at(
        &self,
        d: usize,
        len: usize,
    ) -> Result<Vec<ContextWindow<T>>, PanelError> {
        let date = self.dates.get(d).copied();
        Ok(self
            .eligible_indices(d, len)?
            .into_iter()
            .map(|i| ContextWindow {
                asset_id: self.asset_ids[i].clone(),
                end_date: date.expect("checked by eligible_indices"),
                returns: self.window_slice(d, i, len),
            })
            .collect())
    }

    /// One context window per eligible asset on `date`.
    pub fn context_windows(
        &self,
        date: NaiveDate,
        len: usize,
    ) -> Result<Vec<ContextWindow<T>>, PanelError> {
        let d = self.date_index(date).ok_or(PanelError::UnknownDate(date))?;
        self.context_windows_at(d, len)
    }

    /// Serialize as wide CSV; absent cells are written empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.n_assets() + 1);
        header.push("date".to_string());
        header.extend(self.asset_ids.iter().cloned());
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(self.n_assets() + 1);
        for (d, date) in self.dates.iter().enumerate() {
            rec.clear();
            rec.push(date.format("%Y-%m-%d").to_string());
            for i in 0..self.n_assets() {
                rec.push(match self.get(d, i) {
                    Some(v) => v.to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parse a wide CSV: first column ISO-8601 date, one column per asset id.
/// Empty cells and `NaN` mark an asset as outside the universe.
pub fn read_panel<T: Scalar, R: Read>(
    reader: R,
    meta: DatasetMeta,
) -> Result<ResidualPanel<T>, PanelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() {
        return Err(PanelError::Invalid("empty header".into()));
    }
    let asset_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = asset_ids.len();

    let mut dates = Vec::new();
    let mut values = Vec::new();
    let mut present = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(e, 0))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != n + 1 {
            return Err(PanelError::Csv {
                line,
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let raw_date = &rec[0];
        let date =
            NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| PanelError::BadDate {
                line,
                value: raw_date.to_string(),
            })?;
        dates.push(date);
        for (i, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                values.push(T::zero());
                present.push(false);
                continue;
            }
            let v: T = cell.parse().map_err(|_| PanelError::NonNumeric {
                line,
                column: asset_ids[i].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(PanelError::NonFinite {
                    line,
                    column: asset_ids[i].clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
            present.push(true);
        }
    }
    ResidualPanel::new(meta, dates, asset_ids, values, present)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> PanelError {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    PanelError::Csv {
        line,
        message: e.to_string(),
    }
}

/// Load a residual-return panel from a wide CSV file.
pub fn load_panel<T: Scalar>(
    path: impl AsRef<Path>,
    meta: DatasetMeta,
) -> Result<ResidualPanel<T>, PanelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PanelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_panel(std::io::BufReader::new(file), meta)
}

/// Moments of all non-missing returns of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelStats {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub count: usize,
}

/// Summary statistics over every non-missing cell.
///
/// `sd` uses the n - 1 denominator. Skewness is `m3 / m2^1.5` and kurtosis the
/// raw (non-excess) `m4 / m2^2`, both from central moments with denominator n.
pub fn summary_stats<T: Scalar>(panel: &ResidualPanel<T>) -> Result<PanelStats, PanelError> {
    let cells = panel
        .values
        .iter()
        .zip(&panel.present)
        .filter(|(_, &p)| p)
        .map(|(&v, _)| v.as_f64());
    moment_stats(cells)
}

pub(crate) fn moment_stats(
    cells: impl Iterator<Item = f64> + Clone,
) -> Result<PanelStats, PanelError> {
    let (count, sum) = cells
        .clone()
        .fold((0usize, 0.0f64), |(n, s), v| (n + 1, s + v));
    if count < 2 {
        return Err(PanelError::InsufficientData(count));
    }
    let nf = count as f64;
    let mean = sum / nf;
    let (m2, m3, m4) = cells.fold((0.0, 0.0, 0.0), |(a, b, c), v| {
        let e = v - mean;
        let e2 = e * e;
        (a + e2, b + e2 * e, c + e2 * e2)
    });
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let sd = (m2 * nf / (nf - 1.0)).sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    Ok(PanelStats {
        mean,
        sd,
        skewness,
        kurtosis,
        count,
    })
}

/// Trailing returns of one asset ending at (and including) `end_date`, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow<T> {
    pub asset_id: String,
    pub end_date: NaiveDate,
    pub returns: Vec<T>,
}
