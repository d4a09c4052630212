//! Rank-based dollar-neutral weights with optional volatility resizing.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{PanelError, ResidualPanel};
use crate::scalar::{median, sample_std, Scalar};
use crate::signal::ForecastVector;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("need at least 2 assets to rank, got {0}")]
    DegenerateUniverse(usize),
    #[error("score for asset {0:?} is not finite")]
    NonFiniteScore(String),
    #[error("no volatility for asset {0:?}")]
    MissingVolatility(String),
    #[error("volatility vector is empty")]
    EmptyVolatility,
    #[error("weights vanish after resizing")]
    ZeroGross,
    #[error(transparent)]
    Panel(#[from] PanelError),
}

/// Offset subtracted from the 0-based ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// `(N - 1) / 2`: the book is exactly dollar-neutral.
    #[default]
    Median,
    /// `N / 2`: literal offset, leaves a small net short.
    HalfN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights<T> {
    pub date: NaiveDate,
    pub weights: BTreeMap<String, T>,
    pub resized: bool,
}

impl<T: Scalar> PortfolioWeights<T> {
    /// An empty (flat) book.
    pub fn flat(date: NaiveDate) -> Self {
        Self {
            date,
            weights: BTreeMap::new(),
            resized: false,
        }
    }

    pub fn gross(&self) -> T {
        self.weights.values().map(|w| w.abs()).sum()
    }

    pub fn net(&self) -> T {
        self.weights.values().copied().sum()
    }

    pub fn get(&self, asset: &str) -> T {
        self.weights.get(asset).copied().unwrap_or_else(T::zero)
    }
}

/// Un-normalized centered ranks (`rank - offset`), keyed by asset id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScores<T> {
    pub date: NaiveDate,
    pub raw: BTreeMap<String, T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityVector<T> {
    pub date: NaiveDate,
    pub sigma: BTreeMap<String, T>,
}

/// Double argsort of the scores, shifted by the centering offset.
///
/// Ties are broken by asset id, so equal scores still get distinct ranks.
pub fn centered_ranks<T: Scalar>(
    forecast: &ForecastVector<T>,
    centering: Centering,
) -> Result<RankScores<T>, PortfolioError> {
    let n = forecast.scores.len();
    if n < 2 {
        return Err(PortfolioError::DegenerateUniverse(n));
    }
    if let Some((asset, _)) = forecast.scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(PortfolioError::NonFiniteScore(asset.clone()));
    }
    // BTreeMap iteration is in asset-id order; the stable sort keeps it for ties
    let entries: Vec<(&String, T)> = forecast.scores.iter().map(|(k, &v)| (k, v)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        entries[a]
            .1
            .partial_cmp(&entries[b].1)
            .expect("finite scores")
    });
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let offset = match centering {
        Centering::Median => T::from_count(n - 1) / T::lit(2.0),
        Centering::HalfN => T::from_count(n) / T::lit(2.0),
    };
    let raw = entries
        .iter()
        .zip(rank)
        .map(|((k, _), r)| ((*k).clone(), T::from_count(r) - offset))
        .collect();
    Ok(RankScores {
        date: forecast.date,
        raw,
    })
}

fn normalize<T: Scalar>(
    date: NaiveDate,
    raw: BTreeMap<String, T>,
    resized: bool,
) -> Result<PortfolioWeights<T>, PortfolioError> {
    let gross: T = raw.values().map(|w| w.abs()).sum();
    if !(gross > T::zero()) {
        return Err(PortfolioError::ZeroGross);
    }
    Ok(PortfolioWeights {
        date,
        weights: raw.into_iter().map(|(k, w)| (k, w / gross)).collect(),
        resized,
    })
}

/// Rank weights scaled to unit gross exposure.
pub fn rank_weights<T: Scalar>(
    forecast: &ForecastVector<T>,
    centering: Centering,
) -> Result<PortfolioWeights<T>, PortfolioError> {
    let ranks = centered_ranks(forecast, centering)?;
    normalize(ranks.date, ranks.raw, false)
}

/// Sample standard deviation of each eligible asset's last `len` returns.
pub fn trailing_volatility<T: Scalar>(
    panel: &ResidualPanel<T>,
    d: usize,
    len: usize,
) -> Result<VolatilityVector<T>, PortfolioError> {
    let eligible = panel.eligible_indices(d, len)?;
    let mut sigma = BTreeMap::new();
    for i in eligible {
        let w = panel.window_slice(d, i, len);
        let s = sample_std(&w).unwrap_or_else(T::zero);
        sigma.insert(panel.asset_ids()[i].clone(), s);
    }
    Ok(VolatilityVector {
        date: panel.dates()[d],
        sigma,
    })
}

/// Shrink the weights of assets more volatile than the cross-sectional median.
///
/// Each raw rank weight is multiplied by `M / max(sigma_i, M)` with `M` the
/// median volatility, then the book is made dollar-neutral again by removing
/// `|w_i| * net / gross` from every asset, and scaled to unit gross.
pub fn resize_weights<T: Scalar>(
    raw: &RankScores<T>,
    vol: &VolatilityVector<T>,
) -> Result<PortfolioWeights<T>, PortfolioError> {
    if vol.sigma.is_empty() {
        return Err(PortfolioError::EmptyVolatility);
    }
    let sigmas: Vec<T> = raw
        .raw
        .keys()
        .map(|k| {
            vol.sigma
                .get(k)
                .copied()
                .ok_or_else(|| PortfolioError::MissingVolatility(k.clone()))
        })
        .collect::<Result<_, _>>()?;
    let m = median(&sigmas).expect("non-empty");
    let mut scaled = BTreeMap::new();
    for ((asset, &w), &s) in raw.raw.iter().zip(&sigmas) {
        scaled.insert(asset.clone(), w * resize_factor(s, m));
    }
    let net: T = scaled.values().copied().sum();
    let gross: T = scaled.values().map(|w| w.abs()).sum();
    if !(gross > T::zero()) {
        return Err(PortfolioError::ZeroGross);
    }
    let tilt = net / gross;
    for w in scaled.values_mut() {
        *w -= w.abs() * tilt;
    }
    normalize(raw.date, scaled, true)
}

/// `M / max(sigma, M)`, taken as 1 when both are zero.
pub fn resize_factor<T: Scalar>(sigma: T, median_sigma: T) -> T {
    let denom = sigma.max(median_sigma);
    if denom > T::zero() {
        median_sigma / denom
    } else {
        T::one()
    }
}

/// Write weights as long-format CSV: `date,asset_id,weight`.
pub fn write_weights_csv<T: Scalar, W: Write>(
    out: W,
    history: &[PortfolioWeights<T>],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "asset_id", "weight"])?;
    for day in history {
        let date = day.date.format("%Y-%m-%d").to_string();
        for (asset, weight) in &day.weights {
            w.write_record([date.as_str(), asset.as_str(), &weight.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
