//! Daily walk-forward loop: forecast at the close of day d, hold the
//! resulting book over day d + 1.

use std::borrow::Cow;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::{export_result, write_failure_report, ExportError};
use crate::metrics::{
    annualized_vol, apply_costs, cumulative, sharpe, t_statistic, DEFAULT_ANNUALIZATION_DAYS,
    DEFAULT_COST_BPS,
};
use crate::panel::{DatasetMeta, PanelError, ResidualPanel, DEFAULT_CONTEXT_LEN};
use crate::portfolio::{
    centered_ranks, rank_weights, resize_weights, trailing_volatility, Centering, PortfolioError,
    PortfolioWeights,
};
use crate::scalar::Scalar;
use crate::signal::bridge::DEFAULT_NUM_SAMPLES;
use crate::signal::{
    deadjust_forecast, ema_transform, AutoArimaForecaster, BridgeConfig, BridgeForecaster,
    DayInputs, EmaState, Forecaster, InputSpace, SignalError, StrForecaster,
};

/// Which forecaster drives the book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ForecasterSpec {
    Str {
        beta: f64,
    },
    AutoArima,
    Bridge {
        bridge: BridgeConfig,
        num_samples: u32,
        finetune_tau: Option<u32>,
    },
}

impl ForecasterSpec {
    pub fn bridge(bridge: BridgeConfig) -> Self {
        ForecasterSpec::Bridge {
            bridge,
            num_samples: DEFAULT_NUM_SAMPLES,
            finetune_tau: None,
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Box<dyn Forecaster<T>>, SignalError> {
        Ok(match self {
            ForecasterSpec::Str { beta } => Box::new(StrForecaster::new(T::lit(*beta))?),
            ForecasterSpec::AutoArima => Box::new(AutoArimaForecaster),
            ForecasterSpec::Bridge {
                bridge,
                num_samples,
                finetune_tau,
            } => Box::new(BridgeForecaster::new(
                bridge.clone(),
                *num_samples,
                *finetune_tau,
            )),
        })
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            ForecasterSpec::Str { beta } => format!("STR beta={beta}"),
            ForecasterSpec::AutoArima => "autoARIMA".into(),
            ForecasterSpec::Bridge { finetune_tau, .. } => match finetune_tau {
                Some(tau) => format!("bridge tau={tau}"),
                None => "bridge".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub dataset: DatasetMeta,
    pub forecaster: ForecasterSpec,
    /// EMA coefficient applied to forecaster inputs (0 = raw returns).
    pub alpha: f64,
    pub context_length: usize,
    pub resize: bool,
    pub centering: Centering,
    pub cost_bps: f64,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub annualization_days: f64,
    /// Trade every `stride`-th day of the range (1 = daily).
    pub stride: usize,
    pub seed: u64,
}

impl BacktestConfig {
    pub fn new(dataset: DatasetMeta, forecaster: ForecasterSpec) -> Self {
        Self {
            dataset,
            forecaster,
            alpha: 0.0,
            context_length: DEFAULT_CONTEXT_LEN,
            resize: false,
            centering: Centering::Median,
            cost_bps: DEFAULT_COST_BPS,
            start_date: None,
            end_date: None,
            annualization_days: DEFAULT_ANNUALIZATION_DAYS,
            stride: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cost_bps >= 0.0) {
            return Err(format!("cost_bps must be >= 0, got {}", self.cost_bps));
        }
        if self.context_length < 2 {
            return Err(format!(
                "context_length must be >= 2, got {}",
                self.context_length
            ));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if let (Some(s), Some(e)) = (self.start_date, self.end_date) {
            if s >= e {
                return Err(format!("start_date {s} must precede end_date {e}"));
            }
        }
        if !(self.annualization_days > 0.0) {
            return Err("annualization_days must be positive".into());
        }
        if self.stride == 0 {
            return Err("stride must be >= 1".into());
        }
        match &self.forecaster {
            ForecasterSpec::Str { beta } if !(0.0..1.0).contains(beta) => {
                Err(format!("beta must lie in [0, 1), got {beta}"))
            }
            ForecasterSpec::Bridge { num_samples: 0, .. } => Err("num_samples must be >= 1".into()),
            _ => Ok(()),
        }
    }
}

/// One holding day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord<T> {
    /// Day the return is earned (the day after the weights were formed).
    pub date: NaiveDate,
    pub gross_return: T,
    pub net_return: T,
    pub turnover: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult<T> {
    pub config: BacktestConfig,
    pub daily: Vec<DailyRecord<T>>,
    /// Book formed on each decision day, aligned with `daily`.
    pub weights: Vec<PortfolioWeights<T>>,
    pub equity_gross: Vec<T>,
    pub equity_net: Vec<T>,
    pub sharpe_gross: Option<T>,
    pub sharpe_net: Option<T>,
    pub t_stat: Option<T>,
    pub ann_vol: Option<T>,
    pub avg_turnover: Option<T>,
    pub n_days: usize,
}

impl<T: Scalar> BacktestResult<T> {
    /// Derive curves and summary metrics from the daily records.
    pub fn from_daily(
        config: BacktestConfig,
        daily: Vec<DailyRecord<T>>,
        weights: Vec<PortfolioWeights<T>>,
    ) -> Self {
        let gross: Vec<T> = daily.iter().map(|r| r.gross_return).collect();
        let net: Vec<T> = daily.iter().map(|r| r.net_return).collect();
        let turnover: Vec<T> = daily.iter().map(|r| r.turnover).collect();
        let a = T::lit(config.annualization_days);
        let n_days = daily.len();
        let sharpe_gross = sharpe(&gross, a).ok();
        let years = T::from_count(n_days) / a;
        Self {
            equity_gross: cumulative(&gross),
            equity_net: cumulative(&net),
            sharpe_net: sharpe(&net, a).ok(),
            t_stat: sharpe_gross.map(|s| t_statistic(s, years)),
            sharpe_gross,
            ann_vol: annualized_vol(&gross, a),
            avg_turnover: (n_days > 0)
                .then(|| turnover.iter().copied().sum::<T>() / T::from_count(n_days)),
            n_days,
            config,
            daily,
            weights,
        }
    }

    pub fn gross_returns(&self) -> Vec<T> {
        self.daily.iter().map(|r| r.gross_return).collect()
    }

    pub fn net_returns(&self) -> Vec<T> {
        self.daily.iter().map(|r| r.net_return).collect()
    }
}

#[derive(Debug, Error)]
pub enum BacktestError<T: Scalar> {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
    #[error("forecaster could not start: {0}")]
    Setup(SignalError),
    #[error("forecaster failed on {date} after {} completed days: {source}", partial.n_days)]
    Aborted {
        date: NaiveDate,
        #[source]
        source: SignalError,
        partial: Box<BacktestResult<T>>,
    },
    #[error(transparent)]
    Export(#[from] ExportError),
}

impl<T: Scalar> BacktestError<T> {
    /// True if the failure came from the external bridge.
    pub fn is_bridge_failure(&self) -> bool {
        matches!(
            self,
            BacktestError::Aborted {
                source: SignalError::Bridge(_),
                ..
            } | BacktestError::Setup(SignalError::Bridge(_))
        )
    }
}

/// Run a backtest with the forecaster described by `config`.
pub fn run_backtest<T: Scalar>(
    panel: &ResidualPanel<T>,
    config: &BacktestConfig,
) -> Result<BacktestResult<T>, BacktestError<T>> {
    config.validate().map_err(BacktestError::Config)?;
    let mut forecaster = config
        .forecaster
        .build::<T>()
        .map_err(BacktestError::Setup)?;
    let outcome = run_backtest_with(panel, config, forecaster.as_mut());
    forecaster.finish();
    outcome
}

/// Decision-day indices: enough history, inside the date range, and a next day to earn on.
fn decision_days<T: Scalar>(panel: &ResidualPanel<T>, config: &BacktestConfig) -> Vec<usize> {
    let dates = panel.dates();
    let n = dates.len();
    if n < 2 {
        return Vec::new();
    }
    let first = config.context_length.saturating_sub(1);
    (first..n - 1)
        .filter(|&d| config.start_date.is_none_or(|s| dates[d] >= s))
        .filter(|&d| config.end_date.is_none_or(|e| dates[d + 1] <= e))
        .step_by(config.stride)
        .collect()
}

/// Run a backtest with an explicit forecaster (config's `forecaster` is only echoed).
pub fn run_backtest_with<T: Scalar>(
    panel: &ResidualPanel<T>,
    config: &BacktestConfig,
    forecaster: &mut dyn Forecaster<T>,
) -> Result<BacktestResult<T>, BacktestError<T>> {
    config.validate().map_err(BacktestError::Config)?;
    let len = config.context_length;
    let alpha = T::lit(config.alpha);
    let transformed: Cow<'_, ResidualPanel<T>> = if config.alpha > 0.0 {
        Cow::Owned(ema_transform(panel, alpha).map_err(BacktestError::Setup)?)
    } else {
        Cow::Borrowed(panel)
    };
    forecaster.prepare(panel).map_err(BacktestError::Setup)?;

    let cost = T::lit(config.cost_bps);
    let mut daily = Vec::new();
    let mut history: Vec<PortfolioWeights<T>> = Vec::new();
    let mut prev: Option<PortfolioWeights<T>> = None;

    for d in decision_days(panel, config) {
        let date = panel.dates()[d];
        let eligible = panel.eligible_indices(d, len)?;
        let weights = if eligible.len() < 2 {
            log::warn!(
                "{date}: {} eligible assets, holding a flat book",
                eligible.len()
            );
            PortfolioWeights::flat(date)
        } else {
            let day = DayInputs {
                date,
                index: d,
                eligible: &eligible,
                panel,
                transformed: &transformed,
                context_len: len,
                seed: config.seed.wrapping_add(d as u64),
            };
            let forecast = forecaster
                .forecast(&day)
                .and_then(|raw| {
                    if forecaster.input_space() == InputSpace::Transformed && config.alpha > 0.0 {
                        let ids = raw.scores.keys().map(String::as_str);
                        let ema = EmaState::from_transformed(alpha, &transformed, d, ids)?;
                        deadjust_forecast(&raw, &ema)
                    } else {
                        Ok(raw)
                    }
                })
                .and_then(|f| {
                    f.check_finite()?;
                    let unknown = f.scores.keys().find(|k| {
                        panel
                            .asset_index(k)
                            .is_none_or(|i| eligible.binary_search(&i).is_err())
                    });
                    match unknown {
                        Some(k) => Err(SignalError::InvalidParameter(format!(
                            "forecast for ineligible asset {k:?}"
                        ))),
                        None => Ok(f),
                    }
                });
            let forecast = match forecast {
                Ok(f) => f,
                Err(source) => {
                    let partial = BacktestResult::from_daily(config.clone(), daily, history);
                    return Err(BacktestError::Aborted {
                        date,
                        source,
                        partial: Box::new(partial),
                    });
                }
            };
            if forecast.len() < 2 {
                log::warn!(
                    "{date}: forecaster scored {} assets, holding a flat book",
                    forecast.len()
                );
                PortfolioWeights::flat(date)
            } else if config.resize {
                let ranks = centered_ranks(&forecast, config.centering)?;
                let vol = trailing_volatility(panel, d, len)?;
                resize_weights(&ranks, &vol)?
            } else {
                rank_weights(&forecast, config.centering)?
            }
        };

        let next = d + 1;
        let mut gross = T::zero();
        for (asset, &w) in &weights.weights {
            let i = panel
                .asset_index(asset)
                .expect("weights only cover panel assets");
            if let Some(r) = panel.get(next, i) {
                gross += w * r;
            }
        }
        let turnover = turnover_between(prev.as_ref(), &weights);
        let net = apply_costs(&[gross], &[turnover], cost).expect("equal lengths")[0];
        daily.push(DailyRecord {
            date: panel.dates()[next],
            gross_return: gross,
            net_return: net,
            turnover,
        });
        prev = Some(weights.clone());
        history.push(weights);
    }

    Ok(BacktestResult::from_daily(config.clone(), daily, history))
}

/// `sum |w_today - w_yesterday|` over the union of both books.
pub fn turnover_between<T: Scalar>(
    prev: Option<&PortfolioWeights<T>>,
    next: &PortfolioWeights<T>,
) -> T {
    let Some(prev) = prev else {
        return next.gross();
    };
    let mut t = T::zero();
    for (asset, &w) in &next.weights {
        t += (w - prev.get(asset)).abs();
    }
    for (asset, &w) in &prev.weights {
        if !next.weights.contains_key(asset) {
            t += w.abs();
        }
    }
    t
}

/// Run and write artifacts to `out_dir`. On a forecaster failure the
/// completed days are still written, together with `failure.json`.
pub fn run_to_dir<T: Scalar>(
    panel: &ResidualPanel<T>,
    config: &BacktestConfig,
    forecaster: Option<&mut dyn Forecaster<T>>,
    out_dir: &Path,
) -> Result<BacktestResult<T>, BacktestError<T>> {
    let outcome = match forecaster {
        Some(f) => run_backtest_with(panel, config, f),
        None => run_backtest(panel, config),
    };
    match outcome {
        Ok(result) => {
            export_result(&result, out_dir)?;
            Ok(result)
        }
        Err(BacktestError::Aborted {
            date,
            source,
            partial,
        }) => {
            export_result(&partial, out_dir)?;
            write_failure_report(out_dir, date, &source.to_string(), partial.n_days)?;
            Err(BacktestError::Aborted {
                date,
                source,
                partial,
            })
        }
        Err(e) => Err(e),
    }
}
