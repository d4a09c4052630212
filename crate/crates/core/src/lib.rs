//! Walk-forward backtesting of cross-sectional long/short strategies on daily
//! residual stock returns.
//!
//! The pipeline for each trading day is: forecast next-day residual returns
//! (short-term reversal, auto-ARIMA, or an external model behind a JSON-lines
//! bridge), rank the forecasts into a dollar-neutral book with unit gross
//! exposure, optionally shrink volatile names, then earn the next day's
//! residual returns net of trading costs.
//!
//! All numeric code is generic over [`Scalar`]; the aliases below fix it to
//! `f64`.

// NaN-rejecting checks are written as `!(x > 0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod export;
pub mod metrics;
pub mod panel;
pub mod portfolio;
pub mod scalar;
pub mod signal;

pub use backtest::{
    run_backtest, run_backtest_with, run_to_dir, BacktestConfig, BacktestError, DailyRecord,
    ForecasterSpec,
};
pub use metrics::{apply_costs, sharpe, t_statistic, MetricsError};
pub use panel::{
    load_panel, read_panel, summary_stats, ContextWindow, DatasetMeta, FactorModel, PanelError,
    PanelStats,
};
pub use portfolio::{
    centered_ranks, rank_weights, resize_weights, trailing_volatility, Centering, PortfolioError,
};
pub use scalar::Scalar;
pub use signal::{ForecastVector, Forecaster, SignalError};

pub type ResidualPanel = panel::ResidualPanel<f64>;
pub type PortfolioWeights = portfolio::PortfolioWeights<f64>;
pub type VolatilityVector = portfolio::VolatilityVector<f64>;
pub type BacktestResult = backtest::BacktestResult<f64>;
pub type EmaState = signal::EmaState<f64>;
pub type ArimaFit = signal::ArimaFit<f64>;
pub type Forecast = signal::ForecastVector<f64>;
