//! Next-day residual return forecasters.
//!
//! Every forecaster produces a [`ForecastVector`] for the assets eligible on a
//! given day. Forecasters that consume context windows see the EMA-transformed
//! returns; the engine maps their output back with [`deadjust_forecast`].

use std::collections::BTreeMap;

use chrono::NaiveDate;
use thiserror::Error;

use crate::panel::{PanelError, ResidualPanel};
use crate::scalar::Scalar;

pub mod arima;
pub mod bridge;
pub mod ema;
pub mod reversal;

pub use arima::{
    arima_fit, auto_arima, auto_arima_forecast, ArimaFit, ArimaOrder, AutoArimaForecaster,
    FitFailure,
};
pub use bridge::{
    bridge_forecast, BridgeClient, BridgeConfig, BridgeError, BridgeForecaster, BridgeMessage,
};
pub use ema::{deadjust_forecast, ema_transform, ema_update, EmaState};
pub use reversal::{str_forecast, StrForecaster};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("non-finite return for asset {0:?}")]
    NonFinite(String),
    #[error("no EMA level for asset {0:?}")]
    MissingEma(String),
    #[error("forecast for asset {0:?} is not finite")]
    NonFiniteForecast(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

/// Per-day predicted next-day residual return, keyed by asset id.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastVector<T> {
    pub date: NaiveDate,
    pub scores: BTreeMap<String, T>,
    pub source: String,
}

impl<T: Scalar> ForecastVector<T> {
    pub fn new(date: NaiveDate, source: impl Into<String>) -> Self {
        Self {
            date,
            scores: BTreeMap::new(),
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub(crate) fn check_finite(&self) -> Result<(), SignalError> {
        match self.scores.iter().find(|(_, v)| !v.is_finite()) {
            Some((k, _)) => Err(SignalError::NonFiniteForecast(k.clone())),
            None => Ok(()),
        }
    }
}

/// Which return series a forecaster reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputSpace {
    /// Reads its own state; output is used as-is.
    Native,
    /// Reads EMA-transformed context windows; output must be de-adjusted.
    Transformed,
}

/// Everything a forecaster may look at on decision day `index`.
///
/// Nothing after `index` is reachable through the accessors a forecaster is
/// expected to use (`windows`, row lookups at `index`).
pub struct DayInputs<'a, T> {
    pub date: NaiveDate,
    pub index: usize,
    pub eligible: &'a [usize],
    pub panel: &'a ResidualPanel<T>,
    /// EMA-transformed returns with the input coefficient (raw returns when it is 0).
    pub transformed: &'a ResidualPanel<T>,
    pub context_len: usize,
    pub seed: u64,
}

impl<T: Scalar> DayInputs<'_, T> {
    /// Transformed context windows of the eligible assets, oldest first.
    pub fn windows(&self) -> Vec<crate::panel::ContextWindow<T>> {
        self.eligible
            .iter()
            .map(|&i| crate::panel::ContextWindow {
                asset_id: self.panel.asset_ids()[i].clone(),
                end_date: self.date,
                returns: self
                    .transformed
                    .window_slice(self.index, i, self.context_len),
            })
            .collect()
    }

    /// Raw-return context windows of the eligible assets.
    pub fn raw_windows(&self) -> Vec<crate::panel::ContextWindow<T>> {
        self.eligible
            .iter()
            .map(|&i| crate::panel::ContextWindow {
                asset_id: self.panel.asset_ids()[i].clone(),
                end_date: self.date,
                returns: self.panel.window_slice(self.index, i, self.context_len),
            })
            .collect()
    }
}

pub trait Forecaster<T: Scalar> {
    /// Short tag recorded in forecast vectors and reports.
    fn tag(&self) -> String;

    fn input_space(&self) -> InputSpace;

    /// Called once with the full panel before the day loop.
    fn prepare(&mut self, _panel: &ResidualPanel<T>) -> Result<(), SignalError> {
        Ok(())
    }

    fn forecast(&mut self, day: &DayInputs<'_, T>) -> Result<ForecastVector<T>, SignalError>;

    /// Release external resources once a run is over.
    fn finish(&mut self) {}
}
