//! Short-term reversal: recent losers are expected to rebound.

use chrono::NaiveDate;

use crate::panel::ResidualPanel;
use crate::scalar::Scalar;

use super::ema::{ema_transform, EmaState};
use super::{DayInputs, ForecastVector, Forecaster, InputSpace, SignalError};

/// Score every initialized asset by its negated EMA level.
pub fn str_forecast<T: Scalar>(ema: &EmaState<T>, date: NaiveDate) -> ForecastVector<T> {
    let mut out = ForecastVector::new(date, format!("str(beta={})", ema.alpha()));
    for (asset, &level) in ema.levels() {
        out.scores.insert(asset.clone(), -level);
    }
    out
}

/// Reversal forecaster over an EMA with coefficient `beta`, reset after gaps.
#[derive(Debug, Clone)]
pub struct StrForecaster<T> {
    beta: T,
    ema: Option<ResidualPanel<T>>,
}

impl<T: Scalar> StrForecaster<T> {
    pub fn new(beta: T) -> Result<Self, SignalError> {
        EmaState::new(beta)?;
        Ok(Self { beta, ema: None })
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

impl<T: Scalar> Forecaster<T> for StrForecaster<T> {
    fn tag(&self) -> String {
        format!("str(beta={})", self.beta)
    }

    fn input_space(&self) -> InputSpace {
        InputSpace::Native
    }

    fn prepare(&mut self, panel: &ResidualPanel<T>) -> Result<(), SignalError> {
        self.ema = Some(ema_transform(panel, self.beta)?);
        Ok(())
    }

    fn forecast(&mut self, day: &DayInputs<'_, T>) -> Result<ForecastVector<T>, SignalError> {
        if self.ema.is_none() {
            self.prepare(day.panel)?;
        }
        let ema = self.ema.as_ref().expect("prepared above");
        let mut state = EmaState::new(self.beta)?;
        for &i in day.eligible {
            if let Some(level) = ema.get(day.index, i) {
                state.insert_level(&day.panel.asset_ids()[i], level);
            }
        }
        Ok(str_forecast(&state, day.date))
    }
}
