//! Exponential moving average of residual returns.
//!
//! The recursion is `level' = coeff * level + r` with the first observation
//! seeding the level, so after n observations the level equals
//! `sum_{k<n} coeff^k * r_{n-k}`.

use std::collections::BTreeMap;

use crate::panel::ResidualPanel;
use crate::scalar::Scalar;

use super::{ForecastVector, SignalError};

#[derive(Debug, Clone, PartialEq)]
pub struct EmaState<T> {
    alpha: T,
    // an asset has a level iff it is initialized
    levels: BTreeMap<String, T>,
}

impl<T: Scalar> EmaState<T> {
    pub fn new(alpha: T) -> Result<Self, SignalError> {
        if !(alpha >= T::zero() && alpha < T::one()) {
            return Err(SignalError::InvalidParameter(format!(
                "EMA coefficient must lie in [0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            levels: BTreeMap::new(),
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn level(&self, asset: &str) -> Option<T> {
        self.levels.get(asset).copied()
    }

    pub fn is_initialized(&self, asset: &str) -> bool {
        self.levels.contains_key(asset)
    }

    pub fn levels(&self) -> &BTreeMap<String, T> {
        &self.levels
    }

    /// Fold one day of returns into the state.
    ///
    /// The whole update is rejected if any return is non-finite.
    pub fn update<'a, I>(&mut self, date_returns: I) -> Result<(), SignalError>
    where
        I: IntoIterator<Item = (&'a str, T)>,
    {
        let day: Vec<(&str, T)> = date_returns.into_iter().collect();
        if let Some((asset, _)) = day.iter().find(|(_, r)| !r.is_finite()) {
            return Err(SignalError::NonFinite((*asset).to_string()));
        }
        for (asset, r) in day {
            match self.levels.get_mut(asset) {
                Some(level) => *level = self.alpha * *level + r,
                None => {
                    self.levels.insert(asset.to_string(), r);
                }
            }
        }
        Ok(())
    }

    /// Forget an asset's level; its next observation seeds a fresh EMA.
    pub fn reset(&mut self, asset: &str) {
        self.levels.remove(asset);
    }

    /// State at date index `d` of an already transformed panel, restricted to `assets`.
    pub fn from_transformed<'a>(
        alpha: T,
        transformed: &ResidualPanel<T>,
        d: usize,
        assets: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, SignalError> {
        let mut state = Self::new(alpha)?;
        for id in assets {
            if let Some(level) = transformed
                .asset_index(id)
                .and_then(|i| transformed.get(d, i))
            {
                state.levels.insert(id.to_string(), level);
            }
        }
        Ok(state)
    }

    pub(crate) fn insert_level(&mut self, asset: &str, level: T) {
        self.levels.insert(asset.to_string(), level);
    }
}

/// Functional form of [`EmaState::update`].
pub fn ema_update<'a, T: Scalar, I>(
    mut state: EmaState<T>,
    date_returns: I,
) -> Result<EmaState<T>, SignalError>
where
    I: IntoIterator<Item = (&'a str, T)>,
{
    state.update(date_returns)?;
    Ok(state)
}

/// EMA of every column of `panel`, restarting after each universe gap.
///
/// Cell `(d, i)` of the result is the EMA level of asset `i` after day `d`;
/// the presence mask is unchanged. With `alpha = 0` the values equal the input.
pub fn ema_transform<T: Scalar>(
    panel: &ResidualPanel<T>,
    alpha: T,
) -> Result<ResidualPanel<T>, SignalError> {
    EmaState::new(alpha)?;
    let n = panel.n_assets();
    let mut out = Vec::with_capacity(panel.n_dates() * n);
    for d in 0..panel.n_dates() {
        let row = panel.row(d);
        let mask = panel.present_row(d);
        for i in 0..n {
            let v = if !mask[i] {
                T::zero()
            } else if d > 0 && panel.is_present(d - 1, i) {
                alpha * out[(d - 1) * n + i] + row[i]
            } else {
                row[i]
            };
            out.push(v);
        }
    }
    Ok(panel.with_values(out))
}

/// Map forecasts of the next EMA level back to forecasts of the next return:
/// `score - alpha * level`.
pub fn deadjust_forecast<T: Scalar>(
    raw: &ForecastVector<T>,
    ema: &EmaState<T>,
) -> Result<ForecastVector<T>, SignalError> {
    let mut out = ForecastVector::new(raw.date, raw.source.clone());
    for (asset, &chi_hat) in &raw.scores {
        let level = ema
            .level(asset)
            .ok_or_else(|| SignalError::MissingEma(asset.clone()))?;
        out.scores
            .insert(asset.clone(), chi_hat - ema.alpha() * level);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{read_panel, DatasetMeta, FactorModel};
    use chrono::NaiveDate;

    fn feed(alpha: f64, rs: &[f64]) -> f64 {
        let mut s = EmaState::new(alpha).unwrap();
        for &r in rs {
            s.update([("X", r)]).unwrap();
        }
        s.level("X").unwrap()
    }

    #[test]
    fn zero_alpha_keeps_last_return() {
        assert_eq!(feed(0.0, &[0.5, -0.2, 0.013]), 0.013);
    }

    #[test]
    fn hand_unrolled_two_steps() {
        let v = feed(0.3, &[0.01, -0.02]);
        assert!((v - (-0.017)).abs() < 1e-15);
    }

    #[test]
    fn constant_input_converges_to_geometric_limit() {
        let c = 0.004;
        let v = feed(0.5, &vec![c; 200]);
        assert!((v - 2.0 * c).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_alpha_and_non_finite_returns() {
        assert!(EmaState::<f64>::new(1.0).is_err());
        assert!(EmaState::<f64>::new(-0.1).is_err());
        let mut s = EmaState::new(0.2).unwrap();
        s.update([("A", 0.01)]).unwrap();
        let err = s.update([("A", 0.02), ("B", f64::NAN)]).unwrap_err();
        assert!(matches!(err, SignalError::NonFinite(ref a) if a == "B"));
        // rejected update leaves the state untouched
        assert_eq!(s.level("A"), Some(0.01));
        assert!(!s.is_initialized("B"));
    }

    #[test]
    fn deadjust_substitution() {
        let date = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let mut ema = EmaState::new(0.3_f64).unwrap();
        ema.update([("A", 0.01)]).unwrap();
        let mut f = ForecastVector::new(date, "t");
        f.scores.insert("A".into(), 0.002);
        let out = deadjust_forecast(&f, &ema).unwrap();
        assert!((out.scores["A"] - (-0.001)).abs() < 1e-16);

        f.scores.insert("B".into(), 0.0);
        assert!(
            matches!(deadjust_forecast(&f, &ema), Err(SignalError::MissingEma(ref a)) if a == "B")
        );
    }

    #[test]
    fn deadjust_is_identity_at_zero_alpha() {
        let date = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let mut ema = EmaState::new(0.0).unwrap();
        ema.update([("A", 0.7), ("B", -0.1)]).unwrap();
        let mut f = ForecastVector::new(date, "t");
        f.scores.insert("A".into(), 0.25);
        f.scores.insert("B".into(), -3.5e-4);
        assert_eq!(deadjust_forecast(&f, &ema).unwrap().scores, f.scores);
    }

    #[test]
    fn transform_restarts_after_gap() {
        let p = read_panel::<f64, _>(
            "date,A\n2020-01-01,1\n2020-01-02,1\n2020-01-03,\n2020-01-06,2\n2020-01-07,1\n"
                .as_bytes(),
            DatasetMeta::five_factor(FactorModel::Ff, "t"),
        )
        .unwrap();
        let t = ema_transform(&p, 0.5).unwrap();
        let col: Vec<Option<f64>> = (0..5).map(|d| t.get(d, 0)).collect();
        assert_eq!(col, vec![Some(1.0), Some(1.5), None, Some(2.0), Some(2.0)]);
    }
}
