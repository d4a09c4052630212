//! Performance measures over daily return series.

use thiserror::Error;

use crate::scalar::{mean, sample_std, Scalar};

pub const DEFAULT_ANNUALIZATION_DAYS: f64 = 252.0;
pub const DEFAULT_COST_BPS: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("Sharpe ratio is undefined for a zero-variance series")]
    ZeroVariance,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Annualized Sharpe ratio `mean / std * sqrt(A)`, sample std (n - 1).
///
/// A series whose dispersion is at rounding level relative to its largest
/// magnitude counts as zero-variance.
pub fn sharpe<T: Scalar>(daily_returns: &[T], annualization_days: T) -> Result<T, MetricsError> {
    let n = daily_returns.len();
    if n < 2 {
        return Err(MetricsError::TooFewObservations(n));
    }
    let m = mean(daily_returns).expect("n >= 2");
    let s = sample_std(daily_returns).expect("n >= 2");
    let scale = daily_returns.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    if !(s > T::lit(16.0) * T::epsilon() * scale) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(m / s * annualization_days.sqrt())
}

/// Sample standard deviation scaled by `sqrt(A)`.
pub fn annualized_vol<T: Scalar>(daily_returns: &[T], annualization_days: T) -> Option<T> {
    sample_std(daily_returns).map(|s| s * annualization_days.sqrt())
}

/// `sharpe * sqrt(years)`.
pub fn t_statistic<T: Scalar>(sharpe: T, years: T) -> T {
    sharpe * years.sqrt()
}

/// Net returns after paying `cost_bps` basis points per unit of turnover.
pub fn apply_costs<T: Scalar>(
    gross: &[T],
    turnover: &[T],
    cost_bps: T,
) -> Result<Vec<T>, MetricsError> {
    if gross.len() != turnover.len() {
        return Err(MetricsError::LengthMismatch(gross.len(), turnover.len()));
    }
    let unit_cost = cost_bps * T::lit(1e-4);
    Ok(gross
        .iter()
        .zip(turnover)
        .map(|(&g, &t)| g - unit_cost * t)
        .collect())
}

/// Running sum of a return series (no compounding).
pub fn cumulative<T: Scalar>(returns: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    returns
        .iter()
        .map(|&r| {
            acc += r;
            acc
        })
        .collect()
}
