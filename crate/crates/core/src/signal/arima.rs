//! Non-seasonal ARIMA(p, d, q) fitted by conditional sum of squares, with an
//! exhaustive AIC search over `p, q <= 2`, `d <= 1`.
//!
//! The model for the d-times differenced series `w` is written in mean form:
//!
//! ```text
//! w[t] - mu = sum_i phi_i (w[t-i] - mu) + e[t] + sum_k theta_k e[t-k]
//! ```
//!
//! Every order is scored on the same observations: the first
//! `MAX_P + MAX_D` points of the window only serve as lags, so the Gaussian
//! log-likelihoods entering the AIC share one sample size. The likelihood is
//! the exact one (Kalman filter) evaluated at the CSS estimates; the
//! conditional one rewards MA roots piling up near the unit circle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

use super::{DayInputs, ForecastVector, Forecaster, InputSpace, SignalError};

pub const MAX_P: usize = 2;
pub const MAX_D: usize = 1;
pub const MAX_Q: usize = 2;
const CONDITIONING: usize = MAX_P + MAX_D;
const MIN_FREE_OBS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Option<Self> {
        (p <= MAX_P && d <= MAX_D && q <= MAX_Q).then_some(Self { p, d, q })
    }

    /// All 18 admissible orders, p-major then d then q.
    pub fn grid() -> impl Iterator<Item = ArimaOrder> {
        (0..=MAX_P).flat_map(|p| {
            (0..=MAX_D).flat_map(move |d| (0..=MAX_Q).map(move |q| ArimaOrder { p, d, q }))
        })
    }

    /// Estimated parameters: AR and MA coefficients, the mean and the innovation variance.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 2
    }

    pub fn min_len(&self) -> usize {
        MIN_FREE_OBS + self.p + self.q + self.d
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitFailure {
    #[error("series of length {got} is too short, need {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("constant series")]
    Degenerate,
    #[error("singular regression")]
    Singular,
    #[error("AR part is not stationary")]
    NonStationary,
    #[error("MA part is not invertible")]
    NonInvertible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit<T> {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<T>,
    pub ma_coeffs: Vec<T>,
    /// Mean of the differenced series.
    pub intercept: T,
    pub sigma2: T,
    pub aic: T,
    pub loglik: T,
}

impl<T: Scalar> ArimaFit<T> {
    /// One-step-ahead conditional mean given the series the model was fitted on.
    pub fn forecast(&self, series: &[T]) -> T {
        let w = difference(series, self.order.d);
        let e = css_residuals(&w, self.intercept, &self.ar_coeffs, &self.ma_coeffs);
        let n = w.len();
        let mu = self.intercept;
        let mut next = mu;
        for (i, &phi) in self.ar_coeffs.iter().enumerate() {
            next += phi * (w[n - 1 - i] - mu);
        }
        for (k, &theta) in self.ma_coeffs.iter().enumerate() {
            next += theta * e[n - 1 - k];
        }
        match self.order.d {
            0 => next,
            _ => *series.last().expect("non-empty series") + next,
        }
    }
}

fn difference<T: Scalar>(x: &[T], d: usize) -> Vec<T> {
    let mut w = x.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// CSS residuals; the first `p` residuals (and pre-sample ones) are zero.
fn css_residuals<T: Scalar>(w: &[T], mu: T, ar: &[T], ma: &[T]) -> Vec<T> {
    let p = ar.len();
    let mut e = vec![T::zero(); w.len()];
    for t in p..w.len() {
        let mut pred = mu;
        for (i, &phi) in ar.iter().enumerate() {
            pred += phi * (w[t - 1 - i] - mu);
        }
        for (k, &theta) in ma.iter().enumerate() {
            if t > k {
                pred += theta * e[t - 1 - k];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

fn sum_sq_from<T: Scalar>(e: &[T], start: usize) -> T {
    e[start..].iter().map(|&v| v * v).sum()
}

/// Smallest root modulus of `1 + a1 z + a2 z^2` (`a` may be shorter).
fn min_root_modulus<T: Scalar>(a: &[T]) -> T {
    let a1 = a.first().copied().unwrap_or(T::zero());
    let a2 = a.get(1).copied().unwrap_or(T::zero());
    if a2 == T::zero() {
        return if a1 == T::zero() {
            T::infinity()
        } else {
            a1.abs().recip()
        };
    }
    let disc = a1 * a1 - T::lit(4.0) * a2;
    if disc >= T::zero() {
        let s = disc.sqrt();
        let two_a2 = T::lit(2.0) * a2;
        ((-a1 + s) / two_a2).abs().min(((-a1 - s) / two_a2).abs())
    } else {
        // conjugate pair; product of roots is 1 / a2
        a2.abs().recip().sqrt()
    }
}

/// Fits with a root inside this radius are rejected, as in common auto-ARIMA implementations.
const ROOT_MARGIN: f64 = 1.01;

fn ar_ok<T: Scalar>(ar: &[T]) -> bool {
    let a: Vec<T> = ar.iter().map(|&c| -c).collect();
    min_root_modulus(&a) >= T::lit(ROOT_MARGIN)
}

fn ma_ok<T: Scalar>(ma: &[T]) -> bool {
    min_root_modulus(ma) >= T::lit(ROOT_MARGIN)
}

/// Exact Gaussian log-likelihood of a stationary ARMA model for `y`, with the
/// innovation variance profiled out. Returns `(loglik, sigma2)`.
///
/// Kalman filter on the companion-form state, started from the stationary
/// covariance.
fn exact_loglik<T: Scalar>(y: &[T], mu: T, ar: &[T], ma: &[T]) -> Option<(T, T)> {
    let r = ar.len().max(ma.len() + 1);
    let phi = |i: usize| ar.get(i).copied().unwrap_or(T::zero());
    let mut rv = vec![T::zero(); r];
    rv[0] = T::one();
    for (k, &th) in ma.iter().enumerate() {
        rv[k + 1] = th;
    }
    // P0 = T P0 T' + R R', solved as a linear system in vec(P0)
    let tm = |i: usize, j: usize| -> T {
        if j == 0 {
            phi(i)
        } else if j == i + 1 {
            T::one()
        } else {
            T::zero()
        }
    };
    let m = r * r;
    let mut a = vec![vec![T::zero(); m]; m];
    let mut b = vec![T::zero(); m];
    for i in 0..r {
        for j in 0..r {
            let row = i * r + j;
            a[row][row] += T::one();
            for k in 0..r {
                for l in 0..r {
                    a[row][k * r + l] -= tm(i, k) * tm(j, l);
                }
            }
            b[row] = rv[i] * rv[j];
        }
    }
    let p0 = solve(a, b)?;
    let mut pm: Vec<Vec<T>> = (0..r).map(|i| p0[i * r..(i + 1) * r].to_vec()).collect();
    let mut state = vec![T::zero(); r];

    let mut ssq = T::zero();
    let mut sum_log_f = T::zero();
    let mut next = vec![T::zero(); r];
    let mut tp = vec![vec![T::zero(); r]; r];
    for &obs in y {
        let v = obs - mu - state[0];
        let f = pm[0][0];
        if !(f > T::zero()) || !f.is_finite() {
            return None;
        }
        ssq += v * v / f;
        sum_log_f += f.ln();
        // T * P
        for i in 0..r {
            for j in 0..r {
                let mut acc = phi(i) * pm[0][j];
                if i + 1 < r {
                    acc += pm[i + 1][j];
                }
                tp[i][j] = acc;
            }
        }
        // gain K = T P Z' / F, Z = e1
        let k: Vec<T> = (0..r).map(|i| tp[i][0] / f).collect();
        for i in 0..r {
            let mut acc = phi(i) * state[0];
            if i + 1 < r {
                acc += state[i + 1];
            }
            next[i] = acc + k[i] * v;
        }
        std::mem::swap(&mut state, &mut next);
        // P' = T P T' + R R' - K K' F
        for i in 0..r {
            for j in 0..r {
                let mut acc = phi(j) * tp[i][0];
                if j + 1 < r {
                    acc += tp[i][j + 1];
                }
                pm[i][j] = acc + rv[i] * rv[j] - k[i] * k[j] * f;
            }
        }
    }
    let n = T::from_count(y.len());
    let sigma2 = ssq / n;
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let loglik = -n / T::lit(2.0) * ((two_pi * sigma2).ln() + T::one()) - sum_log_f / T::lit(2.0);
    Some((loglik, sigma2))
}

fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let col_scale: Vec<T> = (0..n)
        .map(|c| a.iter().fold(T::zero(), |m, r| m.max(r[c].abs())))
        .collect();
    for col in 0..n {
        let tiny = col_scale[col] * T::epsilon() * T::lit(16.0) * T::from_count(n);
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[piv][col].abs() > tiny) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != T::zero() {
                let (top, bottom) = a.split_at_mut(r);
                for (x, &v) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares AR(p) with intercept on observations `start..`; returns (mu, phi).
fn fit_ar_ols<T: Scalar>(w: &[T], p: usize, start: usize) -> Result<(T, Vec<T>), FitFailure> {
    let obs = &w[start..];
    if p == 0 {
        let mu = obs.iter().copied().sum::<T>() / T::from_count(obs.len());
        return Ok((mu, Vec::new()));
    }
    let k = p + 1;
    let mut xtx = vec![vec![T::zero(); k]; k];
    let mut xty = vec![T::zero(); k];
    let mut row = vec![T::zero(); k];
    for t in start..w.len() {
        row[0] = T::one();
        for i in 0..p {
            row[i + 1] = w[t - 1 - i];
        }
        for r in 0..k {
            xty[r] += row[r] * w[t];
            for c in 0..k {
                xtx[r][c] += row[r] * row[c];
            }
        }
    }
    let beta = solve(xtx, xty).ok_or(FitFailure::Singular)?;
    let phi = beta[1..].to_vec();
    if !ar_ok(&phi) {
        return Err(FitFailure::NonStationary);
    }
    let denom = T::one() - phi.iter().copied().sum::<T>();
    Ok((beta[0] / denom, phi))
}

/// Fit one ARIMA order to `series` (oldest first) by conditional sum of squares.
pub fn arima_fit<T: Scalar>(series: &[T], order: ArimaOrder) -> Result<ArimaFit<T>, FitFailure> {
    let n = series.len();
    let needed = order.min_len().max(CONDITIONING + order.n_params() + 1);
    if n < needed {
        return Err(FitFailure::TooShort { needed, got: n });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(FitFailure::NonFinite);
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Err(FitFailure::Degenerate);
    }

    let w = difference(series, order.d);
    let start = CONDITIONING - order.d;

    let (mu, ar, ma) = if order.q == 0 {
        let (mu, ar) = fit_ar_ols(&w, order.p, start)?;
        (mu, ar, Vec::new())
    } else {
        fit_arma_nm(&w, order, start)?
    };

    if !ar_ok(&ar) {
        return Err(FitFailure::NonStationary);
    }
    if !ma_ok(&ma) {
        return Err(FitFailure::NonInvertible);
    }
    if !mu.is_finite() || ar.iter().chain(ma.iter()).any(|v| !v.is_finite()) {
        return Err(FitFailure::NonFinite);
    }

    // CSS estimates, scored by the exact likelihood of the common sample
    let (loglik, sigma2) = exact_loglik(&w[start..], mu, &ar, &ma).ok_or(FitFailure::Singular)?;
    let aic = T::lit(2.0) * T::from_count(order.n_params()) - T::lit(2.0) * loglik;
    Ok(ArimaFit {
        order,
        ar_coeffs: ar,
        ma_coeffs: ma,
        intercept: mu,
        sigma2,
        aic,
        loglik,
    })
}

fn fit_arma_nm<T: Scalar>(
    w: &[T],
    order: ArimaOrder,
    start: usize,
) -> Result<(T, Vec<T>, Vec<T>), FitFailure> {
    let (p, q) = (order.p, order.q);
    let obs = &w[start..];
    let mean = obs.iter().copied().sum::<T>() / T::from_count(obs.len());
    let (mu0, ar0) = match fit_ar_ols(w, p, start) {
        Ok(v) => v,
        Err(_) => (mean, vec![T::zero(); p]),
    };
    let sd = crate::scalar::sample_std(obs).unwrap_or(T::zero());
    let mu_step = (sd * T::lit(0.1)).max(T::lit(1e-8) * (mean.abs() + T::one()));

    let unpack = |x: &[T]| (x[0], x[1..=p].to_vec(), x[p + 1..].to_vec());
    let objective = |x: &[T]| -> T {
        let (mu, ar, ma) = unpack(x);
        if !ar_ok(&ar) || !ma_ok(&ma) {
            return T::infinity();
        }
        let e = css_residuals(w, mu, &ar, &ma);
        let s = sum_sq_from(&e, start);
        if s.is_finite() {
            s
        } else {
            T::infinity()
        }
    };

    let mut x0 = Vec::with_capacity(1 + p + q);
    x0.push(mu0);
    x0.extend(ar0);
    x0.extend(std::iter::repeat_n(T::zero(), q));
    let mut steps = vec![T::lit(0.1); x0.len()];
    steps[0] = mu_step;

    let first = nelder_mead(&objective, &x0, &steps, 2000);
    let steps2: Vec<T> = steps.iter().map(|&s| s * T::lit(0.5)).collect();
    let best = nelder_mead(&objective, &first, &steps2, 2000);
    if !objective(&best).is_finite() {
        return Err(FitFailure::NonFinite);
    }
    let (mu, ar, ma) = unpack(&best);
    Ok((mu, ar, ma))
}

/// Plain Nelder-Mead minimizer; returns the best vertex found.
fn nelder_mead<T: Scalar, F: Fn(&[T]) -> T>(
    f: &F,
    x0: &[T],
    steps: &[T],
    max_evals: usize,
) -> Vec<T> {
    let dim = x0.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = dim + 1;
    let cmp = |a: &(Vec<T>, T), b: &(Vec<T>, T)| {
        a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)
    };

    while evals < max_evals {
        simplex.sort_by(cmp);
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst.is_finite()
            && (worst - best).abs() <= T::lit(1e-12) * (best.abs() + T::lit(1e-300))
        {
            break;
        }
        let mut centroid = vec![T::zero(); dim];
        for (x, _) in &simplex[..dim] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= T::from_count(dim);
        }
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(&c, &w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-T::one());
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-two);
            let fe = f(&xe);
            evals += 1;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(-half);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(half);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (v, &b) in x.iter_mut().zip(&x_best) {
                        *v = b + half * (*v - b);
                    }
                    *fx = f(x);
                }
                evals += dim;
            }
        }
    }
    simplex.sort_by(cmp);
    simplex.swap_remove(0).0
}

/// Minimum-AIC fit over the full order grid; `None` when every order fails.
///
/// Ties keep the earliest order in [`ArimaOrder::grid`].
pub fn auto_arima<T: Scalar>(series: &[T]) -> Option<ArimaFit<T>> {
    let mut best: Option<ArimaFit<T>> = None;
    for order in ArimaOrder::grid() {
        match arima_fit(series, order) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
                    best = Some(fit);
                }
            }
            Err(why) => log::trace!("ARIMA{order} skipped: {why}"),
        }
    }
    best
}

/// One-step forecast of the minimum-AIC model; 0 when no order can be fitted.
pub fn auto_arima_forecast<T: Scalar>(series: &[T]) -> T {
    match auto_arima(series) {
        Some(fit) => {
            let f = fit.forecast(series);
            if f.is_finite() {
                f
            } else {
                log::debug!("ARIMA{} produced a non-finite forecast, using 0", fit.order);
                T::zero()
            }
        }
        None => {
            log::debug!("no ARIMA order could be fitted, using a neutral forecast");
            T::zero()
        }
    }
}

/// Per-asset auto-ARIMA over each day's context windows.
#[derive(Debug, Clone, Default)]
pub struct AutoArimaForecaster;

impl<T: Scalar> Forecaster<T> for AutoArimaForecaster {
    fn tag(&self) -> String {
        "auto-arima".into()
    }

    fn input_space(&self) -> InputSpace {
        InputSpace::Transformed
    }

    fn forecast(&mut self, day: &DayInputs<'_, T>) -> Result<ForecastVector<T>, SignalError> {
        let windows = day.windows();
        let preds: Vec<T> = windows
            .par_iter()
            .map(|w| auto_arima_forecast(&w.returns))
            .collect();
        let mut out = ForecastVector::new(day.date, <Self as Forecaster<T>>::tag(self));
        for (w, p) in windows.into_iter().zip(preds) {
            out.scores.insert(w.asset_id, p);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_eighteen_orders() {
        let g: Vec<_> = ArimaOrder::grid().collect();
        assert_eq!(g.len(), 18);
        assert_eq!(g[0], ArimaOrder { p: 0, d: 0, q: 0 });
        assert!(ArimaOrder::new(3, 0, 0).is_none());
        assert!(ArimaOrder::new(0, 2, 0).is_none());
    }

    #[test]
    fn root_margin() {
        assert!(ar_ok(&[0.5_f64]));
        assert!(!ar_ok(&[1.0_f64]));
        assert!(!ar_ok(&[0.995_f64]));
        assert!(ar_ok(&[0.5_f64, 0.3]));
        assert!(!ar_ok(&[0.7_f64, 0.4]));
        assert!(!ar_ok(&[0.0_f64, -1.0]));
        assert!(ma_ok(&[0.9_f64]));
        assert!(!ma_ok(&[-1.0_f64]));
        // 1 - 0.494 z - 0.506 z^2 has a root at z = 1
        assert!(!ma_ok(&[-0.494_f64, -0.506]));
        // (1 - 0.5z)(1 - 0.8z): roots 2 and 1.25
        assert!((min_root_modulus(&[-1.3_f64, 0.4]) - 1.25).abs() < 1e-12);
        // 1 + 0.25 z^2: roots +-2i
        assert!((min_root_modulus(&[0.0_f64, 0.25]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_likelihood_matches_ar1_closed_form() {
        let y: Vec<f64> = (0..40)
            .map(|i| ((i * 17 % 13) as f64 - 6.0) * 1e-3)
            .collect();
        let (mu, phi) = (2e-4, 0.6);
        let (ll, s2) = exact_loglik(&y, mu, &[phi], &[]).unwrap();
        let mut ssq = (1.0 - phi * phi) * (y[0] - mu).powi(2);
        for t in 1..y.len() {
            ssq += (y[t] - mu - phi * (y[t - 1] - mu)).powi(2);
        }
        let n = y.len() as f64;
        let want_s2 = ssq / n;
        let want = -n / 2.0 * ((2.0 * std::f64::consts::PI * want_s2).ln() + 1.0)
            + 0.5 * (1.0 - phi * phi).ln();
        assert!((s2 - want_s2).abs() < 1e-15);
        assert!((ll - want).abs() < 1e-9);
    }

    #[test]
    fn exact_likelihood_of_ma1_first_step_variance() {
        // MA(1): Var(y1) = 1 + theta^2 in units of sigma2
        let theta = 0.4;
        let (ll_a, _) = exact_loglik(&[0.0_f64, 1.0], 0.0, &[], &[theta]).unwrap();
        // y1 = 0 contributes only log F1; y2 = 1 has F2 = 1 + t^2 - t^2 / (1 + t^2)
        let f1 = 1.0 + theta * theta;
        let f2 = f1 - theta * theta / f1;
        let s2 = 1.0 / f2 / 2.0;
        let want = -((2.0 * std::f64::consts::PI * s2).ln() + 1.0) - 0.5 * (f1.ln() + f2.ln());
        assert!((ll_a - want).abs() < 1e-12);
    }

    #[test]
    fn mean_model_matches_sample_moments() {
        let x: Vec<f64> = (0..60)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * 1e-3)
            .collect();
        let fit = arima_fit(&x, ArimaOrder { p: 0, d: 0, q: 0 }).unwrap();
        let obs = &x[CONDITIONING..];
        let m = obs.iter().sum::<f64>() / obs.len() as f64;
        let v = obs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / obs.len() as f64;
        assert!((fit.intercept - m).abs() < 1e-15);
        assert!((fit.sigma2 - v).abs() < 1e-15);
        assert!((fit.forecast(&x) - m).abs() < 1e-15);
        let ll = -(obs.len() as f64) / 2.0 * ((2.0 * std::f64::consts::PI * v).ln() + 1.0);
        assert!((fit.loglik - ll).abs() < 1e-9);
        assert!((fit.aic - (4.0 - 2.0 * ll)).abs() < 1e-9);
    }

    #[test]
    fn random_walk_on_a_ramp() {
        let x: Vec<f64> = (0..50).map(|i| 0.5 * i as f64).collect();
        let fit = arima_fit(&x, ArimaOrder { p: 0, d: 1, q: 0 }).unwrap();
        assert_eq!(fit.intercept, 0.5);
        assert_eq!(fit.sigma2, 0.0);
        assert_eq!(fit.forecast(&x), 25.0);
    }

    #[test]
    fn constant_series_fails_everywhere() {
        let x = vec![0.003; 100];
        for order in ArimaOrder::grid() {
            assert_eq!(arima_fit(&x, order), Err(FitFailure::Degenerate));
        }
        assert!(auto_arima(&x).is_none());
        assert_eq!(auto_arima_forecast(&x), 0.0);
    }

    #[test]
    fn short_series_rejected() {
        let x: Vec<f64> = (0..23).map(|i| (i as f64).sin()).collect();
        assert!(arima_fit(&x, ArimaOrder { p: 0, d: 0, q: 0 }).is_ok());
        assert!(matches!(
            arima_fit(&x, ArimaOrder { p: 2, d: 1, q: 2 }),
            Err(FitFailure::TooShort {
                needed: 25,
                got: 23
            })
        ));
    }

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0_f64, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2);
        let x = nelder_mead(&f, &[0.0, 0.0], &[0.1, 0.1], 5000);
        assert!((x[0] - 1.0).abs() < 1e-5 && (x[1] + 0.5).abs() < 1e-5);
    }
}
