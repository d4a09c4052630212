mod common;

use rand::rngs::StdRng;
use rand::SeedableRng;
use resid_arb::signal::{arima_fit, auto_arima, auto_arima_forecast, ArimaOrder};

#[test]
fn ar1_coefficient_recovered_on_most_seeds() {
    let order = ArimaOrder::new(1, 0, 0).unwrap();
    let mut hits = 0;
    for seed in 0..200 {
        let mut rng = StdRng::seed_from_u64(seed);
        let x = common::ar1(100, 0.5, 0.0, 0.01, &mut rng);
        let fit = arima_fit(&x, order).unwrap();
        if (fit.ar_coeffs[0] - 0.5).abs() <= 0.2 {
            hits += 1;
        }
    }
    println!("AR(1) recovery: {hits}/200");
    assert!(hits >= 190, "{hits}/200 within 0.2");
}

#[test]
fn white_noise_selects_the_mean_model_most_often() {
    let mut counts = std::collections::BTreeMap::new();
    for seed in 0..200 {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let x = common::white_noise(100, 0.006, &mut rng);
        let fit = auto_arima(&x).unwrap();
        *counts.entry(fit.order.to_string()).or_insert(0) += 1;
    }
    println!("white-noise selections: {counts:?}");
    assert!(counts.get("(0,0,0)").copied().unwrap_or(0) > 100);
}

#[test]
fn selected_aic_equals_exhaustive_minimum() {
    for seed in 0..200 {
        let mut rng = StdRng::seed_from_u64(5000 + seed);
        let phi = [-0.6, -0.2, 0.0, 0.3, 0.7][seed as usize % 5];
        let x = common::ar1(100, phi, 1e-4, 0.01, &mut rng);
        // oracle: enumerate every (p, d, q) independently
        let mut best = f64::INFINITY;
        for p in 0..=2 {
            for d in 0..=1 {
                for q in 0..=2 {
                    if let Ok(fit) = arima_fit(&x, ArimaOrder::new(p, d, q).unwrap()) {
                        best = best.min(fit.aic);
                    }
                }
            }
        }
        let chosen = auto_arima(&x).unwrap();
        assert_eq!(chosen.aic, best, "seed {seed}");
    }
}

#[test]
fn strong_ar1_forecast_has_the_analytic_sign() {
    let (phi, sd, mean) = (0.8, 0.01, 0.001);
    let stationary_sd = sd / (1.0f64 - phi * phi).sqrt();
    let (mut agree, mut trials, mut seed) = (0, 0, 9000);
    while trials < 100 {
        let mut rng = StdRng::seed_from_u64(seed);
        seed += 1;
        let x = common::ar1(100, phi, mean, sd, &mut rng);
        // only series that end well away from the mean carry a clear signal
        if (x[99] - mean).abs() < stationary_sd {
            continue;
        }
        trials += 1;
        let f = auto_arima_forecast(&x);
        if (f - mean).signum() == (phi * (x[99] - mean)).signum() {
            agree += 1;
        }
    }
    println!("AR(1) sign agreement: {agree}/{trials}");
    assert!(agree >= 95);
}

#[test]
fn ma_fit_is_invertible_and_close() {
    // MA(1) with theta = 0.6
    let mut rng = StdRng::seed_from_u64(77);
    let e = common::white_noise(401, 0.01, &mut rng);
    let x: Vec<f64> = (1..401).map(|t| e[t] + 0.6 * e[t - 1]).collect();
    let fit = arima_fit(&x, ArimaOrder::new(0, 0, 1).unwrap()).unwrap();
    assert!((fit.ma_coeffs[0] - 0.6).abs() < 0.15, "{:?}", fit.ma_coeffs);
    assert!(fit.sigma2 > 0.0);
}

#[test]
fn fitted_lengths_match_order() {
    let mut rng = StdRng::seed_from_u64(3);
    let x = common::ar1(100, 0.3, 0.0, 0.01, &mut rng);
    for order in ArimaOrder::grid() {
        if let Ok(fit) = arima_fit(&x, order) {
            assert_eq!(fit.ar_coeffs.len(), order.p);
            assert_eq!(fit.ma_coeffs.len(), order.q);
            assert!(fit.aic.is_finite());
        }
    }
}

#[test]
fn f32_fit_agrees_with_f64() {
    let mut rng = StdRng::seed_from_u64(11);
    let x = common::ar1(100, 0.5, 0.0, 0.01, &mut rng);
    let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let order = ArimaOrder::new(1, 0, 0).unwrap();
    let a = arima_fit(&x, order).unwrap();
    let b = arima_fit(&x32, order).unwrap();
    assert!((a.ar_coeffs[0] - b.ar_coeffs[0] as f64).abs() < 1e-3);
}
