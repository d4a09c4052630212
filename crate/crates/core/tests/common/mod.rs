#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use resid_arb::panel::{DatasetMeta, FactorModel, ResidualPanel};

pub fn meta() -> DatasetMeta {
    DatasetMeta::five_factor(FactorModel::Pca, "synthetic")
}

pub fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2001, 1, 2).unwrap();
    (0..n).map(|k| start + Days::new(k as u64)).collect()
}

pub fn asset_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:03}")).collect()
}

/// Random panel; each asset lists at a random day, may delist, and has
/// occasional one-day gaps. Returns follow `r[t] = phi * r[t-1] + eps`.
pub fn random_panel(
    n_dates: usize,
    n_assets: usize,
    phi: f64,
    gap_prob: f64,
    seed: u64,
) -> ResidualPanel<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut values = vec![0.0; n_dates * n_assets];
    let mut present = vec![false; n_dates * n_assets];
    for i in 0..n_assets {
        let list = if rng.random_bool(0.3) {
            rng.random_range(0..n_dates / 2)
        } else {
            0
        };
        let delist = if rng.random_bool(0.2) {
            rng.random_range(n_dates / 2..n_dates)
        } else {
            n_dates
        };
        let vol = rng.random_range(0.5..2.0);
        let mut prev = 0.0;
        for d in list..delist {
            if rng.random_bool(gap_prob) {
                prev = 0.0;
                continue;
            }
            let r = phi * prev + vol * noise.sample(&mut rng);
            values[d * n_assets + i] = r;
            present[d * n_assets + i] = true;
            prev = r;
        }
    }
    ResidualPanel::new(meta(), dates(n_dates), asset_ids(n_assets), values, present).unwrap()
}

pub fn ar1(n: usize, phi: f64, mean: f64, sd: f64, rng: &mut StdRng) -> Vec<f64> {
    let noise = Normal::new(0.0, sd).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut prev = 0.0;
    // burn-in so the start is close to stationary
    for _ in 0..50 {
        prev = phi * prev + noise.sample(rng);
    }
    for _ in 0..n {
        prev = phi * prev + noise.sample(rng);
        x.push(mean + prev);
    }
    x
}

pub fn white_noise(n: usize, sd: f64, rng: &mut StdRng) -> Vec<f64> {
    let noise = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| noise.sample(rng)).collect()
}

/// Every asset present every day; AR(1) returns as in [`random_panel`].
pub fn full_panel(n_dates: usize, n_assets: usize, phi: f64, seed: u64) -> ResidualPanel<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut values = vec![0.0; n_dates * n_assets];
    for i in 0..n_assets {
        let col = ar1(n_dates, phi, 0.0, 0.01, &mut rng);
        for (d, v) in col.into_iter().enumerate() {
            values[d * n_assets + i] = v;
        }
    }
    let present = vec![true; n_dates * n_assets];
    ResidualPanel::new(meta(), dates(n_dates), asset_ids(n_assets), values, present).unwrap()
}
