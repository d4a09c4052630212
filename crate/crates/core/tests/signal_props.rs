mod common;

use chrono::NaiveDate;
use proptest::prelude::*;
use resid_arb::signal::{
    deadjust_forecast, ema_transform, ema_update, str_forecast, EmaState, ForecastVector,
};

fn closed_form(alpha: f64, rs: &[f64]) -> f64 {
    let n = rs.len();
    (0..n).map(|k| alpha.powi(k as i32) * rs[n - 1 - k]).sum()
}

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 6, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ema_equals_geometric_sum(alpha in 0.0f64..0.999, rs in prop::collection::vec(-0.1f64..0.1, 1..150)) {
        let mut state = EmaState::new(alpha).unwrap();
        for &r in &rs {
            state = ema_update(state, [("X", r)]).unwrap();
        }
        let got = state.level("X").unwrap();
        let want = closed_form(alpha, &rs);
        let scale: f64 = rs.iter().map(|r| r.abs()).sum();
        prop_assert!((got - want).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "{got} vs {want}");
    }

    #[test]
    fn transform_restarts_each_unbroken_run(seed in any::<u64>(), alpha in 0.0f64..0.95) {
        let p = common::random_panel(60, 5, 0.0, 0.15, seed);
        let t = ema_transform(&p, alpha).unwrap();
        for i in 0..p.n_assets() {
            for d in 0..p.n_dates() {
                match p.get(d, i) {
                    None => prop_assert_eq!(t.get(d, i), None),
                    Some(_) => {
                        let run = p.run_length(d, i);
                        let rs: Vec<f64> = (d + 1 - run..=d).map(|k| p.get(k, i).unwrap()).collect();
                        let want = closed_form(alpha, &rs);
                        prop_assert!((t.get(d, i).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn deadjust_undoes_adjustment(alpha in 0.0f64..0.99, pairs in prop::collection::vec((-0.05f64..0.05, -0.05f64..0.05), 1..30)) {
        let mut ema = EmaState::new(alpha).unwrap();
        let mut raw = ForecastVector::new(date(), "t");
        let mut want = Vec::new();
        for (k, &(tilde, level)) in pairs.iter().enumerate() {
            let id = format!("A{k:02}");
            ema.update([(id.as_str(), level)]).unwrap();
            raw.scores.insert(id, tilde + alpha * level);
            want.push(tilde);
        }
        let out = deadjust_forecast(&raw, &ema).unwrap();
        for (got, want) in out.scores.values().zip(&want) {
            prop_assert!((got - want).abs() <= 1e-16);
        }
    }

    #[test]
    fn deadjust_is_identity_without_smoothing(scores in prop::collection::vec(-1.0f64..1.0, 1..30)) {
        let mut ema = EmaState::new(0.0).unwrap();
        let mut raw = ForecastVector::new(date(), "t");
        for (k, &s) in scores.iter().enumerate() {
            let id = format!("A{k:02}");
            ema.update([(id.as_str(), -s)]).unwrap();
            raw.scores.insert(id, s);
        }
        prop_assert_eq!(deadjust_forecast(&raw, &ema).unwrap().scores, raw.scores);
    }

    #[test]
    fn reversal_scores_are_antitone(levels in prop::collection::vec(-0.05f64..0.05, 2..40)) {
        let mut ema = EmaState::new(0.2).unwrap();
        let ids: Vec<String> = (0..levels.len()).map(|k| format!("A{k:02}")).collect();
        ema.update(ids.iter().map(String::as_str).zip(levels.iter().copied())).unwrap();
        let f = str_forecast(&ema, date());
        for (a, &la) in ids.iter().zip(&levels) {
            for (b, &lb) in ids.iter().zip(&levels) {
                if la > lb {
                    prop_assert!(f.scores[a] < f.scores[b]);
                }
            }
        }
    }
}

#[test]
fn loser_ranks_first() {
    let mut ema = EmaState::new(0.2).unwrap();
    ema.update([("W", 0.01), ("L", -0.01)]).unwrap();
    let f = str_forecast(&ema, date());
    assert_eq!(f.scores["W"], -0.01);
    assert_eq!(f.scores["L"], 0.01);
}
