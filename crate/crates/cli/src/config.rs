//! Run settings: a flat `key = value` file overlaid with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use ini::Ini;
use resid_arb::backtest::{BacktestConfig, ForecasterSpec};
use resid_arb::panel::{DatasetMeta, FactorModel};
use resid_arb::portfolio::Centering;
use resid_arb::signal::bridge::{BridgeConfig, DEFAULT_NUM_SAMPLES};

/// Directory searched for dataset names that are not paths.
pub const DATA_ENV: &str = "RESID_ARB_DATA";

/// Every recognised setting. Each has a `--kebab-case` flag of the same name.
pub const KEYS: &[&str] = &[
    "dataset",
    "factor_model",
    "forecaster",
    "beta",
    "alpha",
    "context_length",
    "resize",
    "centering",
    "cost_bps",
    "start_date",
    "end_date",
    "annualization_days",
    "stride",
    "seed",
    "num_samples",
    "finetune_tau",
    "bridge_program",
    "bridge_args",
    "bridge_timeout_secs",
    "out_dir",
    "jobs",
];

/// Merged settings; later layers win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl Settings {
    /// Read a config file. Section headers are ignored; keys must be known.
    pub fn from_file(path: &Path) -> Result<Self> {
        let ini = Ini::load_from_file(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut out = Settings::default();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                out.set(k, v)
                    .with_context(|| format!("in {}", path.display()))?;
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            bail!("unknown setting {key:?}");
        }
        self.values.insert(key, value.into().trim().to_string());
        Ok(())
    }

    /// Overlay `other` on top of `self`.
    pub fn merge(&mut self, other: Settings) {
        self.values.extend(other.values);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("invalid {key} {v:?}: {e}"))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(anyhow!("invalid {key} {v:?}: expected true or false")),
            })
            .transpose()
    }

    pub fn dataset_path(&self) -> Result<PathBuf> {
        let name = self
            .raw("dataset")
            .ok_or_else(|| anyhow!("no dataset given (--dataset or `dataset =`)"))?;
        Ok(resolve_dataset(
            name,
            std::env::var_os(DATA_ENV).map(PathBuf::from).as_deref(),
        ))
    }

    pub fn dataset_meta(&self, path: &Path) -> Result<DatasetMeta> {
        let model = match self.get::<FactorModel>("factor_model")? {
            Some(m) => m,
            None => FactorModel::from_path(path).ok_or_else(|| {
                anyhow!(
                    "cannot tell the factor model from {}; set factor_model",
                    path.display()
                )
            })?,
        };
        Ok(DatasetMeta::five_factor(model, path.display().to_string()))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out_dir").unwrap_or("resid-arb-out"))
    }

    pub fn jobs(&self) -> Result<Option<usize>> {
        self.get("jobs")
    }

    fn forecaster(&self) -> Result<ForecasterSpec> {
        let kind = self.raw("forecaster").unwrap_or("str").to_ascii_lowercase();
        match kind.as_str() {
            "str" | "reversal" => Ok(ForecasterSpec::Str {
                beta: self.get("beta")?.unwrap_or(0.2),
            }),
            "auto-arima" | "auto_arima" | "autoarima" | "arima" => Ok(ForecasterSpec::AutoArima),
            "bridge" => {
                let program = self
                    .raw("bridge_program")
                    .ok_or_else(|| anyhow!("forecaster bridge needs bridge_program"))?;
                let mut bridge = BridgeConfig::new(program);
                bridge.args = self
                    .raw("bridge_args")
                    .unwrap_or("")
                    .split_whitespace()
                    .map(String::from)
                    .collect();
                if let Some(secs) = self.get::<f64>("bridge_timeout_secs")? {
                    if !(secs > 0.0) {
                        bail!("bridge_timeout_secs must be positive, got {secs}");
                    }
                    bridge = bridge.timeout(Duration::from_secs_f64(secs));
                }
                Ok(ForecasterSpec::Bridge {
                    bridge,
                    num_samples: self.get("num_samples")?.unwrap_or(DEFAULT_NUM_SAMPLES),
                    finetune_tau: self.get("finetune_tau")?,
                })
            }
            other => bail!("unknown forecaster {other:?} (expected str, auto-arima or bridge)"),
        }
    }

    /// Validated backtest configuration for `dataset`.
    pub fn backtest_config(&self, dataset: DatasetMeta) -> Result<BacktestConfig> {
        let mut c = BacktestConfig::new(dataset, self.forecaster()?);
        if let Some(v) = self.get("alpha")? {
            c.alpha = v;
        }
        if let Some(v) = self.get("context_length")? {
            c.context_length = v;
        }
        if let Some(v) = self.flag("resize")? {
            c.resize = v;
        }
        if let Some(v) = self.raw("centering") {
            c.centering = match v.to_ascii_lowercase().as_str() {
                "median" => Centering::Median,
                "half-n" | "half_n" | "halfn" => Centering::HalfN,
                _ => bail!("invalid centering {v:?}: expected median or half-n"),
            };
        }
        if let Some(v) = self.get("cost_bps")? {
            c.cost_bps = v;
        }
        c.start_date = self.get::<NaiveDate>("start_date")?.or(c.start_date);
        c.end_date = self.get::<NaiveDate>("end_date")?.or(c.end_date);
        if let Some(v) = self.get("annualization_days")? {
            c.annualization_days = v;
        }
        if let Some(v) = self.get("stride")? {
            c.stride = v;
        }
        if let Some(v) = self.get("seed")? {
            c.seed = v;
        }
        c.validate().map_err(|e| anyhow!(e))?;
        Ok(c)
    }
}

/// A dataset argument is used as a path when it exists; otherwise it is
/// looked up in `data_dir`, with `.csv` appended if needed.
pub fn resolve_dataset(name: &str, data_dir: Option<&Path>) -> PathBuf {
    let given = PathBuf::from(name);
    if given.exists() || given.is_absolute() {
        return given;
    }
    let Some(dir) = data_dir else { return given };
    let plain = dir.join(name);
    let with_ext = dir.join(format!("{name}.csv"));
    if !plain.exists() && with_ext.exists() {
        with_ext
    } else {
        plain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn settings(pairs: &[(&str, &str)]) -> Settings {
        let mut s = Settings::default();
        for (k, v) in pairs {
            s.set(k, *v).unwrap();
        }
        s
    }

    fn meta() -> DatasetMeta {
        DatasetMeta::five_factor(FactorModel::Pca, "pca.csv")
    }

    #[test]
    fn defaults_match_the_engine() {
        let c = settings(&[]).backtest_config(meta()).unwrap();
        assert_eq!(
            c,
            BacktestConfig::new(meta(), ForecasterSpec::Str { beta: 0.2 })
        );
    }

    #[test]
    fn file_then_flags() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "forecaster = str\nbeta = 0.3\ncost-bps = 5\n[extra]\nresize = true"
        )
        .unwrap();
        let mut s = Settings::from_file(f.path()).unwrap();
        s.merge(settings(&[("beta", "0.1")]));
        let c = s.backtest_config(meta()).unwrap();
        assert_eq!(c.forecaster, ForecasterSpec::Str { beta: 0.1 });
        assert_eq!(c.cost_bps, 5.0);
        assert!(c.resize);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Settings::default().set("bta", "0.3").is_err());
        assert!(settings(&[("beta", "-0.1")])
            .backtest_config(meta())
            .is_err());
        assert!(settings(&[("beta", "x")]).backtest_config(meta()).is_err());
        assert!(settings(&[("resize", "maybe")])
            .backtest_config(meta())
            .is_err());
        assert!(settings(&[("forecaster", "bridge")])
            .backtest_config(meta())
            .is_err());
        assert!(
            settings(&[("start_date", "2010-01-02"), ("end_date", "2009-01-01")])
                .backtest_config(meta())
                .is_err()
        );
    }

    #[test]
    fn bridge_settings() {
        let s = settings(&[
            ("forecaster", "bridge"),
            ("bridge_program", "python3"),
            ("bridge_args", "-m chronos_bridge"),
            ("bridge_timeout_secs", "30"),
            ("finetune_tau", "15"),
        ]);
        match s.backtest_config(meta()).unwrap().forecaster {
            ForecasterSpec::Bridge {
                bridge,
                num_samples,
                finetune_tau,
            } => {
                assert_eq!(bridge.args, ["-m", "chronos_bridge"]);
                assert_eq!(bridge.timeout_secs, 30.0);
                assert_eq!(num_samples, DEFAULT_NUM_SAMPLES);
                assert_eq!(finetune_tau, Some(15));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_lookup() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pca.csv"), "").unwrap();
        assert_eq!(
            resolve_dataset("pca", Some(dir.path())),
            dir.path().join("pca.csv")
        );
        assert_eq!(
            resolve_dataset("pca.csv", Some(dir.path())),
            dir.path().join("pca.csv")
        );
        assert_eq!(
            resolve_dataset("ff.csv", Some(dir.path())),
            dir.path().join("ff.csv")
        );
        assert_eq!(resolve_dataset("ff.csv", None), PathBuf::from("ff.csv"));
    }

    #[test]
    fn factor_model_from_name_or_key() {
        let s = settings(&[]);
        assert_eq!(
            s.dataset_meta(Path::new("/d/ipca.csv"))
                .unwrap()
                .factor_model,
            FactorModel::Ipca
        );
        assert!(s.dataset_meta(Path::new("/d/returns.csv")).is_err());
        let s = settings(&[("factor_model", "ff")]);
        assert_eq!(
            s.dataset_meta(Path::new("/d/returns.csv"))
                .unwrap()
                .factor_model,
            FactorModel::Ff
        );
    }
}
