//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by `--set`.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use biars::baselines::{BaselineConfig, SchemeId};
use biars::bia::{block_dimensions, DEFAULT_SLOT_CAP};
use biars::error::Error;
use biars::experiments::{Axis, ExperimentContext, ExperimentKind, ExperimentSpec};
use biars::grouping::GroupingConfig;
use biars::network::Overhead;
use biars::power_opt::OptimizerConfig;
use biars::scenario::ScenarioConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub scenario: ScenarioConfig<f64>,
    pub grouping: GroupingConfig<f64>,
    pub optimizer: OptimizerConfig<f64>,
    pub baselines: BaselineConfig<f64>,
    pub overhead: Overhead<f64>,
    /// Experiments keyed by output name.
    pub experiment: BTreeMap<String, ExperimentSpec>,
}

fn spec(kind: ExperimentKind, schemes: &[SchemeId], axis: Axis, values: Vec<f64>, snr_db: Option<f64>) -> ExperimentSpec {
    ExperimentSpec {
        name: String::new(),
        kind,
        schemes: schemes.to_vec(),
        axis,
        values,
        drops: 100,
        seed: None,
        snr_db,
        users: None,
        blockage_p: 0.0,
        pam_order: 2,
        symbol_cap: 200_000,
    }
}

impl RunConfig {
    /// Reference scenario with the sweep experiments and the convergence trace.
    pub fn defaults() -> Self {
        let ctx = ExperimentContext::reference(1);
        let all = SchemeId::ALL;
        let mut experiment = BTreeMap::new();
        experiment.insert(
            "convergence".to_string(),
            spec(
                ExperimentKind::Convergence,
                &[SchemeId::BiaRsOpt, SchemeId::BiaRsSubopt, SchemeId::Baseline1],
                Axis::Iterations,
                (0..=60).map(f64::from).collect(),
                Some(30.0),
            ),
        );
        experiment.insert(
            "snr".to_string(),
            spec(ExperimentKind::SumRate, &all, Axis::SnrDb, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0], None),
        );
        experiment.insert(
            "users".to_string(),
            spec(ExperimentKind::SumRate, &all, Axis::Users, vec![10.0, 15.0, 20.0, 25.0, 30.0], Some(30.0)),
        );
        experiment.insert(
            "blockage".to_string(),
            spec(ExperimentKind::SumRate, &all, Axis::BlockageP, vec![0.0, 0.2, 0.4, 0.6], Some(30.0)),
        );
        experiment.insert(
            "ber".to_string(),
            spec(ExperimentKind::Ber, &all, Axis::SnrDb, vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0], None),
        );
        experiment.insert(
            "ee".to_string(),
            spec(ExperimentKind::EnergyEfficiency, &all, Axis::Users, vec![30.0, 35.0, 40.0], Some(30.0)),
        );
        Self {
            seed: ctx.seed,
            output_dir: None,
            scenario: ctx.scenario,
            grouping: ctx.grouping,
            optimizer: ctx.optimizer,
            baselines: ctx.baselines,
            overhead: ctx.overhead,
            experiment,
        }
    }

    /// Defaults overlaid by `text` (TOML) and then by `key=value` overrides.
    pub fn resolve(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut base = toml::Value::try_from(Self::defaults()).context("serializing defaults")?;
        if let Some(text) = text {
            let file: toml::Table = toml::from_str(text).map_err(|e| config_error("<file>", e.to_string()))?;
            merge(&mut base, toml::Value::Table(file));
        }
        for o in overrides {
            apply_override(&mut base, o)?;
        }
        let mut cfg: RunConfig = base.try_into().map_err(|e: toml::de::Error| config_error("<config>", e.to_string()))?;
        for (k, e) in cfg.experiment.iter_mut() {
            e.name = k.clone();
        }
        Ok(cfg)
    }

    /// Every violated invariant.
    pub fn validate(&self) -> Vec<Error> {
        let mut errs = self.scenario.validate();
        errs.extend(self.optimizer.validate());
        let g = &self.grouping;
        if !(g.d_th > 0.0) {
            errs.push(Error::config("grouping.d_th", "must be > 0"));
        }
        if g.max_groups < 1 {
            errs.push(Error::config("grouping.max_groups", "must be >= 1"));
        }
        let l = self.scenario.ap_count();
        if let Some(groups) = g.groups {
            if groups < 1 {
                errs.push(Error::config("grouping.groups", "must be >= 1"));
            } else if l >= 2 {
                match block_dimensions(l, groups) {
                    Ok(d) if d.slots <= DEFAULT_SLOT_CAP as u128 => {}
                    Ok(d) => errs.push(Error::config(
                        "grouping.groups",
                        format!("block of {} slots exceeds the cap of {DEFAULT_SLOT_CAP}", d.slots),
                    )),
                    Err(e) => errs.push(Error::config("grouping.groups", e.to_string())),
                }
            }
            if groups > self.scenario.users {
                errs.push(Error::config("grouping.groups", "more groups than users"));
            }
        }
        let b = &self.baselines;
        if !(0.0..=1.0).contains(&b.common_fraction) {
            errs.push(Error::config("baselines.common_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&b.noma_strong_fraction) {
            errs.push(Error::config("baselines.noma_strong_fraction", "must lie in [0, 1]"));
        }
        if self.overhead.per_ap < 0.0 || self.overhead.per_user < 0.0 {
            errs.push(Error::config("overhead", "circuit power must be >= 0 W"));
        }
        for (name, e) in &self.experiment {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                errs.push(Error::config(format!("experiment.{name}"), "names may only use letters, digits, `-` and `_`"));
            }
            errs.extend(e.validate(&format!("experiment.{name}")));
        }
        errs
    }

    pub fn context(&self) -> ExperimentContext {
        ExperimentContext {
            scenario: self.scenario.clone(),
            grouping: self.grouping.clone(),
            optimizer: self.optimizer.clone(),
            baselines: self.baselines.clone(),
            overhead: self.overhead,
            seed: self.seed,
        }
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// SHA-256 of [`Self::canonical_json`], hex.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }
}

pub fn config_error(path: &str, msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Error::config(path, msg))
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`; the value is parsed as TOML and falls back to a string.
pub fn apply_override(base: &mut toml::Value, raw: &str) -> Result<()> {
    let (path, value) = raw
        .split_once('=')
        .ok_or_else(|| config_error(raw, "override must look like `key.path=value`"))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        bail!(config_error(path, "empty key in override path"));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut over = parsed;
    for key in path.rsplit('.') {
        let mut t = toml::Table::new();
        t.insert(key.to_string(), over);
        over = toml::Value::Table(t);
    }
    merge(base, over);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(cfg.experiment.len(), 6);
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        assert_eq!(cfg.experiment["snr"].name, "snr");
    }

    #[test]
    fn overrides_win() {
        let cfg = RunConfig::resolve(Some("seed = 4\n[scenario]\nusers = 12\n"), &["seed=9".into(), "experiment.snr.values=[10,20]".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scenario.users, 12);
        assert_eq!(cfg.experiment["snr"].values, vec![10.0, 20.0]);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::resolve(Some("[scenario]\ncolour = 3\n"), &[]).is_err());
        assert!(RunConfig::resolve(None, &["nope=1".into()]).is_err());
    }
}
