//! TOML run configuration.
//!
//! Every section is optional and every key inside a section falls back to
//! its default, so a config file only lists what it changes. Unknown keys
//! are rejected. The salmon model's initial spot is derived from the cost
//! section unless `commodity.salmon.s0` is given explicitly; likewise the
//! cost levels follow `costs.s_hat0` unless set individually.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::biology::{BioParams, GrowthParams, ThresholdFn};
use crate::calibrate::BetaFitConfig;
use crate::commodity::CommodityParams;
use crate::economics::{initial_spot_adjustment, CostParams, FeedingMode};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::stopping::SolverConfig;
use crate::synthetic::CorpusConfig;
use crate::world::FarmModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    pub r: f64,
    pub horizon: f64,
    pub n_exercise: usize,
    /// Training paths.
    pub n_paths: usize,
    pub eval_paths: usize,
    pub chunk: usize,
    pub seed: u64,
    pub eval_seed: u64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            r: 0.0303,
            horizon: 3.0,
            n_exercise: 72,
            n_paths: e.n_train,
            eval_paths: e.n_eval,
            chunk: e.chunk,
            seed: e.train_seed,
            eval_seed: e.eval_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommodityConfig {
    pub salmon: CommodityParams,
    pub soy: CommodityParams,
}

impl Default for CommodityConfig {
    fn default() -> Self {
        Self {
            salmon: FarmModel::default().salmon,
            soy: CommodityParams::soy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiologyConfig {
    pub mu: f64,
    pub alpha_inf: f64,
    pub b_lice: f64,
    pub lambda_rep: f64,
    pub h0: f64,
    pub lpf0: f64,
    pub x_low: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub threshold: ThresholdFn,
}

impl Default for BiologyConfig {
    fn default() -> Self {
        Self::from_parts(&BioParams::default(), &ThresholdFn::default())
    }
}

impl BiologyConfig {
    fn from_parts(b: &BioParams, threshold: &ThresholdFn) -> Self {
        Self {
            mu: b.mu,
            alpha_inf: b.alpha_inf,
            b_lice: b.b_lice,
            lambda_rep: b.lambda_rep,
            h0: b.h0,
            lpf0: b.lpf0,
            x_low: b.x_low,
            beta1: b.beta1,
            beta2: b.beta2,
            threshold: threshold.clone(),
        }
    }

    pub fn params(&self) -> BioParams {
        BioParams {
            mu: self.mu,
            alpha_inf: self.alpha_inf,
            b_lice: self.b_lice,
            lambda_rep: self.lambda_rep,
            h0: self.h0,
            lpf0: self.lpf0,
            x_low: self.x_low,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub region: String,
    /// Lice export to read when not running on synthetic data.
    pub data: Option<PathBuf>,
    /// TOML column mapping replacing the built-in schema.
    pub schema: Option<PathBuf>,
    pub gap_weeks: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            region: "Trøndelag".into(),
            data: None,
            schema: None,
            gap_weeks: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Times (years) at which removal-count moments are matched.
    pub t_match: Vec<f64>,
    pub beta: BetaFitConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            t_match: vec![1.77],
            beta: BetaFitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub c_tr_sensitivity: Vec<f64>,
    pub feeding: Vec<FeedingMode>,
    /// Host-parasite sample paths exported by the pipeline.
    pub sample_paths: usize,
    /// Times of the exported removal-count histograms.
    pub histogram_times: Vec<f64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            c_tr_sensitivity: vec![0.01, 0.015, 0.02],
            feeding: vec![FeedingMode::Stochastic, FeedingMode::Deterministic],
            sample_paths: 10,
            histogram_times: vec![1.09, 1.77],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub global: GlobalConfig,
    pub commodity: CommodityConfig,
    pub growth: GrowthParams,
    pub biology: BiologyConfig,
    pub costs: CostParams,
    pub solver: SolverConfig,
    pub ingest: IngestConfig,
    pub calibration: CalibrationConfig,
    pub synthetic: CorpusConfig,
    pub compare: CompareConfig,
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn has_key(v: &toml::Value, path: &[&str]) -> bool {
    path.iter()
        .try_fold(v, |cur, k| cur.get(k))
        .is_some()
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Value = toml::from_str(text)?;
        let mut defaults = Config::default();
        if let Some(s) = user.get("costs").and_then(|c| c.get("s_hat0")) {
            let s = s
                .as_float()
                .or_else(|| s.as_integer().map(|i| i as f64))
                .ok_or_else(|| Error::param("costs.s_hat0", "must be a number"))?;
            defaults.costs = CostParams::from_quoted_spot(s);
        }
        let mut merged = toml::Value::try_from(&defaults)?;
        merge(&mut merged, user.clone());
        let mut cfg: Config = merged.try_into()?;
        if !has_key(&user, &["commodity", "salmon", "s0"]) {
            cfg.commodity.salmon.s0 = initial_spot_adjustment(&cfg.costs)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.experiment().validate()?;
        if self.calibration.t_match.is_empty() || self.calibration.t_match.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::param("calibration.t_match", "needs at least one positive time"));
        }
        if self.compare.feeding.is_empty() {
            return Err(Error::param("compare.feeding", "needs at least one feeding mode"));
        }
        if self.compare.c_tr_sensitivity.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::param("compare.c_tr_sensitivity", "values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn model(&self) -> FarmModel {
        FarmModel {
            salmon: self.commodity.salmon,
            soy: self.commodity.soy,
            bio: self.biology.params(),
            threshold: self.biology.threshold.clone(),
            growth: self.growth,
            costs: self.costs,
            r: self.global.r,
            horizon: self.global.horizon,
            n_exercise: self.global.n_exercise,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            n_train: self.global.n_paths,
            n_eval: self.global.eval_paths,
            chunk: self.global.chunk,
            train_seed: self.global.seed,
            eval_seed: self.global.eval_seed,
            solver: self.solver,
        }
    }

    /// Replaces the biology section with calibrated parameters.
    pub fn set_bio(&mut self, bio: &BioParams) {
        self.biology = BiologyConfig::from_parts(bio, &self.biology.threshold);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_model() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg.model(), FarmModel::default());
        assert_eq!(cfg.model().salmon.s0, 78.375);
    }

    #[test]
    fn partial_sections_override_single_keys() {
        let cfg = Config::from_toml_str(
            "[global]\nseed = 9\n[commodity.soy]\nsigma1 = 0.8\n[biology]\nthreshold = { starts = [0.0, 1.0], values = [0.5, 0.2] }\n",
        )
        .unwrap();
        assert_eq!(cfg.global.seed, 9);
        assert_eq!(cfg.global.n_exercise, 72);
        assert_eq!(cfg.commodity.soy.sigma1, 0.8);
        assert_eq!(cfg.commodity.soy.kappa, CommodityParams::soy().kappa);
        assert_eq!(cfg.biology.threshold.at(1.5), 0.2);
    }

    #[test]
    fn spot_follows_costs_unless_explicit() {
        let cfg = Config::from_toml_str("[costs]\ns_hat0 = 100\n").unwrap();
        assert_eq!(cfg.costs.pc, 50.0);
        assert!((cfg.commodity.salmon.s0 - 82.5).abs() < 1e-12);
        let cfg = Config::from_toml_str("[costs]\ns_hat0 = 100\n[commodity.salmon]\ns0 = 70.0\n").unwrap();
        assert_eq!(cfg.commodity.salmon.s0, 70.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_toml_str("[global]\nsed = 3\n").is_err());
        assert!(Config::from_toml_str("[extra]\na = 1\n").is_err());
        let err = Config::from_toml_str("[commodity.salmon]\nrho = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
        assert!(Config::from_toml_str("[global]\nseed = 2\neval_seed = 2\n").is_err());
    }

    #[test]
    fn roundtrip_through_toml() {
        let cfg = Config::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
    }
}
