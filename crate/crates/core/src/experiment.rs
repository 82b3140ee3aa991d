//! Training and evaluation worlds for the mortality-model comparison.
//!
//! Worlds do not depend on the treatment cost fraction, so one set of
//! simulated paths serves every `c_tr` in a sensitivity study; only payoffs
//! and the mean treatment-cost curve are rebuilt.

use serde::{Deserialize, Serialize};

use crate::biology::{deterministic_counterpart, DeterministicCurves, HostParasitePathSet};
use crate::economics::{FeedingMode, Mortality};
use crate::error::{Error, Result};
use crate::stopping::{
    compare_rules, evaluate_rule, solve_rule, ComparisonReport, Evaluation, PathComparison, SolverConfig, StoppingRule,
};
use crate::world::{pilot_curves, FarmModel, ModelMode, World, WorldSimulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_train: usize,
    pub n_eval: usize,
    /// Paths per evaluation block.
    pub chunk: usize,
    pub train_seed: u64,
    pub eval_seed: u64,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_train: 4096,
            n_eval: 20 * 4096,
            chunk: 4096,
            train_seed: 1,
            eval_seed: 2,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 || self.n_eval < 2 {
            return Err(Error::param("paths", "need at least two training and two evaluation paths"));
        }
        if self.chunk == 0 {
            return Err(Error::param("chunk", "must be positive"));
        }
        if self.train_seed == self.eval_seed {
            return Err(Error::param("eval_seed", "evaluation paths must use a different seed than training"));
        }
        Ok(())
    }
}

pub struct Experiment {
    pub model: FarmModel,
    pub config: ExperimentConfig,
    /// Host-parasite paths of the training world, source of the mean curves.
    pub pilot: HostParasitePathSet,
    pub train: World,
    pub eval: Vec<World>,
}

impl Experiment {
    pub fn new(model: &FarmModel, config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        let (pilot, curves) = pilot_curves(model, config.n_train, config.train_seed)?;
        let sim = WorldSimulator::new(model, &curves)?;
        let train = sim.simulate(0, config.n_train, config.train_seed);
        let mut eval = Vec::new();
        let mut first = 0;
        while first < config.n_eval {
            let n = config.chunk.min(config.n_eval - first);
            eval.push(sim.simulate(first as u64, n, config.eval_seed));
            first += n;
        }
        Ok(Self {
            model: model.clone(),
            config: config.clone(),
            pilot,
            train,
            eval,
        })
    }

    /// Mean host and treatment-cost curves under treatment cost `c_tr`.
    pub fn curves(&self, c_tr: f64) -> Result<DeterministicCurves> {
        deterministic_counterpart(&self.pilot, c_tr)
    }

    pub fn train(&self, mode: ModelMode, c_tr: f64) -> Result<StoppingRule> {
        let model = self.model.with_treatment_cost(c_tr);
        let curves = self.curves(c_tr)?;
        let problem = self.train.decision_matrix(mode, &model, &curves)?;
        Ok(solve_rule(&problem, &self.config.solver)?.with_mode(mode))
    }

    /// Trains both mortality models for `feeding` and compares them on the
    /// evaluation world.
    pub fn compare(&self, feeding: FeedingMode, c_tr: f64) -> Result<(ComparisonReport, Vec<PathComparison>)> {
        let stoch = self.train(ModelMode::new(Mortality::Stochastic, feeding), c_tr)?;
        let determ = self.train(ModelMode::new(Mortality::Deterministic, feeding), c_tr)?;
        self.compare_rules(&stoch, &determ, c_tr)
    }

    /// Applies `rule` to the evaluation world; values are the stochastic-world
    /// payoffs of the rule's feeding mode.
    pub fn evaluate(&self, rule: &StoppingRule, c_tr: f64) -> Result<Evaluation> {
        let mode = rule
            .mode
            .ok_or_else(|| Error::param("rule", "rule has no model mode"))?;
        let model = self.model.with_treatment_cost(c_tr);
        let curves = self.curves(c_tr)?;
        let world_mode = ModelMode::new(Mortality::Stochastic, mode.feeding);
        let mut out: Option<Evaluation> = None;
        for w in &self.eval {
            let realized = w.decision_matrix(world_mode, &model, &curves)?;
            let ev = if mode == world_mode {
                evaluate_rule(rule, &realized, None)?
            } else {
                evaluate_rule(rule, &w.decision_matrix(mode, &model, &curves)?, Some(&realized.payoff))?
            };
            match &mut out {
                Some(acc) => acc.merge(ev)?,
                None => out = Some(ev),
            }
        }
        out.ok_or_else(|| Error::EmptyInput("no evaluation paths".into()))
    }

    pub fn compare_rules(
        &self,
        stoch: &StoppingRule,
        determ: &StoppingRule,
        c_tr: f64,
    ) -> Result<(ComparisonReport, Vec<PathComparison>)> {
        let model = self.model.with_treatment_cost(c_tr);
        compare_rules(stoch, determ, &self.eval, &model, &self.curves(c_tr)?)
    }
}
