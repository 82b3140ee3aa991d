use serde::{Deserialize, Serialize};

use super::rule::{evaluate_rule, Evaluation, StoppingRule};
use crate::biology::DeterministicCurves;
use crate::economics::Mortality;
use crate::error::{Error, Result};
use crate::world::{FarmModel, ModelMode, World};

/// Both rules evaluated on the same stochastic-world paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub feeding: crate::economics::FeedingMode,
    pub c_tr: f64,
    pub v0_stoch: f64,
    pub v0_stoch_se: f64,
    pub v0_determ: f64,
    pub v0_determ_se: f64,
    /// Standard error of the pathwise value difference.
    pub difference_se: f64,
    pub mean_tau_stoch: f64,
    pub mean_tau_determ: f64,
    /// `v0_stoch / v0_determ`.
    pub ri: f64,
    pub n_eval_paths: usize,
    /// Share of paths on which the two rules stop at different dates.
    pub disagreement: f64,
    /// Discounted payoff of harvesting at time zero.
    pub immediate_payoff: f64,
}

/// Per-path stopping times and realised payoffs of both rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComparison {
    pub path: u64,
    pub tau_stoch: f64,
    pub tau_determ: f64,
    pub payoff_stoch: f64,
    pub payoff_determ: f64,
}

fn rule_mode(rule: &StoppingRule) -> Result<ModelMode> {
    rule.mode
        .ok_or_else(|| Error::param("rule", "rule has no model mode; cannot rebuild its observations"))
}

/// Evaluates two rules on identical stochastic-world paths. Each rule
/// decides from the state and payoff of its own model; the value is always
/// the stochastic-mortality payoff of the common feeding mode.
pub fn compare_rules(
    rule_stoch: &StoppingRule,
    rule_determ: &StoppingRule,
    worlds: &[World],
    model: &FarmModel,
    curves: &DeterministicCurves,
) -> Result<(ComparisonReport, Vec<PathComparison>)> {
    let mode_a = rule_mode(rule_stoch)?;
    let mode_b = rule_mode(rule_determ)?;
    if mode_a.feeding != mode_b.feeding {
        return Err(Error::param("rules", "rules were trained for different feeding models"));
    }
    if worlds.is_empty() {
        return Err(Error::EmptyInput("no evaluation paths".into()));
    }
    let world_mode = ModelMode::new(Mortality::Stochastic, mode_a.feeding);
    let mut eval_a: Option<Evaluation> = None;
    let mut eval_b: Option<Evaluation> = None;
    let mut first_paths = Vec::new();
    for w in worlds {
        let realized = w.decision_matrix(world_mode, model, curves)?;
        let dec_a = if mode_a == world_mode { realized.clone() } else { w.decision_matrix(mode_a, model, curves)? };
        let dec_b = if mode_b == world_mode { realized.clone() } else { w.decision_matrix(mode_b, model, curves)? };
        let ea = evaluate_rule(rule_stoch, &dec_a, Some(&realized.payoff))?;
        let eb = evaluate_rule(rule_determ, &dec_b, Some(&realized.payoff))?;
        match (&mut eval_a, &mut eval_b) {
            (Some(a), Some(b)) => {
                a.merge(ea)?;
                b.merge(eb)?;
            }
            _ => {
                eval_a = Some(ea);
                eval_b = Some(eb);
            }
        }
        first_paths.extend((0..w.n_paths as u64).map(|p| w.first_path + p));
    }
    let (a, b) = (eval_a.expect("non-empty"), eval_b.expect("non-empty"));
    let n = a.n_paths();
    let diffs: Vec<f64> = a.stopped_payoff.iter().zip(&b.stopped_payoff).map(|(x, y)| x - y).collect();
    let dm = diffs.iter().sum::<f64>() / n as f64;
    let dvar = diffs.iter().map(|d| (d - dm).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
    let disagreement = a.stop_index.iter().zip(&b.stop_index).filter(|(x, y)| x != y).count() as f64 / n as f64;

    let paths = (0..n)
        .map(|i| PathComparison {
            path: first_paths[i],
            tau_stoch: a.exercise_dates[a.stop_index[i]],
            tau_determ: b.exercise_dates[b.stop_index[i]],
            payoff_stoch: a.stopped_payoff[i],
            payoff_determ: b.stopped_payoff[i],
        })
        .collect();

    let g = &model.growth;
    let immediate = g.weight(0.0) * model.bio.h0 * (model.salmon.s0 - model.costs.h0);
    let report = ComparisonReport {
        feeding: mode_a.feeding,
        c_tr: model.costs.c_tr,
        v0_stoch: a.value(),
        v0_stoch_se: a.std_error(),
        v0_determ: b.value(),
        v0_determ_se: b.std_error(),
        difference_se: (dvar / n as f64).sqrt(),
        mean_tau_stoch: a.mean_stopping_time(),
        mean_tau_determ: b.mean_stopping_time(),
        ri: a.value() / b.value(),
        n_eval_paths: n,
        disagreement,
        immediate_payoff: immediate,
    };
    Ok((report, paths))
}
