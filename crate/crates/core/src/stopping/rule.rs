use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, FeatureMap};
use super::regression::{solve_least_squares, LeastSquaresFit};
use crate::economics::ExercisePayoffMatrix;
use crate::error::{Error, Result};
use crate::world::ModelMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub features: FeatureConfig,
    /// Relative singular-value cutoff.
    pub svd_cutoff: f64,
    /// Tikhonov damping relative to the largest singular value squared.
    pub ridge: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            svd_cutoff: 1e-8,
            ridge: None,
        }
    }
}

/// Continuation-value regression for one exercise date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateRegression {
    pub state_mean: Vec<f64>,
    pub state_scale: Vec<f64>,
    pub payoff_mean: f64,
    pub payoff_scale: f64,
    pub coefficients: Vec<f64>,
    pub fit: LeastSquaresFit,
    /// Share of training paths that stopped at this date.
    pub stop_fraction: f64,
}

/// Stop/continue decisions per exercise date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub mode: Option<ModelMode>,
    pub exercise_dates: Vec<f64>,
    pub state_dim: usize,
    pub features: FeatureConfig,
    /// One entry per date; `None` means stop unconditionally.
    pub regressions: Vec<Option<DateRegression>>,
    /// In-sample value from backward induction on the training paths.
    pub in_sample_value: f64,
}

fn standardize(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    let scale = if sd > 1e-12 * mean.abs().max(1e-300) && sd > 0.0 { sd } else { 1.0 };
    (mean, scale)
}

impl DateRegression {
    fn fill_row(&self, map: &FeatureMap, state: &[f64], payoff: f64, z: &mut Vec<f64>, row: &mut Vec<f64>) {
        z.clear();
        z.extend(
            state
                .iter()
                .zip(self.state_mean.iter().zip(&self.state_scale))
                .map(|(x, (m, s))| (x - m) / s),
        );
        let pz = (payoff - self.payoff_mean) / self.payoff_scale;
        map.fill(z, pz, row);
    }
}

impl StoppingRule {
    /// Stops at the first exercise date on every path.
    pub fn stop_immediately(exercise_dates: Vec<f64>, state_dim: usize) -> Self {
        let n = exercise_dates.len();
        Self {
            mode: None,
            exercise_dates,
            state_dim,
            features: FeatureConfig::default(),
            regressions: vec![None; n],
            in_sample_value: f64::NAN,
        }
    }

    pub fn with_mode(mut self, mode: ModelMode) -> Self {
        self.mode = Some(mode);
        self
    }

    fn feature_map(&self) -> FeatureMap {
        FeatureMap::new(self.features, self.state_dim)
    }

    /// Estimated continuation value at date `k`, or `None` when the rule
    /// stops unconditionally there.
    pub fn continuation(&self, k: usize, state: &[f64], payoff: f64) -> Option<f64> {
        let reg = self.regressions[k].as_ref()?;
        let (mut z, mut row) = (Vec::new(), Vec::new());
        reg.fill_row(&self.feature_map(), state, payoff, &mut z, &mut row);
        Some(row.iter().zip(&reg.coefficients).map(|(a, b)| a * b).sum())
    }

    pub fn should_stop(&self, k: usize, state: &[f64], payoff: f64) -> bool {
        match self.continuation(k, state, payoff) {
            None => true,
            Some(c) => payoff >= c,
        }
    }
}

fn check_finite(m: &ExercisePayoffMatrix) -> Result<()> {
    if let Some(i) = m.payoff.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "payoff of path {} at date {}",
            i / m.n_dates(),
            i % m.n_dates()
        )));
    }
    if m.state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state vector".into()));
    }
    Ok(())
}

/// Regression-based backward induction over the exercise dates. At each
/// date the realised discounted cash flow of the current policy is
/// regressed on the basis; a path stops when its immediate payoff is at
/// least the fitted continuation value.
pub fn solve_rule(problem: &ExercisePayoffMatrix, config: &SolverConfig) -> Result<StoppingRule> {
    check_finite(problem)?;
    if problem.n_paths == 0 {
        return Err(Error::EmptyInput("no training paths".into()));
    }
    let n = problem.n_paths;
    let nd = problem.n_dates();
    let d = problem.state_dim;
    let map = FeatureMap::new(config.features, d);
    let m = map.len();

    let mut cash: Vec<f64> = (0..n).map(|p| problem.payoff_at(p, nd - 1)).collect();
    let mut regressions: Vec<Option<DateRegression>> = vec![None; nd];
    let (mut z, mut row) = (Vec::with_capacity(d), Vec::with_capacity(m));

    for k in (0..nd - 1).rev() {
        let mut state_mean = Vec::with_capacity(d);
        let mut state_scale = Vec::with_capacity(d);
        for j in 0..d {
            let (mu, s) = standardize((0..n).map(|p| problem.state_at(p, k)[j]), n);
            state_mean.push(mu);
            state_scale.push(s);
        }
        let (payoff_mean, payoff_scale) = standardize((0..n).map(|p| problem.payoff_at(p, k)), n);
        let mut reg = DateRegression {
            state_mean,
            state_scale,
            payoff_mean,
            payoff_scale,
            coefficients: Vec::new(),
            fit: LeastSquaresFit {
                rank: 0,
                n_features: m,
                condition: f64::NAN,
                ridge_applied: false,
            },
            stop_fraction: 0.0,
        };

        let mut design = DMatrix::zeros(n, m);
        for p in 0..n {
            reg.fill_row(&map, problem.state_at(p, k), problem.payoff_at(p, k), &mut z, &mut row);
            for (j, v) in row.iter().enumerate() {
                design[(p, j)] = *v;
            }
        }
        let (coef, fit) = solve_least_squares(design.clone(), &cash, config.svd_cutoff, config.ridge, k)?;
        let continuation = &design * nalgebra::DVector::from_column_slice(&coef);
        let mut stops = 0usize;
        for p in 0..n {
            let g = problem.payoff_at(p, k);
            if g >= continuation[p] {
                cash[p] = g;
                stops += 1;
            }
        }
        reg.coefficients = coef;
        reg.fit = fit;
        reg.stop_fraction = stops as f64 / n as f64;
        regressions[k] = Some(reg);
    }

    Ok(StoppingRule {
        mode: None,
        exercise_dates: problem.exercise_dates.clone(),
        state_dim: d,
        features: config.features,
        regressions,
        in_sample_value: cash.iter().sum::<f64>() / n as f64,
    })
}

/// Outcome of applying a rule to a set of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub exercise_dates: Vec<f64>,
    /// Date index at which each path stopped.
    pub stop_index: Vec<usize>,
    /// Realised discounted payoff of each path at its stopping date.
    pub stopped_payoff: Vec<f64>,
}

impl Evaluation {
    pub fn n_paths(&self) -> usize {
        self.stop_index.len()
    }

    /// Mean stopped payoff: a low-biased estimate of the optimal value.
    pub fn value(&self) -> f64 {
        self.stopped_payoff.iter().sum::<f64>() / self.n_paths() as f64
    }

    pub fn std_error(&self) -> f64 {
        let n = self.n_paths() as f64;
        let mean = self.value();
        let var = self.stopped_payoff.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }

    pub fn stopping_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.stop_index.iter().map(|&k| self.exercise_dates[k])
    }

    pub fn mean_stopping_time(&self) -> f64 {
        self.stopping_times().sum::<f64>() / self.n_paths() as f64
    }

    /// Appends the paths of `other`, which must share the exercise dates.
    pub fn merge(&mut self, other: Evaluation) -> Result<()> {
        if other.exercise_dates != self.exercise_dates {
            return Err(Error::ShapeMismatch("evaluations over different exercise dates".into()));
        }
        self.stop_index.extend(other.stop_index);
        self.stopped_payoff.extend(other.stopped_payoff);
        Ok(())
    }
}

/// Applies `rule` path by path. Decisions use `decision` (what the rule's
/// model observes); the recorded value is taken from `realized` when given,
/// otherwise from the decision payoffs.
pub fn evaluate_rule(rule: &StoppingRule, decision: &ExercisePayoffMatrix, realized: Option<&[f64]>) -> Result<Evaluation> {
    if decision.state_dim != rule.state_dim {
        return Err(Error::ShapeMismatch(format!(
            "rule expects state dimension {}, paths carry {}",
            rule.state_dim, decision.state_dim
        )));
    }
    if decision.exercise_dates.len() != rule.exercise_dates.len()
        || decision
            .exercise_dates
            .iter()
            .zip(&rule.exercise_dates)
            .any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(Error::ShapeMismatch("rule and paths use different exercise dates".into()));
    }
    if let Some(r) = realized {
        if r.len() != decision.payoff.len() {
            return Err(Error::ShapeMismatch("realized payoffs do not match decision paths".into()));
        }
    }
    check_finite(decision)?;
    let nd = decision.n_dates();
    let map = rule.feature_map();
    let (mut z, mut row) = (Vec::new(), Vec::new());
    let mut stop_index = Vec::with_capacity(decision.n_paths);
    let mut stopped_payoff = Vec::with_capacity(decision.n_paths);
    for p in 0..decision.n_paths {
        let mut tau = nd - 1;
        for k in 0..nd {
            let g = decision.payoff_at(p, k);
            let stop = match &rule.regressions[k] {
                None => true,
                Some(reg) => {
                    reg.fill_row(&map, decision.state_at(p, k), g, &mut z, &mut row);
                    let c: f64 = row.iter().zip(&reg.coefficients).map(|(a, b)| a * b).sum();
                    g >= c
                }
            };
            if stop {
                tau = k;
                break;
            }
        }
        stop_index.push(tau);
        stopped_payoff.push(match realized {
            Some(r) => r[p * nd + tau],
            None => decision.payoff_at(p, tau),
        });
    }
    Ok(Evaluation {
        exercise_dates: decision.exercise_dates.clone(),
        stop_index,
        stopped_payoff,
    })
}
