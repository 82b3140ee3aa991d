//! Calibration of the host-parasite model: the lice reproduction rate from
//! untreated growth segments, then the treatment-effectiveness beta shapes
//! from removal-count moments.

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::biology::{simulate_removal_counts, untreated_trajectory, BioParams, ThresholdFn};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ingest::{count_moments, GreenSegment, RemovalDistribution};

/// Uniform simulation grid on `[0, horizon]` with step `horizon / (10 n - 1)`,
/// i.e. `10 n` points.
pub fn euler_grid(horizon: f64, n_exercise: usize) -> Result<TimeGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon", "must be positive and finite"));
    }
    if n_exercise == 0 {
        return Err(Error::param("n_exercise", "must be at least 1"));
    }
    TimeGrid::uniform(horizon, 10 * n_exercise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFitResult {
    pub lambda_rep: f64,
    pub sse: f64,
    pub n_points: usize,
    pub n_segments: usize,
    pub grid_dt: f64,
    pub iterations: u64,
}

const LAMBDA_MAX: f64 = 50.0;

struct LambdaObjective<'a> {
    bio: BioParams,
    grid: &'a TimeGrid,
    // (left index, weight of the right neighbour, observed value)
    points: Vec<(usize, f64, f64)>,
}

impl LambdaObjective<'_> {
    fn sse(&self, lambda: f64) -> f64 {
        let bio = BioParams { lambda_rep: lambda, ..self.bio };
        let Ok((host, parasite)) = untreated_trajectory(&bio, self.grid) else {
            return f64::INFINITY;
        };
        let q = |i: usize| parasite[i] / host[i];
        let mut sse = 0.0;
        for &(i, w, obs) in &self.points {
            let model = if w > 0.0 { (1.0 - w) * q(i) + w * q(i + 1) } else { q(i) };
            sse += (model - obs).powi(2);
        }
        if sse.is_finite() {
            sse
        } else {
            f64::INFINITY
        }
    }
}

impl CostFunction for LambdaObjective<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, lambda: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse(*lambda))
    }
}

/// Least-squares fit of the reproduction rate to lice-per-fish segments.
/// Model values come from the jump-free Euler trajectory on `grid`, linearly
/// interpolated to the observation times.
pub fn fit_lambda(segments: &[GreenSegment], bio: &BioParams, grid: &TimeGrid) -> Result<LambdaFitResult> {
    let dt = grid.uniform_step()?;
    let mut points = Vec::new();
    for seg in segments {
        for (t, &obs) in seg.times().into_iter().zip(&seg.lpf) {
            if t > grid.end() + 1e-12 {
                return Err(Error::InvalidGrid(format!(
                    "observation at t = {t} lies beyond the grid end {}",
                    grid.end()
                )));
            }
            let x = t / dt;
            let i = (x.floor() as usize).min(grid.len() - 1);
            let w = if i + 1 < grid.len() { x - i as f64 } else { 0.0 };
            points.push((i, w.clamp(0.0, 1.0), obs));
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput("no lice observations in the segments".into()));
    }
    let n_points = points.len();
    let objective = LambdaObjective { bio: *bio, grid, points };

    // A coarse log scan locates the basin; Brent refines inside it.
    let n_scan = 120;
    let scan: Vec<f64> = (0..=n_scan)
        .map(|k| LAMBDA_MAX * (1e-4f64).powf(1.0 - k as f64 / n_scan as f64))
        .collect();
    let costs: Vec<f64> = scan.iter().map(|&l| objective.sse(l)).collect();
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let lo = scan[best.saturating_sub(1)];
    let hi = scan[(best + 1).min(n_scan)];

    let solver = BrentOpt::new(lo, hi).set_tolerance(1e-10, 1e-12);
    let res = Executor::new(objective, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let state = res.state();
    let lambda = *state.get_best_param().expect("Brent records a best point");
    let sse = state.get_best_cost();
    if !matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged)) {
        return Err(Error::Optimizer(format!(
            "lambda fit did not converge; best iterate lambda = {lambda}, sse = {sse}"
        )));
    }
    Ok(LambdaFitResult {
        lambda_rep: lambda,
        sse,
        n_points,
        n_segments: segments.len(),
        grid_dt: dt,
        iterations: state.get_iter(),
    })
}

/// Mean and population standard deviation of simulated removal counts at
/// each time, with common random numbers under `seed`.
pub fn removal_moments(
    bio: &BioParams,
    threshold: &ThresholdFn,
    dt: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let counts = simulate_removal_counts(bio, threshold, dt, times, n_paths, seed)?;
    Ok(counts.iter().map(|c| count_moments(c)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct BetaFitConfig {
    pub n_paths: usize,
    /// Weight of the standard-deviation mismatch.
    pub zeta: f64,
    pub seed: u64,
    pub beta_max: f64,
    /// Simplex stopping tolerance on objective spread.
    pub tolerance: f64,
    pub max_iters: u64,
}

impl Default for BetaFitConfig {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            zeta: 2.0,
            seed: 2024,
            beta_max: 10.0,
            tolerance: 1e-6,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFitResult {
    pub beta1: f64,
    pub beta2: f64,
    pub objective: f64,
    pub zeta: f64,
    pub t_match: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
    pub model_mean: Vec<f64>,
    pub model_std: Vec<f64>,
    /// Set when the optimum sits at the edge of the search box.
    pub at_bound: bool,
    pub evaluations: usize,
}

struct BetaObjective<'a> {
    bio: BioParams,
    threshold: &'a ThresholdFn,
    dt: f64,
    times: Vec<f64>,
    target: Vec<(f64, f64)>,
    cfg: &'a BetaFitConfig,
    evaluations: std::cell::Cell<usize>,
}

impl BetaObjective<'_> {
    fn to_beta(&self, theta: &[f64]) -> (f64, f64) {
        let s = |x: f64| self.cfg.beta_max / (1.0 + (-x).exp());
        (s(theta[0]), s(theta[1]))
    }

    fn to_theta(&self, beta: f64) -> f64 {
        let p = beta / self.cfg.beta_max;
        (p / (1.0 - p)).ln()
    }

    fn moments(&self, b1: f64, b2: f64) -> Result<Vec<(f64, f64)>> {
        let bio = BioParams { beta1: b1, beta2: b2, ..self.bio };
        self.evaluations.set(self.evaluations.get() + 1);
        removal_moments(&bio, self.threshold, self.dt, &self.times, self.cfg.n_paths, self.cfg.seed)
    }

    fn loss(&self, model: &[(f64, f64)]) -> f64 {
        model
            .iter()
            .zip(&self.target)
            .map(|(m, d)| (m.0 - d.0).powi(2) + self.cfg.zeta * (m.1 - d.1).powi(2))
            .sum()
    }

    fn at(&self, b1: f64, b2: f64) -> f64 {
        match self.moments(b1, b2) {
            Ok(m) => self.loss(&m),
            Err(_) => f64::INFINITY,
        }
    }
}

struct Unbounded<'a, 'b>(&'a BetaObjective<'b>);

impl CostFunction for Unbounded<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (b1, b2) = self.0.to_beta(theta);
        Ok(self.0.at(b1, b2))
    }
}

/// Fits the beta shapes of treatment effectiveness by matching the mean and
/// standard deviation of simulated cumulative removal counts to the targets.
/// The objective reuses one random stream for every evaluation, so the fit
/// is a deterministic function of the inputs.
pub fn fit_beta(
    targets: &[RemovalDistribution],
    bio: &BioParams,
    threshold: &ThresholdFn,
    dt: f64,
    cfg: &BetaFitConfig,
) -> Result<BetaFitResult> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("no removal targets".into()));
    }
    if targets.iter().any(|t| t.std == 0.0) {
        return Err(Error::Degenerate("target removal counts have zero spread".into()));
    }
    if !(cfg.zeta > 0.0) {
        return Err(Error::param("zeta", "must be positive"));
    }
    if cfg.n_paths == 0 {
        return Err(Error::param("n_paths", "must be positive"));
    }
    if !(cfg.beta_max > 0.0) {
        return Err(Error::param("beta_max", "must be positive"));
    }
    let objective = BetaObjective {
        bio: *bio,
        threshold,
        dt,
        times: targets.iter().map(|t| t.t).collect(),
        target: targets.iter().map(|t| (t.mean, t.std)).collect(),
        cfg,
        evaluations: std::cell::Cell::new(0),
    };

    // Coarse log grid for the starting point.
    let levels: Vec<f64> = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|&x| x * cfg.beta_max / 10.0)
        .collect();
    let mut start = (levels[0], levels[0], f64::INFINITY);
    for &b1 in &levels {
        for &b2 in &levels {
            let c = objective.at(b1, b2);
            if c < start.2 {
                start = (b1, b2, c);
            }
        }
    }

    let mut best_theta = vec![objective.to_theta(start.0), objective.to_theta(start.1)];
    let mut best_cost = start.2;
    // One restart from the best vertex guards against a collapsed simplex on
    // the flat pieces of the count objective.
    for step in [0.7, 0.25] {
        let simplex = vec![
            best_theta.clone(),
            vec![best_theta[0] + step, best_theta[1]],
            vec![best_theta[0], best_theta[1] + step],
        ];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(cfg.tolerance)
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let res = Executor::new(Unbounded(&objective), solver)
            .configure(|s| s.max_iters(cfg.max_iters))
            .run()
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let state = res.state();
        if state.get_best_cost() < best_cost {
            best_cost = state.get_best_cost();
            best_theta = state.get_best_param().expect("simplex has a best vertex").clone();
        }
    }
    let (beta1, beta2) = objective.to_beta(&best_theta);
    let model = objective.moments(beta1, beta2)?;
    let edge = |b: f64| b > cfg.beta_max * (1.0 - 1e-3) || b < cfg.beta_max * 1e-6;
    let at_bound = edge(beta1) || edge(beta2);
    if at_bound {
        log::warn!("beta fit ended at the search box edge: ({beta1}, {beta2})");
    }
    Ok(BetaFitResult {
        beta1,
        beta2,
        objective: objective.loss(&model),
        zeta: cfg.zeta,
        t_match: objective.times.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        target_mean: targets.iter().map(|t| t.mean).collect(),
        target_std: targets.iter().map(|t| t.std).collect(),
        model_mean: model.iter().map(|m| m.0).collect(),
        model_std: model.iter().map(|m| m.1).collect(),
        at_bound,
        evaluations: objective.evaluations.get(),
    })
}
