//! Two-factor commodity model: log-spot with a mean-reverting convenience
//! yield, simulated under the risk-neutral measure.
//!
//! The pair `(ln S, δ)` is a linear Gaussian system, so each grid step is
//! sampled from its exact conditional law instead of an Euler step.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{substream, StreamRole};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommodityParams {
    /// Spot volatility.
    pub sigma1: f64,
    /// Convenience-yield volatility.
    pub sigma2: f64,
    /// Mean-reversion speed of the convenience yield.
    pub kappa: f64,
    /// Long-term mean of the convenience yield.
    pub alpha: f64,
    /// Risk premium subtracted from the convenience-yield drift.
    pub lambda_rp: f64,
    /// Correlation between the spot and convenience-yield drivers.
    pub rho: f64,
    /// Initial spot.
    pub s0: f64,
    /// Initial convenience yield.
    pub delta0: f64,
}

impl CommodityParams {
    /// Salmon parameters. `s0` is a placeholder; the farm uses the
    /// cost-adjusted value from [`crate::economics::initial_spot_adjustment`].
    pub fn salmon() -> Self {
        Self {
            sigma1: 0.23,
            sigma2: 0.75,
            kappa: 2.6,
            alpha: 0.02,
            lambda_rp: 0.2,
            rho: 0.9,
            s0: 78.375,
            delta0: 0.57,
        }
    }

    /// Soy parameters with the spot normalised to 1 (only relative prices matter).
    pub fn soy() -> Self {
        Self {
            sigma1: 1.0,
            sigma2: 0.4,
            kappa: 1.2,
            alpha: 0.06,
            lambda_rp: 0.14,
            rho: 0.44,
            s0: 1.0,
            delta0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sigma1,
            self.sigma2,
            self.kappa,
            self.alpha,
            self.lambda_rp,
            self.rho,
            self.s0,
            self.delta0,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("commodity parameters".into()));
        }
        if self.sigma1 < 0.0 {
            return Err(Error::param("sigma1", "must be non-negative"));
        }
        if self.sigma2 < 0.0 {
            return Err(Error::param("sigma2", "must be non-negative"));
        }
        if self.kappa <= 0.0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        if self.lambda_rp < 0.0 {
            return Err(Error::param("lambda_rp", "must be non-negative"));
        }
        if self.rho.abs() > 1.0 {
            return Err(Error::param("rho", format!("|rho| = {} exceeds 1", self.rho.abs())));
        }
        if self.s0 <= 0.0 {
            return Err(Error::param("s0", "must be positive"));
        }
        Ok(())
    }

    /// Stationary level of the convenience yield under the pricing measure.
    pub fn risk_neutral_mean(&self) -> f64 {
        self.alpha - self.lambda_rp / self.kappa
    }

    /// Exact one-step transition of `(ln S, δ)` over a step of length `h`.
    pub fn transition(&self, r: f64, h: f64) -> Transition {
        let k = self.kappa;
        let (s1, s2, rho) = (self.sigma1, self.sigma2, self.rho);
        let decay = (-k * h).exp();
        let j1 = (1.0 - decay) / k; // ∫ e^{-kv}
        let j2 = (1.0 - (-2.0 * k * h).exp()) / (2.0 * k); // ∫ e^{-2kv}
        let i1 = h - j1; // ∫ (1 - e^{-kv})
        let i2 = h - 2.0 * j1 + j2; // ∫ (1 - e^{-kv})²

        let var_x = s1 * s1 * h + (s2 / k).powi(2) * i2 - 2.0 * rho * s1 * s2 / k * i1;
        let var_d = s2 * s2 * j2;
        let cov = rho * s1 * s2 * j1 - s2 * s2 / k * (j1 - j2);

        let l11 = var_x.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
        let l22 = (var_d - l21 * l21).max(0.0).sqrt();

        Transition {
            decay,
            mean_level: self.risk_neutral_mean(),
            x_drift: (r - 0.5 * s1 * s1 - self.risk_neutral_mean()) * h,
            x_delta_coef: j1,
            var_x,
            var_delta: var_d,
            cov,
            l11,
            l21,
            l22,
        }
    }

    /// Mean and variance of `ln S_t` given the initial state.
    pub fn log_spot_moments(&self, r: f64, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::param("t", format!("time must be non-negative, got {t}")));
        }
        let tr = self.transition(r, t);
        let (mean, _) = tr.mean(self.s0.ln(), self.delta0);
        Ok((mean, tr.var_x))
    }
}

/// Conditional law of one exact step, pre-factored for sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    decay: f64,
    mean_level: f64,
    x_drift: f64,
    x_delta_coef: f64,
    pub var_x: f64,
    pub var_delta: f64,
    pub cov: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl Transition {
    /// Conditional mean of `(ln S, δ)` after the step.
    pub fn mean(&self, log_spot: f64, delta: f64) -> (f64, f64) {
        let dev = delta - self.mean_level;
        (
            log_spot + self.x_drift - dev * self.x_delta_coef,
            self.mean_level + dev * self.decay,
        )
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, log_spot: f64, delta: f64, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (mx, md) = self.mean(log_spot, delta);
        (mx + self.l11 * z1, md + self.l21 * z1 + self.l22 * z2)
    }
}

/// Pre-computed transitions for every step of a grid.
#[derive(Debug, Clone)]
pub struct CommodityStepper {
    params: CommodityParams,
    steps: Vec<Transition>,
}

impl CommodityStepper {
    pub fn new(params: &CommodityParams, r: f64, grid: &TimeGrid) -> Result<Self> {
        params.validate()?;
        let steps = grid
            .times()
            .windows(2)
            .map(|w| params.transition(r, w[1] - w[0]))
            .collect();
        Ok(Self {
            params: *params,
            steps,
        })
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.params.s0.ln(), self.params.delta0)
    }

    /// Advance `(ln S, δ)` across step `k` (from grid point `k` to `k + 1`).
    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, k: usize, state: (f64, f64), rng: &mut R) -> (f64, f64) {
        self.steps[k].sample(state.0, state.1, rng)
    }
}

/// Simulated spot and convenience-yield paths, stored path-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityPathSet {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub spot: Vec<f64>,
    pub delta: Vec<f64>,
}

impl CommodityPathSet {
    pub fn spot_path(&self, p: usize) -> &[f64] {
        let n = self.grid.len();
        &self.spot[p * n..(p + 1) * n]
    }

    pub fn delta_path(&self, p: usize) -> &[f64] {
        let n = self.grid.len();
        &self.delta[p * n..(p + 1) * n]
    }

    pub fn spot_at(&self, p: usize, i: usize) -> f64 {
        self.spot[p * self.grid.len() + i]
    }
}

/// Simulates `n_paths` paths of one commodity on `grid`. Path `p` draws from
/// the substream `(seed, p, role)`.
pub fn simulate_two_factor(
    params: &CommodityParams,
    r: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    role: StreamRole,
) -> Result<CommodityPathSet> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    let stepper = CommodityStepper::new(params, r, grid)?;
    let n = grid.len();
    let mut spot = vec![0.0; n_paths * n];
    let mut delta = vec![0.0; n_paths * n];
    spot.par_chunks_mut(n)
        .zip(delta.par_chunks_mut(n))
        .enumerate()
        .for_each(|(p, (s_row, d_row))| {
            let mut rng = substream(seed, p as u64, role);
            let mut state = stepper.initial();
            s_row[0] = params.s0;
            d_row[0] = state.1;
            for k in 0..n - 1 {
                state = stepper.step(k, state, &mut rng);
                s_row[k + 1] = state.0.exp();
                d_row[k + 1] = state.1;
            }
        });
    Ok(CommodityPathSet {
        grid: grid.clone(),
        n_paths,
        spot,
        delta,
    })
}

/// `E[S_t]` under the pricing measure: `exp(mean + var/2)` of the Gaussian log-spot.
pub fn expected_spot(params: &CommodityParams, r: f64, t: f64) -> Result<f64> {
    params.validate()?;
    let (m, v) = params.log_spot_moments(r, t)?;
    Ok((m + 0.5 * v).exp())
}

/// `E[S_t / S_0]` on each grid point.
pub fn mean_relative_spot_curve(params: &CommodityParams, r: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    params.validate()?;
    grid.times()
        .iter()
        .map(|&t| expected_spot(params, r, t).map(|e| e / params.s0))
        .collect()
}
