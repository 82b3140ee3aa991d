//! Fish growth, benchmark mortality, and the host-parasite model with
//! threshold-triggered mechanical lice removals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::BetaQuantile;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::rng::{substream, StreamRole};

/// Bertalanffy growth constants: `w(t) = w_inf (a - b e^{-ct})³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub w_inf: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            a: 1.113,
            b: 1.097,
            c: 1.43,
            w_inf: 6.0,
        }
    }
}

impl GrowthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_inf > 0.0) {
            return Err(Error::param("w_inf", "must be positive"));
        }
        if !(self.c > 0.0) {
            return Err(Error::param("c", "must be positive"));
        }
        if !(self.b >= 0.0 && self.a > self.b) {
            return Err(Error::param("a, b", "require a > b >= 0"));
        }
        Ok(())
    }

    /// Weight per fish in kg; no argument checks.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        let inner = self.a - self.b * (-self.c * t).exp();
        self.w_inf * inner * inner * inner
    }

    /// Time derivative of [`Self::weight`] in kg per year; no argument checks.
    #[inline]
    pub fn weight_rate(&self, t: f64) -> f64 {
        let e = (-self.c * t).exp();
        let inner = self.a - self.b * e;
        3.0 * self.w_inf * inner * inner * self.b * self.c * e
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::param("t", format!("time must be non-negative, got {t}")))
    }
}

pub fn bertalanffy_weight(t: f64, g: &GrowthParams) -> Result<f64> {
    check_time(t)?;
    Ok(g.weight(t))
}

pub fn bertalanffy_weight_rate(t: f64, g: &GrowthParams) -> Result<f64> {
    check_time(t)?;
    Ok(g.weight_rate(t))
}

/// Fish count under a constant mortality rate `m`.
pub fn deterministic_host(t: f64, h0: f64, m: f64) -> Result<f64> {
    check_time(t)?;
    if !(h0 > 0.0) {
        return Err(Error::param("h0", "must be positive"));
    }
    if !(m >= 0.0) {
        return Err(Error::param("m", "must be non-negative"));
    }
    Ok(h0 * (-m * t).exp())
}

/// Pointwise `host × weight`.
pub fn biomass(host: &[f64], weight: &[f64]) -> Result<Vec<f64>> {
    if host.len() != weight.len() {
        return Err(Error::ShapeMismatch(format!(
            "host curve has {} points, weight curve {}",
            host.len(),
            weight.len()
        )));
    }
    Ok(host.iter().zip(weight).map(|(h, w)| h * w).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct BioParams {
    /// Intrinsic salmon mortality.
    pub mu: f64,
    /// Extra salmon mortality per louse per fish.
    pub alpha_inf: f64,
    /// Intrinsic lice mortality.
    pub b_lice: f64,
    /// Lice reproduction rate.
    pub lambda_rep: f64,
    /// Initial fish count.
    pub h0: f64,
    /// Initial lice per fish.
    pub lpf0: f64,
    /// Lower bound of the host survival factor drawn at each treatment.
    pub x_low: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for BioParams {
    fn default() -> Self {
        Self {
            mu: 0.05,
            alpha_inf: 0.1,
            b_lice: 0.05,
            lambda_rep: 7.0143,
            h0: 10_000.0,
            lpf0: 0.001,
            x_low: 0.995,
            beta1: 0.0829,
            beta2: 0.0281,
        }
    }
}

impl BioParams {
    pub fn validate(&self, threshold: &ThresholdFn) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("alpha_inf", self.alpha_inf),
            ("b_lice", self.b_lice),
            ("lambda_rep", self.lambda_rep),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "rate must be finite and non-negative"));
            }
        }
        if !(self.h0 > 0.0) {
            return Err(Error::param("h0", "must be positive"));
        }
        if !(self.lpf0 > 0.0) {
            return Err(Error::param("lpf0", "must be positive"));
        }
        if self.lpf0 >= threshold.at(0.0) {
            return Err(Error::param(
                "lpf0",
                format!("initial lice per fish {} must start below the threshold {}", self.lpf0, threshold.at(0.0)),
            ));
        }
        if !(self.x_low > 0.0 && self.x_low <= 1.0) {
            return Err(Error::param("x_low", "must lie in (0, 1]"));
        }
        if !(self.beta1 > 0.0 && self.beta2 > 0.0) {
            return Err(Error::param("beta1, beta2", "beta shapes must be positive"));
        }
        threshold.validate()
    }

    pub fn initial_parasites(&self) -> f64 {
        self.lpf0 * self.h0
    }
}

/// Regulatory lice-per-fish limit as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdFn {
    Constant(f64),
    /// `values[i]` applies from `starts[i]` until the next start.
    Piecewise { starts: Vec<f64>, values: Vec<f64> },
}

impl Default for ThresholdFn {
    fn default() -> Self {
        ThresholdFn::Constant(0.5)
    }
}

impl ThresholdFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThresholdFn::Constant(l) if *l > 0.0 => Ok(()),
            ThresholdFn::Constant(_) => Err(Error::param("threshold", "must be positive")),
            ThresholdFn::Piecewise { starts, values } => {
                if starts.is_empty() || starts.len() != values.len() {
                    return Err(Error::param("threshold", "starts and values must be non-empty and equally long"));
                }
                if starts[0] != 0.0 || starts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::param("threshold", "starts must begin at 0 and increase strictly"));
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::param("threshold", "all values must be positive"));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ThresholdFn::Constant(l) => *l,
            ThresholdFn::Piecewise { starts, values } => {
                let i = starts.partition_point(|&s| s <= t);
                values[i.saturating_sub(1)]
            }
        }
    }
}

/// One mechanical removal on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEvent {
    pub time: f64,
    /// Host survival factor.
    pub x_factor: f64,
    /// Parasite survival factor.
    pub y_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostParasiteState {
    pub host: f64,
    pub parasite: f64,
    pub removals: u32,
}

impl HostParasiteState {
    pub fn lice_per_fish(&self) -> f64 {
        self.parasite / self.host
    }
}

/// Explicit-Euler stepper with treatment jumps.
#[derive(Debug, Clone)]
pub struct HostParasiteModel {
    bio: BioParams,
    threshold: ThresholdFn,
    effectiveness: BetaQuantile,
}

impl HostParasiteModel {
    pub fn new(bio: &BioParams, threshold: &ThresholdFn) -> Result<Self> {
        bio.validate(threshold)?;
        Ok(Self {
            bio: *bio,
            threshold: threshold.clone(),
            effectiveness: BetaQuantile::new(bio.beta1, bio.beta2),
        })
    }

    pub fn bio(&self) -> &BioParams {
        &self.bio
    }

    pub fn threshold(&self) -> &ThresholdFn {
        &self.threshold
    }

    pub fn initial(&self) -> HostParasiteState {
        HostParasiteState {
            host: self.bio.h0,
            parasite: self.bio.initial_parasites(),
            removals: 0,
        }
    }

    /// One Euler step of the jump-free dynamics.
    #[inline]
    pub fn euler_step(&self, host: f64, parasite: f64, dt: f64) -> (f64, f64) {
        let b = &self.bio;
        let q = parasite / host;
        let dh = -(b.mu + b.alpha_inf * q) * host;
        let dp = (b.lambda_rep * host / b.h0 - (b.b_lice + b.mu) - b.alpha_inf * q) * parasite;
        (host + dt * dh, parasite + dt * dp)
    }

    /// Survival factors `(x, y)` for one treatment, consuming two uniforms.
    #[inline]
    pub fn draw_factors<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u_y: f64 = rng.gen();
        let u_x: f64 = rng.gen();
        let y = 0.1 + 0.8 * self.effectiveness.quantile(u_y);
        let x = self.bio.x_low + (1.0 - self.bio.x_low) * u_x;
        (x, y)
    }

    /// Steps from the previous grid point to time `t` and fires a treatment
    /// if the lice-per-fish ratio at `t` has reached the threshold.
    /// Returns the event and whether the step overshot twice the threshold.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(
        &self,
        state: &mut HostParasiteState,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> (Option<TreatmentEvent>, bool) {
        let (h, p) = self.euler_step(state.host, state.parasite, dt);
        state.host = h;
        state.parasite = p;
        let limit = self.threshold.at(t);
        let q = p / h;
        if q >= limit {
            let overshoot = q > 2.0 * limit;
            let (x, y) = self.draw_factors(rng);
            state.host *= x;
            state.parasite *= y;
            state.removals += 1;
            (
                Some(TreatmentEvent {
                    time: t,
                    x_factor: x,
                    y_factor: y,
                }),
                overshoot,
            )
        } else {
            (None, false)
        }
    }
}

/// Simulated host-parasite paths, stored path-major on the Euler grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostParasitePathSet {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub host: Vec<f64>,
    pub parasite: Vec<f64>,
    /// Cumulative treatment count `N_t` at each grid point.
    pub removals: Vec<u32>,
    pub events: Vec<Vec<TreatmentEvent>>,
    /// Steps where the lice ratio jumped past twice the threshold.
    pub coarse_steps: usize,
}

impl HostParasitePathSet {
    fn row(&self, p: usize) -> std::ops::Range<usize> {
        let n = self.grid.len();
        p * n..(p + 1) * n
    }

    pub fn host_path(&self, p: usize) -> &[f64] {
        &self.host[self.row(p)]
    }

    pub fn parasite_path(&self, p: usize) -> &[f64] {
        &self.parasite[self.row(p)]
    }

    pub fn removal_path(&self, p: usize) -> &[u32] {
        &self.removals[self.row(p)]
    }
}

fn require_uniform(grid: &TimeGrid) -> Result<f64> {
    grid.uniform_step()
        .map_err(|e| Error::InvalidGrid(format!("host-parasite model needs a constant Euler step: {e}")))
}

/// Simulates `n_paths` host-parasite paths. Path `p` draws its treatment
/// factors from the substream `(seed, p, Treatment)`.
pub fn simulate_host_parasite(
    bio: &BioParams,
    threshold: &ThresholdFn,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<HostParasitePathSet> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    let dt = require_uniform(grid)?;
    let model = HostParasiteModel::new(bio, threshold)?;
    let n = grid.len();
    let times = grid.times();
    let mut host = vec![0.0; n_paths * n];
    let mut parasite = vec![0.0; n_paths * n];
    let mut removals = vec![0u32; n_paths * n];

    let per_path: Vec<(Vec<TreatmentEvent>, usize)> = host
        .par_chunks_mut(n)
        .zip(parasite.par_chunks_mut(n))
        .zip(removals.par_chunks_mut(n))
        .enumerate()
        .map(|(p, ((h_row, p_row), n_row))| {
            let mut rng = substream(seed, p as u64, StreamRole::Treatment);
            let mut state = model.initial();
            let mut events = Vec::new();
            let mut coarse = 0;
            h_row[0] = state.host;
            p_row[0] = state.parasite;
            n_row[0] = 0;
            for i in 1..n {
                let (event, overshoot) = model.advance(&mut state, times[i], dt, &mut rng);
                if let Some(e) = event {
                    events.push(e);
                }
                coarse += overshoot as usize;
                h_row[i] = state.host;
                p_row[i] = state.parasite;
                n_row[i] = state.removals;
            }
            (events, coarse)
        })
        .collect();

    let coarse_steps = per_path.iter().map(|(_, c)| c).sum();
    if coarse_steps > 0 {
        log::warn!(
            "Euler step {dt} too coarse: lice ratio overshot twice the threshold on {coarse_steps} steps"
        );
    }
    Ok(HostParasitePathSet {
        grid: grid.clone(),
        n_paths,
        host,
        parasite,
        removals,
        events: per_path.into_iter().map(|(e, _)| e).collect(),
        coarse_steps,
    })
}

/// Cumulative treatment counts `N_t` at each requested time, for every path.
/// Only integrates up to the last requested time. Result is `[time][path]`.
pub fn simulate_removal_counts(
    bio: &BioParams,
    threshold: &ThresholdFn,
    dt: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::param("times", "must be non-negative"));
    }
    let model = HostParasiteModel::new(bio, threshold)?;
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let n_steps = (t_max / dt + 1e-9).floor() as usize;
    // Grid index holding N_t for each requested time.
    let idx: Vec<usize> = times.iter().map(|&t| (t / dt + 1e-9).floor() as usize).collect();

    let per_path: Vec<Vec<u32>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = substream(seed, p as u64, StreamRole::Treatment);
            let mut state = model.initial();
            let mut counts = vec![0u32; n_steps + 1];
            for (i, slot) in counts.iter_mut().enumerate().skip(1) {
                model.advance(&mut state, i as f64 * dt, dt, &mut rng);
                *slot = state.removals;
            }
            idx.iter().map(|&i| counts[i]).collect()
        })
        .collect();

    Ok((0..times.len())
        .map(|k| per_path.iter().map(|c| c[k]).collect())
        .collect())
}

/// Jump-free host and parasite trajectories on a uniform grid.
pub fn untreated_trajectory(bio: &BioParams, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = require_uniform(grid)?;
    let model = HostParasiteModel {
        bio: *bio,
        threshold: ThresholdFn::Constant(f64::INFINITY),
        effectiveness: BetaQuantile::new(1.0, 1.0),
    };
    let mut host = Vec::with_capacity(grid.len());
    let mut parasite = Vec::with_capacity(grid.len());
    let (mut h, mut p) = (bio.h0, bio.initial_parasites());
    host.push(h);
    parasite.push(p);
    for _ in 1..grid.len() {
        (h, p) = model.euler_step(h, p, dt);
        host.push(h);
        parasite.push(p);
    }
    Ok((host, parasite))
}

/// Mean curves of a simulated path set: the deterministic counterpart of the
/// stochastic mortality model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicCurves {
    pub grid: TimeGrid,
    /// `E[H_t]`.
    pub host: Vec<f64>,
    /// `E[N_t]`.
    pub removals: Vec<f64>,
    /// `E[CT_t]` for the treatment cost fraction the curves were built with.
    pub treatment_cost: Vec<f64>,
    pub c_tr: f64,
}

pub fn deterministic_counterpart(paths: &HostParasitePathSet, c_tr: f64) -> Result<DeterministicCurves> {
    if paths.n_paths == 0 {
        return Err(Error::EmptyInput("path set has no paths".into()));
    }
    let n = paths.grid.len();
    let m = paths.n_paths as f64;
    let mut host = vec![0.0; n];
    let mut removals = vec![0.0; n];
    let mut treatment_cost = vec![0.0; n];
    for p in 0..paths.n_paths {
        for (i, (&h, &k)) in paths.host_path(p).iter().zip(paths.removal_path(p)).enumerate() {
            host[i] += h;
            removals[i] += k as f64;
            treatment_cost[i] += crate::economics::treatment_cost(k, c_tr);
        }
    }
    for v in host.iter_mut().chain(removals.iter_mut()).chain(treatment_cost.iter_mut()) {
        *v /= m;
    }
    Ok(DeterministicCurves {
        grid: paths.grid.clone(),
        host,
        removals,
        treatment_cost,
        c_tr,
    })
}
