//! Cost processes and the discounted harvest payoff.

use serde::{Deserialize, Serialize};

use crate::biology::GrowthParams;
use crate::commodity::CommodityPathSet;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Quoted salmon spot in NOK/kg.
    pub s_hat0: f64,
    /// Production cost per kg.
    pub pc: f64,
    /// Harvesting cost per kg.
    pub h0: f64,
    /// Annual feeding cost scale.
    pub f0: f64,
    /// Biological cost per kg.
    pub bc0: f64,
    /// kg feed per kg fish.
    pub conv: f64,
    /// Fraction of farm value consumed by each treatment.
    pub c_tr: f64,
}

impl CostParams {
    /// Costs tied to the quoted spot: `PC = 0.5 Ŝ`, `h₀ = 0.1 PC`,
    /// `F₀ = 0.25 PC`, `BC₀ = 0.3 PC`.
    pub fn from_quoted_spot(s_hat0: f64) -> Self {
        let pc = 0.5 * s_hat0;
        Self {
            s_hat0,
            pc,
            h0: 0.1 * pc,
            f0: 0.25 * pc,
            bc0: 0.3 * pc,
            conv: 1.1,
            c_tr: 0.015,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s_hat0", self.s_hat0),
            ("pc", self.pc),
            ("h0", self.h0),
            ("f0", self.f0),
            ("bc0", self.bc0),
            ("conv", self.conv),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.c_tr) {
            return Err(Error::param("c_tr", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::from_quoted_spot(95.0)
    }
}

/// Initial salmon spot for the commodity model: `Ŝ − PC + h₀ + F₀ + BC₀`.
pub fn initial_spot_adjustment(cp: &CostParams) -> Result<f64> {
    cp.validate()?;
    let s0 = cp.s_hat0 - cp.pc + cp.h0 + cp.f0 + cp.bc0;
    if s0 < 0.0 {
        return Err(Error::param(
            "costs",
            format!("adjusted initial spot is negative ({s0}); production cost exceeds quoted spot plus cost add-backs"),
        ));
    }
    Ok(s0)
}

/// Cumulative treatment cost fraction after `n` treatments, capped at 1.
#[inline]
pub fn treatment_cost(n: u32, c_tr: f64) -> f64 {
    (c_tr * n as f64).min(1.0)
}

pub fn treatment_cost_fraction(removals: &[u32], c_tr: f64) -> Result<Vec<f64>> {
    if let Some(i) = removals.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::param(
            "removals",
            format!("counting process decreases at index {}", i + 1),
        ));
    }
    Ok(removals.iter().map(|&n| treatment_cost(n, c_tr)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedingMode {
    #[serde(rename = "stoch")]
    Stochastic,
    #[serde(rename = "determ")]
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mortality {
    #[serde(rename = "stoch")]
    Stochastic,
    #[serde(rename = "determ")]
    Deterministic,
}

impl std::str::FromStr for FeedingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stoch" => Ok(Self::Stochastic),
            "determ" => Ok(Self::Deterministic),
            _ => Err(Error::param("feeding", format!("expected stoch|determ, got `{s}`"))),
        }
    }
}

impl std::str::FromStr for Mortality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stoch" => Ok(Self::Stochastic),
            "determ" => Ok(Self::Deterministic),
            _ => Err(Error::param("mode", format!("expected stoch|determ, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for FeedingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stochastic => "stoch",
            Self::Deterministic => "determ",
        })
    }
}

impl std::fmt::Display for Mortality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Stochastic => "stoch",
            Self::Deterministic => "determ",
        })
    }
}

/// Feeding cost `F₀ · S̃²_t` from relative soy values (a simulated path for
/// stochastic feeding, the mean curve for deterministic feeding).
pub fn feeding_cost_curve(relative_soy: &[f64], f0: f64) -> Result<Vec<f64>> {
    match relative_soy.first() {
        None => return Err(Error::EmptyInput("relative soy curve".into())),
        Some(&v0) if (v0 - 1.0).abs() > 1e-12 => {
            return Err(Error::param("relative_soy", format!("must start at 1, starts at {v0}")))
        }
        _ => {}
    }
    if relative_soy.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::param("relative_soy", "values must be positive"));
    }
    Ok(relative_soy.iter().map(|v| f0 * v).collect())
}

/// Discounted cumulative feeding cost `∫₀ᵗ e^{-rs} F_s H_s w'(s) c ds`,
/// trapezoidal on `grid`.
pub fn cumulative_feeding(
    feeding: &[f64],
    host: &[f64],
    g: &GrowthParams,
    conv: f64,
    r: f64,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let n = grid.len();
    if feeding.len() != n || host.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "grid has {n} points, feeding {} and host {}",
            feeding.len(),
            host.len()
        )));
    }
    let times = grid.times();
    let integrand = |i: usize| (-r * times[i]).exp() * feeding[i] * host[i] * g.weight_rate(times[i]) * conv;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = integrand(0);
    out.push(0.0);
    for i in 1..n {
        let cur = integrand(i);
        acc += 0.5 * (times[i] - times[i - 1]) * (prev + cur);
        out.push(acc);
        prev = cur;
    }
    Ok(out)
}

/// Discounted harvest payoff at time `t` for one path:
/// `e^{-rt}((1 − CT) S B − h₀ B) − CF` with `B = H w(t)`.
#[inline]
pub fn harvest_payoff(
    t: f64,
    spot: f64,
    host: f64,
    treatment_cost: f64,
    cumulative_feeding: f64,
    g: &GrowthParams,
    h0: f64,
    r: f64,
) -> f64 {
    let b = host * g.weight(t);
    (-r * t).exp() * ((1.0 - treatment_cost) * spot * b - h0 * b) - cumulative_feeding
}

/// Per-path values, or one curve shared by all paths.
#[derive(Debug, Clone, Copy)]
pub enum PathValues<'a> {
    Shared(&'a [f64]),
    PerPath(&'a [f64]),
}

impl<'a> PathValues<'a> {
    fn check(&self, name: &str, n_paths: usize, n_grid: usize) -> Result<()> {
        let (len, want) = match self {
            PathValues::Shared(v) => (v.len(), n_grid),
            PathValues::PerPath(v) => (v.len(), n_paths * n_grid),
        };
        if len != want {
            return Err(Error::ShapeMismatch(format!("{name}: expected {want} values, got {len}")));
        }
        Ok(())
    }

    #[inline]
    fn at(&self, p: usize, i: usize, n_grid: usize) -> f64 {
        match self {
            PathValues::Shared(v) => v[i],
            PathValues::PerPath(v) => v[p * n_grid + i],
        }
    }
}

/// Everything the payoff needs, on the grid of `salmon`.
#[derive(Debug, Clone, Copy)]
pub struct PayoffInputs<'a> {
    pub salmon: &'a CommodityPathSet,
    /// Included in the state vector when present.
    pub soy: Option<&'a CommodityPathSet>,
    pub host: PathValues<'a>,
    /// Included in the state vector when present.
    pub parasite: Option<PathValues<'a>>,
    pub treatment_cost: PathValues<'a>,
    pub cumulative_feeding: PathValues<'a>,
}

/// Discounted payoffs and conditioning states at each exercise date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExercisePayoffMatrix {
    pub exercise_dates: Vec<f64>,
    pub n_paths: usize,
    pub state_dim: usize,
    /// `[path][date]`.
    pub payoff: Vec<f64>,
    /// `[path][date][component]`.
    pub state: Vec<f64>,
}

impl ExercisePayoffMatrix {
    pub fn new(exercise_dates: Vec<f64>, n_paths: usize, state_dim: usize, payoff: Vec<f64>, state: Vec<f64>) -> Result<Self> {
        let n_dates = exercise_dates.len();
        if n_dates == 0 {
            return Err(Error::EmptyInput("no exercise dates".into()));
        }
        if exercise_dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("exercise_dates", "must increase strictly"));
        }
        if payoff.len() != n_paths * n_dates || state.len() != n_paths * n_dates * state_dim {
            return Err(Error::ShapeMismatch(format!(
                "{n_paths} paths × {n_dates} dates × {state_dim} dims vs payoff {} / state {}",
                payoff.len(),
                state.len()
            )));
        }
        Ok(Self {
            exercise_dates,
            n_paths,
            state_dim,
            payoff,
            state,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.exercise_dates.len()
    }

    #[inline]
    pub fn payoff_at(&self, p: usize, k: usize) -> f64 {
        self.payoff[p * self.n_dates() + k]
    }

    #[inline]
    pub fn state_at(&self, p: usize, k: usize) -> &[f64] {
        let d = self.state_dim;
        let o = (p * self.n_dates() + k) * d;
        &self.state[o..o + d]
    }
}

pub fn exercise_payoff(
    inputs: &PayoffInputs<'_>,
    g: &GrowthParams,
    cp: &CostParams,
    r: f64,
    exercise_dates: &[f64],
) -> Result<ExercisePayoffMatrix> {
    let grid = &inputs.salmon.grid;
    let n_grid = grid.len();
    let n_paths = inputs.salmon.n_paths;
    if let Some(soy) = inputs.soy {
        if soy.grid != *grid || soy.n_paths != n_paths {
            return Err(Error::ShapeMismatch("soy paths do not match salmon paths".into()));
        }
    }
    inputs.host.check("host", n_paths, n_grid)?;
    inputs.treatment_cost.check("treatment_cost", n_paths, n_grid)?;
    inputs.cumulative_feeding.check("cumulative_feeding", n_paths, n_grid)?;
    if let Some(par) = &inputs.parasite {
        par.check("parasite", n_paths, n_grid)?;
    }
    let idx = exercise_dates
        .iter()
        .map(|&t| {
            grid.index_of(t, 1e-9)
                .ok_or_else(|| Error::InvalidGrid(format!("exercise date {t} is not a grid point")))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = 2 + 2 * inputs.soy.is_some() as usize + 2 * inputs.parasite.is_some() as usize;
    let n_dates = idx.len();
    let mut payoff = Vec::with_capacity(n_paths * n_dates);
    let mut state = Vec::with_capacity(n_paths * n_dates * d);
    for p in 0..n_paths {
        for &i in &idx {
            let t = grid.times()[i];
            let s = inputs.salmon.spot_at(p, i);
            payoff.push(harvest_payoff(
                t,
                s,
                inputs.host.at(p, i, n_grid),
                inputs.treatment_cost.at(p, i, n_grid),
                inputs.cumulative_feeding.at(p, i, n_grid),
                g,
                cp.h0,
                r,
            ));
            state.push(s);
            state.push(inputs.salmon.delta[p * n_grid + i]);
            if let Some(soy) = inputs.soy {
                state.push(soy.spot_at(p, i));
                state.push(soy.delta[p * n_grid + i]);
            }
            if let Some(par) = &inputs.parasite {
                state.push(inputs.host.at(p, i, n_grid));
                state.push(par.at(p, i, n_grid));
            }
        }
    }
    ExercisePayoffMatrix::new(exercise_dates.to_vec(), n_paths, d, payoff, state)
}
