//! Joint simulation of commodity prices, the host-parasite system and the
//! feeding-cost integrals on the fine Euler grid, recorded at exercise dates.
//!
//! Paths are generated one at a time so that only exercise-date snapshots
//! are kept in memory; path `p` always uses the substreams keyed by its
//! global index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biology::{
    simulate_host_parasite, BioParams, DeterministicCurves, GrowthParams, HostParasiteModel,
    HostParasitePathSet, ThresholdFn,
};
use crate::commodity::{mean_relative_spot_curve, CommodityParams, CommodityStepper};
use crate::economics::{
    harvest_payoff, initial_spot_adjustment, treatment_cost, CostParams, ExercisePayoffMatrix,
    FeedingMode, Mortality,
};
use crate::error::{Error, Result};
use crate::grid::{exercise_schedule, TimeGrid};
use crate::rng::{substream, StreamRole};

/// Every model input of a single-rotation farm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmModel {
    pub salmon: CommodityParams,
    pub soy: CommodityParams,
    pub bio: BioParams,
    pub threshold: ThresholdFn,
    pub growth: GrowthParams,
    pub costs: CostParams,
    pub r: f64,
    pub horizon: f64,
    pub n_exercise: usize,
}

impl Default for FarmModel {
    fn default() -> Self {
        let costs = CostParams::default();
        let mut salmon = CommodityParams::salmon();
        salmon.s0 = initial_spot_adjustment(&costs).expect("default costs are consistent");
        Self {
            salmon,
            soy: CommodityParams::soy(),
            bio: BioParams::default(),
            threshold: ThresholdFn::default(),
            growth: GrowthParams::default(),
            costs,
            r: 0.0303,
            horizon: 3.0,
            n_exercise: 72,
        }
    }
}

impl FarmModel {
    pub fn validate(&self) -> Result<()> {
        self.salmon.validate()?;
        self.soy.validate()?;
        self.bio.validate(&self.threshold)?;
        self.growth.validate()?;
        self.costs.validate()?;
        if !(self.r > 0.0) {
            return Err(Error::param("r", "interest rate must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be positive"));
        }
        if self.n_exercise == 0 {
            return Err(Error::param("n_exercise", "must be at least 1"));
        }
        Ok(())
    }

    /// Uniform Euler grid with step `T / (10N − 1)`.
    pub fn euler_grid(&self) -> Result<TimeGrid> {
        crate::calibrate::euler_grid(self.horizon, self.n_exercise)
    }

    pub fn with_treatment_cost(&self, c_tr: f64) -> Self {
        let mut m = self.clone();
        m.costs.c_tr = c_tr;
        m
    }
}

/// Which model a payoff or state vector is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelMode {
    pub mortality: Mortality,
    pub feeding: FeedingMode,
}

impl ModelMode {
    pub const fn new(mortality: Mortality, feeding: FeedingMode) -> Self {
        Self { mortality, feeding }
    }

    /// 2 for the spot pair, plus 2 for soy under stochastic feeding, plus 2
    /// for `(H, P)` under stochastic mortality.
    pub fn state_dim(&self) -> usize {
        2 + 2 * (self.feeding == FeedingMode::Stochastic) as usize
            + 2 * (self.mortality == Mortality::Stochastic) as usize
    }
}

impl std::fmt::Display for ModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-mortality/{}-feeding", self.mortality, self.feeding)
    }
}

/// Index into [`World::cf`]: which host and soy inputs the feeding integral used.
fn cf_slot(mortality: Mortality, feeding: FeedingMode) -> usize {
    2 * (mortality == Mortality::Deterministic) as usize + (feeding == FeedingMode::Deterministic) as usize
}

/// Exercise-date snapshots of a block of simulated paths, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub dates: Vec<f64>,
    /// Global index of the first path in this block.
    pub first_path: u64,
    pub n_paths: usize,
    pub salmon_spot: Vec<f64>,
    pub salmon_delta: Vec<f64>,
    pub soy_spot: Vec<f64>,
    pub soy_delta: Vec<f64>,
    pub host: Vec<f64>,
    pub parasite: Vec<f64>,
    pub removals: Vec<u32>,
    /// Discounted cumulative feeding cost for each (host source, soy source)
    /// combination, see [`cf_slot`].
    pub cf: [Vec<f64>; 4],
}

/// Pre-computed grid quantities shared by all paths.
pub struct WorldSimulator {
    model: FarmModel,
    grid: TimeGrid,
    dt: f64,
    exercise: Vec<(usize, f64)>,
    salmon: CommodityStepper,
    soy: CommodityStepper,
    host_parasite: HostParasiteModel,
    /// `e^{-rt} w'(t) c F₀` on the grid.
    kernel: Vec<f64>,
    mean_soy: Vec<f64>,
    mean_host: Vec<f64>,
}

impl WorldSimulator {
    /// `curves` supplies the mean host curve used by the deterministic-mortality
    /// feeding integrals; it must live on the model's Euler grid.
    pub fn new(model: &FarmModel, curves: &DeterministicCurves) -> Result<Self> {
        model.validate()?;
        let grid = model.euler_grid()?;
        if curves.grid != grid {
            return Err(Error::ShapeMismatch(
                "deterministic curves were built on a different grid".into(),
            ));
        }
        let dt = grid.uniform_step()?;
        let exercise = exercise_schedule(&grid, model.horizon, model.n_exercise)?;
        let kernel = grid
            .times()
            .iter()
            .map(|&t| (-model.r * t).exp() * model.growth.weight_rate(t) * model.costs.conv * model.costs.f0)
            .collect();
        Ok(Self {
            salmon: CommodityStepper::new(&model.salmon, model.r, &grid)?,
            soy: CommodityStepper::new(&model.soy, model.r, &grid)?,
            host_parasite: HostParasiteModel::new(&model.bio, &model.threshold)?,
            mean_soy: mean_relative_spot_curve(&model.soy, model.r, &grid)?,
            mean_host: curves.host.clone(),
            kernel,
            exercise,
            dt,
            grid,
            model: model.clone(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn exercise_dates(&self) -> Vec<f64> {
        self.exercise.iter().map(|&(_, t)| t).collect()
    }

    /// Simulates paths `first_path .. first_path + n_paths`.
    pub fn simulate(&self, first_path: u64, n_paths: usize, seed: u64) -> World {
        let nd = self.exercise.len();
        let rows: Vec<Vec<Snapshot>> = (0..n_paths)
            .into_par_iter()
            .map(|p| self.simulate_path(first_path + p as u64, seed))
            .collect();

        let mut w = World {
            dates: self.exercise_dates(),
            first_path,
            n_paths,
            salmon_spot: Vec::with_capacity(n_paths * nd),
            salmon_delta: Vec::with_capacity(n_paths * nd),
            soy_spot: Vec::with_capacity(n_paths * nd),
            soy_delta: Vec::with_capacity(n_paths * nd),
            host: Vec::with_capacity(n_paths * nd),
            parasite: Vec::with_capacity(n_paths * nd),
            removals: Vec::with_capacity(n_paths * nd),
            cf: Default::default(),
        };
        for row in rows {
            for s in row {
                w.salmon_spot.push(s.salmon.0);
                w.salmon_delta.push(s.salmon.1);
                w.soy_spot.push(s.soy.0);
                w.soy_delta.push(s.soy.1);
                w.host.push(s.host);
                w.parasite.push(s.parasite);
                w.removals.push(s.removals);
                for (slot, v) in w.cf.iter_mut().zip(s.cf) {
                    slot.push(v);
                }
            }
        }
        w
    }

    fn simulate_path(&self, path: u64, seed: u64) -> Vec<Snapshot> {
        let mut rng_salmon = substream(seed, path, StreamRole::Salmon);
        let mut rng_soy = substream(seed, path, StreamRole::Soy);
        let mut rng_treat = substream(seed, path, StreamRole::Treatment);
        let times = self.grid.times();
        let mut salmon = self.salmon.initial();
        let mut soy = self.soy.initial();
        let mut hp = self.host_parasite.initial();
        let soy0 = self.model.soy.s0;

        let integrands = |i: usize, soy_rel: f64, host: f64| -> [f64; 4] {
            let k = self.kernel[i];
            let (mh, ms) = (self.mean_host[i], self.mean_soy[i]);
            let mut out = [0.0; 4];
            out[cf_slot(Mortality::Stochastic, FeedingMode::Stochastic)] = k * soy_rel * host;
            out[cf_slot(Mortality::Stochastic, FeedingMode::Deterministic)] = k * ms * host;
            out[cf_slot(Mortality::Deterministic, FeedingMode::Stochastic)] = k * soy_rel * mh;
            out[cf_slot(Mortality::Deterministic, FeedingMode::Deterministic)] = k * ms * mh;
            out
        };

        let mut prev = integrands(0, 1.0, hp.host);
        let mut acc = [0.0; 4];
        let mut out = Vec::with_capacity(self.exercise.len());
        let mut next_ex = 0;
        for i in 1..times.len() {
            salmon = self.salmon.step(i - 1, salmon, &mut rng_salmon);
            soy = self.soy.step(i - 1, soy, &mut rng_soy);
            self.host_parasite.advance(&mut hp, times[i], self.dt, &mut rng_treat);
            let soy_rel = soy.0.exp() / soy0;
            let cur = integrands(i, soy_rel, hp.host);
            let h = times[i] - times[i - 1];
            for j in 0..4 {
                acc[j] += 0.5 * h * (prev[j] + cur[j]);
            }
            prev = cur;
            if next_ex < self.exercise.len() && self.exercise[next_ex].0 == i {
                out.push(Snapshot {
                    salmon: (salmon.0.exp(), salmon.1),
                    soy: (soy.0.exp(), soy.1),
                    host: hp.host,
                    parasite: hp.parasite,
                    removals: hp.removals,
                    cf: acc,
                });
                next_ex += 1;
            }
        }
        out
    }
}

struct Snapshot {
    salmon: (f64, f64),
    soy: (f64, f64),
    host: f64,
    parasite: f64,
    removals: u32,
    cf: [f64; 4],
}

/// Mean host and treatment-cost curves from `n_paths` host-parasite paths,
/// i.e. the paths `0..n_paths` of a world simulated with the same seed.
pub fn pilot_curves(model: &FarmModel, n_paths: usize, seed: u64) -> Result<(HostParasitePathSet, DeterministicCurves)> {
    let grid = model.euler_grid()?;
    let paths = simulate_host_parasite(&model.bio, &model.threshold, &grid, n_paths, seed)?;
    let curves = crate::biology::deterministic_counterpart(&paths, model.costs.c_tr)?;
    Ok((paths, curves))
}

impl World {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Payoffs and states as seen by a model of the given `mode`.
    ///
    /// Stochastic mortality uses each path's own `H`, `N`; deterministic
    /// mortality substitutes the mean curves of `curves`, which must carry the
    /// model's treatment cost fraction.
    pub fn decision_matrix(
        &self,
        mode: ModelMode,
        model: &FarmModel,
        curves: &DeterministicCurves,
    ) -> Result<ExercisePayoffMatrix> {
        if (curves.c_tr - model.costs.c_tr).abs() > 1e-15 {
            return Err(Error::param(
                "c_tr",
                format!("curves built for c_tr={} but model uses {}", curves.c_tr, model.costs.c_tr),
            ));
        }
        let nd = self.n_dates();
        let d = mode.state_dim();
        let cf = &self.cf[cf_slot(mode.mortality, mode.feeding)];
        let mean_idx: Vec<usize> = self
            .dates
            .iter()
            .map(|&t| {
                curves
                    .grid
                    .index_of(t, 1e-9)
                    .ok_or_else(|| Error::InvalidGrid(format!("date {t} not on the curve grid")))
            })
            .collect::<Result<_>>()?;

        let mut payoff = Vec::with_capacity(self.n_paths * nd);
        let mut state = Vec::with_capacity(self.n_paths * nd * d);
        for p in 0..self.n_paths {
            for k in 0..nd {
                let o = p * nd + k;
                let (host, ct) = match mode.mortality {
                    Mortality::Stochastic => (self.host[o], treatment_cost(self.removals[o], model.costs.c_tr)),
                    Mortality::Deterministic => {
                        (curves.host[mean_idx[k]], curves.treatment_cost[mean_idx[k]])
                    }
                };
                payoff.push(harvest_payoff(
                    self.dates[k],
                    self.salmon_spot[o],
                    host,
                    ct,
                    cf[o],
                    &model.growth,
                    model.costs.h0,
                    model.r,
                ));
                state.push(self.salmon_spot[o]);
                state.push(self.salmon_delta[o]);
                if mode.feeding == FeedingMode::Stochastic {
                    state.push(self.soy_spot[o]);
                    state.push(self.soy_delta[o]);
                }
                if mode.mortality == Mortality::Stochastic {
                    state.push(self.host[o]);
                    state.push(self.parasite[o]);
                }
            }
        }
        ExercisePayoffMatrix::new(self.dates.clone(), self.n_paths, d, payoff, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commodity::simulate_two_factor;
    use crate::economics::{cumulative_feeding, exercise_payoff, PathValues, PayoffInputs};

    fn small_model() -> FarmModel {
        FarmModel {
            horizon: 1.0,
            n_exercise: 4,
            ..FarmModel::default()
        }
    }

    #[test]
    fn world_matches_module_level_assembly() {
        let model = small_model();
        let seed = 17;
        let n = 6;
        let (hp, curves) = pilot_curves(&model, n, seed).unwrap();
        let sim = WorldSimulator::new(&model, &curves).unwrap();
        let world = sim.simulate(0, n, seed);
        let grid = sim.grid().clone();

        let salmon = simulate_two_factor(&model.salmon, model.r, &grid, n, seed, StreamRole::Salmon).unwrap();
        let soy = simulate_two_factor(&model.soy, model.r, &grid, n, seed, StreamRole::Soy).unwrap();
        let mut cf = Vec::new();
        let mut ct = Vec::new();
        for p in 0..n {
            let f: Vec<f64> = soy.spot_path(p).iter().map(|s| model.costs.f0 * s).collect();
            cf.extend(cumulative_feeding(&f, hp.host_path(p), &model.growth, model.costs.conv, model.r, &grid).unwrap());
            ct.extend(hp.removal_path(p).iter().map(|&k| treatment_cost(k, model.costs.c_tr)));
        }
        let inputs = PayoffInputs {
            salmon: &salmon,
            soy: Some(&soy),
            host: PathValues::PerPath(&hp.host),
            parasite: Some(PathValues::PerPath(&hp.parasite)),
            treatment_cost: PathValues::PerPath(&ct),
            cumulative_feeding: PathValues::PerPath(&cf),
        };
        let reference = exercise_payoff(&inputs, &model.growth, &model.costs, model.r, &sim.exercise_dates()).unwrap();
        let mode = ModelMode::new(Mortality::Stochastic, FeedingMode::Stochastic);
        let got = world.decision_matrix(mode, &model, &curves).unwrap();
        assert_eq!(got.state_dim, 6);
        for (a, b) in got.payoff.iter().zip(&reference.payoff) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
        for (a, b) in got.state.iter().zip(&reference.state) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn chunking_does_not_change_paths() {
        let model = small_model();
        let (_, curves) = pilot_curves(&model, 8, 3).unwrap();
        let sim = WorldSimulator::new(&model, &curves).unwrap();
        let whole = sim.simulate(0, 8, 5);
        let tail = sim.simulate(4, 4, 5);
        let nd = whole.n_dates();
        assert_eq!(&whole.salmon_spot[4 * nd..], &tail.salmon_spot[..]);
        assert_eq!(&whole.cf[0][4 * nd..], &tail.cf[0][..]);
        assert_eq!(&whole.removals[4 * nd..], &tail.removals[..]);
    }

    #[test]
    fn state_dims_per_mode() {
        use FeedingMode as F;
        use Mortality as M;
        assert_eq!(ModelMode::new(M::Stochastic, F::Stochastic).state_dim(), 6);
        assert_eq!(ModelMode::new(M::Stochastic, F::Deterministic).state_dim(), 4);
        assert_eq!(ModelMode::new(M::Deterministic, F::Stochastic).state_dim(), 4);
        assert_eq!(ModelMode::new(M::Deterministic, F::Deterministic).state_dim(), 2);
    }
}
