//! Exact backward induction on small finite Markov chains. Used to check
//! the regression solver.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::economics::ExercisePayoffMatrix;
use crate::error::{Error, Result};
use crate::rng::{substream, StreamRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    /// Exercise times.
    pub times: Vec<f64>,
    pub rate: f64,
    /// State distribution at the first exercise date.
    pub initial: Vec<f64>,
    /// `transitions[k][i][j]`: probability of moving from `i` at date `k` to `j` at date `k + 1`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// Undiscounted payoff `payoffs[k][i]` of stopping in state `i` at date `k`.
    pub payoffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    /// Expected discounted value under the optimal policy.
    pub value: f64,
    /// Discounted value function `values[k][i]`.
    pub values: Vec<Vec<f64>>,
    pub stop: Vec<Vec<bool>>,
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

impl MarkovChain {
    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.n_states();
        let nd = self.times.len();
        if s == 0 || nd == 0 {
            return Err(Error::EmptyInput("chain needs at least one state and one date".into()));
        }
        if !is_distribution(&self.initial) {
            return Err(Error::param("initial", "not a probability vector"));
        }
        if self.transitions.len() + 1 != nd || self.payoffs.len() != nd {
            return Err(Error::ShapeMismatch(format!(
                "{nd} dates need {} transition matrices and {nd} payoff rows",
                nd - 1
            )));
        }
        for m in &self.transitions {
            if m.len() != s || m.iter().any(|row| row.len() != s || !is_distribution(row)) {
                return Err(Error::param("transitions", "rows must be probability vectors over all states"));
            }
        }
        if self.payoffs.iter().any(|row| row.len() != s) {
            return Err(Error::ShapeMismatch("payoff rows must cover all states".into()));
        }
        Ok(())
    }

    fn discounted(&self, k: usize, i: usize) -> f64 {
        (-self.rate * self.times[k]).exp() * self.payoffs[k][i]
    }

    /// Random chain with payoffs in `[1, 2)` and dense transition rows.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_dates: usize, rng: &mut R) -> Self {
        let row = |rng: &mut R| {
            let w: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        Self {
            times: (1..=n_dates).map(|k| k as f64 * 0.25).collect(),
            rate: 0.03,
            initial: row(rng),
            transitions: (1..n_dates).map(|_| (0..n_states).map(|_| row(rng)).collect()).collect(),
            payoffs: (0..n_dates)
                .map(|_| (0..n_states).map(|_| rng.gen_range(1.0..2.0)).collect())
                .collect(),
        }
    }

    /// Samples paths with one-hot state vectors and discounted payoffs.
    pub fn sample_paths(&self, n_paths: usize, seed: u64) -> Result<ExercisePayoffMatrix> {
        self.validate()?;
        let s = self.n_states();
        let nd = self.times.len();
        let init = WeightedIndex::new(&self.initial).map_err(|e| Error::param("initial", e.to_string()))?;
        let rows: Vec<Vec<WeightedIndex<f64>>> = self
            .transitions
            .iter()
            .map(|m| m.iter().map(|r| WeightedIndex::new(r).expect("validated")).collect())
            .collect();
        let mut payoff = Vec::with_capacity(n_paths * nd);
        let mut state = Vec::with_capacity(n_paths * nd * s);
        for p in 0..n_paths {
            let mut rng = substream(seed, p as u64, StreamRole::Observation);
            let mut i = init.sample(&mut rng);
            for k in 0..nd {
                if k > 0 {
                    i = rows[k - 1][i].sample(&mut rng);
                }
                payoff.push(self.discounted(k, i));
                state.extend((0..s).map(|j| (j == i) as u8 as f64));
            }
        }
        ExercisePayoffMatrix::new(self.times.clone(), n_paths, s, payoff, state)
    }
}

/// Optimal stopping value and policy by exhaustive backward induction.
pub fn dp_oracle(chain: &MarkovChain) -> Result<OracleSolution> {
    chain.validate()?;
    let s = chain.n_states();
    let nd = chain.times.len();
    let mut values = vec![vec![0.0; s]; nd];
    let mut stop = vec![vec![true; s]; nd];
    for i in 0..s {
        values[nd - 1][i] = chain.discounted(nd - 1, i);
    }
    for k in (0..nd - 1).rev() {
        for i in 0..s {
            let cont: f64 = chain.transitions[k][i]
                .iter()
                .zip(&values[k + 1])
                .map(|(p, v)| p * v)
                .sum();
            let g = chain.discounted(k, i);
            stop[k][i] = g >= cont;
            values[k][i] = g.max(cont);
        }
    }
    let value = chain.initial.iter().zip(&values[0]).map(|(p, v)| p * v).sum();
    Ok(OracleSolution { value, values, stop })
}
