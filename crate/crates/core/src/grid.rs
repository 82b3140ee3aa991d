use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time points in years, starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("grid has no points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "grid must start at 0, starts at {}",
                times[0]
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite time at index {i}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "grid not strictly increasing at index {}: {} -> {}",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(Self { times })
    }

    /// `n_points` equally spaced points on `[0, end]`; the last point is exactly `end`.
    pub fn uniform(end: f64, n_points: usize) -> Result<Self> {
        if !(end > 0.0) || n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "uniform grid needs end > 0 and at least 2 points (end={end}, n={n_points})"
            )));
        }
        let last = n_points - 1;
        let times = (0..n_points)
            .map(|i| {
                if i == last {
                    end
                } else {
                    i as f64 * end / last as f64
                }
            })
            .collect();
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Constant step of a uniform grid, or an error if steps differ by more
    /// than a relative `1e-9`.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::InvalidGrid("single-point grid has no step".into()));
        }
        let h = self.end() / (self.times.len() - 1) as f64;
        for (i, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform step at index {}: {} vs {}",
                    i,
                    w[1] - w[0],
                    h
                )));
            }
        }
        Ok(h)
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).expect("finite grid"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                if (t - self.times[i - 1]) <= (self.times[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Index of the grid point equal to `t` within `tol`, if any.
    pub fn index_of(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.nearest_index(t);
        ((self.times[i] - t).abs() <= tol).then_some(i)
    }
}

/// Harvesting dates `k·T/N`, `k = 1..=N`, snapped to the nearest point of
/// `grid`. Returns `(grid index, grid time)` pairs.
pub fn exercise_schedule(grid: &TimeGrid, horizon: f64, n_exercise: usize) -> Result<Vec<(usize, f64)>> {
    if n_exercise == 0 {
        return Err(Error::param("n_exercise", "must be at least 1"));
    }
    if horizon > grid.end() + 1e-12 {
        return Err(Error::InvalidGrid(format!(
            "horizon {horizon} beyond grid end {}",
            grid.end()
        )));
    }
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(n_exercise);
    for k in 1..=n_exercise {
        let target = k as f64 * horizon / n_exercise as f64;
        let i = grid.nearest_index(target);
        if out.last().is_some_and(|&(j, _)| j >= i) {
            return Err(Error::InvalidGrid(format!(
                "grid too coarse for {n_exercise} distinct exercise dates"
            )));
        }
        out.push((i, grid.times()[i]));
    }
    Ok(out)
}
