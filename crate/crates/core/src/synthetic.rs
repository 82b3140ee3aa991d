//! Model-generated lice corpora for tests and for running the pipeline
//! without the public data.
//!
//! Each farming period is one host-parasite path. The weekly report at
//! offset `k` carries the lice-per-fish ratio at `k/52` (linear in the
//! simulation grid) with multiplicative Gaussian noise, and the mechanical
//! flag is set for every week containing at least one treatment. Distractor
//! farms sit in another region or use medicinal and cleaner-fish treatments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::biology::{simulate_host_parasite, BioParams, ThresholdFn};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::ingest::{iso_from_index, week_index, LiceRecord};
use crate::rng::{substream, StreamRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub region: String,
    /// Mechanical-only periods in `region`; the selector should return exactly these.
    pub n_valid: usize,
    /// Periods in `region` with a medicinal or cleaner-fish treatment.
    pub n_excluded: usize,
    /// Periods in another region.
    pub n_other_region: usize,
    pub period_weeks: u32,
    /// Weeks without lice counts between two periods of the same farm.
    pub fallow_weeks: u32,
    /// Relative standard deviation of the observation noise.
    pub noise: f64,
    pub start_year: i32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            region: "Trøndelag".into(),
            n_valid: 100,
            n_excluded: 20,
            n_other_region: 20,
            period_weeks: 100,
            fallow_weeks: 8,
            noise: 0.1,
            start_year: 2016,
            seed: 7,
        }
    }
}

/// A generated corpus and the periods a correct selector must return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub records: Vec<LiceRecord>,
    /// `(locality_id, ISO start week)` of every valid period.
    pub valid_periods: Vec<(String, (i32, u32))>,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Valid,
    Excluded,
    OtherRegion,
}

/// Generates a corpus from the host-parasite model on `grid`, which must
/// span at least `period_weeks / 52` years.
pub fn generate_corpus(bio: &BioParams, threshold: &ThresholdFn, grid: &TimeGrid, cfg: &CorpusConfig) -> Result<Corpus> {
    let span = (cfg.period_weeks.saturating_sub(1)) as f64 / 52.0;
    if cfg.period_weeks == 0 {
        return Err(Error::param("period_weeks", "must be positive"));
    }
    if grid.end() + 1e-12 < span {
        return Err(Error::InvalidGrid(format!(
            "grid ends at {} but periods span {span} years",
            grid.end()
        )));
    }
    if cfg.fallow_weeks < 4 {
        return Err(Error::param("fallow_weeks", "must be at least the period gap of 4 weeks"));
    }
    if !(cfg.noise >= 0.0) {
        return Err(Error::param("noise", "must be non-negative"));
    }
    let kinds: Vec<Kind> = std::iter::repeat_n(Kind::Valid, cfg.n_valid)
        .chain(std::iter::repeat_n(Kind::Excluded, cfg.n_excluded))
        .chain(std::iter::repeat_n(Kind::OtherRegion, cfg.n_other_region))
        .collect();
    let n = kinds.len();
    let paths = simulate_host_parasite(bio, threshold, grid, n, cfg.seed)?;
    let dt = grid.uniform_step()?;
    let base = week_index(cfg.start_year, 1).ok_or_else(|| Error::param("start_year", "out of range"))?;

    let mut records = Vec::new();
    let mut valid_periods = Vec::new();
    for (p, &kind) in kinds.iter().enumerate() {
        let mut rng = substream(cfg.seed, p as u64, StreamRole::Observation);
        // Two periods per farm: consecutive path indices share a locality.
        let site = format!("{}", 10_000 + p / 2);
        let start = base
            + rng.gen_range(0..26)
            + if p % 2 == 1 { (cfg.period_weeks + cfg.fallow_weeks + 26) as i64 } else { 0 };
        let region = match kind {
            Kind::OtherRegion => "Nordland".to_string(),
            _ => cfg.region.clone(),
        };
        let host = paths.host_path(p);
        let parasite = paths.parasite_path(p);
        let q = |t: f64| {
            let x = t / dt;
            let i = (x.floor() as usize).min(grid.len() - 1);
            let w = x - i as f64;
            let at = |j: usize| parasite[j] / host[j];
            if i + 1 < grid.len() && w > 0.0 {
                (1.0 - w) * at(i) + w * at(i + 1)
            } else {
                at(i)
            }
        };
        let mut treated = vec![false; cfg.period_weeks as usize];
        for e in &paths.events[p] {
            let k = (e.time * 52.0 + 1e-9).floor() as usize;
            if k < treated.len() {
                treated[k] = true;
            }
        }
        let bad_week = rng.gen_range(0..cfg.period_weeks);
        let use_medicinal: bool = rng.gen();
        for k in 0..cfg.period_weeks {
            let z: f64 = rng.sample(StandardNormal);
            let lpf = (q(k as f64 / 52.0) * (1.0 + cfg.noise * z)).max(0.0);
            let (year, week) = iso_from_index(start + k as i64);
            let flagged = kind == Kind::Excluded && k == bad_week;
            records.push(LiceRecord {
                locality_id: site.clone(),
                year,
                week,
                adult_female_lpf: Some(lpf),
                moving_lpf: Some(2.0 * lpf),
                stuck_lpf: Some(0.5 * lpf),
                mechanical: treated[k as usize],
                medicinal: flagged && use_medicinal,
                cleanerfish: flagged && !use_medicinal,
                region: region.clone(),
            });
        }
        // Fallow weeks after the period are reported without lice counts.
        for k in cfg.period_weeks..cfg.period_weeks + cfg.fallow_weeks {
            let (year, week) = iso_from_index(start + k as i64);
            records.push(LiceRecord {
                locality_id: site.clone(),
                year,
                week,
                adult_female_lpf: None,
                moving_lpf: None,
                stuck_lpf: None,
                mechanical: false,
                medicinal: false,
                cleanerfish: false,
                region: region.clone(),
            });
        }
        if kind == Kind::Valid {
            valid_periods.push((site, iso_from_index(start)));
        }
    }
    Ok(Corpus { records, valid_periods })
}
