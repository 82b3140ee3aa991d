//! Batch commands behind the CLI. Each writes tidy CSV/JSON files into a run
//! directory together with a `manifest.json` describing the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::biology::{simulate_removal_counts, BioParams};
use crate::calibrate::{fit_beta, fit_lambda, BetaFitConfig, BetaFitResult, LambdaFitResult};
use crate::config::Config;
use crate::economics::{FeedingMode, Mortality};
use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::ingest::{
    extract_green_segments, load_segments, parse_lice_file, removal_distribution_at, select_mechanical_only_periods,
    write_lice, write_segments_csv, FarmingPeriod, PeriodOptions, RemovalDistribution, Schema,
};
use crate::stopping::{compare_rules, ComparisonReport, PathComparison, SolverConfig, StoppingRule};
use crate::synthetic::generate_corpus;
use crate::world::{pilot_curves, FarmModel, ModelMode, WorldSimulator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    pub seeds: Vec<(String, u64)>,
    pub stages: Vec<StageRecord>,
    /// File names relative to the run directory.
    pub outputs: Vec<String>,
}

/// Run directory with output bookkeeping.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn create(dir: &Path, command: &str, config: &Config) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
                seeds: vec![
                    ("train".into(), config.global.seed),
                    ("eval".into(), config.global.eval_seed),
                ],
                stages: Vec::new(),
                outputs: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn add_seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.push((name.to_string(), seed));
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.register(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Writes a header row followed by `rows`.
    pub fn write_csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
        I: IntoIterator<Item = R>,
    {
        let path = self.register(name);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
    {
        let path = self.register(name);
        f(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Runs one stage, timing it. On failure the manifest is persisted with
    /// the failed stage and the error is wrapped with the stage name.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let result = f(self);
        let record = StageRecord {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
            ok: result.is_ok(),
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        self.manifest.stages.push(record);
        match result {
            Ok(v) => Ok(v),
            Err(e) => {
                log::error!("stage `{name}` failed: {e}");
                let _ = self.finish();
                Err(Error::Stage {
                    stage: name.to_string(),
                    source: Box::new(e),
                })
            }
        }
    }

    pub fn finish(&mut self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub seed: u64,
    pub exercise_dates: usize,
    /// `(t, mean N_t, std N_t)` on the simulation grid.
    pub removals: Vec<(f64, f64, f64)>,
    pub mean_host_at_horizon: f64,
    pub mean_salmon_spot_at_horizon: f64,
    pub mean_payoff_at_horizon: f64,
}

/// Simulates the stochastic world and writes exercise-date snapshots.
pub fn cmd_simulate(config: &Config, out: &Path) -> Result<SimulationSummary> {
    let mut run = Run::create(out, "simulate", config)?;
    let model = config.model();
    let n = config.global.n_paths;
    let seed = config.global.seed;
    let summary = run.stage("simulate", |run| {
        let (hp, curves) = pilot_curves(&model, n, seed)?;
        let sim = WorldSimulator::new(&model, &curves)?;
        let world = sim.simulate(0, n, seed);
        let mode = ModelMode::new(Mortality::Stochastic, FeedingMode::Stochastic);
        let payoff = world.decision_matrix(mode, &model, &curves)?;
        let nd = world.n_dates();

        let rows = (0..n * nd).map(|o| {
            let (p, k) = (o / nd, o % nd);
            vec![
                p.to_string(),
                f(world.dates[k]),
                f(world.salmon_spot[o]),
                f(world.salmon_delta[o]),
                f(world.soy_spot[o]),
                f(world.soy_delta[o]),
                f(world.host[o]),
                f(world.parasite[o]),
                world.removals[o].to_string(),
                f(payoff.payoff[o]),
            ]
        });
        run.write_csv(
            "paths.csv",
            &["path", "t", "salmon_spot", "salmon_delta", "soy_spot", "soy_delta", "host", "parasite", "removals", "payoff"],
            rows,
        )?;
        let events = hp.events.iter().enumerate().flat_map(|(p, evs)| {
            evs.iter()
                .map(move |e| vec![p.to_string(), f(e.time), f(e.x_factor), f(e.y_factor)])
        });
        run.write_csv("events.csv", &["path", "time", "x_factor", "y_factor"], events)?;
        let dates: Vec<usize> = world.dates.iter().map(|&t| curves.grid.nearest_index(t)).collect();
        run.write_csv(
            "mean_curves.csv",
            &["t", "mean_host", "mean_removals", "mean_treatment_cost"],
            dates.iter().map(|&i| {
                vec![
                    f(curves.grid.times()[i]),
                    f(curves.host[i]),
                    f(curves.removals[i]),
                    f(curves.treatment_cost[i]),
                ]
            }),
        )?;

        let removals = config
            .compare
            .histogram_times
            .iter()
            .map(|&t| {
                let i = hp.grid.nearest_index(t);
                let counts: Vec<u32> = (0..n).map(|p| hp.removal_path(p)[i]).collect();
                let (m, s) = crate::ingest::count_moments(&counts);
                (hp.grid.times()[i], m, s)
            })
            .collect();
        let last = |v: &[f64]| (0..n).map(|p| v[p * nd + nd - 1]).sum::<f64>() / n as f64;
        let summary = SimulationSummary {
            n_paths: n,
            seed,
            exercise_dates: nd,
            removals,
            mean_host_at_horizon: last(&world.host),
            mean_salmon_spot_at_horizon: last(&world.salmon_spot),
            mean_payoff_at_horizon: last(&payoff.payoff),
        };
        run.write_json("summary.json", &summary)?;
        Ok(summary)
    })?;
    run.finish()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCalibration {
    pub segments_file: String,
    pub bio: BioParams,
    pub fit: LambdaFitResult,
}

pub fn cmd_calibrate_lambda(config: &Config, segments: &Path, out: &Path) -> Result<LambdaCalibration> {
    let segs = load_segments(segments)?;
    let model = config.model();
    let fit = fit_lambda(&segs, &model.bio, &model.euler_grid()?)?;
    let result = LambdaCalibration {
        segments_file: segments.display().to_string(),
        bio: model.bio,
        fit,
    };
    write_json_file(out, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub target_file: String,
    pub bio: BioParams,
    pub grid_dt: f64,
    pub config: BetaFitConfig,
    pub fit: BetaFitResult,
}

/// Loads one removal distribution or a list of them.
pub fn load_targets(path: &Path) -> Result<Vec<RemovalDistribution>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(list) = serde_json::from_str::<Vec<RemovalDistribution>>(&text) {
        return Ok(list);
    }
    Ok(vec![serde_json::from_str(&text)?])
}

pub fn cmd_calibrate_beta(config: &Config, target: &Path, out: &Path) -> Result<BetaCalibration> {
    let targets = load_targets(target)?;
    let model = config.model();
    let dt = model.euler_grid()?.uniform_step()?;
    let cfg = &config.calibration.beta;
    let fit = fit_beta(&targets, &model.bio, &model.threshold, dt, cfg)?;
    let result = BetaCalibration {
        target_file: target.display().to_string(),
        bio: model.bio,
        grid_dt: dt,
        config: cfg.clone(),
        fit,
    };
    write_json_file(out, &result)?;
    Ok(result)
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEvaluation {
    pub v0: f64,
    pub std_error: f64,
    pub mean_tau: f64,
    pub n_eval: usize,
    pub eval_seed: u64,
}

/// A trained rule with everything needed to rebuild its observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub rule: StoppingRule,
    pub mode: ModelMode,
    pub c_tr: f64,
    pub model: FarmModel,
    pub solver: SolverConfig,
    pub n_train: usize,
    pub train_seed: u64,
    pub evaluation: Option<RuleEvaluation>,
}

impl RuleFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Trains a rule for `mode` and evaluates it on fresh paths.
pub fn cmd_solve(config: &Config, mode: ModelMode, out: &Path) -> Result<RuleFile> {
    let model = config.model();
    let exp = Experiment::new(&model, &config.experiment())?;
    let c_tr = model.costs.c_tr;
    let rule = exp.train(mode, c_tr)?;
    let ev = exp.evaluate(&rule, c_tr)?;
    let file = RuleFile {
        rule,
        mode,
        c_tr,
        model,
        solver: config.solver,
        n_train: config.global.n_paths,
        train_seed: config.global.seed,
        evaluation: Some(RuleEvaluation {
            v0: ev.value(),
            std_error: ev.std_error(),
            mean_tau: ev.mean_stopping_time(),
            n_eval: ev.n_paths(),
            eval_seed: config.global.eval_seed,
        }),
    };
    write_json_file(out, &file)?;
    Ok(file)
}

/// Compares two saved rules on `eval_paths` fresh paths drawn with `eval_seed`.
pub fn cmd_compare(
    a: &RuleFile,
    b: &RuleFile,
    eval_paths: usize,
    eval_seed: u64,
    chunk: usize,
    out: &Path,
) -> Result<ComparisonReport> {
    if a.model != b.model || a.c_tr != b.c_tr || a.n_train != b.n_train || a.train_seed != b.train_seed {
        return Err(Error::param(
            "rules",
            "rules were trained on different models, treatment costs or training paths",
        ));
    }
    if eval_seed == a.train_seed {
        return Err(Error::param("seed", "evaluation seed must differ from the training seed"));
    }
    let model = a.model.with_treatment_cost(a.c_tr);
    let (_, curves) = pilot_curves(&model, a.n_train, a.train_seed)?;
    let sim = WorldSimulator::new(&model, &curves)?;
    let chunk = chunk.max(1);
    let worlds: Vec<_> = (0..eval_paths)
        .step_by(chunk)
        .map(|first| sim.simulate(first as u64, chunk.min(eval_paths - first), eval_seed))
        .collect();
    let (report, paths) = compare_rules(&a.rule, &b.rule, &worlds, &model, &curves)?;
    std::fs::create_dir_all(out)?;
    write_json_file(&out.join("report.json"), &report)?;
    write_paths_csv(&out.join("stopping_times.csv"), &paths)?;
    Ok(report)
}

fn path_rows(paths: &[PathComparison]) -> impl Iterator<Item = Vec<String>> + '_ {
    paths.iter().map(|p| {
        vec![
            p.path.to_string(),
            f(p.tau_stoch),
            f(p.tau_determ),
            f(p.payoff_stoch),
            f(p.payoff_determ),
        ]
    })
}

const PATH_HEADER: [&str; 5] = ["path", "tau_stoch", "tau_determ", "payoff_stoch", "payoff_determ"];

fn write_paths_csv(path: &Path, paths: &[PathComparison]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PATH_HEADER)?;
    for r in path_rows(paths) {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub source: String,
    pub n_records: usize,
    pub skipped_rows: usize,
    pub n_periods: usize,
    pub n_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub ingest: IngestSummary,
    pub lambda: LambdaFitResult,
    pub beta: BetaFitResult,
    /// One comparison per feeding mode at the configured treatment cost.
    pub comparisons: Vec<ComparisonReport>,
    /// Comparisons over the treatment-cost sensitivity list.
    pub sensitivity: Vec<ComparisonReport>,
}

/// Where the pipeline reads lice data from.
#[derive(Debug, Clone, PartialEq)]
pub enum LiceSource {
    /// Corpus generated from the configured model (`[synthetic]` section).
    Synthetic,
    File(PathBuf),
}

struct Ingested {
    summary: IngestSummary,
    periods: Vec<FarmingPeriod>,
    segments: Vec<crate::ingest::GreenSegment>,
}

fn stage_ingest(run: &mut Run, config: &Config, source: &LiceSource) -> Result<Ingested> {
    let model = config.model();
    let (records, skipped, label) = match source {
        LiceSource::Synthetic => {
            let corpus = generate_corpus(&model.bio, &model.threshold, &model.euler_grid()?, &config.synthetic)?;
            run.write_with("lice_records.csv", |w| write_lice(&corpus.records, w))?;
            (corpus.records, 0, "synthetic".to_string())
        }
        LiceSource::File(path) => {
            let schema = match &config.ingest.schema {
                Some(p) => Schema::from_toml_file(p)?,
                None => Schema::default(),
            };
            let parsed = parse_lice_file(path, &schema)?;
            (parsed.records, parsed.skipped_rows, path.display().to_string())
        }
    };
    let opts = PeriodOptions { gap_weeks: config.ingest.gap_weeks };
    let periods = select_mechanical_only_periods(&records, &config.ingest.region, &opts);
    if periods.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no mechanical-only farming periods in region `{}`",
            config.ingest.region
        )));
    }
    let segments = extract_green_segments(&periods);
    if segments.is_empty() {
        return Err(Error::EmptyInput("no green segments before a first removal".into()));
    }
    let rows = periods.iter().enumerate().flat_map(|(i, p)| {
        let start = crate::ingest::week_index(p.start.0, p.start.1).expect("valid start");
        p.records.iter().map(move |r| {
            let k = crate::ingest::week_index(r.year, r.week).expect("valid week") - start;
            vec![
                p.locality_id.clone(),
                i.to_string(),
                k.to_string(),
                f(k as f64 / 52.0),
                r.adult_female_lpf.map(f).unwrap_or_default(),
                (r.mechanical as u8).to_string(),
            ]
        })
    });
    run.write_csv(
        "lice_trajectories.csv",
        &["locality_id", "period", "week", "t", "lpf", "mechanical"],
        rows,
    )?;
    run.write_with("segments.csv", |w| write_segments_csv(&segments, w))?;
    let summary = IngestSummary {
        source: label,
        n_records: records.len(),
        skipped_rows: skipped,
        n_periods: periods.len(),
        n_segments: segments.len(),
    };
    run.write_json("ingest.json", &summary)?;
    Ok(Ingested { summary, periods, segments })
}

/// Rules trained for one feeding mode.
pub struct TrainedPair {
    pub feeding: FeedingMode,
    pub stoch: StoppingRule,
    pub determ: StoppingRule,
}

/// Trains both mortality models for every configured feeding mode and writes
/// the rule files.
pub fn solve_rules(run: &mut Run, config: &Config, exp: &Experiment) -> Result<Vec<TrainedPair>> {
    let c_tr = config.costs.c_tr;
    let mut out = Vec::new();
    for &feeding in &config.compare.feeding {
        let stoch = exp.train(ModelMode::new(Mortality::Stochastic, feeding), c_tr)?;
        let determ = exp.train(ModelMode::new(Mortality::Deterministic, feeding), c_tr)?;
        for rule in [&stoch, &determ] {
            let mode = rule.mode.expect("trained rules carry a mode");
            let file = RuleFile {
                rule: rule.clone(),
                mode,
                c_tr,
                model: exp.model.clone(),
                solver: config.solver,
                n_train: config.global.n_paths,
                train_seed: config.global.seed,
                evaluation: None,
            };
            run.write_json(&format!("rule_{}_{}.json", mode.mortality, mode.feeding), &file)?;
        }
        out.push(TrainedPair { feeding, stoch, determ });
    }
    Ok(out)
}

/// Compares each trained pair on the evaluation world, then reruns the
/// comparison over the treatment-cost sensitivity list.
pub fn compare_all(
    run: &mut Run,
    config: &Config,
    exp: &Experiment,
    pairs: &[TrainedPair],
) -> Result<(Vec<ComparisonReport>, Vec<ComparisonReport>)> {
    let mut base = Vec::new();
    for pair in pairs {
        let (report, paths) = exp.compare_rules(&pair.stoch, &pair.determ, config.costs.c_tr)?;
        run.write_csv(&format!("stopping_times_{}.csv", pair.feeding), &PATH_HEADER, path_rows(&paths))?;
        base.push(report);
    }
    let mut sensitivity = Vec::new();
    for &c in &config.compare.c_tr_sensitivity {
        for &feeding in &config.compare.feeding {
            sensitivity.push(exp.compare(feeding, c)?.0);
        }
    }
    Ok((base, sensitivity))
}

/// Ingest, calibrate, simulate, solve both mortality models and compare them.
pub fn cmd_pipeline(config: &Config, source: &LiceSource, out: &Path) -> Result<PipelineReport> {
    let mut run = Run::create(out, "pipeline", config)?;
    run.add_seed("beta_fit", config.calibration.beta.seed);
    if *source == LiceSource::Synthetic {
        run.add_seed("synthetic", config.synthetic.seed);
    }
    let data = run.stage("ingest", |run| stage_ingest(run, config, source))?;

    let mut calibrated = config.clone();
    let (lambda, beta) = run.stage("calibrate", |run| {
        let model = config.model();
        let grid = model.euler_grid()?;
        let lambda = fit_lambda(&data.segments, &model.bio, &grid)?;
        let bio = BioParams { lambda_rep: lambda.lambda_rep, ..model.bio };
        let targets = config
            .calibration
            .t_match
            .iter()
            .map(|&t| removal_distribution_at(&data.periods, t))
            .collect::<Result<Vec<_>>>()?;
        let beta = fit_beta(&targets, &bio, &model.threshold, grid.uniform_step()?, &config.calibration.beta)?;
        run.write_json("calibration.json", &(&lambda, &beta))?;
        Ok((lambda, beta))
    })?;
    calibrated.set_bio(&BioParams {
        lambda_rep: lambda.lambda_rep,
        beta1: beta.beta1,
        beta2: beta.beta2,
        ..config.model().bio
    });
    run.manifest.config = calibrated.clone();

    let exp = run.stage("simulate", |run| {
        let exp = Experiment::new(&calibrated.model(), &calibrated.experiment())?;
        let hp = &exp.pilot;
        let grid = hp.grid.times();
        let k = calibrated.compare.sample_paths.min(hp.n_paths);
        let rows = (0..k).flat_map(|p| {
            (0..grid.len()).map(move |i| {
                let (h, q) = (hp.host_path(p)[i], hp.parasite_path(p)[i]);
                vec![
                    p.to_string(),
                    f(grid[i]),
                    f(h),
                    f(q),
                    f(q / h),
                    hp.removal_path(p)[i].to_string(),
                ]
            })
        });
        run.write_csv("sample_trajectories.csv", &["path", "t", "host", "parasite", "lpf", "removals"], rows)?;
        let dt = hp.grid.uniform_step()?;
        for &t in &calibrated.compare.histogram_times {
            let model_counts = simulate_removal_counts(
                &calibrated.model().bio,
                &calibrated.model().threshold,
                dt,
                &[t],
                hp.n_paths,
                calibrated.global.seed,
            )?
            .remove(0);
            let model_dist = RemovalDistribution::from_counts(t, model_counts)?;
            let data_dist = removal_distribution_at(&data.periods, t)?;
            let (mh, dh) = (model_dist.histogram(), data_dist.histogram());
            let top = mh.len().max(dh.len());
            let share = |h: &[(u32, usize)], c: usize, n: usize| h.get(c).map_or(0.0, |x| x.1 as f64 / n as f64);
            let rows = (0..top).map(|c| {
                vec![
                    c.to_string(),
                    f(share(&mh, c, model_dist.counts.len())),
                    f(share(&dh, c, data_dist.counts.len())),
                ]
            });
            run.write_csv(&format!("removal_histogram_t{t}.csv"), &["count", "model", "data"], rows)?;
        }
        Ok(exp)
    })?;

    let pairs = run.stage("solve", |run| solve_rules(run, &calibrated, &exp))?;
    let (comparisons, sensitivity) = run.stage("compare", |run| compare_all(run, &calibrated, &exp, &pairs))?;
    let report = PipelineReport {
        ingest: data.summary,
        lambda,
        beta,
        comparisons,
        sensitivity,
    };
    run.write_json("report.json", &report)?;
    run.finish()?;
    Ok(report)
}
