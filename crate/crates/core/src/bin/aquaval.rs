use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aquaval::config::Config;
use aquaval::economics::{FeedingMode, Mortality};
use aquaval::pipeline::{self, LiceSource, RuleFile};
use aquaval::world::ModelMode;

#[derive(Parser)]
#[command(name = "aquaval", version, about = "Salmon farm harvesting under stochastic lice mortality")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Training / simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training / simulation paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    eval_paths: Option<usize>,
    #[arg(long, global = true)]
    region: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the stochastic world and write exercise-date paths.
    Simulate {
        #[arg(long, default_value = "runs/simulate")]
        out: PathBuf,
    },
    /// Fit model parameters to data.
    Calibrate {
        #[command(subcommand)]
        what: CalibrateCommand,
    },
    /// Train a harvesting rule and evaluate it on fresh paths.
    Solve {
        #[arg(long, default_value = "stoch")]
        mode: Mortality,
        #[arg(long, default_value = "stoch")]
        feeding: FeedingMode,
        #[arg(long, default_value = "rule.json")]
        out: PathBuf,
    },
    /// Compare two saved rules on common evaluation paths.
    Compare {
        #[arg(long, num_args = 2, value_names = ["STOCH", "DETERM"])]
        rules: Vec<PathBuf>,
        #[arg(long, default_value = "runs/compare")]
        out: PathBuf,
    },
    /// Ingest, calibrate, simulate, solve and compare in one run.
    Pipeline {
        /// Use a model-generated lice corpus instead of a data file.
        #[arg(long, conflicts_with = "data")]
        synthetic: bool,
        /// Weekly lice export.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "runs/pipeline")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CalibrateCommand {
    /// Fit the lice reproduction rate to green segments.
    Lambda {
        #[arg(long)]
        segments: PathBuf,
        #[arg(long, default_value = "lambda.json")]
        out: PathBuf,
    },
    /// Fit the treatment-effectiveness beta shapes to removal counts.
    Beta {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, default_value = "beta.json")]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> aquaval::Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    if let Some(s) = c.seed {
        cfg.global.seed = s;
        if cfg.global.eval_seed == s {
            cfg.global.eval_seed = s.wrapping_add(1);
        }
    }
    if let Some(n) = c.paths {
        cfg.global.n_paths = n;
    }
    if let Some(n) = c.eval_paths {
        cfg.global.eval_paths = n;
    }
    if let Some(r) = &c.region {
        cfg.ingest.region = r.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> aquaval::Result<()> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { out } => {
            let s = pipeline::cmd_simulate(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Calibrate { what } => match what {
            CalibrateCommand::Lambda { segments, out } => {
                let r = pipeline::cmd_calibrate_lambda(&cfg, &segments, &out)?;
                println!("lambda = {} (sse {}, {} points)", r.fit.lambda_rep, r.fit.sse, r.fit.n_points);
            }
            CalibrateCommand::Beta { target, lambda, zeta, out } => {
                if let Some(l) = lambda {
                    cfg.biology.lambda_rep = l;
                }
                if let Some(z) = zeta {
                    cfg.calibration.beta.zeta = z;
                }
                if let Some(n) = cli.common.paths {
                    cfg.calibration.beta.n_paths = n;
                }
                if let Some(s) = cli.common.seed {
                    cfg.calibration.beta.seed = s;
                }
                let r = pipeline::cmd_calibrate_beta(&cfg, &target, &out)?;
                println!(
                    "beta1 = {}, beta2 = {} (objective {}{})",
                    r.fit.beta1,
                    r.fit.beta2,
                    r.fit.objective,
                    if r.fit.at_bound { ", at search bound" } else { "" }
                );
            }
        },
        Command::Solve { mode, feeding, out } => {
            let r = pipeline::cmd_solve(&cfg, ModelMode::new(mode, feeding), &out)?;
            if let Some(e) = r.evaluation {
                println!("V0 = {:.0} ± {:.0}, E[tau] = {:.3} over {} paths", e.v0, e.std_error, e.mean_tau, e.n_eval);
            }
        }
        Command::Compare { rules, out } => {
            let a = RuleFile::load(&rules[0])?;
            let b = RuleFile::load(&rules[1])?;
            let seed = cli.common.seed.unwrap_or(cfg.global.eval_seed);
            let r = pipeline::cmd_compare(&a, &b, cfg.global.eval_paths, seed, cfg.global.chunk, &out)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Pipeline { synthetic, data, out } => {
            let source = match (synthetic, data.or(cfg.ingest.data.clone())) {
                (true, _) => LiceSource::Synthetic,
                (false, Some(p)) => LiceSource::File(p),
                (false, None) => {
                    return Err(aquaval::Error::param("data", "pass --data <file> or --synthetic"));
                }
            };
            let r = pipeline::cmd_pipeline(&cfg, &source, &out)?;
            for c in r.comparisons.iter().chain(&r.sensitivity) {
                println!(
                    "feeding={} c_tr={} RI={:.4} V0 {:.0}/{:.0} E[tau] {:.3}/{:.3}",
                    c.feeding, c.c_tr, c.ri, c.v0_stoch, c.v0_determ, c.mean_tau_stoch, c.mean_tau_determ
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
