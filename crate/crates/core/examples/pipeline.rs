//! End-to-end run on a synthetic lice corpus, writing every output file into
//! a run directory.
//!
//! cargo run --release --example pipeline -- [out_dir]

use std::path::PathBuf;

use aquaval::config::Config;
use aquaval::pipeline::{cmd_pipeline, LiceSource};

fn main() -> aquaval::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aquaval-pipeline"));
    let config = Config::from_toml_str("[global]\nn_paths = 4096\neval_paths = 16384\n")?;
    let report = cmd_pipeline(&config, &LiceSource::Synthetic, &out)?;
    println!(
        "lambda {:.4}, beta ({:.4}, {:.4}); {} segments",
        report.lambda.lambda_rep, report.beta.beta1, report.beta.beta2, report.ingest.n_segments
    );
    for c in &report.comparisons {
        println!("{} feeding: RI {:.4}, E[tau] {:.3} / {:.3}", c.feeding, c.ri, c.mean_tau_stoch, c.mean_tau_determ);
    }
    println!("outputs in {}", out.display());
    Ok(())
}
