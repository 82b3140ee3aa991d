//! Trains stochastic- and deterministic-mortality harvesting rules and
//! compares them on a common stochastic evaluation world.
//!
//! cargo run --release --example compare_rules -- [n_train] [n_eval]

use std::time::Instant;

use aquaval::economics::FeedingMode;
use aquaval::experiment::{Experiment, ExperimentConfig};
use aquaval::world::FarmModel;

fn main() -> aquaval::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let config = ExperimentConfig {
        n_train: args.first().copied().unwrap_or(4096),
        n_eval: args.get(1).copied().unwrap_or(20 * 4096),
        ..Default::default()
    };
    let t0 = Instant::now();
    let exp = Experiment::new(&FarmModel::default(), &config)?;
    println!("simulated worlds in {:.1?}", t0.elapsed());
    for feeding in [FeedingMode::Stochastic, FeedingMode::Deterministic] {
        for c_tr in [0.01, 0.015, 0.02] {
            let (r, _) = exp.compare(feeding, c_tr)?;
            println!(
                "feeding={feeding:<6} c_tr={c_tr:<5} V0 stoch={:.0} ± {:.0}  determ={:.0} ± {:.0}  RI={:.4} (±{:.4})  E[tau] {:.3} / {:.3}",
                r.v0_stoch,
                r.v0_stoch_se,
                r.v0_determ,
                r.v0_determ_se,
                r.ri,
                r.difference_se / r.v0_determ,
                r.mean_tau_stoch,
                r.mean_tau_determ
            );
        }
    }
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
