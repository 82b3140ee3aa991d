//! Host-parasite paths with threshold-triggered treatments.

use aquaval::biology::{deterministic_counterpart, simulate_host_parasite};
use aquaval::world::FarmModel;

fn main() -> aquaval::Result<()> {
    let model = FarmModel::default();
    let grid = model.euler_grid()?;
    let set = simulate_host_parasite(&model.bio, &model.threshold, &grid, 1000, 3)?;
    let curves = deterministic_counterpart(&set, model.costs.c_tr)?;
    for t in [0.5, 1.09, 1.77, 3.0] {
        let i = grid.nearest_index(t);
        println!(
            "t={t:<5} E[N]={:6.3}  E[H]={:8.1}  E[CT]={:.4}",
            curves.removals[i], curves.host[i], curves.treatment_cost[i]
        );
    }
    println!("first path treatments:");
    for e in set.events[0].iter().take(8) {
        println!("  t={:.3}  host x{:.4}  lice x{:.3}", e.time, e.x_factor, e.y_factor);
    }
    Ok(())
}
