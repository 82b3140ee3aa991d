//! Payoff of harvesting at each exercise date when every input is replaced by
//! its mean, and the date that maximises it.

use aquaval::biology::deterministic_counterpart;
use aquaval::commodity::{expected_spot, mean_relative_spot_curve};
use aquaval::economics::{cumulative_feeding, feeding_cost_curve, harvest_payoff};
use aquaval::grid::exercise_schedule;
use aquaval::world::{pilot_curves, FarmModel};

fn main() -> aquaval::Result<()> {
    let model = FarmModel::default();
    let grid = model.euler_grid()?;
    let (paths, _) = pilot_curves(&model, 2000, 1)?;
    let curves = deterministic_counterpart(&paths, model.costs.c_tr)?;
    let soy = mean_relative_spot_curve(&model.soy, model.r, &grid)?;
    let feed = feeding_cost_curve(&soy, model.costs.f0)?;
    let cf = cumulative_feeding(&feed, &curves.host, &model.growth, model.costs.conv, model.r, &grid)?;
    let mut best = (0.0, f64::MIN);
    for (k, (i, t)) in exercise_schedule(&grid, model.horizon, model.n_exercise)?.into_iter().enumerate() {
        let s = expected_spot(&model.salmon, model.r, t)?;
        let v = harvest_payoff(t, s, curves.host[i], curves.treatment_cost[i], cf[i], &model.growth, model.costs.h0, model.r);
        if k % 6 == 5 {
            println!("t={t:.3}  E[S]={s:7.3}  E[H]={:7.1}  payoff={v:10.0}", curves.host[i]);
        }
        if v > best.1 {
            best = (t, v);
        }
    }
    println!("best deterministic harvest date {:.3} with payoff {:.0}", best.0, best.1);
    Ok(())
}
