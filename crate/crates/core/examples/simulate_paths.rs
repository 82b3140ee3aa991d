//! Two-factor salmon and soy price paths: Monte Carlo means against the
//! closed-form expected spot.

use aquaval::commodity::{expected_spot, simulate_two_factor};
use aquaval::grid::TimeGrid;
use aquaval::rng::StreamRole;
use aquaval::world::FarmModel;

fn main() -> aquaval::Result<()> {
    let model = FarmModel::default();
    let grid = TimeGrid::uniform(3.0, 37)?;
    let n = 20 * 4096;
    for (name, params, role) in [
        ("salmon", model.salmon, StreamRole::Salmon),
        ("soy", model.soy, StreamRole::Soy),
    ] {
        let paths = simulate_two_factor(&params, model.r, &grid, n, 11, role)?;
        println!("{name}: S0 = {}", params.s0);
        for t in [1.0, 2.0, 3.0] {
            let i = grid.nearest_index(t);
            let mc = (0..n).map(|p| paths.spot_at(p, i)).sum::<f64>() / n as f64;
            let exact = expected_spot(&params, model.r, t)?;
            println!("  t={t}: MC {mc:.4}  closed form {exact:.4}  rel.err {:.2e}", (mc / exact - 1.0).abs());
        }
    }
    Ok(())
}
