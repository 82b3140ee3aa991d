//! Fits treatment-effectiveness shapes so that simulated removal counts match
//! a target distribution produced by the model with known shapes.

use aquaval::biology::{simulate_removal_counts, BioParams};
use aquaval::calibrate::{fit_beta, BetaFitConfig};
use aquaval::ingest::RemovalDistribution;
use aquaval::world::FarmModel;

fn main() -> aquaval::Result<()> {
    let model = FarmModel::default();
    let dt = model.euler_grid()?.uniform_step()?;
    let truth = BioParams { beta1: 0.1, beta2: 0.05, ..model.bio };
    let counts = simulate_removal_counts(&truth, &model.threshold, dt, &[1.77], 1000, 99)?.remove(0);
    let target = RemovalDistribution::from_counts(1.77, counts)?;
    println!("target: mean {:.3}, std {:.3}", target.mean, target.std);
    let fit = fit_beta(&[target], &model.bio, &model.threshold, dt, &BetaFitConfig::default())?;
    println!(
        "fit: beta1 = {:.4}, beta2 = {:.4}, model mean {:.3}, std {:.3}, {} evaluations",
        fit.beta1, fit.beta2, fit.model_mean[0], fit.model_std[0], fit.evaluations
    );
    Ok(())
}
