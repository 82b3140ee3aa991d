//! Fits the lice reproduction rate to green segments of a synthetic corpus
//! generated with known parameters.

use aquaval::calibrate::fit_lambda;
use aquaval::ingest::{extract_green_segments, select_mechanical_only_periods, PeriodOptions};
use aquaval::synthetic::{generate_corpus, CorpusConfig};
use aquaval::world::FarmModel;

fn main() -> aquaval::Result<()> {
    let model = FarmModel::default();
    let grid = model.euler_grid()?;
    for noise in [0.0, 0.1] {
        let cfg = CorpusConfig { noise, ..Default::default() };
        let corpus = generate_corpus(&model.bio, &model.threshold, &grid, &cfg)?;
        let periods = select_mechanical_only_periods(&corpus.records, &cfg.region, &PeriodOptions::default());
        let segments = extract_green_segments(&periods);
        let fit = fit_lambda(&segments, &model.bio, &grid)?;
        println!(
            "noise {noise}: {} segments, {} points, lambda = {:.5} (true {})",
            segments.len(),
            fit.n_points,
            fit.lambda_rep,
            model.bio.lambda_rep
        );
    }
    Ok(())
}
