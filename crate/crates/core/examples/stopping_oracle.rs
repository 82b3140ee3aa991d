//! Regression stopping rule against exact dynamic programming on small
//! random Markov chains.

use aquaval::stopping::{dp_oracle, evaluate_rule, solve_rule, MarkovChain, SolverConfig};
use rand::SeedableRng;

fn main() -> aquaval::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for i in 0..5 {
        let chain = MarkovChain::random(5, 4, &mut rng);
        let exact = dp_oracle(&chain)?.value;
        let train = chain.sample_paths(1 << 16, 100 + i)?;
        let rule = solve_rule(&train, &SolverConfig::default())?;
        let test = chain.sample_paths(1 << 16, 200 + i)?;
        let ev = evaluate_rule(&rule, &test, None)?;
        println!(
            "chain {i}: oracle {exact:.5}  in-sample {:.5}  out-of-sample {:.5} ± {:.5}",
            rule.in_sample_value,
            ev.value(),
            ev.std_error()
        );
    }
    Ok(())
}
