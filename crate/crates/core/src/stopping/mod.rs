//! Optimal harvesting by regression-based backward induction, and the
//! pathwise comparison of stochastic- and deterministic-mortality rules.

mod compare;
mod features;
mod oracle;
mod regression;
mod rule;

pub use compare::{compare_rules, ComparisonReport, PathComparison};
pub use features::FeatureConfig;
pub use oracle::{dp_oracle, MarkovChain, OracleSolution};
pub use regression::{solve_least_squares, LeastSquaresFit};
pub use rule::{evaluate_rule, solve_rule, DateRegression, Evaluation, SolverConfig, StoppingRule};
