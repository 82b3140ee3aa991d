use serde::{Deserialize, Serialize};

/// Regression basis: monomials up to `degree` in the standardized state,
/// optionally the standardized immediate payoff and its products with the
/// linear state terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub degree: u32,
    pub include_payoff: bool,
    pub payoff_interactions: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            include_payoff: true,
            payoff_interactions: false,
        }
    }
}

/// Monomials of total degree `1..=degree` in `d` variables, as sorted index lists.
pub(crate) fn monomials(d: usize, degree: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(d: usize, start: usize, left: u32, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..d {
            current.push(i);
            out.push(current.clone());
            if left > 1 {
                rec(d, i, left - 1, current, out);
            }
            current.pop();
        }
    }
    if degree > 0 {
        rec(d, 0, degree, &mut current, &mut out);
    }
    out.sort_by_key(|m| m.len());
    out
}

/// Expands standardized inputs into a feature row.
#[derive(Debug, Clone)]
pub(crate) struct FeatureMap {
    config: FeatureConfig,
    state_dim: usize,
    monomials: Vec<Vec<usize>>,
}

impl FeatureMap {
    pub fn new(config: FeatureConfig, state_dim: usize) -> Self {
        Self {
            config,
            state_dim,
            monomials: monomials(state_dim, config.degree),
        }
    }

    pub fn len(&self) -> usize {
        1 + self.monomials.len()
            + self.config.include_payoff as usize
            + if self.config.payoff_interactions { self.state_dim } else { 0 }
    }

    pub fn fill(&self, z: &[f64], payoff: f64, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        for m in &self.monomials {
            out.push(m.iter().map(|&i| z[i]).product());
        }
        if self.config.include_payoff {
            out.push(payoff);
        }
        if self.config.payoff_interactions {
            out.extend(z.iter().map(|&zi| payoff * zi));
        }
    }
}
