//! Least squares through a thin QR of the design followed by an SVD of the
//! triangular factor, with relative singular-value truncation and optional
//! Tikhonov damping.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresFit {
    pub rank: usize,
    pub n_features: usize,
    /// Ratio of the largest to the smallest retained singular value.
    pub condition: f64,
    pub ridge_applied: bool,
}

/// Solves `min ‖X β − y‖` and returns `β`. Singular values below
/// `cutoff · σ_max` are dropped; with `ridge = Some(λ)` the retained ones are
/// damped by `σ² / (σ² + λ σ_max²)`.
pub fn solve_least_squares(
    design: DMatrix<f64>,
    target: &[f64],
    cutoff: f64,
    ridge: Option<f64>,
    date: usize,
) -> Result<(Vec<f64>, LeastSquaresFit)> {
    let (n, m) = design.shape();
    if target.len() != n {
        return Err(Error::ShapeMismatch(format!("design has {n} rows, target {}", target.len())));
    }
    if n < m {
        return Err(Error::RankCollapse {
            date,
            detail: format!("{n} samples for {m} features"),
        });
    }
    let qr = design.qr();
    let mut qty = DVector::from_column_slice(target);
    qr.q_tr_mul(&mut qty);
    let r = qr.r();
    let c = qty.rows(0, m).into_owned();
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => {
            return Err(Error::RankCollapse {
                date,
                detail: "singular value decomposition failed".into(),
            })
        }
    };
    let s = &svd.singular_values;
    let smax = s.max();
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::RankCollapse {
            date,
            detail: format!("design has largest singular value {smax}"),
        });
    }
    let utc = u.transpose() * c;
    let mut scaled = DVector::zeros(m);
    let mut rank = 0;
    let mut smin = smax;
    for i in 0..m {
        let si = s[i];
        if si > cutoff * smax {
            rank += 1;
            smin = smin.min(si);
            scaled[i] = match ridge {
                Some(lambda) => si / (si * si + lambda * smax * smax) * utc[i],
                None => utc[i] / si,
            };
        }
    }
    let beta = v_t.transpose() * scaled;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::RankCollapse {
            date,
            detail: "non-finite coefficients".into(),
        });
    }
    Ok((
        beta.iter().copied().collect(),
        LeastSquaresFit {
            rank,
            n_features: m,
            condition: smax / smin,
            ridge_applied: ridge.is_some(),
        },
    ))
}
