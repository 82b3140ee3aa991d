//! Beta-distribution quantile by safeguarded Halley iteration on the
//! regularised incomplete beta function.
//!
//! Treatment effectiveness is drawn by inversion so that a fixed uniform
//! stream maps to draws that move continuously with the shape parameters.

use statrs::function::beta::{beta_reg, ln_beta};

#[derive(Debug, Clone, Copy)]
pub struct BetaQuantile {
    a: f64,
    b: f64,
    ln_b: f64,
    // Tail split used for the starting guess.
    lower_mass: f64,
    w: f64,
}

impl BetaQuantile {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a > 0.0 && b > 0.0, "beta shapes must be positive");
        let ln_b = ln_beta(a, b);
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let w = t + (b * lnb).exp() / b;
        Self {
            a,
            b,
            ln_b,
            lower_mass: t / w,
            w,
        }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    fn initial_guess(&self, u: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if a >= 1.0 && b >= 1.0 {
            // Normal approximation to the quantile as a starting point.
            let pp = if u < 0.5 { u } else { 1.0 - u };
            let t = (-2.0 * pp.ln()).sqrt();
            let mut x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
            if u < 0.5 {
                x = -x;
            }
            let al = (x * x - 3.0) / 6.0;
            let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
            let w = x * (al + h).sqrt() / h
                - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
            a / (a + b * (2.0 * w).exp())
        } else if u <= self.lower_mass {
            (a * self.w * u).powf(1.0 / a)
        } else {
            1.0 - (b * self.w * (1.0 - u)).powf(1.0 / b)
        }
    }

    /// Smallest `x` with `F(x) ≥ u`, to about `1e-12` relative accuracy.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        if u > self.lower_mass {
            // Solve for 1 - x on the mirrored distribution to keep relative
            // precision near the upper end.
            let mirror = Self {
                a: self.b,
                b: self.a,
                ln_b: self.ln_b,
                lower_mass: 1.0 - self.lower_mass,
                w: self.w,
            };
            return 1.0 - mirror.solve(1.0 - u);
        }
        self.solve(u)
    }

    fn solve(&self, u: f64) -> f64 {
        // F(x) = x^a / (a B(a, b)) · (1 + O(x)); the incomplete beta
        // evaluation underflows to zero well before this stops being exact.
        let tail = ((u.ln() + self.a.ln() + self.ln_b) / self.a).exp();
        if tail < 1e-10 {
            return tail;
        }
        let (a1, b1) = (self.a - 1.0, self.b - 1.0);
        let mut x = self.initial_guess(u);
        // Deep in a tail the leading-order expansion is already exact to
        // double precision.
        if x <= 1e-200 || x >= 1.0 - 1e-15 {
            return x.clamp(0.0, 1.0);
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for it in 0..50 {
            if x <= 0.0 || x >= 1.0 {
                return x.clamp(0.0, 1.0);
            }
            let err = beta_reg(self.a, self.b, x) - u;
            if err < 0.0 {
                lo = lo.max(x);
            } else {
                hi = hi.min(x);
            }
            let dens = (a1 * x.ln() + b1 * (1.0 - x).ln() - self.ln_b).exp();
            if !(dens.is_finite() && dens > 0.0) {
                break;
            }
            let step = err / dens;
            let corr = 1.0 - 0.5 * (step * (a1 / x - b1 / (1.0 - x))).min(1.0);
            let t = step / corr;
            let mut next = x - t;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let moved = (next - x).abs();
            x = next;
            if moved <= 1e-13 * x.max(1e-300) && it > 0 {
                break;
            }
        }
        x
    }
}
