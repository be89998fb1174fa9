//! Poisson building blocks shared by the model, estimation and test code.
//!
//! Everything is evaluated in log space so that counts well beyond 30 do not
//! underflow. Infinite Poisson-weighted sums are truncated with the usual
//! geometric bound on the upper tail: for `k + 1 > mu`,
//! `P(N > k) <= p_k * mu / (k + 1 - mu)`.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default tail tolerance for every truncated series in the model.
pub const SERIES_TOL: f64 = 1e-12;

/// Hard cap on the number of terms any truncated series may take.
pub const MAX_SERIES_TERMS: usize = 1_000_000;

const LN_FACT_TABLE: usize = 1024;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0;
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(k!)`.
#[inline]
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < LN_FACT_TABLE {
        ln_fact_table()[k as usize]
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Log of the Poisson(mu) mass at `k`. A zero mean puts all mass on 0.
#[inline]
pub fn ln_pmf(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

#[inline]
pub fn pmf(mu: f64, k: u64) -> f64 {
    ln_pmf(mu, k).exp()
}

/// Iterates `(k, P(N = k))` for `N ~ Poisson(mu)` until the remaining upper
/// tail is certified below `tol` and `k >= min_k`.
#[derive(Debug, Clone)]
pub struct PoissonTerms {
    mu: f64,
    ln_mu: f64,
    tol: f64,
    min_k: u64,
    k: u64,
    ln_p: f64,
    done: bool,
}

impl PoissonTerms {
    pub fn new(mu: f64, tol: f64) -> Self {
        Self::with_min(mu, tol, 0)
    }

    /// Like [`PoissonTerms::new`] but never stops before `min_k`.
    pub fn with_min(mu: f64, tol: f64, min_k: u64) -> Self {
        Self {
            mu,
            ln_mu: mu.ln(),
            tol,
            min_k,
            k: 0,
            ln_p: -mu,
            done: false,
        }
    }

    /// Upper bound on `P(N > k)` given `p_k`.
    #[inline]
    fn tail_bound(&self, k: u64, p: f64) -> f64 {
        let denom = k as f64 + 1.0 - self.mu;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            p * self.mu / denom
        }
    }
}

impl Iterator for PoissonTerms {
    type Item = (u64, f64);

    fn next(&mut self) -> Option<(u64, f64)> {
        if self.done {
            return None;
        }
        let k = self.k;
        let p = self.ln_p.exp();
        if self.mu == 0.0 {
            self.done = true;
            return Some((0, 1.0));
        }
        if k >= self.min_k && self.tail_bound(k, p) < self.tol {
            self.done = true;
        }
        self.k += 1;
        self.ln_p += self.ln_mu - (self.k as f64).ln();
        Some((k, p))
    }
}

/// Sums `f(k) * P(N = k)` with `0 <= f <= f_max` so that the neglected part is
/// below `tol`. Returns a truncation error if the term cap is hit.
pub fn expect<F>(mu: f64, tol: f64, f_max: f64, mut f: F) -> Result<f64>
where
    F: FnMut(u64) -> f64,
{
    let scaled = if f_max > 0.0 { tol / f_max } else { tol };
    let mut sum = 0.0;
    for (i, (k, p)) in PoissonTerms::new(mu, scaled).enumerate() {
        if i >= MAX_SERIES_TERMS {
            return Err(Error::Truncation {
                iterations: i,
                partial_sum: sum,
            });
        }
        sum += p * f(k);
    }
    Ok(sum)
}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
