//! Conditional law of `X` given `Y = y` under Sub-Model II.
//!
//! With `theta = lambda1 e^{-lambda3}`:
//! * `y = 0`: `X | Y = 0 ~ Poisson(theta)`;
//! * `y >= 1`: `P(X = x | Y = y) = e^{-theta} theta^x x^y / (x! mu_y)` for
//!   `x >= 1`, where `mu_y = sum_j S(y, j) theta^j` is the `y`-th raw moment
//!   of Poisson(theta) and `S` are Stirling numbers of the second kind.
//!   At `y = 1` this is one plus a Poisson(theta) variable.

use super::Params;
use crate::error::{Error, Result};
use crate::poisson::{self, ln_factorial, log_sum_exp};

/// Stirling number of the second kind `S(n, k)`; `None` when the recurrence
/// overflows `u128`.
pub fn stirling2(n: u32, k: u32) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let (n, k) = (n as usize, k as usize);
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = (j as u128).checked_mul(row[j])?.checked_add(row[j - 1])?;
        }
        row[0] = 0;
    }
    Some(row[k])
}

/// `ln S(n, j)` for `j = 0..=n`, `-inf` where the number is zero.
fn ln_stirling2_row(n: u32) -> Vec<f64> {
    let n = n as usize;
    let mut row = vec![f64::NEG_INFINITY; n + 1];
    row[0] = 0.0;
    for i in 1..=n {
        for j in (1..=i).rev() {
            let a = (j as f64).ln() + row[j];
            row[j] = log_sum_exp(&[a, row[j - 1]]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row
}

/// `ln E[N^y]` for `N ~ Poisson(theta)` via the Stirling expansion.
fn ln_poisson_raw_moment(theta: f64, y: u32) -> f64 {
    let ln_theta = theta.ln();
    let terms: Vec<f64> = ln_stirling2_row(y)
        .into_iter()
        .enumerate()
        .map(|(j, ls)| ls + j as f64 * ln_theta)
        .collect();
    log_sum_exp(&terms)
}

/// `P(X = x | Y = y)` for Sub-Model II parameters (`lambda2 = 0`).
pub fn conditional_x_given_y(params: Params, x: u32, y: u32) -> Result<f64> {
    if params.lambda2 != 0.0 {
        return Err(Error::ParameterDomain(format!(
            "conditional of X given Y is only available for lambda2 = 0, got {}",
            params.lambda2
        )));
    }
    if !(params.lambda1 > 0.0 && params.lambda1.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "lambda1 must be positive, got {}",
            params.lambda1
        )));
    }
    if !(params.lambda3 >= 0.0 && params.lambda3.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "lambda3 must be non-negative, got {}",
            params.lambda3
        )));
    }
    let theta = params.lambda1 * (-params.lambda3).exp();
    if y == 0 {
        return Ok(poisson::pmf(theta, x as u64));
    }
    if params.lambda3 == 0.0 {
        return Err(Error::UndefinedConditional { y });
    }
    if x == 0 {
        return Ok(0.0);
    }
    let ln_p = -theta + x as f64 * theta.ln() + y as f64 * (x as f64).ln()
        - ln_factorial(x as u64)
        - ln_poisson_raw_moment(theta, y);
    Ok(ln_p.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn stirling_small_values() {
        assert_eq!(stirling2(0, 0), Some(1));
        assert_eq!(stirling2(5, 0), Some(0));
        assert_eq!(stirling2(4, 2), Some(7));
        assert_eq!(stirling2(5, 3), Some(25));
        assert_eq!(stirling2(10, 4), Some(34105));
        assert_eq!(stirling2(3, 5), Some(0));
        // Bell number B_10 = 115975
        let bell: u128 = (0..=10).map(|k| stirling2(10, k).unwrap()).sum();
        assert_eq!(bell, 115975);
    }

    #[test]
    fn stirling_overflow_is_reported() {
        assert!(stirling2(100, 50).is_none());
    }

    #[test]
    fn ln_row_matches_exact() {
        let row = ln_stirling2_row(12);
        for (k, ls) in row.iter().enumerate() {
            let exact = stirling2(12, k as u32).unwrap() as f64;
            if exact == 0.0 {
                assert_eq!(*ls, f64::NEG_INFINITY);
            } else {
                assert!((ls.exp() - exact).abs() / exact < 1e-12);
            }
        }
    }

    #[test]
    fn y_zero_is_thinned_poisson() {
        let p = conditional_x_given_y(Params::new(1.0, 0.0, 1.0), 2, 0).unwrap();
        let theta = (-1.0f64).exp();
        let want = (-theta).exp() * theta * theta / 2.0;
        assert!((p - want).abs() < 1e-15);
        assert!((p - 0.046840).abs() < 1e-6);
    }

    #[test]
    fn y_one_is_shifted_poisson() {
        let params = Params::new(1.4, 0.0, 0.3);
        let theta = 1.4 * (-0.3f64).exp();
        assert_eq!(conditional_x_given_y(params, 0, 1).unwrap(), 0.0);
        for x in 1..10 {
            let p = conditional_x_given_y(params, x, 1).unwrap();
            assert!((p - poisson::pmf(theta, x as u64 - 1)).abs() < 1e-14);
        }
    }

    #[test]
    fn ratio_identity_and_normalization() {
        let params = Params::new(2.0, 0.0, 0.5);
        let m = ModelSpec::sub_model_ii(2.0, 0.5).unwrap();
        let py = m.marginal_y_prob(3);
        let mut total = 0.0;
        for x in 0..=80 {
            let c = conditional_x_given_y(params, x, 3).unwrap();
            total += c;
            assert!((c - m.pmf(x, 3) / py).abs() < 1e-10);
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_sub_model_ii() {
        assert!(matches!(
            conditional_x_given_y(Params::new(1.0, 0.5, 1.0), 1, 1),
            Err(Error::ParameterDomain(_))
        ));
        assert!(matches!(
            conditional_x_given_y(Params::new(1.0, 0.0, 0.0), 1, 2),
            Err(Error::UndefinedConditional { y: 2 })
        ));
    }
}
