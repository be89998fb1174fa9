//! Univariate contagious distributions that appear when `lambda2 = 0`: the
//! Neyman Type A law of `Y` and the Thomas law of `X + Y`.

use crate::poisson::{ln_factorial, log_sum_exp, SERIES_TOL};

/// Neyman Type A mass at `y`:
/// `e^{-l1} l3^y / y! * sum_j (l1 e^{-l3})^j j^y / j!`.
///
/// The `j`-series stops once it is past both the Poisson(l1) mode and the
/// index where `j^y e^{-l3 j}` peaks, and the remaining Poisson(l1) tail is
/// below [`SERIES_TOL`].
pub fn neyman_type_a_pmf(lambda1: f64, lambda3: f64, y: u32) -> f64 {
    if y == 0 {
        return (-lambda1 * (1.0 - (-lambda3).exp())).exp();
    }
    if lambda3 == 0.0 {
        return 0.0;
    }
    let yf = y as f64;
    let ln_theta = lambda1.ln() - lambda3;
    let prefix = -lambda1 + yf * lambda3.ln() - ln_factorial(y as u64);
    let peak = (yf / lambda3).max(lambda1).ceil() as u64;

    let mut logs = Vec::new();
    let mut j = 1u64;
    loop {
        let jf = j as f64;
        let ln_term = jf * ln_theta + yf * jf.ln() - ln_factorial(j);
        logs.push(ln_term);
        if j >= peak {
            // the term for j is Poisson(l1)(j) * Poisson(j l3)(y) up to the prefix;
            // bound what is left by the Poisson(l1) tail beyond j
            let pois_j = (jf * lambda1.ln() - lambda1 - ln_factorial(j)).exp();
            let tail = pois_j * lambda1 / (jf + 1.0 - lambda1);
            if tail < SERIES_TOL {
                break;
            }
        }
        j += 1;
    }
    (prefix + log_sum_exp(&logs)).exp()
}

/// Thomas mass at `z`:
/// `e^{-l1} / z! * sum_{j=1}^{z} C(z, j) (l1 e^{-l3})^j (j l3)^{z-j}`,
/// with the empty sum at `z = 0` replaced by `e^{-l1}`.
pub fn thomas_pmf(lambda1: f64, lambda3: f64, z: u32) -> f64 {
    if z == 0 {
        return (-lambda1).exp();
    }
    let zf = z as u64;
    let ln_theta = lambda1.ln() - lambda3;
    let logs: Vec<f64> = (1..=zf)
        .filter_map(|j| {
            let rest = zf - j;
            let ln_rest = if rest == 0 {
                0.0
            } else if lambda3 == 0.0 {
                return None;
            } else {
                rest as f64 * (j as f64 * lambda3).ln()
            };
            let ln_binom = ln_factorial(zf) - ln_factorial(j) - ln_factorial(rest);
            Some(ln_binom + j as f64 * ln_theta + ln_rest)
        })
        .collect();
    (-lambda1 - ln_factorial(zf) + log_sum_exp(&logs)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson;

    #[test]
    fn neyman_zero_cell() {
        let p = neyman_type_a_pmf(1.0, 1.0, 0);
        assert!((p - 0.531464).abs() < 1e-6);
    }

    #[test]
    fn neyman_is_poisson_mixture() {
        let want: f64 = (0..200)
            .map(|x| poisson::pmf(2.0, x) * poisson::pmf(0.5 * x as f64, 3))
            .sum();
        assert!((neyman_type_a_pmf(2.0, 0.5, 3) - want).abs() < 1e-10);
    }

    #[test]
    fn neyman_normalizes() {
        let s: f64 = (0..=60).map(|y| neyman_type_a_pmf(1.0, 1.0, y)).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thomas_zero_and_normalization() {
        assert_eq!(thomas_pmf(1.3, 0.4, 0), (-1.3f64).exp());
        let s: f64 = (0..=60).map(|z| thomas_pmf(1.0, 1.0, z)).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thomas_without_growth_is_poisson() {
        // lambda3 = 0: every cluster has exactly its parent
        for z in 0..8 {
            assert!((thomas_pmf(1.7, 0.0, z) - poisson::pmf(1.7, z as u64)).abs() < 1e-14);
        }
    }
}
