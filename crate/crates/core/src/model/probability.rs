use super::ModelSpec;
use crate::poisson::{self, PoissonTerms, SERIES_TOL};

impl ModelSpec {
    /// `ln P(X = x, Y = y)`.
    pub fn ln_pmf(&self, x: u32, y: u32) -> f64 {
        let (x, y) = if self.is_mirrored() { (y, x) } else { (x, y) };
        let p = self.params;
        poisson::ln_pmf(p.lambda1, x as u64) + poisson::ln_pmf(p.conditional_mean(x), y as u64)
    }

    /// Joint mass `P(X = x, Y = y)`.
    pub fn pmf(&self, x: u32, y: u32) -> f64 {
        self.ln_pmf(x, y).exp()
    }

    /// Joint probability generating function `E[t1^X t2^Y]`.
    pub fn pgf(&self, t1: f64, t2: f64) -> f64 {
        let (t1, t2) = if self.is_mirrored() {
            (t2, t1)
        } else {
            (t1, t2)
        };
        canonical_pgf(
            self.params.lambda1,
            self.params.lambda2,
            self.params.lambda3,
            t1,
            t2,
        )
    }

    /// Probability generating function of the second coordinate.
    pub fn pgf_marginal_y(&self, t2: f64) -> f64 {
        self.pgf(1.0, t2)
    }

    /// `P(X = x)` for the first observed coordinate.
    pub fn marginal_x_prob(&self, x: u32) -> f64 {
        if self.is_mirrored() {
            self.canonical().marginal_y_prob(x)
        } else {
            poisson::pmf(self.params.lambda1, x as u64)
        }
    }

    /// `P(Y = y)` for the second observed coordinate.
    ///
    /// Counts up to 3 use derivatives of the marginal generating function at
    /// zero; larger counts sum the joint mass over `x`.
    pub fn marginal_y_prob(&self, y: u32) -> f64 {
        if self.is_mirrored() {
            return poisson::pmf(self.params.lambda1, y as u64);
        }
        if y <= 3 {
            self.marginal_y_closed_form(y)
        } else {
            self.marginal_y_prob_by_summation(y)
        }
    }

    /// `sum_x P(X = x, Y = y)` truncated once the neglected Poisson(lambda1)
    /// tail is below the series tolerance relative to the sum itself, so small
    /// marginals keep full relative accuracy.
    pub fn marginal_y_prob_by_summation(&self, y: u32) -> f64 {
        if self.is_mirrored() {
            return poisson::pmf(self.params.lambda1, y as u64);
        }
        let rough = self.sum_over_x(y, SERIES_TOL);
        if rough > 0.0 && rough < 1.0 {
            self.sum_over_x(y, (SERIES_TOL * rough).max(f64::MIN_POSITIVE))
        } else {
            rough
        }
    }

    fn sum_over_x(&self, y: u32, tol: f64) -> f64 {
        let p = self.params;
        // keep going at least to the x where Poisson(lambda2 + lambda3 x) peaks at y
        let peak = if p.lambda3 > 0.0 {
            ((y as f64 - p.lambda2) / p.lambda3).max(0.0).ceil() as u64
        } else {
            0
        };
        PoissonTerms::with_min(p.lambda1, tol, peak)
            .map(|(x, px)| {
                if px == 0.0 {
                    0.0
                } else {
                    (px.ln() + poisson::ln_pmf(p.conditional_mean(x as u32), y as u64)).exp()
                }
            })
            .sum()
    }

    fn marginal_y_closed_form(&self, y: u32) -> f64 {
        let p = self.params;
        let (l1, l2, l3) = (p.lambda1, p.lambda2, p.lambda3);
        let e = (-l3).exp();
        let p0 = (-l2 + l1 * (e - 1.0)).exp();
        // cumulants of the log-pgf at zero
        let k1 = l2 + l1 * l3 * e;
        let k2 = l1 * l3 * l3 * e;
        let k3 = l1 * l3 * l3 * l3 * e;
        match y {
            0 => p0,
            1 => p0 * k1,
            2 => p0 * (k1 * k1 + k2) / 2.0,
            3 => p0 * (k1 * k1 * k1 + 3.0 * k1 * k2 + k3) / 6.0,
            _ => unreachable!("closed form only covers y <= 3"),
        }
    }
}

/// `exp(lambda2 (t2 - 1) + lambda1 (t1 exp(lambda3 (t2 - 1)) - 1))`.
#[inline]
pub(crate) fn canonical_pgf(l1: f64, l2: f64, l3: f64, t1: f64, t2: f64) -> f64 {
    (l2 * (t2 - 1.0) + l1 * (t1 * (l3 * (t2 - 1.0)).exp() - 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn origin_mass_is_product_of_zero_probabilities() {
        let m = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
        assert!(close(m.pmf(0, 0), (-2.0f64).exp(), 1e-15));
        assert!(close(m.pgf(0.0, 0.0), m.pmf(0, 0), 1e-15));
    }

    #[test]
    fn independence_when_lambda3_is_zero() {
        let m = ModelSpec::full(1.0, 1.0, 0.0).unwrap();
        for x in 0..=10 {
            for y in 0..=10 {
                let want = poisson::pmf(1.0, x) * poisson::pmf(1.0, y);
                assert!(close(m.pmf(x as u32, y as u32), want, 1e-15));
            }
            assert!(close(
                m.marginal_y_prob(x as u32),
                poisson::pmf(1.0, x),
                1e-14
            ));
        }
    }

    #[test]
    fn table7_full_fit_normalizes() {
        let m = ModelSpec::full(2.643, 0.688, 0.031).unwrap();
        let mut s = 0.0;
        for x in 0..=80 {
            for y in 0..=80 {
                s += m.pmf(x, y);
            }
        }
        assert!(close(s, 1.0, 1e-10), "sum {s}");
    }

    #[test]
    fn sub_model_ii_zero_row() {
        let m = ModelSpec::sub_model_ii(1.3, 0.8).unwrap();
        assert!(close(m.pmf(0, 0), (-1.3f64).exp(), 1e-15));
        for y in 1..5 {
            assert_eq!(m.pmf(0, y), 0.0);
        }
    }

    #[test]
    fn pgf_normalized_and_bounded() {
        let m = ModelSpec::full(1.0, 0.5, 0.7).unwrap();
        assert!(close(m.pgf(1.0, 1.0), 1.0, 1e-15));
        for &t1 in &[0.0, 0.3, 1.0] {
            for &t2 in &[0.0, 0.6, 1.0] {
                let g = m.pgf(t1, t2);
                assert!(g > 0.0 && g <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn marginal_y_zero_matches_pgf_at_zero() {
        let m = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
        let want = (-1.0f64).exp() * ((-1.0f64).exp() - 1.0).exp();
        assert!(close(m.pgf_marginal_y(0.0), want, 1e-15));
        assert!(close(m.marginal_y_prob(0), want, 1e-15));
        assert!(close(want, 0.195515, 1e-6));
    }

    #[test]
    fn closed_form_agrees_with_summation() {
        for &(l1, l2, l3) in &[
            (1.0, 1.0, 1.0),
            (2.0, 0.3, 0.5),
            (0.1, 3.0, 3.0),
            (3.0, 0.5, 0.1),
        ] {
            let m = ModelSpec::full(l1, l2, l3).unwrap();
            for y in 0..=3 {
                let a = m.marginal_y_prob(y);
                let b = m.marginal_y_prob_by_summation(y);
                assert!(close(a, b, 1e-12), "{m} y={y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mirrored_swaps_coordinates() {
        let s = ModelSpec::sub_model_ii(1.7, 0.6).unwrap();
        let m = ModelSpec::mirrored_sub_model_ii(1.7, 0.6).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                assert_eq!(m.pmf(x, y), s.pmf(y, x));
            }
            assert!(close(m.marginal_x_prob(x), s.marginal_y_prob(x), 1e-15));
            assert!(close(m.marginal_y_prob(x), s.marginal_x_prob(x), 1e-15));
        }
        assert_eq!(m.pgf(0.2, 0.7), s.pgf(0.7, 0.2));
    }

    #[test]
    fn small_marginal_keeps_relative_accuracy() {
        // 40-digit reference: sum_x e^-0.1 0.1^x/x! e^-x x^6/6!
        let m = ModelSpec::sub_model_ii(0.1, 1.0).unwrap();
        let reference = 1.086_632_910_893_075_6e-4;
        assert!((m.marginal_y_prob(6) / reference - 1.0).abs() < 1e-13);
    }
}
