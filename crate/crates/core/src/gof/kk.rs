use serde::{Deserialize, Serialize};

use super::pgf::{empirical_pgf, empirical_pgf_grid};
use super::{InformationSource, Method, Settings, TestOutcome};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimation::inverse_information;
use crate::model::{ModelSpec, Variant};

/// How the variance of `G_n(t) - G(t; theta_hat)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `[G(t^2) - G(t)^2] / n - grad G' Sigma grad G`: the delta-method
    /// variance of the plug-in difference, with `Sigma` the inverse
    /// information.
    #[default]
    Delta,
    /// `[G(t^2) - G(t)^2] / n - sum_ij Sigma_ij d^2 G / d theta_i d theta_j`,
    /// the second-derivative form. It is frequently non-positive for
    /// `t > 0` and is kept for comparison only.
    SecondOrder,
}

impl std::fmt::Display for VarianceForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VarianceForm::Delta => "delta",
            VarianceForm::SecondOrder => "second_order",
        })
    }
}

/// Evaluation grid for the supremum statistic: `t_min, t_min + step, ...,
/// t_max` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_min: -0.99,
            t_max: 0.99,
            step: 0.01,
        }
    }
}

impl GridSpec {
    pub fn new(t_min: f64, t_max: f64, step: f64) -> Result<Self> {
        let g = Self { t_min, t_max, step };
        g.validate()?;
        Ok(g)
    }

    /// Symmetric grid `-bound..=bound`.
    pub fn symmetric(bound: f64, step: f64) -> Result<Self> {
        Self::new(-bound, bound, step)
    }

    fn intervals(&self) -> f64 {
        (self.t_max - self.t_min) / self.step
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0 < self.t_min && self.t_min < self.t_max && self.t_max < 1.0) {
            return Err(Error::InvalidSetting(format!(
                "grid must satisfy -1 < t_min < t_max < 1, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidSetting(format!(
                "grid step must be positive, got {}",
                self.step
            )));
        }
        let k = self.intervals();
        if (k - k.round()).abs() > 1e-6 {
            return Err(Error::InvalidSetting(format!(
                "grid step {} does not divide [{}, {}]",
                self.step, self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let k = self.intervals().round() as usize;
        (0..=k).map(|i| self.t_min + i as f64 * self.step).collect()
    }
}

pub(crate) fn check_point(t1: f64, t2: f64) -> Result<()> {
    if t1.abs() < 1.0 && t2.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidSetting(format!(
            "K&K evaluation point must satisfy |t1| < 1 and |t2| < 1, got ({t1}, {t2})"
        )))
    }
}

/// Derivatives of the log-pgf in the free parameters of a canonical (unswapped)
/// model: gradient and Hessian, padded to 3 entries; `dim` is 2 or 3.
#[derive(Debug, Clone, Copy)]
struct LogDerivatives {
    dim: usize,
    grad: [f64; 3],
    hess: [[f64; 3]; 3],
}

fn log_derivatives(model: &ModelSpec, t1: f64, t2: f64) -> LogDerivatives {
    let p = model.params();
    let (l1, l3) = (p.lambda1, p.lambda3);
    let e = (l3 * (t2 - 1.0)).exp();
    let d_l1 = t1 * e - 1.0;
    let d_l2 = t2 - 1.0;
    let d_l3 = l1 * t1 * (t2 - 1.0) * e;
    let h13 = t1 * (t2 - 1.0) * e;
    let h33 = l1 * t1 * (t2 - 1.0) * (t2 - 1.0) * e;
    match model.variant() {
        Variant::Full => LogDerivatives {
            dim: 3,
            grad: [d_l1, d_l2, d_l3],
            hess: [[0.0, 0.0, h13], [0.0, 0.0, 0.0], [h13, 0.0, h33]],
        },
        // lambda2 = lambda3 moves with the slope parameter
        Variant::SubModelI => LogDerivatives {
            dim: 2,
            grad: [d_l1, d_l2 + d_l3, 0.0],
            hess: [[0.0, h13, 0.0], [h13, h33, 0.0], [0.0; 3]],
        },
        Variant::SubModelII | Variant::MirroredSubModelII => LogDerivatives {
            dim: 2,
            grad: [d_l1, d_l3, 0.0],
            hess: [[0.0, h13, 0.0], [h13, h33, 0.0], [0.0; 3]],
        },
    }
}

/// Gradient and Hessian of the model pgf `G(t1, t2)` with respect to the free
/// parameters (in [`ModelSpec::free_params`] order), for the orientation the
/// model is defined in.
pub fn kk_gradient_and_hessian(model: &ModelSpec, t1: f64, t2: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (t1, t2) = if model.is_mirrored() {
        (t2, t1)
    } else {
        (t1, t2)
    };
    let canonical = model.canonical();
    let g = canonical.pgf(t1, t2);
    let d = log_derivatives(&canonical, t1, t2);
    let grad = (0..d.dim).map(|i| g * d.grad[i]).collect();
    let hess = (0..d.dim)
        .map(|i| {
            (0..d.dim)
                .map(|j| g * (d.grad[i] * d.grad[j] + d.hess[i][j]))
                .collect()
        })
        .collect();
    (grad, hess)
}

/// Variance ingredients shared by all evaluation points of one dataset/model.
struct KkContext {
    model: ModelSpec,
    cov: Vec<Vec<f64>>,
    n: f64,
    form: VarianceForm,
    information: InformationSource,
}

impl KkContext {
    /// `data` and `model` must already be in canonical orientation.
    fn new(data: &Dataset, model: &ModelSpec, form: VarianceForm) -> Result<Self> {
        data.require_nonempty()?;
        let cov = inverse_information(model, data)?;
        let information = if model.variant() == Variant::Full {
            InformationSource::Observed
        } else {
            InformationSource::Analytic
        };
        Ok(Self {
            model: *model,
            cov,
            n: data.n() as f64,
            form,
            information,
        })
    }

    /// `(G(t1, t2), variance)`.
    fn eval(&self, t1: f64, t2: f64) -> (f64, f64) {
        let g = self.model.pgf(t1, t2);
        let g_sq_args = self.model.pgf(t1 * t1, t2 * t2);
        let base = (g_sq_args - g * g) / self.n;
        let d = log_derivatives(&self.model, t1, t2);
        let mut correction = 0.0;
        for i in 0..d.dim {
            for j in 0..d.dim {
                let c = self.cov[i][j];
                if c == 0.0 {
                    continue;
                }
                correction += c * match self.form {
                    VarianceForm::Delta => g * g * d.grad[i] * d.grad[j],
                    VarianceForm::SecondOrder => g * (d.grad[i] * d.grad[j] + d.hess[i][j]),
                };
            }
        }
        (g, base - correction)
    }
}

fn orient(data: &Dataset, model: &ModelSpec) -> (Dataset, ModelSpec) {
    if model.is_mirrored() {
        (data.swapped(), model.canonical())
    } else {
        (data.clone(), *model)
    }
}

/// Estimated variance of `G_n(t1, t2) - G(t1, t2; model)`.
pub fn kk_variance(
    data: &Dataset,
    model: &ModelSpec,
    t1: f64,
    t2: f64,
    form: VarianceForm,
) -> Result<f64> {
    check_point(t1, t2)?;
    let (t1c, t2c) = if model.is_mirrored() {
        (t2, t1)
    } else {
        (t1, t2)
    };
    let (d, m) = orient(data, model);
    Ok(KkContext::new(&d, &m, form)?.eval(t1c, t2c).1)
}

/// Standardized pgf difference `(G_n(t) - G(t; model)) / sigma_hat`.
pub fn kk_statistic(
    data: &Dataset,
    model: &ModelSpec,
    t1: f64,
    t2: f64,
    form: VarianceForm,
) -> Result<TestOutcome> {
    check_point(t1, t2)?;
    let (t1c, t2c) = if model.is_mirrored() {
        (t2, t1)
    } else {
        (t1, t2)
    };
    let (d, m) = orient(data, model);
    let ctx = KkContext::new(&d, &m, form)?;
    let (g, var) = ctx.eval(t1c, t2c);
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::NonPositiveVariance {
            t1,
            t2,
            variance: var,
        });
    }
    let gn = empirical_pgf(&d.counts(), t1c, t2c);
    Ok(TestOutcome::new(
        Method::Kk,
        (gn - g) / var.sqrt(),
        Settings::Kk {
            t1,
            t2,
            variance: var,
            form,
            information: ctx.information,
        },
    ))
}

/// `max |kk_statistic|` over the product of `t1s` and `t2s`. Points with a
/// non-positive variance are skipped and counted.
pub fn kk_sup_over(
    data: &Dataset,
    model: &ModelSpec,
    t1s: &[f64],
    t2s: &[f64],
    form: VarianceForm,
) -> Result<TestOutcome> {
    for &t1 in t1s {
        for &t2 in t2s {
            check_point(t1, t2)?;
        }
    }
    let mirrored = model.is_mirrored();
    let (a, b) = if mirrored { (t2s, t1s) } else { (t1s, t2s) };
    let (d, m) = orient(data, model);
    let ctx = KkContext::new(&d, &m, form)?;
    let gn = empirical_pgf_grid(&d.counts(), a, b);
    let mut best = f64::NEG_INFINITY;
    let mut arg = (f64::NAN, f64::NAN);
    let mut skipped = 0;
    for (i, &ta) in a.iter().enumerate() {
        for (j, &tb) in b.iter().enumerate() {
            let (g, var) = ctx.eval(ta, tb);
            if !(var > 0.0 && var.is_finite()) {
                skipped += 1;
                continue;
            }
            let z = ((gn[i * b.len() + j] - g) / var.sqrt()).abs();
            if z > best {
                best = z;
                arg = if mirrored { (tb, ta) } else { (ta, tb) };
            }
        }
    }
    let points = a.len() * b.len();
    if skipped == points {
        return Err(Error::EmptyGrid { points });
    }
    Ok(TestOutcome::new(
        Method::KkSup,
        best,
        Settings::KkSup {
            grid: None,
            points,
            skipped,
            argmax_t1: arg.0,
            argmax_t2: arg.1,
            form,
            information: ctx.information,
        },
    ))
}

/// Supremum statistic over a validated grid.
pub fn kk_sup_statistic(
    data: &Dataset,
    model: &ModelSpec,
    grid: &GridSpec,
    form: VarianceForm,
) -> Result<TestOutcome> {
    grid.validate()?;
    let pts = grid.points();
    let mut out = kk_sup_over(data, model, &pts, &pts, form)?;
    if let Settings::KkSup { grid: g, .. } = &mut out.settings {
        *g = Some(*grid);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit;
    use crate::sampling::sample_pseudo_poisson;

    #[test]
    fn grid_points_and_validation() {
        let g = GridSpec::default();
        let p = g.points();
        assert_eq!(p.len(), 199);
        assert!((p[0] + 0.99).abs() < 1e-15 && (p[198] - 0.99).abs() < 1e-12);
        assert!(GridSpec::new(-1.0, 0.5, 0.1).is_err());
        assert!(GridSpec::new(-0.5, 0.5, 0.3).is_err());
        assert!(GridSpec::new(0.5, -0.5, 0.1).is_err());
        assert_eq!(GridSpec::symmetric(0.95, 0.05).unwrap().points().len(), 39);
    }

    #[test]
    fn second_derivatives_match_finite_differences() {
        let m = ModelSpec::sub_model_i(1.0, 0.7).unwrap();
        let (t1, t2) = (0.5, 0.5);
        let (grad, hess) = kk_gradient_and_hessian(&m, t1, t2);
        let g = |a: f64, b: f64| ModelSpec::sub_model_i(a, b).unwrap().pgf(t1, t2);
        let h = 1e-4;
        let (a, b) = (1.0, 0.7);
        let fd11 = (g(a + h, b) - 2.0 * g(a, b) + g(a - h, b)) / (h * h);
        let fd33 = (g(a, b + h) - 2.0 * g(a, b) + g(a, b - h)) / (h * h);
        let fd13 =
            (g(a + h, b + h) - g(a + h, b - h) - g(a - h, b + h) + g(a - h, b - h)) / (4.0 * h * h);
        assert!((hess[0][0] - fd11).abs() < 1e-6, "{} {}", hess[0][0], fd11);
        assert!((hess[1][1] - fd33).abs() < 1e-6, "{} {}", hess[1][1], fd33);
        assert!((hess[0][1] - fd13).abs() < 1e-6);
        let fd1 = (g(a + h, b) - g(a - h, b)) / (2.0 * h);
        let fd3 = (g(a, b + h) - g(a, b - h)) / (2.0 * h);
        assert!((grad[0] - fd1).abs() < 1e-7 && (grad[1] - fd3).abs() < 1e-7);
    }

    #[test]
    fn full_and_sub_model_ii_derivatives_match_finite_differences() {
        let (t1, t2) = (-0.3, 0.6);
        let h = 1e-4;
        let full = ModelSpec::full(1.2, 0.4, 0.8).unwrap();
        let (grad, hess) = kk_gradient_and_hessian(&full, t1, t2);
        let g = |v: [f64; 3]| ModelSpec::full(v[0], v[1], v[2]).unwrap().pgf(t1, t2);
        let base = [1.2, 0.4, 0.8];
        for i in 0..3 {
            let mut up = base;
            let mut dn = base;
            up[i] += h;
            dn[i] -= h;
            assert!((grad[i] - (g(up) - g(dn)) / (2.0 * h)).abs() < 1e-7);
            for j in 0..3 {
                let shift = |si: f64, sj: f64| {
                    let mut v = base;
                    v[i] += si;
                    v[j] += sj;
                    g(v)
                };
                let fd =
                    (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                assert!((hess[i][j] - fd).abs() < 1e-6, "({i},{j})");
            }
        }
        let m = ModelSpec::mirrored_sub_model_ii(1.5, 0.4).unwrap();
        let s = ModelSpec::sub_model_ii(1.5, 0.4).unwrap();
        assert_eq!(
            kk_gradient_and_hessian(&m, 0.2, -0.7),
            kk_gradient_and_hessian(&s, -0.7, 0.2)
        );
    }

    #[test]
    fn statistic_vanishes_when_pgfs_agree() {
        // G_n(0, 0) = 1/2 and G(0, 0) = exp(-lambda1 - lambda2) = 1/2
        let d = Dataset::new(vec![(0, 0), (1, 1)]);
        let half = 2f64.ln() / 2.0;
        let m = ModelSpec::sub_model_i(half, half).unwrap();
        let o = kk_statistic(&d, &m, 0.0, 0.0, VarianceForm::Delta).unwrap();
        assert!(o.statistic.abs() < 1e-15);
    }

    #[test]
    fn mirrored_invariance() {
        let m = ModelSpec::sub_model_ii(1.3, 0.5).unwrap();
        let d = sample_pseudo_poisson(&m, 400, 8).unwrap();
        let f = fit(Variant::SubModelII, &d).unwrap().model;
        let mf = fit(Variant::MirroredSubModelII, &d.swapped())
            .unwrap()
            .model;
        let a = kk_statistic(&d, &f, 0.3, -0.6, VarianceForm::Delta).unwrap();
        let b = kk_statistic(&d.swapped(), &mf, -0.6, 0.3, VarianceForm::Delta).unwrap();
        assert_eq!(a.statistic, b.statistic);
    }

    #[test]
    fn sup_dominates_and_reduces_to_single_point() {
        let m = ModelSpec::sub_model_i(1.0, 0.5).unwrap();
        let d = sample_pseudo_poisson(&m, 200, 1).unwrap();
        let f = fit(Variant::SubModelI, &d).unwrap().model;
        let grid = GridSpec::symmetric(0.9, 0.1).unwrap();
        let sup = kk_sup_statistic(&d, &f, &grid, VarianceForm::Delta).unwrap();
        for &t1 in &[-0.9, -0.3, 0.4, 0.9] {
            for &t2 in &[-0.9, 0.0, 0.6] {
                let k = kk_statistic(&d, &f, t1, t2, VarianceForm::Delta).unwrap();
                assert!(sup.statistic >= k.statistic.abs() - 1e-12);
            }
        }
        let one = kk_sup_over(&d, &f, &[0.4], &[-0.3], VarianceForm::Delta).unwrap();
        let k = kk_statistic(&d, &f, 0.4, -0.3, VarianceForm::Delta).unwrap();
        assert!((one.statistic - k.statistic.abs()).abs() < 1e-12);
    }

    #[test]
    fn rejects_points_outside_open_square() {
        let m = ModelSpec::sub_model_i(1.0, 0.5).unwrap();
        let d = Dataset::new(vec![(1, 1), (0, 2)]);
        assert!(matches!(
            kk_statistic(&d, &m, 1.0, 0.0, VarianceForm::Delta),
            Err(Error::InvalidSetting(_))
        ));
    }

    #[test]
    fn second_order_form_can_be_non_positive() {
        let m = ModelSpec::sub_model_i(1.0, 1.0).unwrap();
        let d = sample_pseudo_poisson(&m, 500, 2).unwrap();
        let f = fit(Variant::SubModelI, &d).unwrap().model;
        let v = kk_variance(&d, &f, 0.5, 0.5, VarianceForm::SecondOrder).unwrap();
        assert!(v <= 0.0);
        assert!(matches!(
            kk_statistic(&d, &f, 0.5, 0.5, VarianceForm::SecondOrder),
            Err(Error::NonPositiveVariance { .. })
        ));
        assert!(kk_variance(&d, &f, 0.5, 0.5, VarianceForm::Delta).unwrap() > 0.0);
    }
}
