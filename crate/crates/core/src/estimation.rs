//! Maximum-likelihood fitting and information matrices.
//!
//! The likelihood factorizes into a Poisson(lambda1) part for `X` and a
//! Poisson regression with identity link for `Y | X`, so `lambda1_hat = x_bar`
//! in every variant. The sub-models have closed-form slope estimates. The full
//! model maximizes a concave function of `(lambda2, lambda3)` over the closed
//! quadrant: both edges are solved in closed form and checked with the KKT
//! conditions, and an interior optimum is found by safeguarded Newton steps.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Params, Variant};
use crate::poisson;

/// Value substituted for an estimate that lands on the zero boundary, so that
/// downstream generating functions and information matrices stay finite.
pub const BOUNDARY_PIN: f64 = 1e-8;

/// Newton stops once the score divided by `n` is below this.
pub const GRADIENT_TOL: f64 = 1e-10;

pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    /// Supremum of the log-likelihood over the closed parameter region; for
    /// pinned estimates this is the value at the exact boundary. May be
    /// `-inf` when the data contain pairs outside the model's support.
    pub loglik: f64,
    /// Standard errors of the free parameters, in [`ModelSpec::free_params`]
    /// order.
    pub stderr: Option<Vec<f64>>,
    /// Newton iterations (0 for closed-form estimates).
    pub iterations: usize,
    /// Names of parameters that were pinned at [`BOUNDARY_PIN`].
    pub pinned: Vec<String>,
}

impl FitResult {
    pub fn is_pinned(&self, name: &str) -> bool {
        self.pinned.iter().any(|p| p == name)
    }
}

/// `sum_i ln P(X = x_i, Y = y_i)`; `-inf` if any pair has zero probability.
pub fn loglik(model: &ModelSpec, data: &Dataset) -> Result<f64> {
    data.require_nonempty()?;
    Ok(data.pairs().iter().map(|&(x, y)| model.ln_pmf(x, y)).sum())
}

/// Per-`x` sufficient statistics `(x, count, sum of y)` for the conditional
/// part of the likelihood, skipping empty rows.
fn row_stats(data: &Dataset) -> Vec<(f64, f64, f64)> {
    data.counts()
        .row_summaries()
        .into_iter()
        .enumerate()
        .filter(|(_, (c, _))| *c > 0)
        .map(|(x, (c, s))| (x as f64, c as f64, s as f64))
        .collect()
}

/// `sum_i [y_i ln(mu_i) - mu_i]` without the `ln y_i!` constant.
fn conditional_kernel(rows: &[(f64, f64, f64)], l2: f64, l3: f64) -> f64 {
    rows.iter()
        .map(|&(x, c, s)| {
            let mu = l2 + l3 * x;
            let log_part = if s == 0.0 {
                0.0
            } else if mu <= 0.0 {
                f64::NEG_INFINITY
            } else {
                s * mu.ln()
            };
            log_part - c * mu
        })
        .sum()
}

/// Log-likelihood at raw, possibly zero, rates; a zero mean is a point mass
/// at zero.
fn boundary_loglik(data: &Dataset, p: Params) -> f64 {
    data.pairs()
        .iter()
        .map(|&(x, y)| {
            poisson::ln_pmf(p.lambda1, x as u64) + poisson::ln_pmf(p.conditional_mean(x), y as u64)
        })
        .sum()
}

/// Builds the fit from exact estimates, pinning zeros at [`BOUNDARY_PIN`].
/// `data` is in the canonical (unswapped) orientation.
fn finish(variant: Variant, exact: Params, iterations: usize, data: &Dataset) -> Result<FitResult> {
    let mut pinned = Vec::new();
    let mut pin = |name: &str, v: f64| {
        if v == 0.0 {
            pinned.push(name.to_string());
            BOUNDARY_PIN
        } else {
            v
        }
    };
    let l1 = pin("lambda1", exact.lambda1);
    let l2 = if variant == Variant::Full {
        pin("lambda2", exact.lambda2)
    } else {
        exact.lambda2
    };
    let l3 = pin("lambda3", exact.lambda3);
    let stored = match variant {
        Variant::SubModelI => Params::new(l1, l3, l3),
        _ => Params::new(l1, l2, l3),
    };
    let canonical_variant = match variant {
        Variant::MirroredSubModelII => Variant::SubModelII,
        v => v,
    };
    let canonical = ModelSpec::new(canonical_variant, stored)?;
    let stderr = standard_errors(&canonical, data).ok();
    Ok(FitResult {
        model: ModelSpec::new(variant, stored)?,
        loglik: boundary_loglik(data, exact),
        stderr,
        iterations,
        pinned,
    })
}

/// Sub-Model I (`lambda2 = lambda3`): `lambda3_hat = sum y / sum (1 + x)`.
pub fn fit_submodel_i(data: &Dataset) -> Result<FitResult> {
    data.require_nonempty()?;
    let (sx, sy) = data.sums();
    let l1 = data.means()?[0];
    let l3 = sy as f64 / (data.n() as u64 + sx) as f64;
    finish(Variant::SubModelI, Params::new(l1, l3, l3), 0, data)
}

/// Sub-Model II (`lambda2 = 0`): `lambda3_hat = sum y / sum x`. With
/// `mirrored` the coordinates are exchanged before fitting and the result is
/// a mirrored Sub-Model II.
pub fn fit_submodel_ii(data: &Dataset, mirrored: bool) -> Result<FitResult> {
    data.require_nonempty()?;
    let work = if mirrored {
        data.swapped()
    } else {
        data.clone()
    };
    let (sx, sy) = work.sums();
    if sx == 0 && sy > 0 {
        return Err(Error::InconsistentSupport(format!(
            "sub-model II assigns zero probability to y > 0 when every x is 0 (sum y = {sy})"
        )));
    }
    let l1 = work.means()?[0];
    let l3 = if sx == 0 { 0.0 } else { sy as f64 / sx as f64 };
    let variant = if mirrored {
        Variant::MirroredSubModelII
    } else {
        Variant::SubModelII
    };
    finish(variant, Params::new(l1, 0.0, l3), 0, &work)
}

/// Maximizer of the concave conditional kernel over `lambda2, lambda3 >= 0`
/// together with the Newton iteration count.
fn maximize_conditional(rows: &[(f64, f64, f64)], n: f64) -> Result<((f64, f64), usize)> {
    let sy: f64 = rows.iter().map(|r| r.2).sum();
    let sx: f64 = rows.iter().map(|r| r.0 * r.1).sum();
    if sy == 0.0 {
        return Ok(((0.0, 0.0), 0));
    }
    let grad = |l2: f64, l3: f64| -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g2, g3), &(x, c, s)| {
            let mu = l2 + l3 * x;
            let r = if s == 0.0 { 0.0 } else { s / mu };
            (g2 + r - c, g3 + x * (r - c))
        })
    };

    // edge lambda3 = 0: lambda2 = y_bar; optimal overall if d/d lambda3 <= 0
    let edge3 = (sy / n, 0.0);
    if grad(edge3.0, edge3.1).1 <= GRADIENT_TOL * n {
        return Ok((edge3, 0));
    }
    // edge lambda2 = 0: feasible only if no y > 0 sits at x = 0
    let zero_row_has_y = rows.iter().any(|&(x, _, s)| x == 0.0 && s > 0.0);
    if !zero_row_has_y && sx > 0.0 {
        let l3 = sy / sx;
        let g2 = rows
            .iter()
            .filter(|r| r.0 > 0.0)
            .map(|&(x, _, s)| s / (l3 * x))
            .sum::<f64>()
            - n;
        if g2 <= GRADIENT_TOL * n {
            return Ok(((0.0, l3), 0));
        }
    }

    // interior optimum: safeguarded Newton from moment-type starting values
    let (mx, my) = (sx / n, sy / n);
    let (mut vxx, mut vxy) = (0.0, 0.0);
    for &(x, c, s) in rows {
        vxx += c * (x - mx) * (x - mx);
        vxy += (x - mx) * (s - c * my);
    }
    let slope0 = if vxx > 0.0 {
        (vxy / vxx).max(0.01)
    } else {
        0.01
    };
    let starts = [
        ((my - slope0 * mx).max(0.01), slope0),
        (my.max(0.01) / 2.0, (my / mx.max(1.0)).max(0.01) / 2.0),
        (my.max(0.01), 0.1),
    ];
    let mut last = (starts[0], f64::INFINITY);
    for &(mut l2, mut l3) in &starts {
        let mut f = conditional_kernel(rows, l2, l3);
        for it in 1..=MAX_ITERATIONS {
            let (g2, g3) = grad(l2, l3);
            let gnorm = (g2 * g2 + g3 * g3).sqrt();
            last = ((l2, l3), gnorm);
            if gnorm < GRADIENT_TOL * n {
                return Ok(((l2, l3), it - 1));
            }
            let (mut h22, mut h23, mut h33) = (0.0, 0.0, 0.0);
            for &(x, _, s) in rows {
                let mu = l2 + l3 * x;
                let w = s / (mu * mu);
                h22 += w;
                h23 += w * x;
                h33 += w * x * x;
            }
            let h = Matrix2::new(h22, h23, h23, h33);
            let step = match h.try_inverse() {
                Some(inv) => inv * nalgebra::Vector2::new(g2, g3),
                None => nalgebra::Vector2::new(g2, g3) / (h22 + h33).max(1.0),
            };
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let (c2, c3) = (l2 + alpha * step[0], l3 + alpha * step[1]);
                if c2 > 0.0 && c3 > 0.0 {
                    let fc = conditional_kernel(rows, c2, c3);
                    if fc >= f - 1e-12 * f.abs() {
                        l2 = c2;
                        l3 = c3;
                        f = fc;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        lambda2: last.0 .0,
        lambda3: last.0 .1,
        gradient_norm: last.1,
    })
}

/// Full model by maximum likelihood.
pub fn fit_full(data: &Dataset) -> Result<FitResult> {
    data.require_nonempty()?;
    let l1 = data.means()?[0];
    let ((l2, l3), iterations) = maximize_conditional(&row_stats(data), data.n() as f64)?;
    finish(Variant::Full, Params::new(l1, l2, l3), iterations, data)
}

/// Fits the requested variant.
pub fn fit(variant: Variant, data: &Dataset) -> Result<FitResult> {
    match variant {
        Variant::Full => fit_full(data),
        Variant::SubModelI => fit_submodel_i(data),
        Variant::SubModelII => fit_submodel_ii(data, false),
        Variant::MirroredSubModelII => fit_submodel_ii(data, true),
    }
}

/// Expected Fisher information of `(lambda1, lambda3)` for `n` observations
/// under Sub-Model I or II (diagonal because the two parameters separate).
pub fn fisher_information(model: &ModelSpec, n: usize) -> Result<Matrix2<f64>> {
    let p = model.params();
    if p.lambda3 <= 0.0 {
        return Err(Error::SingularInformation(
            "lambda3 = 0 makes the information for lambda3 infinite".into(),
        ));
    }
    let n = n as f64;
    let i33 = match model.variant() {
        Variant::SubModelI => n * (1.0 + p.lambda1) / p.lambda3,
        Variant::SubModelII | Variant::MirroredSubModelII => n * p.lambda1 / p.lambda3,
        Variant::Full => return Err(Error::InvalidSetting(
            "analytic information is only available for the sub-models; use observed_information"
                .into(),
        )),
    };
    Ok(Matrix2::new(n / p.lambda1, 0.0, 0.0, i33))
}

/// Observed information (negative Hessian of the log-likelihood) of the
/// full model's `(lambda1, lambda2, lambda3)` at `model`'s parameters.
pub fn observed_information_full(model: &ModelSpec, data: &Dataset) -> Result<Matrix3<f64>> {
    data.require_nonempty()?;
    let data = if model.is_mirrored() {
        data.swapped()
    } else {
        data.clone()
    };
    let p = model.params();
    let (sx, _) = data.sums();
    let (mut j22, mut j23, mut j33) = (0.0, 0.0, 0.0);
    for (x, _, s) in row_stats(&data) {
        if s == 0.0 {
            continue;
        }
        let mu = p.lambda2 + p.lambda3 * x;
        let w = s / (mu * mu);
        j22 += w;
        j23 += w * x;
        j33 += w * x * x;
    }
    let j11 = sx as f64 / (p.lambda1 * p.lambda1);
    Ok(Matrix3::new(j11, 0.0, 0.0, 0.0, j22, j23, 0.0, j23, j33))
}

/// Observed information of the free parameters of `model` (2x2 for the
/// sub-models, 3x3 for the full model) as a row-major square matrix.
pub fn observed_information(model: &ModelSpec, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let j = observed_information_full(model, data)?;
    let p = model.params();
    Ok(match model.variant() {
        Variant::Full => (0..3)
            .map(|r| (0..3).map(|c| j[(r, c)]).collect())
            .collect(),
        Variant::SubModelI => {
            // lambda2 = lambda3 = l3 moves both coefficients of mu = l3 (1 + x)
            let work = if model.is_mirrored() {
                data.swapped()
            } else {
                data.clone()
            };
            let sy = work.sums().1 as f64;
            vec![
                vec![j[(0, 0)], 0.0],
                vec![0.0, sy / (p.lambda3 * p.lambda3)],
            ]
        }
        Variant::SubModelII | Variant::MirroredSubModelII => {
            vec![vec![j[(0, 0)], 0.0], vec![0.0, j[(2, 2)]]]
        }
    })
}

/// Covariance of the estimates: analytic for the sub-models, inverse
/// observed information for the full model.
pub fn inverse_information(model: &ModelSpec, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    match model.variant() {
        Variant::Full => {
            let j = observed_information_full(model, data)?;
            let inv = j.try_inverse().ok_or_else(|| {
                Error::SingularInformation("observed information of the full model".into())
            })?;
            Ok((0..3)
                .map(|r| (0..3).map(|c| inv[(r, c)]).collect())
                .collect())
        }
        _ => {
            let i = fisher_information(model, data.n())?;
            Ok(vec![vec![1.0 / i[(0, 0)], 0.0], vec![0.0, 1.0 / i[(1, 1)]]])
        }
    }
}

fn standard_errors(model: &ModelSpec, data: &Dataset) -> Result<Vec<f64>> {
    let inv = inverse_information(model, data)?;
    let se: Vec<f64> = (0..inv.len()).map(|i| inv[i][i].sqrt()).collect();
    if se.iter().all(|s| s.is_finite()) {
        Ok(se)
    } else {
        Err(Error::SingularInformation(
            "non-finite standard error".into(),
        ))
    }
}
