//! Weighted L2 statistic `n * int_[0,1]^2 (G_n - G)^2 w`.
//!
//! For a power weight `t1^a1 t2^a2` every integral is a moment
//! `int t^(k + a) dt = 1 / (k + a + 1)`, so the statistic splits into
//!
//! * a data-data term `(1/n) sum_ij 1 / ((X_i+X_j+a1+1)(Y_i+Y_j+a2+1))`,
//! * a data-model term `sum_i E[1 / ((X+X_i+a1+1)(Y+Y_i+a2+1))]`,
//! * a model-model term `n E[1 / ((X+X'+a1+1)(Y+Y'+a2+1))]` for two
//!   independent model draws,
//!
//! combined as `data - 2 cross + model`. Under the model `X + X'` is
//! Poisson(2 lambda1) and `Y + Y'` given `X + X' = j` is
//! Poisson(2 lambda2 + j lambda3), which turns the model term into a double
//! series. Polynomial weights `c1 + c2 t1 t2 + c3 (t1 t2)^2` are sums of
//! power weights.

use serde::{Deserialize, Serialize};

use super::{Method, Settings, TestOutcome};
use crate::data::{CountTable, Dataset};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Params};
use crate::poisson::{PoissonTerms, MAX_SERIES_TERMS};

/// Default absolute accuracy target for the series.
pub const DEFAULT_MG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `c1 + c2 t1 t2 + c3 t1^2 t2^2`.
    Polynomial { c1: f64, c2: f64, c3: f64 },
    /// `t1^a1 t2^a2` with `a1, a2 > -1`.
    Power { a1: f64, a2: f64 },
}

/// Parses `power:a1,a2` or `poly:c1,c2,c3`.
impl std::str::FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let w = match crate::parse_tagged_list(s)? {
            ("power", v) if v.len() == 2 => WeightSpec::Power { a1: v[0], a2: v[1] },
            ("poly" | "polynomial", v) if v.len() == 3 => WeightSpec::Polynomial {
                c1: v[0],
                c2: v[1],
                c3: v[2],
            },
            _ => {
                return Err(Error::InvalidSetting(format!(
                    "weight must be 'power:a1,a2' or 'poly:c1,c2,c3', got '{s}'"
                )))
            }
        };
        w.validate()?;
        Ok(w)
    }
}

impl std::fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSpec::Power { a1, a2 } => write!(f, "power:{a1},{a2}"),
            WeightSpec::Polynomial { c1, c2, c3 } => write!(f, "poly:{c1},{c2},{c3}"),
        }
    }
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::Power { a1, a2 } => {
                if !(a1.is_finite() && a2.is_finite() && a1 > -1.0 && a2 > -1.0) {
                    return Err(Error::InvalidSetting(format!(
                        "power weight exponents must exceed -1, got ({a1}, {a2})"
                    )));
                }
                Ok(())
            }
            WeightSpec::Polynomial { c1, c2, c3 } => {
                if ![c1, c2, c3].iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidSetting(
                        "polynomial weight must be finite".into(),
                    ));
                }
                // w depends on s = t1 t2 in [0, 1]: check the ends and the vertex
                let w = |s: f64| c1 + c2 * s + c3 * s * s;
                let mut checks = vec![0.0, 1.0];
                if c3 != 0.0 {
                    let v = -c2 / (2.0 * c3);
                    if (0.0..=1.0).contains(&v) {
                        checks.push(v);
                    }
                }
                if let Some(s) = checks.into_iter().find(|&s| w(s) < -1e-14) {
                    return Err(Error::InvalidSetting(format!(
                        "polynomial weight is negative at t1 t2 = {s}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Weight at `(t1, t2)`.
    pub fn value(&self, t1: f64, t2: f64) -> f64 {
        match *self {
            WeightSpec::Power { a1, a2 } => t1.powf(a1) * t2.powf(a2),
            WeightSpec::Polynomial { c1, c2, c3 } => {
                let s = t1 * t2;
                c1 + c2 * s + c3 * s * s
            }
        }
    }

    /// The weight as a sum of `coef * t1^a1 t2^a2`.
    fn components(&self) -> Vec<(f64, f64, f64)> {
        match *self {
            WeightSpec::Power { a1, a2 } => vec![(1.0, a1, a2)],
            WeightSpec::Polynomial { c1, c2, c3 } => {
                [(c1, 0.0, 0.0), (c2, 1.0, 1.0), (c3, 2.0, 2.0)]
                    .into_iter()
                    .filter(|c| c.0 != 0.0)
                    .collect()
            }
        }
    }

    /// The weight with its two arguments exchanged.
    pub fn swapped(&self) -> Self {
        match *self {
            WeightSpec::Power { a1, a2 } => WeightSpec::Power { a1: a2, a2: a1 },
            w => w,
        }
    }
}

/// Sums `f(k) P(N = k)`, `N ~ Poisson(mu)`, for `0 <= f <= f_max`, to absolute
/// accuracy `tol`.
fn poisson_sum<F>(mu: f64, tol: f64, f_max: f64, mut f: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    let mut sum = 0.0;
    for (i, (k, p)) in PoissonTerms::new(mu, tol / f_max.max(1e-300)).enumerate() {
        if i >= MAX_SERIES_TERMS {
            return Err(Error::Truncation {
                iterations: i,
                partial_sum: sum,
            });
        }
        if p > 0.0 {
            sum += p * f(k)?;
        }
    }
    Ok(sum)
}

/// `E[1 / (S + c)]` for `S ~ Poisson(mu)`, `c > 0`.
fn reciprocal_moment(mu: f64, c: f64, tol: f64) -> Result<f64> {
    poisson_sum(mu, tol, 1.0 / c, |s| Ok(1.0 / (s as f64 + c)))
}

/// Statistic for one power weight on canonical-orientation data and model.
fn power_term(counts: &CountTable, p: Params, a1: f64, a2: f64, tol: f64) -> Result<f64> {
    let n = counts.n() as f64;
    let (b1, b2) = (a1 + 1.0, a2 + 1.0);
    let cells: Vec<(f64, f64, f64)> = counts
        .cells()
        .map(|(x, y, c)| (x as f64, y as f64, c as f64))
        .collect();

    let mut data = 0.0;
    for &(xi, yi, ci) in &cells {
        for &(xj, yj, cj) in &cells {
            data += ci * cj / ((xi + xj + b1) * (yi + yj + b2));
        }
    }
    data /= n;

    // cross term: sum over data cells of E[1 / ((X + x_i + b1)(Y + y_i + b2))]
    let cols = counts.cols();
    let cross_max = n / (b1 * b2);
    let inner_tol = tol * b1 / n;
    let cross = poisson_sum(p.lambda1, tol, cross_max, |x| {
        let mu = p.conditional_mean(x as u32);
        let mut h = vec![f64::NAN; cols];
        let mut acc = 0.0;
        for &(xi, yi, ci) in &cells {
            let slot = &mut h[yi as usize];
            if slot.is_nan() {
                *slot = reciprocal_moment(mu, yi + b2, inner_tol)?;
            }
            acc += ci / (x as f64 + xi + b1) * *slot;
        }
        Ok(acc)
    })?;

    let model_max = 1.0 / (b1 * b2);
    let model = n * poisson_sum(2.0 * p.lambda1, tol / n, model_max, |j| {
        let mu = 2.0 * p.lambda2 + j as f64 * p.lambda3;
        Ok(reciprocal_moment(mu, b2, tol * b1 / n)? / (j as f64 + b1))
    })?;

    Ok(data - 2.0 * cross + model)
}

/// Weighted L2 distance between the empirical and model pgf on `[0, 1]^2`.
pub fn mg_statistic(
    data: &Dataset,
    model: &ModelSpec,
    weight: &WeightSpec,
    truncation_tol: f64,
) -> Result<TestOutcome> {
    data.require_nonempty()?;
    weight.validate()?;
    if !(truncation_tol > 0.0 && truncation_tol.is_finite()) {
        return Err(Error::InvalidSetting(format!(
            "truncation tolerance must be positive, got {truncation_tol}"
        )));
    }
    let (counts, w) = if model.is_mirrored() {
        (data.swapped().counts(), weight.swapped())
    } else {
        (data.counts(), *weight)
    };
    let p = model.params();
    let mut stat = 0.0;
    for (coef, a1, a2) in w.components() {
        stat += coef * power_term(&counts, p, a1, a2, truncation_tol)?;
    }
    // the exact value is a non-negative integral; only cancellation can push it below 0
    Ok(TestOutcome::new(
        Method::Mg,
        stat.max(0.0),
        Settings::Mg {
            weight: *weight,
            truncation_tol,
        },
    ))
}
