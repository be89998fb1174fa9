//! Goodness-of-fit statistics for the pseudo-Poisson family.
//!
//! * `Fi`: scaled difference between the empirical and model dispersion index.
//! * `Mg`: weighted L2 distance between the empirical and model pgf on the
//!   unit square.
//! * `Kk`: standardized pgf difference at one point.
//! * `KkSup`: supremum of `|Kk|` over a grid.
//! * `ChiSquare`: Pearson statistic on a truncated contingency table.
//!
//! Every statistic takes the data and a model (fitted or hypothesized) and is
//! a deterministic function of its inputs. Calibration is by parametric
//! bootstrap, see [`crate::resampling`].

mod chisq;
mod fi;
mod kk;
mod mg;
mod pgf;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub use chisq::{chi_square_statistic, ChiSquareTable};
pub use fi::{fi_statistic, gdi_empirical};
pub use kk::{
    kk_gradient_and_hessian, kk_statistic, kk_sup_over, kk_sup_statistic, kk_variance, GridSpec,
    VarianceForm,
};
pub use mg::{mg_statistic, WeightSpec, DEFAULT_MG_TOL};
pub use pgf::{empirical_pgf, empirical_pgf_grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fi,
    Mg,
    Kk,
    KkSup,
    ChiSquare,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Fi => "fi",
            Method::Mg => "mg",
            Method::Kk => "kk",
            Method::KkSup => "kk-sup",
            Method::ChiSquare => "chisq",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fi" => Ok(Method::Fi),
            "mg" => Ok(Method::Mg),
            "kk" => Ok(Method::Kk),
            "kk-sup" | "kksup" => Ok(Method::KkSup),
            "chisq" | "chi-square" => Ok(Method::ChiSquare),
            other => Err(Error::InvalidSetting(format!(
                "unknown method '{other}' (expected fi, mg, kk, kk-sup, chisq)"
            ))),
        }
    }
}

/// Which tail of the null distribution counts as evidence against the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    Upper,
    TwoSided,
}

/// Where the parameter covariance in a K&K variance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InformationSource {
    /// Closed-form expected information of a sub-model.
    Analytic,
    /// Observed information of the full model at the fitted parameters.
    Observed,
}

/// Method-specific settings and diagnostics echoed in every outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Settings {
    Fi {
        empirical_gdi: f64,
        model_gdi: f64,
    },
    Mg {
        weight: WeightSpec,
        truncation_tol: f64,
    },
    Kk {
        t1: f64,
        t2: f64,
        variance: f64,
        form: VarianceForm,
        information: InformationSource,
    },
    KkSup {
        grid: Option<GridSpec>,
        points: usize,
        skipped: usize,
        argmax_t1: f64,
        argmax_t2: f64,
        form: VarianceForm,
        information: InformationSource,
    },
    ChiSquare {
        k: u32,
        df: usize,
        cells: usize,
        structural_zeros: usize,
    },
}

/// One row of a null-quantile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub settings: Settings,
    pub p_value: Option<f64>,
    pub null_quantiles: Option<Vec<QuantilePoint>>,
}

impl TestOutcome {
    pub(crate) fn new(method: Method, statistic: f64, settings: Settings) -> Self {
        Self {
            method,
            statistic,
            settings,
            p_value: None,
            null_quantiles: None,
        }
    }
}

/// A scalar statistic that can be recomputed on bootstrap replicates.
pub trait Statistic: Sync {
    fn statistic(&self, data: &Dataset, model: &ModelSpec) -> Result<f64>;
    fn sidedness(&self) -> Sidedness;
}

/// A test together with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TestSpec {
    Fi,
    Mg {
        weight: WeightSpec,
        #[serde(default = "default_mg_tol")]
        truncation_tol: f64,
    },
    Kk {
        t1: f64,
        t2: f64,
        #[serde(default)]
        form: VarianceForm,
    },
    KkSup {
        grid: GridSpec,
        #[serde(default)]
        form: VarianceForm,
    },
    ChiSquare {
        k: u32,
    },
}

fn default_mg_tol() -> f64 {
    DEFAULT_MG_TOL
}

impl TestSpec {
    pub fn method(&self) -> Method {
        match self {
            TestSpec::Fi => Method::Fi,
            TestSpec::Mg { .. } => Method::Mg,
            TestSpec::Kk { .. } => Method::Kk,
            TestSpec::KkSup { .. } => Method::KkSup,
            TestSpec::ChiSquare { .. } => Method::ChiSquare,
        }
    }

    /// Checks settings that do not depend on data.
    pub fn validate(&self) -> Result<()> {
        match self {
            TestSpec::Fi => Ok(()),
            TestSpec::Mg {
                weight,
                truncation_tol,
            } => {
                weight.validate()?;
                if !(*truncation_tol > 0.0 && truncation_tol.is_finite()) {
                    return Err(Error::InvalidSetting(format!(
                        "truncation tolerance must be positive, got {truncation_tol}"
                    )));
                }
                Ok(())
            }
            TestSpec::Kk { t1, t2, .. } => kk::check_point(*t1, *t2),
            TestSpec::KkSup { grid, .. } => grid.validate(),
            TestSpec::ChiSquare { k } => {
                if *k == 0 {
                    Err(Error::InvalidSetting(
                        "chi-square truncation k must be >= 1".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn evaluate(&self, data: &Dataset, model: &ModelSpec) -> Result<TestOutcome> {
        match self {
            TestSpec::Fi => fi_statistic(data, model),
            TestSpec::Mg {
                weight,
                truncation_tol,
            } => mg_statistic(data, model, weight, *truncation_tol),
            TestSpec::Kk { t1, t2, form } => kk_statistic(data, model, *t1, *t2, *form),
            TestSpec::KkSup { grid, form } => kk_sup_statistic(data, model, grid, *form),
            TestSpec::ChiSquare { k } => chi_square_statistic(data, model, *k),
        }
    }
}

impl Statistic for TestSpec {
    fn statistic(&self, data: &Dataset, model: &ModelSpec) -> Result<f64> {
        self.evaluate(data, model).map(|o| o.statistic)
    }

    fn sidedness(&self) -> Sidedness {
        match self {
            TestSpec::Fi | TestSpec::Kk { .. } => Sidedness::TwoSided,
            _ => Sidedness::Upper,
        }
    }
}
