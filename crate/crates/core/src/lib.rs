//! Bivariate pseudo-Poisson models and goodness-of-fit testing.
//!
//! The family has `X ~ Poisson(lambda1)` and
//! `Y | X = x ~ Poisson(lambda2 + lambda3 x)`. This crate provides exact
//! probability functions, estimators, five goodness-of-fit statistics,
//! parametric-bootstrap calibration and Monte-Carlo power estimation.

pub mod data;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod io;
pub mod model;
pub mod poisson;
pub mod report;
pub mod resampling;
pub mod sampling;

pub use data::{CountTable, Dataset};
pub use error::{Error, Result};
pub use estimation::{fit, FitResult};
pub use model::{ModelSpec, Params, Variant};

/// Splits `"name:1,2.5,3"` into the name and its numbers.
pub(crate) fn parse_tagged_list(s: &str) -> Result<(&str, Vec<f64>)> {
    let (name, rest) = s
        .split_once(':')
        .ok_or_else(|| Error::InvalidSetting(format!("expected 'name:v1,v2,...', got '{s}'")))?;
    let values = rest
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidSetting(format!("'{v}' in '{s}' is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.trim(), values))
}
