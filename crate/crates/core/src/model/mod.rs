//! The bivariate pseudo-Poisson family.
//!
//! `X ~ Poisson(lambda1)` and `Y | X = x ~ Poisson(lambda2 + lambda3 * x)`.
//! Sub-Model I ties `lambda2 = lambda3`, Sub-Model II fixes `lambda2 = 0`,
//! and the mirrored Sub-Model II applies Sub-Model II to the swapped pair
//! `(Y, X)`.

mod conditional;
mod dispersion;
mod probability;
mod univariate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conditional::{conditional_x_given_y, stirling2};
pub use dispersion::{dispersion_index, MomentSummary};
pub use univariate::{neyman_type_a_pmf, thomas_pmf};

/// Raw rate parameters. Validity depends on the [`Variant`] they are used with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Params {
    pub const fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
        }
    }

    /// Conditional mean of `Y` given `X = x`.
    #[inline]
    pub fn conditional_mean(&self, x: u32) -> f64 {
        self.lambda2 + self.lambda3 * x as f64
    }

    fn check_common(&self) -> Result<()> {
        if !(self.lambda1.is_finite() && self.lambda1 > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda1 must be positive and finite, got {}",
                self.lambda1
            )));
        }
        if !(self.lambda3.is_finite() && self.lambda3 >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda3 must be non-negative and finite, got {}",
                self.lambda3
            )));
        }
        if !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda2 must be non-negative and finite, got {}",
                self.lambda2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "sub1")]
    SubModelI,
    #[serde(rename = "sub2")]
    SubModelII,
    #[serde(rename = "mirrored-sub2")]
    MirroredSubModelII,
}

impl Variant {
    /// Number of free parameters estimated under this variant.
    pub fn free_parameters(self) -> usize {
        match self {
            Variant::Full => 3,
            _ => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::SubModelI => "sub1",
            Variant::SubModelII => "sub2",
            Variant::MirroredSubModelII => "mirrored-sub2",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "sub1" | "sub-model-i" => Ok(Variant::SubModelI),
            "sub2" | "sub-model-ii" => Ok(Variant::SubModelII),
            "mirrored-sub2" | "msub2" => Ok(Variant::MirroredSubModelII),
            other => Err(Error::InvalidSetting(format!(
                "unknown variant '{other}' (expected full, sub1, sub2, mirrored-sub2)"
            ))),
        }
    }
}

/// A validated model: a variant together with parameters satisfying its
/// constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    variant: Variant,
    params: Params,
}

#[derive(Serialize, Deserialize)]
struct RawModelSpec {
    variant: Variant,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        ModelSpec::new(
            raw.variant,
            Params::new(raw.lambda1, raw.lambda2, raw.lambda3),
        )
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(m: ModelSpec) -> Self {
        RawModelSpec {
            variant: m.variant,
            lambda1: m.params.lambda1,
            lambda2: m.params.lambda2,
            lambda3: m.params.lambda3,
        }
    }
}

impl ModelSpec {
    pub fn new(variant: Variant, params: Params) -> Result<Self> {
        params.check_common()?;
        match variant {
            Variant::Full if params.lambda2 <= 0.0 => {
                return Err(Error::ParameterDomain(format!(
                    "full model requires lambda2 > 0, got {}",
                    params.lambda2
                )))
            }
            Variant::SubModelI if params.lambda2 != params.lambda3 => {
                return Err(Error::ParameterDomain(format!(
                    "sub-model I requires lambda2 == lambda3, got {} and {}",
                    params.lambda2, params.lambda3
                )))
            }
            Variant::SubModelII | Variant::MirroredSubModelII if params.lambda2 != 0.0 => {
                return Err(Error::ParameterDomain(format!(
                    "sub-model II requires lambda2 == 0, got {}",
                    params.lambda2
                )))
            }
            _ => {}
        }
        Ok(Self { variant, params })
    }

    pub fn full(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        Self::new(Variant::Full, Params::new(lambda1, lambda2, lambda3))
    }

    pub fn sub_model_i(lambda1: f64, lambda3: f64) -> Result<Self> {
        Self::new(Variant::SubModelI, Params::new(lambda1, lambda3, lambda3))
    }

    pub fn sub_model_ii(lambda1: f64, lambda3: f64) -> Result<Self> {
        Self::new(Variant::SubModelII, Params::new(lambda1, 0.0, lambda3))
    }

    pub fn mirrored_sub_model_ii(lambda1: f64, lambda3: f64) -> Result<Self> {
        Self::new(
            Variant::MirroredSubModelII,
            Params::new(lambda1, 0.0, lambda3),
        )
    }

    /// Builds a model of `variant` from the two or three free parameters in
    /// the order `(lambda1, lambda3)` or `(lambda1, lambda2, lambda3)`.
    pub fn from_free(variant: Variant, free: &[f64]) -> Result<Self> {
        match (variant, free) {
            (Variant::Full, [l1, l2, l3]) => Self::full(*l1, *l2, *l3),
            (Variant::SubModelI, [l1, l3]) => Self::sub_model_i(*l1, *l3),
            (Variant::SubModelII, [l1, l3]) => Self::sub_model_ii(*l1, *l3),
            (Variant::MirroredSubModelII, [l1, l3]) => Self::mirrored_sub_model_ii(*l1, *l3),
            _ => Err(Error::ParameterDomain(format!(
                "{variant} takes {} free parameters, got {}",
                variant.free_parameters(),
                free.len()
            ))),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> Params {
        self.params
    }

    /// Free parameters in the order accepted by [`ModelSpec::from_free`].
    pub fn free_params(&self) -> Vec<f64> {
        let p = self.params;
        match self.variant {
            Variant::Full => vec![p.lambda1, p.lambda2, p.lambda3],
            _ => vec![p.lambda1, p.lambda3],
        }
    }

    pub fn is_mirrored(&self) -> bool {
        self.variant == Variant::MirroredSubModelII
    }

    /// The model acting on the unswapped coordinates: mirrored Sub-Model II
    /// becomes plain Sub-Model II, everything else is returned unchanged.
    pub fn canonical(&self) -> ModelSpec {
        match self.variant {
            Variant::MirroredSubModelII => ModelSpec {
                variant: Variant::SubModelII,
                params: self.params,
            },
            _ => *self,
        }
    }

    /// Whether `(x, y)` has positive probability.
    pub fn in_support(&self, x: u32, y: u32) -> bool {
        let (x, y) = if self.is_mirrored() { (y, x) } else { (x, y) };
        self.params.conditional_mean(x) > 0.0 || y == 0
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.params;
        write!(
            f,
            "{}(lambda1={}, lambda2={}, lambda3={})",
            self.variant, p.lambda1, p.lambda2, p.lambda3
        )
    }
}
