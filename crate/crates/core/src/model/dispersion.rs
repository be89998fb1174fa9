use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

/// Mean vector and covariance matrix of `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
}

impl MomentSummary {
    pub fn swapped(&self) -> Self {
        let c = self.covariance;
        Self {
            mean: [self.mean[1], self.mean[0]],
            covariance: [[c[1][1], c[1][0]], [c[0][1], c[0][0]]],
        }
    }

    pub fn correlation(&self) -> f64 {
        let c = self.covariance;
        c[0][1] / (c[0][0] * c[1][1]).sqrt()
    }
}

/// Generalized dispersion index `sqrt(m)' C sqrt(m) / m'm` for a mean vector
/// `m` and covariance `C`; equals 1 for independent Poisson coordinates.
pub fn dispersion_index(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<f64> {
    if mean.iter().any(|m| *m < 0.0 || !m.is_finite()) {
        return Err(Error::UndefinedIndex(format!(
            "mean vector must be non-negative and finite, got {mean:?}"
        )));
    }
    let denom = mean[0] * mean[0] + mean[1] * mean[1];
    if denom == 0.0 {
        return Err(Error::UndefinedIndex("mean vector is zero".into()));
    }
    let r = [mean[0].sqrt(), mean[1].sqrt()];
    let quad = r[0] * r[0] * cov[0][0] + 2.0 * r[0] * r[1] * cov[0][1] + r[1] * r[1] * cov[1][1];
    Ok(quad / denom)
}

impl ModelSpec {
    /// Mean vector and covariance of the observed pair.
    pub fn moments(&self) -> MomentSummary {
        let p = self.params;
        let (l1, l2, l3) = (p.lambda1, p.lambda2, p.lambda3);
        let my = l2 + l3 * l1;
        let m = MomentSummary {
            mean: [l1, my],
            covariance: [[l1, l1 * l3], [l1 * l3, my + l3 * l3 * l1]],
        };
        if self.is_mirrored() {
            m.swapped()
        } else {
            m
        }
    }

    /// Generalized dispersion index of the model.
    pub fn gdi(&self) -> f64 {
        let m = self.moments();
        dispersion_index(m.mean, m.covariance).expect("model means are positive")
    }
}
