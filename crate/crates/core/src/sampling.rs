//! Seeded samplers for the pseudo-Poisson family and the two power-study
//! alternatives: the classical bivariate Poisson built by trivariate
//! reduction, and the bivariate COM-Poisson built from a COM-Poisson number of
//! bivariate Bernoulli trials.
//!
//! Every sampler takes an explicit `u64` seed and owns its generator, so
//! results never depend on scheduling. Parallel callers derive per-task seeds
//! with [`child_seed`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::poisson::{ln_factorial, log_sum_exp, MAX_SERIES_TERMS, SERIES_TOL};

/// Generator used by every sampler.
pub type SampleRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for task `index` of a run started from `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

#[inline]
fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, mu: f64) -> u32 {
    if mu <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mu).expect("finite positive Poisson mean");
    d.sample(rng) as u32
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptySample("requested sample size is zero".into()))
    } else {
        Ok(())
    }
}

/// `n` draws from the model using an existing generator.
pub fn sample_pseudo_poisson_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    require_n(n)?;
    let p = model.params();
    let x_dist = Poisson::new(p.lambda1).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    // conditional distributions are rebuilt per x; cache the common ones
    let mut cache: Vec<Option<Poisson<f64>>> = vec![None; 32];
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let x = x_dist.sample(rng) as u32;
        let mu = p.conditional_mean(x);
        let y = if mu <= 0.0 {
            0
        } else if (x as usize) < cache.len() {
            let d =
                cache[x as usize].get_or_insert_with(|| Poisson::new(mu).expect("positive mean"));
            d.sample(rng) as u32
        } else {
            draw_poisson(rng, mu)
        };
        pairs.push(if model.is_mirrored() { (y, x) } else { (x, y) });
    }
    Ok(Dataset::new(pairs))
}

/// `n` draws from the pseudo-Poisson model: `X ~ Poisson(lambda1)`, then
/// `Y | X = x ~ Poisson(lambda2 + lambda3 x)`; mirrored models swap the pair.
pub fn sample_pseudo_poisson(model: &ModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    sample_pseudo_poisson_with(model, n, &mut rng_from_seed(seed))
}

/// Classical bivariate Poisson `(Z1 + Z3, Z2 + Z3)` with independent
/// `Zi ~ Poisson(theta_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bcbp {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Bcbp {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Result<Self> {
        let b = Self {
            theta1,
            theta2,
            theta3,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("theta3", self.theta3),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        require_n(n)?;
        self.validate()?;
        let z1 = Poisson::new(self.theta1).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        let z2 = Poisson::new(self.theta2).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        let z3 = Poisson::new(self.theta3).map_err(|e| Error::ParameterDomain(e.to_string()))?;
        let pairs = (0..n)
            .map(|_| {
                let a = z1.sample(rng) as u32;
                let b = z2.sample(rng) as u32;
                let c = z3.sample(rng) as u32;
                (a + c, b + c)
            })
            .collect();
        Ok(Dataset::new(pairs))
    }
}

pub fn sample_bcbp(spec: &Bcbp, n: usize, seed: u64) -> Result<Dataset> {
    spec.sample_with(n, &mut rng_from_seed(seed))
}

/// COM-Poisson law `P(N = j) = theta^j / ((j!)^nu Z(theta, nu))` on a support
/// truncated where the neglected tail mass falls below `1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComPoisson {
    theta: f64,
    nu: f64,
    ln_z: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl ComPoisson {
    pub fn new(theta: f64, nu: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "nu must be positive, got {nu}"
            )));
        }
        let ln_theta = theta.ln();
        let mut logs: Vec<f64> = Vec::new();
        let mut ln_partial = f64::NEG_INFINITY;
        loop {
            let j = logs.len() as u64;
            if logs.len() >= MAX_SERIES_TERMS {
                return Err(Error::Truncation {
                    iterations: logs.len(),
                    partial_sum: ln_partial.exp(),
                });
            }
            let lt = j as f64 * ln_theta - nu * ln_factorial(j);
            logs.push(lt);
            ln_partial = log_sum_exp(&[ln_partial, lt]);
            // successive term ratios theta / (j+1)^nu only shrink from here on
            let ln_ratio = ln_theta - nu * ((j + 1) as f64).ln();
            if ln_ratio < 0.0 {
                let r = ln_ratio.exp();
                let tail = (lt - ln_partial).exp() * r / (1.0 - r);
                if tail < SERIES_TOL {
                    break;
                }
            }
        }
        let ln_z = log_sum_exp(&logs);
        let pmf: Vec<f64> = logs.iter().map(|l| (l - ln_z).exp()).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *cdf.last_mut().expect("at least one term") = 1.0;
        Ok(Self {
            theta,
            nu,
            ln_z,
            pmf,
            cdf,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Normalizing constant `Z(theta, nu)`.
    pub fn normalizing_constant(&self) -> f64 {
        self.ln_z.exp()
    }

    pub fn pmf(&self, j: usize) -> f64 {
        self.pmf.get(j).copied().unwrap_or(0.0)
    }

    /// Largest value with positive mass on the truncated support.
    pub fn support_max(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c <= u);
        j.min(self.cdf.len() - 1) as u32
    }
}

/// One COM-Poisson draw from a fresh generator seeded with `seed`.
pub fn sample_com_poisson(theta: f64, nu: f64, seed: u64) -> Result<u32> {
    Ok(ComPoisson::new(theta, nu)?.sample(&mut rng_from_seed(seed)))
}

/// Bivariate COM-Poisson: `N ~ COM-Poisson(theta, nu)`, then the column sums
/// of `N` bivariate Bernoulli trials with `P(W1 = a, W2 = b) = cell_probs[a][b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bcmp {
    pub theta: f64,
    pub nu: f64,
    pub cell_probs: [[f64; 2]; 2],
}

impl Bcmp {
    pub fn new(theta: f64, nu: f64, cell_probs: [[f64; 2]; 2]) -> Result<Self> {
        let b = Self {
            theta,
            nu,
            cell_probs,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let flat = self.cell_probs.iter().flatten();
        if flat.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::ParameterDomain(format!(
                "cell probabilities must lie in [0, 1], got {:?}",
                self.cell_probs
            )));
        }
        let total: f64 = flat.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::ParameterDomain(format!(
                "cell probabilities must sum to 1, got {total}"
            )));
        }
        ComPoisson::new(self.theta, self.nu).map(|_| ())
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        require_n(n)?;
        self.validate()?;
        let count = ComPoisson::new(self.theta, self.nu)?;
        let c = self.cell_probs;
        let (c00, c01, c10) = (c[0][0], c[0][0] + c[0][1], c[0][0] + c[0][1] + c[1][0]);
        let pairs = (0..n)
            .map(|_| {
                let trials = count.sample(rng);
                let (mut w1, mut w2) = (0u32, 0u32);
                for _ in 0..trials {
                    let u: f64 = rng.random();
                    if u < c00 {
                    } else if u < c01 {
                        w2 += 1;
                    } else if u < c10 {
                        w1 += 1;
                    } else {
                        w1 += 1;
                        w2 += 1;
                    }
                }
                (w1, w2)
            })
            .collect();
        Ok(Dataset::new(pairs))
    }
}

pub fn sample_bcmp(spec: &Bcmp, n: usize, seed: u64) -> Result<Dataset> {
    spec.sample_with(n, &mut rng_from_seed(seed))
}

/// Data-generating process for power studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AlternativeSpec {
    PseudoPoisson(ModelSpec),
    Bcbp(Bcbp),
    Bcmp(Bcmp),
}

impl AlternativeSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlternativeSpec::PseudoPoisson(_) => Ok(()),
            AlternativeSpec::Bcbp(b) => b.validate(),
            AlternativeSpec::Bcmp(b) => b.validate(),
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        match self {
            AlternativeSpec::PseudoPoisson(m) => sample_pseudo_poisson_with(m, n, rng),
            AlternativeSpec::Bcbp(b) => b.sample_with(n, rng),
            AlternativeSpec::Bcmp(b) => b.sample_with(n, rng),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_with(n, &mut rng_from_seed(seed))
    }
}

/// Parses `bcbp:t1,t2,t3`, `bcmp:theta,nu,p00,p01,p10,p11`, or a
/// pseudo-Poisson variant with its free parameters (`full:l1,l2,l3`,
/// `sub1:l1,l3`, `sub2:l1,l3`, `mirrored-sub2:l1,l3`).
impl std::str::FromStr for AlternativeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, v) = crate::parse_tagged_list(s)?;
        let arity = |k: usize| {
            if v.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidSetting(format!(
                    "'{name}' takes {k} numbers, got {} in '{s}'",
                    v.len()
                )))
            }
        };
        match name {
            "bcbp" => {
                arity(3)?;
                Ok(AlternativeSpec::Bcbp(Bcbp::new(v[0], v[1], v[2])?))
            }
            "bcmp" => {
                arity(6)?;
                Ok(AlternativeSpec::Bcmp(Bcmp::new(
                    v[0],
                    v[1],
                    [[v[2], v[3]], [v[4], v[5]]],
                )?))
            }
            variant => {
                let variant: crate::model::Variant = variant.parse()?;
                arity(variant.free_parameters())?;
                Ok(AlternativeSpec::PseudoPoisson(ModelSpec::from_free(
                    variant, &v,
                )?))
            }
        }
    }
}

impl fmt::Display for AlternativeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlternativeSpec::PseudoPoisson(m) => write!(f, "{m}"),
            AlternativeSpec::Bcbp(b) => {
                write!(
                    f,
                    "BCBP(theta1={}, theta2={}, theta3={})",
                    b.theta1, b.theta2, b.theta3
                )
            }
            AlternativeSpec::Bcmp(b) => write!(
                f,
                "BCMP(theta={}, nu={}, cells={:?})",
                b.theta, b.nu, b.cell_probs
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson;

    #[test]
    fn same_seed_same_data() {
        let m = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            sample_pseudo_poisson(&m, 5, 42).unwrap(),
            sample_pseudo_poisson(&m, 5, 42).unwrap()
        );
        assert_ne!(
            sample_pseudo_poisson(&m, 50, 42).unwrap(),
            sample_pseudo_poisson(&m, 50, 43).unwrap()
        );
    }

    #[test]
    fn zero_size_is_an_error() {
        let m = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            sample_pseudo_poisson(&m, 0, 1),
            Err(Error::EmptySample(_))
        ));
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| child_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }

    #[test]
    fn sub_model_ii_never_produces_zero_x_positive_y() {
        let m = ModelSpec::sub_model_ii(1.0, 2.0).unwrap();
        let d = sample_pseudo_poisson(&m, 2000, 3).unwrap();
        assert!(d.pairs().iter().all(|&(x, y)| x > 0 || y == 0));
        let mm = ModelSpec::mirrored_sub_model_ii(1.0, 2.0).unwrap();
        let d = sample_pseudo_poisson(&mm, 2000, 3).unwrap();
        assert!(d.pairs().iter().all(|&(x, y)| y > 0 || x == 0));
    }

    #[test]
    fn com_poisson_at_unit_nu_is_poisson() {
        let c = ComPoisson::new(1.0, 1.0).unwrap();
        assert!((c.normalizing_constant() - std::f64::consts::E).abs() < 1e-12);
        for j in 0..10 {
            assert!((c.pmf(j) - poisson::pmf(1.0, j as u64)).abs() < 2e-12);
        }
    }

    #[test]
    fn com_poisson_normalizing_constant() {
        // Z(1, 5) = sum 1 / (j!)^5 = 1 + 1 + 1/32 + 1/7776 + ...
        let c = ComPoisson::new(1.0, 5.0).unwrap();
        let z: f64 = (0..20u64)
            .map(|j| (-5.0 * poisson::ln_factorial(j)).exp())
            .sum();
        assert!((c.normalizing_constant() - z).abs() < 1e-14);
        assert!((c.pmf(0) - 1.0 / z).abs() < 1e-14);
    }

    #[test]
    fn tiny_theta_forces_zero_trials() {
        let b = Bcmp::new(1e-12, 1.0, [[0.25; 2]; 2]).unwrap();
        let d = sample_bcmp(&b, 1000, 9).unwrap();
        assert!(d.pairs().iter().all(|&p| p == (0, 0)));
    }

    #[test]
    fn bcmp_rejects_bad_cells() {
        assert!(Bcmp::new(1.0, 1.0, [[0.5, 0.5], [0.5, 0.0]]).is_err());
        assert!(Bcmp::new(1.0, 1.0, [[1.2, -0.2], [0.0, 0.0]]).is_err());
        assert!(Bcbp::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn bcmp_coordinates_bounded_by_trials() {
        let b = Bcmp::new(2.0, 1.0, [[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let a = sample_bcmp(&b, 200, 1).unwrap();
        assert_eq!(a, sample_bcmp(&b, 200, 1).unwrap());
    }

    #[test]
    fn alternative_serde_roundtrip() {
        let alts = [
            AlternativeSpec::Bcbp(Bcbp::new(1.0, 3.0, 4.0).unwrap()),
            AlternativeSpec::Bcmp(Bcmp::new(1.0, 5.0, [[0.4, 0.1], [0.1, 0.4]]).unwrap()),
            AlternativeSpec::PseudoPoisson(ModelSpec::sub_model_i(1.0, 0.5).unwrap()),
        ];
        for a in alts {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<AlternativeSpec>(&s).unwrap(), a);
        }
    }

    #[test]
    fn alternative_strings_parse() {
        assert_eq!(
            "bcbp:1,3,4".parse::<AlternativeSpec>().unwrap(),
            AlternativeSpec::Bcbp(Bcbp::new(1.0, 3.0, 4.0).unwrap())
        );
        let AlternativeSpec::Bcmp(b) = "bcmp:2,0.8,0.4,0.2,0.2,0.2".parse().unwrap() else {
            panic!("expected bcmp");
        };
        assert_eq!(b.cell_probs, [[0.4, 0.2], [0.2, 0.2]]);
        assert_eq!(
            "sub1:1,0.5".parse::<AlternativeSpec>().unwrap(),
            AlternativeSpec::PseudoPoisson(ModelSpec::sub_model_i(1.0, 0.5).unwrap())
        );
        for bad in [
            "bcbp:1,3",
            "bcmp:2,1,0.5,0.5,0.5,0.5",
            "full:1,1",
            "poisson:1",
            "bcbp",
        ] {
            assert!(bad.parse::<AlternativeSpec>().is_err(), "{bad}");
        }
    }
}
