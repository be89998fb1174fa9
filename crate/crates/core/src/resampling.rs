//! Parametric bootstrap calibration and Monte-Carlo power.
//!
//! Every replicate draws its data from a seed derived from the master seed
//! and the replicate index, so results do not depend on how rayon schedules
//! the work. Set `PSEUDOFIT_THREADS` to cap the worker count.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimation::fit;
use crate::gof::{QuantilePoint, Sidedness, Statistic, TestOutcome};
use crate::model::ModelSpec;
use crate::sampling::{child_seed, rng_from_seed, sample_pseudo_poisson_with, AlternativeSpec};

/// Minimum number of bootstrap replicates accepted.
pub const MIN_REPLICATES: usize = 100;

/// Lower and upper 0.5%, 2.5% and 5% points, matching the usual reference tables.
pub const TABLE_LEVELS: [f64; 6] = [0.005, 0.025, 0.05, 0.95, 0.975, 0.995];

/// Fraction of dropped replicates above which a warning is attached.
const DROP_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates `B`.
    pub replicates: usize,
    /// Size `m` of each bootstrap sample; `None` means the data size `n`.
    pub resample_size: Option<usize>,
    pub seed: u64,
    /// Refit the null variant on every replicate before computing the
    /// statistic (plug-in bootstrap). When off, the hypothesized model is used
    /// as-is.
    pub refit: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 5000,
            resample_size: None,
            seed: 0,
            refit: true,
        }
    }
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            ..Self::default()
        }
    }

    /// Validates against a data size and returns the effective resample size.
    pub fn resample_size_for(&self, n: usize) -> Result<usize> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidSetting(format!(
                "bootstrap needs at least {MIN_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        let m = self.resample_size.unwrap_or(n);
        if m == 0 || m > n {
            return Err(Error::InvalidSetting(format!(
                "resample size must satisfy 1 <= m <= n = {n}, got {m}"
            )));
        }
        Ok(m)
    }
}

/// Bootstrap replicates of a statistic, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub stats: Vec<f64>,
    /// Replicates that failed twice and were left out of `stats`.
    pub dropped: usize,
    pub resample_size: usize,
    pub refit: bool,
    pub warnings: Vec<String>,
}

impl NullDistribution {
    fn sorted(&self) -> Vec<f64> {
        let mut v = self.stats.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Sample quantile with linear interpolation between order statistics
    /// (Hyndman–Fan type 7).
    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.sorted(), q)
    }

    pub fn quantiles(&self, levels: &[f64]) -> Vec<QuantilePoint> {
        let sorted = self.sorted();
        levels
            .iter()
            .map(|&level| QuantilePoint {
                level,
                value: quantile_sorted(&sorted, level),
            })
            .collect()
    }

    pub fn p_value(&self, t_obs: f64, sidedness: Sidedness) -> f64 {
        empirical_p_value(t_obs, &self.stats, sidedness)
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of replicates at least as extreme as `t_obs`. Ties count as
/// extreme, so a statistic that never varies is never significant.
pub fn empirical_p_value(t_obs: f64, stats: &[f64], sidedness: Sidedness) -> f64 {
    if stats.is_empty() {
        return 1.0;
    }
    let hits = match sidedness {
        Sidedness::Upper => stats.iter().filter(|&&s| s >= t_obs).count(),
        Sidedness::TwoSided => {
            let a = t_obs.abs();
            stats.iter().filter(|&&s| s.abs() >= a).count()
        }
    };
    hits as f64 / stats.len() as f64
}

impl TestOutcome {
    /// Attaches the bootstrap p-value and the standard quantile table.
    pub fn calibrated<S: Statistic + ?Sized>(mut self, test: &S, null: &NullDistribution) -> Self {
        self.p_value = Some(null.p_value(self.statistic, test.sidedness()));
        self.null_quantiles = Some(null.quantiles(&TABLE_LEVELS));
        self
    }
}

fn thread_pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("PSEUDOFIT_THREADS")
            .ok()?
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .ok()
    })
    .as_ref()
}

/// Runs `f` inside the pool sized by `PSEUDOFIT_THREADS`, or on the global
/// rayon pool when the variable is unset.
pub fn in_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_pool() {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn replicate_once<S: Statistic + ?Sized>(
    model: &ModelSpec,
    test: &S,
    m: usize,
    refit: bool,
    seed: u64,
) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let data = sample_pseudo_poisson_with(model, m, &mut rng)?;
    let value = if refit {
        let fitted = fit(model.variant(), &data)?;
        test.statistic(&data, &fitted.model)?
    } else {
        test.statistic(&data, model)?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidSetting(format!(
            "statistic evaluated to {value}"
        )))
    }
}

/// Simulates the null distribution of `test` under `model` for data of size
/// `n` (replicates use `cfg.resample_size`, default `n`).
///
/// A replicate whose sample cannot be fitted or evaluated is retried once with
/// a fresh seed and dropped if it fails again.
pub fn bootstrap_null<S: Statistic + ?Sized>(
    model: &ModelSpec,
    test: &S,
    n: usize,
    cfg: &BootstrapConfig,
) -> Result<NullDistribution> {
    let m = cfg.resample_size_for(n)?;
    let outcomes: Vec<Result<f64>> = in_pool(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|b| {
                let seed = child_seed(cfg.seed, b as u64);
                replicate_once(model, test, m, cfg.refit, child_seed(seed, 0))
                    .or_else(|_| replicate_once(model, test, m, cfg.refit, child_seed(seed, 1)))
            })
            .collect()
    });

    let mut stats = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok(v) => stats.push(v),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let dropped = cfg.replicates - stats.len();
    if stats.is_empty() {
        return Err(first_error.expect("no replicates yet no error"));
    }
    let mut warnings = Vec::new();
    if dropped as f64 > DROP_WARNING_FRACTION * cfg.replicates as f64 {
        warnings.push(format!(
            "{dropped} of {} bootstrap replicates failed twice and were dropped (first error: {})",
            cfg.replicates,
            first_error.map(|e| e.to_string()).unwrap_or_default()
        ));
    }
    Ok(NullDistribution {
        stats,
        dropped,
        resample_size: m,
        refit: cfg.refit,
        warnings,
    })
}

/// Observed statistic and bootstrap p-value for one sample from an
/// alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDraw {
    pub statistic: f64,
    pub p_value: f64,
    /// The null model the bootstrap was run under (fitted when refitting).
    pub null_model: ModelSpec,
}

/// Draws one sample of size `n` from `alt`, tests it against the null
/// family of `model`, and returns the bootstrap p-value.
///
/// With `cfg.refit` the null variant is fitted to the sample first; without
/// it `model` is taken as the hypothesized null.
pub fn power_p_value<S: Statistic + ?Sized>(
    model: &ModelSpec,
    test: &S,
    alt: &AlternativeSpec,
    n: usize,
    cfg: &BootstrapConfig,
) -> Result<PowerDraw> {
    cfg.resample_size_for(n)?;
    let data = alt.sample(n, child_seed(cfg.seed, 0))?;
    draw_against(&data, model, test, cfg)
}

fn draw_against<S: Statistic + ?Sized>(
    data: &Dataset,
    model: &ModelSpec,
    test: &S,
    cfg: &BootstrapConfig,
) -> Result<PowerDraw> {
    let null_model = if cfg.refit {
        fit(model.variant(), data)?.model
    } else {
        *model
    };
    let statistic = test.statistic(data, &null_model)?;
    let boot = BootstrapConfig {
        seed: child_seed(cfg.seed, 1),
        ..cfg.clone()
    };
    let null = bootstrap_null(&null_model, test, data.n(), &boot)?;
    Ok(PowerDraw {
        statistic,
        p_value: null.p_value(statistic, test.sidedness()),
        null_model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub level: f64,
    pub sample_size: usize,
    /// Requested Monte-Carlo repetitions `R`.
    pub repetitions: usize,
    /// Repetitions that could not be tested (for example, a sample the null
    /// variant cannot be fitted to).
    pub failed: usize,
    pub rejections: usize,
    /// `rejections / (repetitions - failed)`.
    pub rejection_rate: f64,
    pub p_values: Vec<f64>,
}

/// Repeats [`power_p_value`] `repetitions` times with independent seeds and
/// reports the fraction of p-values below `level`.
pub fn power_estimate<S: Statistic + ?Sized>(
    model: &ModelSpec,
    test: &S,
    alt: &AlternativeSpec,
    n: usize,
    cfg: &BootstrapConfig,
    level: f64,
    repetitions: usize,
) -> Result<PowerEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidSetting(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    if repetitions == 0 {
        return Err(Error::InvalidSetting(
            "power needs at least one repetition".into(),
        ));
    }
    cfg.resample_size_for(n)?;
    alt.validate()?;
    let draws: Vec<Result<PowerDraw>> = in_pool(|| {
        (0..repetitions)
            .into_par_iter()
            .map(|r| {
                let rep = BootstrapConfig {
                    seed: child_seed(cfg.seed, r as u64),
                    ..cfg.clone()
                };
                power_p_value(model, test, alt, n, &rep)
            })
            .collect()
    });

    let mut p_values = Vec::with_capacity(repetitions);
    let mut first_error = None;
    for d in draws {
        match d {
            Ok(d) => p_values.push(d.p_value),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if p_values.is_empty() {
        return Err(first_error.expect("no repetitions yet no error"));
    }
    let rejections = p_values.iter().filter(|&&p| p < level).count();
    Ok(PowerEstimate {
        level,
        sample_size: n,
        repetitions,
        failed: repetitions - p_values.len(),
        rejections,
        rejection_rate: rejections as f64 / p_values.len() as f64,
        p_values,
    })
}
