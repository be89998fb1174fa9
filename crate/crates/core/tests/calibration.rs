//! Statistical calibration: null p-values, null medians and estimator
//! behaviour at a boundary, all with fixed seeds.

use pseudofit::gof::{TestSpec, VarianceForm};
use pseudofit::resampling::{bootstrap_null, power_estimate, BootstrapConfig};
use pseudofit::sampling::{sample_pseudo_poisson, AlternativeSpec};
use pseudofit::{fit, ModelSpec, Variant};

/// Kolmogorov-Smirnov distance between a sample and U(0, 1).
fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| (u - i as f64 / n).max((i + 1) as f64 / n - u))
        .fold(0.0, f64::max)
}

#[test]
fn ks_distance_of_a_perfect_grid_is_half_a_step() {
    let grid: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
    assert!((ks_uniform(&grid) - 0.05).abs() < 1e-15);
}

#[test]
fn fi_p_values_are_uniform_under_the_null() {
    let model = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
    let reps = 200;
    let est = power_estimate(
        &model,
        &TestSpec::Fi,
        &AlternativeSpec::PseudoPoisson(model),
        500,
        &BootstrapConfig::new(5000, 31),
        0.05,
        reps,
    )
    .unwrap();
    assert_eq!(est.failed, 0);
    assert_eq!(est.p_values.len(), reps);
    let d = ks_uniform(&est.p_values);
    // 5% critical value of the one-sample KS statistic
    let critical = 1.358 / (reps as f64).sqrt();
    println!("FI p-value KS distance {d:.4} (critical {critical:.4})");
    assert!(d < critical, "KS distance {d} exceeds {critical}");
}

#[test]
fn kk_null_median_lies_in_the_reference_band() {
    // 5% / 95% points at n = 100, t = (-0.9, -0.9) from the reference table
    let band = (-1.674, 1.620);
    let model = ModelSpec::sub_model_i(0.5, 0.5).unwrap();
    let test = TestSpec::Kk {
        t1: -0.9,
        t2: -0.9,
        form: VarianceForm::Delta,
    };
    let null = bootstrap_null(&model, &test, 100, &BootstrapConfig::new(5000, 41)).unwrap();
    let median = null.quantile(0.5);
    assert!(median > band.0 && median < band.1, "median {median}");
}

#[test]
fn independent_data_fit_lambda3_near_zero() {
    let truth = ModelSpec::full(1.0, 0.5, 0.0).unwrap();
    let d = sample_pseudo_poisson(&truth, 100_000, 43).unwrap();
    let f = fit(Variant::Full, &d).unwrap();
    let l3 = f.model.free_params()[2];
    let se = f.stderr.expect("standard errors")[2];
    assert!(l3.abs() < 3.0 * se, "lambda3 {l3}, se {se}");
}
