use proptest::prelude::*;

use pseudofit::estimation::loglik;
use pseudofit::gof::{
    kk_statistic, kk_sup_over, mg_statistic, ChiSquareTable, Sidedness, VarianceForm, WeightSpec,
};
use pseudofit::io::{parse_dataset, write_dataset};
use pseudofit::report::{ReportDocument, RunMetadata, SimulationReport};
use pseudofit::resampling::{empirical_p_value, NullDistribution};
use pseudofit::sampling::sample_pseudo_poisson;
use pseudofit::{fit, Dataset, ModelSpec, Variant};

fn lambda() -> impl Strategy<Value = f64> {
    0.05f64..4.0
}

fn any_model() -> impl Strategy<Value = ModelSpec> {
    (0usize..4, lambda(), lambda(), 0.0f64..3.0).prop_map(|(v, l1, l2, l3)| match v {
        0 => ModelSpec::full(l1, l2, l3).unwrap(),
        1 => ModelSpec::sub_model_i(l1, l3).unwrap(),
        2 => ModelSpec::sub_model_ii(l1, l3).unwrap(),
        _ => ModelSpec::mirrored_sub_model_ii(l1, l3).unwrap(),
    })
}

fn pairs(max_len: usize) -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((0u32..12, 0u32..12), 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirrored_model_swaps_coordinates(l1 in lambda(), l3 in 0.0f64..3.0,
                                         x in 0u32..15, y in 0u32..15,
                                         t1 in -0.99f64..1.0, t2 in -0.99f64..1.0) {
        let m = ModelSpec::mirrored_sub_model_ii(l1, l3).unwrap();
        let c = ModelSpec::sub_model_ii(l1, l3).unwrap();
        prop_assert_eq!(m.pmf(x, y), c.pmf(y, x));
        prop_assert_eq!(m.pgf(t1, t2), c.pgf(t2, t1));
        prop_assert_eq!(m.marginal_x_prob(x), c.marginal_y_prob(x));
        prop_assert_eq!(m.in_support(x, y), c.in_support(y, x));
        prop_assert!((m.gdi() - c.gdi()).abs() < 1e-12);
    }

    #[test]
    fn pgf_is_a_probability_on_the_unit_square(m in any_model(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let g = m.pgf(t1, t2);
        prop_assert!(g > 0.0 && g <= 1.0 + 1e-15);
        prop_assert!((m.pgf(1.0, 1.0) - 1.0).abs() < 1e-15);
        prop_assert_eq!(m.pgf_marginal_y(t2), m.pgf(1.0, t2));
    }

    #[test]
    fn dispersion_index_orders_with_dependence(l1 in lambda(), l2 in lambda(), l3 in 0.01f64..3.0) {
        prop_assert!(ModelSpec::full(l1, l2, l3).unwrap().gdi() > 1.0);
        prop_assert!((ModelSpec::full(l1, l2, 0.0).unwrap().gdi() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chi_square_cells_form_a_distribution(m in any_model(), k in 1u32..7) {
        let t = ChiSquareTable::new(&Dataset::new(vec![(0, 0)]), &m, k).unwrap();
        let total: f64 = t.probabilities.iter().flatten().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (row, zeros) in t.probabilities.iter().zip(&t.structural_zero) {
            for (p, z) in row.iter().zip(zeros) {
                prop_assert!(*p >= -1e-15);
                if *z {
                    prop_assert!(p.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dataset_text_roundtrip(p in pairs(40)) {
        let d = Dataset::new(p);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        prop_assert_eq!(parse_dataset(std::str::from_utf8(&buf).unwrap()).unwrap(), d);
    }

    #[test]
    fn p_values_are_probabilities_and_monotone(stats in prop::collection::vec(-5.0f64..5.0, 1..200),
                                               a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for side in [Sidedness::Upper, Sidedness::TwoSided] {
            let p_lo = empirical_p_value(lo, &stats, side);
            let p_hi = empirical_p_value(hi, &stats, side);
            prop_assert!((0.0..=1.0).contains(&p_lo) && (0.0..=1.0).contains(&p_hi));
            if side == Sidedness::Upper {
                prop_assert!(p_hi <= p_lo);
            }
        }
    }

    #[test]
    fn quantiles_are_monotone(stats in prop::collection::vec(-50.0f64..50.0, 1..300)) {
        let null = NullDistribution {
            stats,
            dropped: 0,
            resample_size: 1,
            refit: false,
            warnings: vec![],
        };
        let qs: Vec<f64> = (0..=20).map(|i| null.quantile(i as f64 / 20.0)).collect();
        prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn report_floats_roundtrip_exactly(a in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL,
                                       b in prop::num::f64::NORMAL, seed in any::<u64>()) {
        let mut doc = ReportDocument::new(RunMetadata::new("simulate"));
        doc.simulations.push(SimulationReport {
            source: "x".into(),
            sample_size: 1,
            seed,
            mean: [a, b],
            covariance: Some([[a, b], [b, a]]),
            gdi: None,
            output: None,
        });
        let back = ReportDocument::from_json(&doc.to_json()).unwrap();
        prop_assert_eq!(back, doc);
    }

    #[test]
    fn mg_statistic_is_non_negative(p in pairs(30), m in any_model(), a1 in -0.9f64..3.0, a2 in -0.9f64..3.0) {
        let d = Dataset::new(p);
        let w = WeightSpec::Power { a1, a2 };
        let s = mg_statistic(&d, &m, &w, 1e-10).unwrap().statistic;
        prop_assert!(s >= 0.0 && s.is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sup_dominates_every_grid_point(seed in 0u64..1000, i in 0usize..5, j in 0usize..5) {
        let m = ModelSpec::sub_model_i(1.0, 0.8).unwrap();
        let d = sample_pseudo_poisson(&m, 60, seed).unwrap();
        let fitted = fit(Variant::SubModelI, &d).unwrap().model;
        let ts = [-0.8, -0.4, 0.0, 0.4, 0.8];
        let sup = kk_sup_over(&d, &fitted, &ts, &ts, VarianceForm::Delta).unwrap();
        if let Ok(pt) = kk_statistic(&d, &fitted, ts[i], ts[j], VarianceForm::Delta) {
            prop_assert!(sup.statistic >= pt.statistic.abs() - 1e-12);
        }
    }

    #[test]
    fn fits_do_not_lose_to_the_truth(seed in 0u64..1000, v in 0usize..4) {
        let truth = [
            ModelSpec::full(1.2, 0.6, 0.5).unwrap(),
            ModelSpec::sub_model_i(0.9, 0.7).unwrap(),
            ModelSpec::sub_model_ii(1.5, 0.6).unwrap(),
            ModelSpec::mirrored_sub_model_ii(1.5, 0.6).unwrap(),
        ][v];
        let d = sample_pseudo_poisson(&truth, 80, seed).unwrap();
        let f = fit(truth.variant(), &d).unwrap();
        prop_assert!(f.loglik >= loglik(&truth, &d).unwrap() - 1e-9);
        prop_assert!((f.loglik - loglik(&f.model, &d).unwrap()).abs() < 1e-6
            || !f.pinned.is_empty());
    }

    #[test]
    fn full_fit_dominates_nested_sub_models(p in pairs(60)) {
        let d = Dataset::new(p);
        let full = fit(Variant::Full, &d).unwrap().loglik;
        for v in [Variant::SubModelI, Variant::SubModelII] {
            let nested = fit(v, &d).map(|f| f.loglik).unwrap_or(f64::NEG_INFINITY);
            prop_assert!(full >= nested - 1e-9, "{v:?}: full {full}, nested {nested}");
        }
    }
}
