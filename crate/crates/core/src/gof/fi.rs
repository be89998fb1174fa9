use super::{Method, Settings, TestOutcome};
use crate::data::Dataset;
use crate::error::Result;
use crate::model::{dispersion_index, ModelSpec};

/// Empirical dispersion index from the sample mean and the unbiased sample
/// covariance.
pub fn gdi_empirical(data: &Dataset) -> Result<f64> {
    let m = data.sample_moments()?;
    dispersion_index(m.mean, m.covariance)
}

/// `sqrt(n) * (empirical index - model index)`.
pub fn fi_statistic(data: &Dataset, model: &ModelSpec) -> Result<TestOutcome> {
    let empirical = gdi_empirical(data)?;
    let model_gdi = model.gdi();
    let stat = (data.n() as f64).sqrt() * (empirical - model_gdi);
    Ok(TestOutcome::new(
        Method::Fi,
        stat,
        Settings::Fi {
            empirical_gdi: empirical,
            model_gdi,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn ds(p: &[(u32, u32)]) -> Dataset {
        Dataset::new(p.to_vec())
    }

    #[test]
    fn constant_pairs_have_zero_index() {
        assert_eq!(gdi_empirical(&ds(&[(1, 1), (1, 1), (1, 1)])).unwrap(), 0.0);
    }

    #[test]
    fn perfectly_anticorrelated_pair() {
        assert_eq!(gdi_empirical(&ds(&[(1, 0), (0, 1)])).unwrap(), 0.0);
    }

    #[test]
    fn zero_mean_is_undefined() {
        assert!(matches!(
            gdi_empirical(&ds(&[(0, 0), (0, 0)])),
            Err(Error::UndefinedIndex(_))
        ));
        assert!(gdi_empirical(&ds(&[(1, 1)])).is_err());
    }

    #[test]
    fn statistic_scales_with_root_n() {
        let d = ds(&[(0, 1), (2, 3), (1, 1), (4, 2)]);
        let dd: Vec<_> = d.pairs().iter().chain(d.pairs()).copied().collect();
        let m = ModelSpec::full(1.0, 1.0, 1.0).unwrap();
        let a = fi_statistic(&d, &m).unwrap();
        let b = fi_statistic(&Dataset::new(dd), &m).unwrap();
        // doubling the data changes the unbiased covariance slightly; compare on the
        // indices actually used
        let gap = |o: &TestOutcome| match o.settings {
            Settings::Fi {
                empirical_gdi,
                model_gdi,
            } => empirical_gdi - model_gdi,
            _ => unreachable!(),
        };
        assert!((a.statistic / gap(&a) - 2.0).abs() < 1e-12);
        assert!((b.statistic / gap(&b) - 8f64.sqrt()).abs() < 1e-12);
    }
}
