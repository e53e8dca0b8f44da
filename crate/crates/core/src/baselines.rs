//! Naive benchmark forecasters: last-value persistence, bootstrap draws
//! from the observed prefix, and degree-4 polynomial extrapolation.

use ndarray::{Array1, Array2};
use ndarray_linalg::LeastSquaresSvd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastResult;
use crate::series::TimeSeries;

/// Which baseline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BaselineKind {
    Constant,
    Random { seed: u64 },
    Polyreg { degree: usize },
}

impl BaselineKind {
    pub fn label(&self) -> &'static str {
        match self {
            BaselineKind::Constant => "constant",
            BaselineKind::Random { .. } => "random",
            BaselineKind::Polyreg { .. } => "polyreg",
        }
    }

    pub fn forecast(&self, series: &TimeSeries, h: usize) -> Result<ForecastResult> {
        match *self {
            BaselineKind::Constant => constant_forecast(series, h),
            BaselineKind::Random { seed } => random_forecast(series, h, seed),
            BaselineKind::Polyreg { degree } => polyreg_forecast(series, h, degree),
        }
    }
}

/// Repeats the last observation h times.
pub fn constant_forecast(series: &TimeSeries, h: usize) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let last = *series.values().last().expect("series is nonempty");
    Ok(ForecastResult { horizon: h, values: vec![last; h], full_extension: None })
}

/// Draws h values independently from the empirical distribution of the
/// observed prefix (resampling with replacement), deterministic per seed.
pub fn random_forecast(series: &TimeSeries, h: usize, seed: u64) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = series.values();
    let values = (0..h).map(|_| x[rng.random_range(0..x.len())]).collect();
    Ok(ForecastResult { horizon: h, values, full_extension: None })
}

/// Least-squares polynomial fit of value against time index, evaluated at
/// the h indices past the series end. The time index is centered and
/// rescaled to [-1, 1] internally; degree-4 normal directions stay well
/// conditioned even at N around 20000.
pub fn polyreg_forecast(series: &TimeSeries, h: usize, degree: usize) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let n = series.len();
    if n <= degree {
        return Err(Error::InsufficientData { needed: degree + 1, actual: n });
    }
    let center = (n as f64 + 1.0) / 2.0;
    let scale = ((n as f64 - 1.0) / 2.0).max(1.0);
    let map = |t: usize| (t as f64 - center) / scale;
    let design = Array2::from_shape_fn((n, degree + 1), |(i, p)| map(i + 1).powi(p as i32));
    let rhs = Array1::from_iter(series.values().iter().copied());
    let coeffs = design
        .least_squares(&rhs)
        .map_err(|e| Error::NumericalFailure(format!("polynomial fit failed: {e}")))?
        .solution;
    let values: Vec<f64> = (n + 1..=n + h)
        .map(|t| {
            let tau = map(t);
            coeffs
                .iter()
                .enumerate()
                .map(|(p, c)| c * tau.powi(p as i32))
                .sum()
        })
        .collect();
    if values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::NumericalFailure("polynomial forecast not finite".into()));
    }
    Ok(ForecastResult { horizon: h, values, full_extension: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values).unwrap()
    }

    #[test]
    fn constant_repeats_last_value() {
        let f = constant_forecast(&ts(vec![1.0, 2.0, 5.2]), 3).unwrap();
        assert_eq!(f.values, vec![5.2, 5.2, 5.2]);
        let g = constant_forecast(&ts(vec![0.5, -3.0, 9.9, 4.4]), 1).unwrap();
        assert_eq!(g.values, vec![4.4]);
        assert!(constant_forecast(&ts(vec![1.0, 2.0, 3.0]), 0).is_err());
    }

    #[test]
    fn random_draws_from_prefix_support() {
        let s = ts(vec![3.0, -1.5, 3.0, 8.25, 0.0]);
        let f = random_forecast(&s, 200, 42).unwrap();
        for v in &f.values {
            assert!(s.values().contains(v), "{v} not observed");
        }
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let s = ts(vec![1.0, 2.0, 3.0, 4.0]);
        let a = random_forecast(&s, 50, 7).unwrap();
        let b = random_forecast(&s, 50, 7).unwrap();
        assert_eq!(a.values, b.values);
        let c = random_forecast(&s, 50, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn random_degenerate_prefix() {
        let f = random_forecast(&ts(vec![3.0, 3.0, 3.0]), 10, 123).unwrap();
        assert!(f.values.iter().all(|v| *v == 3.0));
    }

    #[test]
    fn random_histogram_matches_empirical_distribution() {
        let s = ts(vec![1.0, 2.0, 2.0, 5.0]);
        let draws = random_forecast(&s, 100_000, 2024).unwrap();
        let mut counts = [0usize; 3];
        for v in &draws.values {
            match *v as i64 {
                1 => counts[0] += 1,
                2 => counts[1] += 1,
                5 => counts[2] += 1,
                _ => panic!("unexpected draw {v}"),
            }
        }
        let expect = [0.25, 0.5, 0.25];
        let tv: f64 = counts
            .iter()
            .zip(&expect)
            .map(|(c, p)| (*c as f64 / 100_000.0 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn polyreg_recovers_square() {
        let s = ts((1..=50).map(|t| (t * t) as f64).collect());
        let f = polyreg_forecast(&s, 1, 4).unwrap();
        assert!((f.values[0] - 2601.0).abs() < 1e-6 * 2601.0);
    }

    #[test]
    fn polyreg_constant_series() {
        let s = ts(vec![6.5; 30]);
        let f = polyreg_forecast(&s, 5, 4).unwrap();
        for v in &f.values {
            assert!((v - 6.5).abs() < 1e-9);
        }
    }

    #[test]
    fn polyreg_quintic_is_out_of_class_but_finite() {
        let s = ts((1..=40).map(|t| (t as f64).powi(5)).collect());
        let f = polyreg_forecast(&s, 3, 4).unwrap();
        assert!(f.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn polyreg_exact_quartic_at_large_n() {
        let n = 20000;
        let poly = |t: f64| 2.0 - 0.5 * t + 3e-4 * t * t - 1e-8 * t * t * t + 4e-13 * t.powi(4);
        let s = ts((1..=n).map(|t| poly(t as f64)).collect());
        let f = polyreg_forecast(&s, 10, 4).unwrap();
        for (i, v) in f.values.iter().enumerate() {
            let want = poly((n + 1 + i) as f64);
            assert!(
                (v - want).abs() < 1e-6 * want.abs(),
                "step {}: {v} vs {want}",
                i + 1
            );
        }
    }

    #[test]
    fn polyreg_needs_enough_samples() {
        let s = ts(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            polyreg_forecast(&s, 1, 4),
            Err(Error::InsufficientData { needed: 5, actual: 4 })
        ));
        assert!(polyreg_forecast(&ts(vec![1.0, 2.0, 3.0, 4.0, 5.0]), 1, 4).is_ok());
    }

    #[test]
    fn kind_dispatch() {
        let s = ts(vec![1.0, 4.0, 9.0, 16.0, 25.0, 36.0]);
        assert_eq!(BaselineKind::Constant.forecast(&s, 2).unwrap().values, vec![36.0, 36.0]);
        assert_eq!(BaselineKind::Constant.label(), "constant");
        assert_eq!(BaselineKind::Random { seed: 1 }.label(), "random");
        assert_eq!(BaselineKind::Polyreg { degree: 4 }.label(), "polyreg");
    }
}
