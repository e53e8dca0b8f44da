//! Window-length selection: autocorrelation-based selectors (first sign
//! change, confidence band), logarithmic bounds, and the large
//! multiple-of-a-year window.
//!
//! The autocorrelation at lag tau is computed over the first N - tau samples
//! with the mean and variance recomputed over that prefix for every lag:
//!   R(tau) = (1/s^2) * sum_{i=1}^{N-tau} (x_{i+tau} - xbar)(x_i - xbar).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// How a window length was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMethod {
    Ma,
    Confband,
    LogLo,
    LogHi,
    Big,
    Fixed,
}

/// A selected window length together with the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowChoice {
    pub length: usize,
    pub method: WindowMethod,
}

/// Autocorrelations R(1..tau_max) with the per-lag prefix mean and variance.
#[derive(Debug, Clone)]
pub struct AutocorrelationSequence {
    values: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl AutocorrelationSequence {
    /// R(tau), 1-based.
    pub fn value(&self, tau: usize) -> f64 {
        self.values[tau - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Prefix mean used at lag tau.
    pub fn mean(&self, tau: usize) -> f64 {
        self.means[tau - 1]
    }

    /// Prefix variance used at lag tau.
    pub fn variance(&self, tau: usize) -> f64 {
        self.variances[tau - 1]
    }

    pub fn max_lag(&self) -> usize {
        self.values.len()
    }
}

/// R(tau), xbar and s^2 for one lag; the building block of every selector.
fn autocorrelation_at(x: &[f64], tau: usize) -> Result<(f64, f64, f64)> {
    let n = x.len();
    debug_assert!(tau >= 1 && tau <= n - 2);
    let m = n - tau;
    let mean = x[..m].iter().sum::<f64>() / m as f64;
    let variance = x[..m].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    if variance == 0.0 {
        return Err(Error::DegenerateSeries { lag: tau, window: m });
    }
    let r = x[..m]
        .iter()
        .enumerate()
        .map(|(i, &v)| (x[i + tau] - mean) * (v - mean))
        .sum::<f64>()
        / variance;
    Ok((r, mean, variance))
}

/// Autocorrelations for lags 1..=tau_max.
pub fn autocorrelation(series: &TimeSeries, tau_max: usize) -> Result<AutocorrelationSequence> {
    let n = series.len();
    if tau_max < 1 || tau_max > n - 2 {
        return Err(Error::InvalidParameter(format!(
            "tau_max must be in [1, {}], got {tau_max}",
            n - 2
        )));
    }
    let x = series.values();
    let mut values = Vec::with_capacity(tau_max);
    let mut means = Vec::with_capacity(tau_max);
    let mut variances = Vec::with_capacity(tau_max);
    for tau in 1..=tau_max {
        let (r, mean, variance) = autocorrelation_at(x, tau)?;
        values.push(r);
        means.push(mean);
        variances.push(variance);
    }
    Ok(AutocorrelationSequence { values, means, variances })
}

/// First-sign-change selector: the smallest tau >= 2 with
/// R(tau) * R(tau+1) < 0, scanned up to N/2.
pub fn select_window_ma(series: &TimeSeries) -> Result<WindowChoice> {
    let n = series.len();
    let x = series.values();
    let hi = (n / 2).min(n.saturating_sub(3));
    if hi < 2 {
        return Err(Error::NoSignChange { scanned: hi });
    }
    let mut prev = autocorrelation_at(x, 2)?.0;
    for tau in 2..=hi {
        let next = autocorrelation_at(x, tau + 1)?.0;
        if prev * next < 0.0 {
            return Ok(WindowChoice { length: tau, method: WindowMethod::Ma });
        }
        prev = next;
    }
    Err(Error::NoSignChange { scanned: hi })
}

/// Two-sided standard normal quantile for the given confidence level
/// (e.g. 0.95 -> 1.959964).
pub fn normal_band_quantile(level: f64) -> Result<f64> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf((1.0 + level) / 2.0))
}

/// Confidence-band selector: the smallest tau >= 2 whose normalized
/// autocorrelation R(tau)/(N - tau) falls inside +-z/sqrt(N - tau).
pub fn select_window_confband(series: &TimeSeries, level: f64) -> Result<WindowChoice> {
    let z = normal_band_quantile(level)?;
    let n = series.len();
    let x = series.values();
    let hi = (n / 2).min(n.saturating_sub(2));
    if hi < 2 {
        return Err(Error::NoCrossing { scanned: hi });
    }
    for tau in 2..=hi {
        let r = autocorrelation_at(x, tau)?.0;
        let normalized = r / (n - tau) as f64;
        if normalized.abs() <= z / ((n - tau) as f64).sqrt() {
            return Ok(WindowChoice { length: tau, method: WindowMethod::Confband });
        }
    }
    Err(Error::NoCrossing { scanned: hi })
}

/// Logarithmic window bounds: L_lo = ceil((ln N)^1.5) and
/// L_hi = floor((ln N)^2.5), both clamped to [2, N/2].
pub fn log_bounds(n: usize) -> Result<(usize, usize)> {
    log_bounds_impl(n, false)
}

/// Nearest-integer variant of [`log_bounds`]. The published per-day window
/// tables are reproducible exactly only with this rounding; the ceil/floor
/// form of [`log_bounds`] stays within +-1 of them.
pub fn log_bounds_rounded(n: usize) -> Result<(usize, usize)> {
    log_bounds_impl(n, true)
}

fn log_bounds_impl(n: usize, nearest: bool) -> Result<(usize, usize)> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!(
            "log bounds need N >= 8, got {n}"
        )));
    }
    let ln = (n as f64).ln();
    let (raw_lo, raw_hi) = (ln.powf(1.5), ln.powf(2.5));
    let (lo, hi) = if nearest {
        (raw_lo.round(), raw_hi.round())
    } else {
        (raw_lo.ceil(), raw_hi.floor())
    };
    let half = n / 2;
    let clamp = |v: f64| -> usize { (v as usize).clamp(2, half) };
    Ok((clamp(lo), clamp(hi)))
}

/// The largest multiple of a mean year (365.25 days) strictly below N/2.
pub fn big_multiple_window(n: usize) -> Result<WindowChoice> {
    // m * 365.25 < n/2  <=>  1461 m < 2 n, in exact integer arithmetic
    let m = (2 * n).saturating_sub(1) / 1461;
    if m < 1 {
        return Err(Error::TooShort {
            detail: format!("big window needs N/2 > 365.25, got N = {n}"),
        });
    }
    Ok(WindowChoice { length: m * 1461 / 4, method: WindowMethod::Big })
}

/// Window-method specification used by the CLI and the evaluation plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowSpec {
    AutoMa,
    Confband { level: f64 },
    LogLo,
    LogHi,
    Big,
    Fixed { length: usize },
}

impl WindowSpec {
    /// Selects a window length for the series under this specification.
    pub fn select(&self, series: &TimeSeries) -> Result<WindowChoice> {
        let n = series.len();
        match *self {
            WindowSpec::AutoMa => select_window_ma(series),
            WindowSpec::Confband { level } => select_window_confband(series, level),
            WindowSpec::LogLo => {
                let (lo, _) = log_bounds(n)?;
                Ok(WindowChoice { length: lo, method: WindowMethod::LogLo })
            }
            WindowSpec::LogHi => {
                let (_, hi) = log_bounds(n)?;
                Ok(WindowChoice { length: hi, method: WindowMethod::LogHi })
            }
            WindowSpec::Big => big_multiple_window(n),
            WindowSpec::Fixed { length } => {
                if length < 2 || 2 * length > n + 1 {
                    Err(Error::WindowOutOfRange { l: length, n })
                } else {
                    Ok(WindowChoice { length, method: WindowMethod::Fixed })
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            WindowSpec::AutoMa => "auto-ma".into(),
            WindowSpec::Confband { .. } => "confband".into(),
            WindowSpec::LogLo => "log-lo".into(),
            WindowSpec::LogHi => "log-hi".into(),
            WindowSpec::Big => "big".into(),
            WindowSpec::Fixed { length } => format!("fixed:{length}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(values).unwrap()
    }

    fn cosine_series(period: f64, n: usize) -> TimeSeries {
        ts((1..=n).map(|t| (2.0 * PI * t as f64 / period).cos()).collect())
    }

    /// Plain transcription of the displayed autocorrelation formula, kept
    /// independent of the implementation above.
    fn direct_r(x: &[f64], tau: usize) -> f64 {
        let m = x.len() - tau;
        let mean: f64 = x[..m].iter().sum::<f64>() / m as f64;
        let var: f64 = x[..m].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        (0..m).map(|i| (x[i + tau] - mean) * (x[i] - mean)).sum::<f64>() / var
    }

    #[test]
    fn autocorrelation_of_fortnight_cosine() {
        let s = cosine_series(14.0, 1400);
        let acf = autocorrelation(&s, 10).unwrap();
        assert!(acf.value(3) > 0.0);
        assert!(acf.value(4) < 0.0);
        for tau in 1..=10 {
            let expect = direct_r(s.values(), tau);
            assert!(
                (acf.value(tau) - expect).abs() < 1e-9 * expect.abs().max(1.0),
                "lag {tau}"
            );
        }
    }

    #[test]
    fn autocorrelation_rejects_constant_series() {
        let err = autocorrelation(&ts(vec![3.0; 50]), 5).unwrap_err();
        assert!(matches!(err, Error::DegenerateSeries { lag: 1, .. }));
    }

    #[test]
    fn white_noise_autocorrelation_is_small() {
        // Box-Muller over a splitmix stream; fixed seed
        let mut state = 0x9E3779B97F4A7C15_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n = 10000;
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let (u1, u2) = (next().max(1e-12), next());
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            })
            .collect();
        let s = ts(values);
        let acf = autocorrelation(&s, 20).unwrap();
        for tau in 1..=20 {
            let normalized = acf.value(tau) / (n - tau) as f64;
            assert!(normalized.abs() < 0.05, "lag {tau}: {normalized}");
        }
        // and the band selector settles immediately
        assert_eq!(select_window_confband(&s, 0.95).unwrap().length, 2);
    }

    #[test]
    fn ma_selector_fortnight_cosine() {
        let choice = select_window_ma(&cosine_series(14.0, 1400)).unwrap();
        assert_eq!(choice.length, 3);
        assert_eq!(choice.method, WindowMethod::Ma);
    }

    #[test]
    fn ma_selector_period_forty_cosine() {
        // frozen from the brute-force oracle: R(9) > 0 > R(10)
        let s = cosine_series(40.0, 4000);
        assert_eq!(select_window_ma(&s).unwrap().length, 9);
        let first_change = (2..)
            .find(|&tau| direct_r(s.values(), tau) * direct_r(s.values(), tau + 1) < 0.0)
            .unwrap();
        assert_eq!(first_change, 9);
    }

    #[test]
    fn ma_selector_monotone_series_has_no_sign_change() {
        let ramp = ts((1..=1000).map(|t| t as f64).collect());
        assert!(matches!(
            select_window_ma(&ramp),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn band_quantile_value() {
        assert!((normal_band_quantile(0.95).unwrap() - 1.959964).abs() < 1e-6);
        assert!(normal_band_quantile(1.0).is_err());
    }

    #[test]
    fn confband_on_strong_seasonal_picks_later_lag() {
        // a strongly periodic series stays outside the band at tau = 2
        let s = cosine_series(40.0, 4000);
        let choice = select_window_confband(&s, 0.95).unwrap();
        assert!(choice.length > 2, "got {}", choice.length);
        assert!(choice.length <= 2000);
    }

    #[test]
    fn log_bounds_reference_values() {
        assert_eq!(log_bounds(14245).unwrap(), (30, 282));
        assert_eq!(log_bounds(14610).unwrap(), (30, 284));
        // raw values (2.9986, 6.2354): ceil -> 3, floor -> 6 clamped to N/2 = 4
        assert_eq!(log_bounds(8).unwrap(), (3, 4));
        assert!(log_bounds(7).is_err());
    }

    #[test]
    fn log_bounds_nearest_rounding_variant() {
        assert_eq!(log_bounds_rounded(14245).unwrap(), (30, 283));
        assert_eq!(log_bounds_rounded(14610).unwrap(), (30, 285));
        assert_eq!(log_bounds_rounded(13880).unwrap(), (29, 281));
    }

    #[test]
    fn big_window_reference_values() {
        assert_eq!(big_multiple_window(14245).unwrap().length, 6939);
        assert_eq!(big_multiple_window(1000).unwrap().length, 365);
        assert!(matches!(
            big_multiple_window(700),
            Err(Error::TooShort { .. })
        ));
        // exact-multiple boundary: N/2 = 730.5 = 2 * 365.25 exactly
        assert_eq!(big_multiple_window(1461).unwrap().length, 365);
    }

    #[test]
    fn selector_ordering_on_seasonal_data() {
        let n = 3650;
        let values: Vec<f64> = (1..=n)
            .map(|t| 10.0 * (2.0 * PI * t as f64 / 365.25).sin())
            .collect();
        let s = ts(values);
        let (lo, hi) = log_bounds(n).unwrap();
        let ma = select_window_ma(&s).unwrap().length;
        assert!(lo < ma && ma < hi, "lo={lo} ma={ma} hi={hi}");
    }

    #[test]
    fn fixed_spec_validates_range() {
        let s = ts((1..=20).map(|t| t as f64).collect());
        assert_eq!(
            WindowSpec::Fixed { length: 5 }.select(&s).unwrap().length,
            5
        );
        assert!(WindowSpec::Fixed { length: 11 }.select(&s).is_err());
        assert!(WindowSpec::Fixed { length: 1 }.select(&s).is_err());
    }
}
