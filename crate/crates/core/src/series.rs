//! Time-series container, Hankel embedding/inverse-embedding, and
//! anti-diagonal weights shared by every other module.
//!
//! The trajectory matrix of a series (x_1, ..., x_N) with window length L is
//! the L x K Hankel matrix with entry(i, j) = x_{i+j-1}, K = N - L + 1. Its
//! anti-diagonal A_t collects the positions (i, j) with i + j = t + 1, so
//! each sample x_t appears |A_t| times; those counts are the weights used by
//! the weighted inner product of the grouping module.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for detecting non-Hankel input in [`inverse_embed`].
pub const EPS_HANKEL_REL: f64 = 1e-9;

/// A real-valued series sampled daily, optionally anchored to a calendar date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    start_date: Option<NaiveDate>,
    name: Option<String>,
}

impl TimeSeries {
    /// Builds a series, checking length >= 3 and finiteness of every sample.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::SeriesTooShort {
                needed: 3,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(TimeSeries {
            values,
            start_date: None,
            name: None,
        })
    }

    pub fn with_start_date(mut self, date: NaiveDate) -> Self {
        self.start_date = Some(date);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.start_date
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Calendar date of the 1-based sample index, when anchored.
    pub fn date_of(&self, index: usize) -> Option<NaiveDate> {
        self.start_date
            .map(|d| d + chrono::Duration::days(index as i64 - 1))
    }

    /// The prefix (x_1, ..., x_n) as a new series, keeping the anchor.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let mut s = TimeSeries::new(self.values[..n].to_vec())?;
        s.start_date = self.start_date;
        s.name = self.name.clone();
        Ok(s)
    }

    /// max(x) - min(x) over the whole series.
    pub fn span(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }
}

/// The L x K Hankel trajectory matrix of a series.
#[derive(Debug, Clone)]
pub struct TrajectoryMatrix {
    data: Array2<f64>,
    l: usize,
    k: usize,
}

impl TrajectoryMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn window(&self) -> usize {
        self.l
    }

    pub fn lag_count(&self) -> usize {
        self.k
    }

    pub fn series_len(&self) -> usize {
        self.l + self.k - 1
    }
}

/// Anti-diagonal cardinalities |A_t| of an L x K matrix, t = 1..L+K-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntiDiagonalWeights {
    weights: Vec<usize>,
}

impl AntiDiagonalWeights {
    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.weights[i]
    }
}

/// Embeds a series into its L x K trajectory matrix.
///
/// The window may not exceed the column count: L <= K = N - L + 1.
pub fn embed(series: &TimeSeries, l: usize) -> Result<TrajectoryMatrix> {
    let n = series.len();
    if l < 2 || 2 * l > n + 1 {
        return Err(Error::WindowOutOfRange { l, n });
    }
    let k = n - l + 1;
    let x = series.values();
    let data = Array2::from_shape_fn((l, k), |(i, j)| x[i + j]);
    Ok(TrajectoryMatrix { data, l, k })
}

/// Recovers the series from a Hankel matrix; rejects non-Hankel input.
///
/// Tolerance is relative: an anti-diagonal may vary by at most
/// EPS_HANKEL_REL * max|entry|.
pub fn inverse_embed(matrix: &Array2<f64>) -> Result<TimeSeries> {
    let (l, k) = matrix.dim();
    let n = l + k - 1;
    let max_abs = matrix.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let tolerance = EPS_HANKEL_REL * max_abs;
    let mut values = vec![0.0; n];
    for t in 0..n {
        let i_lo = t.saturating_sub(k - 1);
        let i_hi = t.min(l - 1);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in i_lo..=i_hi {
            let v = matrix[(i, t - i)];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let spread = hi - lo;
        if spread > tolerance {
            return Err(Error::NotHankel {
                index: t + 1,
                spread,
                tolerance,
            });
        }
        values[t] = matrix[(i_lo, t - i_lo)];
    }
    TimeSeries::new(values)
}

/// Weights w_t = |A_t| = min(t, L, K, N - t + 1) for an L x K matrix.
pub fn antidiagonal_weights(l: usize, k: usize) -> AntiDiagonalWeights {
    assert!(l >= 1 && k >= 1, "weights need L >= 1 and K >= 1");
    let n = l + k - 1;
    let weights = (1..=n).map(|t| t.min(l).min(k).min(n - t + 1)).collect();
    AntiDiagonalWeights { weights }
}
