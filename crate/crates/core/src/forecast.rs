//! Vector forecasting: a linear recurrent model fitted to the grouped
//! trajectory subspace, iterated one lagged window at a time.
//!
//! With U_I the selected left singular vectors, underline dropping the last
//! row and upsilon^2 = sum_{i in I} u_{L,i}^2:
//!   R  = (1/(1-upsilon^2)) sum_{i in I} u_{L,i} underline-U_i
//!   Pi = underline-U_I underline-U_Iᵀ + (1-upsilon^2) R Rᵀ
//!   F z = (Pi z-head ; Rᵀ z-head), z-head = z without its first coordinate
//! The trajectory matrix of the grouped component is extended column by
//! column with F, Hankelized and inverse-embedded; the last h samples are
//! the forecast.
//!
//! Whichever of I and its complement is smaller drives the arithmetic: since
//! the left singular vectors are orthonormal, underline-U_I underline-U_Iᵀ =
//! Id - underline-U_J underline-U_Jᵀ and upsilon^2 = 1 - sum_{i in J}
//! u_{L,i}^2 for J the complement of I, so a small complement never touches
//! the |I| columns it stands in for.

use std::sync::OnceLock;

use ndarray::{s, Array1, Array2, Axis};

use crate::decomposition::{grouped_matrix, hankelize, last_lag_column, Decomposition};
use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::series::{inverse_embed, TimeSeries};

/// Verticality threshold: upsilon^2 >= 1 - EPS_VERT leaves 1 - upsilon^2
/// below meaningful double precision and the recurrence undefined.
pub const EPS_VERT: f64 = 1e-9;

#[derive(Debug)]
enum Side {
    /// Columns of U indexed by the grouping itself.
    Direct { cols: Array2<f64> },
    /// Columns of U indexed by the grouping's complement.
    Complement { cols: Array2<f64> },
}

/// Fitted linear recurrent model for one (decomposition, grouping) pair.
#[derive(Debug)]
pub struct ForecastModel {
    group: Grouping,
    l: usize,
    k: usize,
    n: usize,
    upsilon_sq: f64,
    r: Array1<f64>,
    side: Side,
    pi_cache: OnceLock<Array2<f64>>,
}

impl ForecastModel {
    /// Recurrence vector R of length L-1.
    pub fn r(&self) -> &Array1<f64> {
        &self.r
    }

    /// Recurrence coefficients (a_{L-1}, ..., a_1); entry m-1 equals R_m.
    pub fn coeffs(&self) -> Vec<f64> {
        self.r.to_vec()
    }

    pub fn upsilon_sq(&self) -> f64 {
        self.upsilon_sq
    }

    pub fn group(&self) -> &Grouping {
        &self.group
    }

    /// (L, K, N) of the decomposition the model was fitted on.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l, self.k, self.n)
    }

    /// The (L-1)x(L-1) projector Pi, materialized on first use.
    pub fn pi(&self) -> &Array2<f64> {
        self.pi_cache.get_or_init(|| {
            let lm = self.l - 1;
            let r_col = self.r.view().insert_axis(Axis(1));
            let rrt = r_col.dot(&r_col.t());
            let scale = 1.0 - self.upsilon_sq;
            match &self.side {
                Side::Direct { cols } => {
                    let under = cols.slice(s![..lm, ..]);
                    let mut out = under.dot(&under.t());
                    out.scaled_add(scale, &rrt);
                    out
                }
                Side::Complement { cols } => {
                    let under = cols.slice(s![..lm, ..]);
                    let mut out = Array2::eye(lm) - under.dot(&under.t());
                    out.scaled_add(scale, &rrt);
                    out
                }
            }
        })
    }

    /// Pi applied to a length L-1 vector without forming Pi.
    fn apply_pi(&self, zt: &Array1<f64>) -> Array1<f64> {
        let lm = self.l - 1;
        let rr = (1.0 - self.upsilon_sq) * self.r.dot(zt);
        match &self.side {
            Side::Direct { cols } => {
                let under = cols.slice(s![..lm, ..]);
                let mut out = under.dot(&under.t().dot(zt));
                out.scaled_add(rr, &self.r);
                out
            }
            Side::Complement { cols } => {
                let under = cols.slice(s![..lm, ..]);
                let mut out = zt.to_owned();
                out.scaled_add(-1.0, &under.dot(&under.t().dot(zt)));
                out.scaled_add(rr, &self.r);
                out
            }
        }
    }

    /// One forecasting step: F z = (Pi z-head ; Rᵀ z-head).
    pub(crate) fn apply_f(&self, z: &Array1<f64>) -> Array1<f64> {
        let zt = z.slice(s![1..]).to_owned();
        let mut out = Array1::zeros(self.l);
        out.slice_mut(s![..self.l - 1]).assign(&self.apply_pi(&zt));
        out[self.l - 1] = self.r.dot(&zt);
        out
    }

    /// Last column of the grouped trajectory matrix, obtained by projecting
    /// the final lagged window (x_K, ..., x_N) onto the model's subspace.
    pub(crate) fn seed_column(&self, x_tail: &Array1<f64>) -> Array1<f64> {
        match &self.side {
            Side::Direct { cols } => cols.dot(&cols.t().dot(x_tail)),
            Side::Complement { cols } => {
                let mut out = x_tail.to_owned();
                out.scaled_add(-1.0, &cols.dot(&cols.t().dot(x_tail)));
                out
            }
        }
    }

    /// Forecast values without materializing the extended trajectory: every
    /// anti-diagonal past the series end lies entirely in iterate columns
    /// and carries full weight L, so a sliding accumulator over the F
    /// iterates suffices.
    pub(crate) fn values_from_seed(&self, seed: Array1<f64>, h: usize) -> Result<Vec<f64>> {
        let l = self.l;
        let mut acc = vec![0.0f64; h];
        let mut cur = seed;
        for p in 1..=(l - 1 + h) {
            cur = self.apply_f(&cur);
            // iterate p holds column K+p; it meets anti-diagonal N+m at row L+m-p
            let lo = p.saturating_sub(l - 1).max(1);
            for m in lo..=h.min(p) {
                acc[m - 1] += cur[l + m - p - 1];
            }
        }
        let values: Vec<f64> = acc.iter().map(|v| v / l as f64).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(
                "forecast iteration produced non-finite values".into(),
            ));
        }
        Ok(values)
    }
}

/// Builds the model from explicit side columns. `cols` holds full-length
/// left singular vectors; `direct` says whether they are I or its complement.
fn model_from_side(
    group: Grouping,
    dims: (usize, usize, usize),
    cols: Array2<f64>,
    direct: bool,
) -> Result<ForecastModel> {
    let (l, k, n) = dims;
    let last_sq: f64 = cols.row(l - 1).iter().map(|v| v * v).sum();
    let upsilon_sq = if direct { last_sq } else { (1.0 - last_sq).max(0.0) };
    if upsilon_sq >= 1.0 - EPS_VERT {
        return Err(Error::VerticalSubspace { upsilon_sq });
    }
    let under = cols.slice(s![..l - 1, ..]);
    let mut r = under.dot(&cols.row(l - 1));
    let denom = 1.0 - upsilon_sq;
    let factor = if direct { 1.0 / denom } else { -1.0 / denom };
    r.mapv_inplace(|v| v * factor);
    let side = if direct {
        Side::Direct { cols }
    } else {
        Side::Complement { cols }
    };
    Ok(ForecastModel {
        group,
        l,
        k,
        n,
        upsilon_sq,
        r,
        side,
        pi_cache: OnceLock::new(),
    })
}

/// Fits the linear recurrent model for grouping I on a decomposition.
pub fn fit_lre(d: &Decomposition, group: &Grouping) -> Result<ForecastModel> {
    let l = d.window();
    if l < 2 {
        return Err(Error::WindowOutOfRange { l, n: d.series_len() });
    }
    if group.max_index() > l {
        return Err(Error::IndexOutOfRange { index: group.max_index(), bound: l });
    }
    let members = group.indices();
    let others = group.complement(l);
    let (picked, direct): (&[usize], bool) = if members.len() <= others.len() {
        (members, true)
    } else {
        (&others, false)
    };
    let u = d.left_vectors();
    let mut cols = Array2::zeros((l, picked.len()));
    for (c, &i) in picked.iter().enumerate() {
        cols.column_mut(c).assign(&u.column(i - 1));
    }
    model_from_side(group.clone(), d.dims(), cols, direct)
}

/// Fits the model from complement-side columns only, for partial
/// decompositions that never compute the full spectrum.
pub(crate) fn fit_lre_complement(
    group: Grouping,
    dims: (usize, usize, usize),
    complement_cols: Array2<f64>,
) -> Result<ForecastModel> {
    model_from_side(group, dims, complement_cols, false)
}

/// Multi-horizon forecast.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub horizon: usize,
    /// Forecast values y_{N+1}, ..., y_{N+h}.
    pub values: Vec<f64>,
    /// The full length N+h+L-1 series recovered from the extended
    /// trajectory, when it was materialized.
    pub full_extension: Option<TimeSeries>,
}

/// Forecasts h steps ahead for grouping I. Computes forecast values only;
/// the extended trajectory matrix is never materialized.
pub fn vector_forecast(d: &Decomposition, group: &Grouping, h: usize) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let model = fit_lre(d, group)?;
    let seed = model.seed_column(&last_lag_column(d));
    let values = model.values_from_seed(seed, h)?;
    Ok(ForecastResult { horizon: h, values, full_extension: None })
}

/// Forecast with the extended trajectory built explicitly: the grouped
/// matrix is extended by h+L-1 iterated columns, Hankelized and
/// inverse-embedded. Slower than [`vector_forecast`] but also returns the
/// full extension.
pub fn vector_forecast_full(
    d: &Decomposition,
    group: &Grouping,
    h: usize,
) -> Result<ForecastResult> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let model = fit_lre(d, group)?;
    let xi = grouped_matrix(d, group)?;
    let (l, k, n) = d.dims();
    let mut y = Array2::zeros((l, n + h));
    y.slice_mut(s![.., ..k]).assign(&xi);
    let mut cur = xi.column(k - 1).to_owned();
    for j in k..n + h {
        cur = model.apply_f(&cur);
        y.column_mut(j).assign(&cur);
    }
    let extension = inverse_embed(&hankelize(&y))?;
    let values = extension.values()[n..n + h].to_vec();
    Ok(ForecastResult { horizon: h, values, full_extension: Some(extension) })
}
