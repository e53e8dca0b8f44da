//! SVD of the trajectory matrix, elementary matrices/series, Hankelization,
//! and grouped reconstruction.
//!
//! Pipeline: X = U Sigma V^T; the k-th eigentriple (sigma_k, U_k, V_k) yields
//! the elementary matrix X_k = sigma_k U_k V_k^T; averaging X_k over
//! anti-diagonals (Hankelization) and inverse-embedding gives the elementary
//! series; a grouping I sums the elementary series with indices in I.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::series::{antidiagonal_weights, TimeSeries, TrajectoryMatrix};

/// Eigentriples of a trajectory matrix: non-increasing singular values with
/// the full left basis (L x L) and the first L right vectors (K x L).
#[derive(Debug, Clone)]
pub struct Decomposition {
    singular_values: Vec<f64>,
    left_vectors: Array2<f64>,
    right_vectors: Array2<f64>,
    l: usize,
    k: usize,
    n: usize,
}

impl Decomposition {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// L x L orthogonal matrix whose columns are U_1..U_L.
    pub fn left_vectors(&self) -> &Array2<f64> {
        &self.left_vectors
    }

    /// K x L matrix whose columns are V_1..V_L.
    pub fn right_vectors(&self) -> &Array2<f64> {
        &self.right_vectors
    }

    pub fn window(&self) -> usize {
        self.l
    }

    pub fn lag_count(&self) -> usize {
        self.k
    }

    pub fn series_len(&self) -> usize {
        self.n
    }

    /// (L, K, N).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l, self.k, self.n)
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k < 1 || k > self.l {
            Err(Error::IndexOutOfRange {
                index: k,
                bound: self.l,
            })
        } else {
            Ok(())
        }
    }
}

/// Full SVD of the trajectory matrix with a deterministic sign convention:
/// each (U_k, V_k) pair is flipped so the largest-magnitude entry of U_k is
/// positive (first such entry wins on exact ties). Zero singular values are
/// kept; equal singular values preserve backend order.
pub fn decompose(traj: &TrajectoryMatrix) -> Result<Decomposition> {
    let (l, k) = (traj.window(), traj.lag_count());
    let (u, s, vt) = traj
        .matrix()
        .svddc(JobSvd::Some)
        .map_err(|e| Error::NumericalFailure(format!("SVD did not converge: {e}")))?;
    let mut u = u.ok_or_else(|| Error::NumericalFailure("SVD returned no U".into()))?;
    let vt = vt.ok_or_else(|| Error::NumericalFailure("SVD returned no V^T".into()))?;
    let mut v = vt.t().to_owned(); // K x L
    for col in 0..l {
        let ucol = u.column(col);
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, &val) in ucol.iter().enumerate() {
            if val.abs() > best_abs {
                best_abs = val.abs();
                best = i;
            }
        }
        if u[(best, col)] < 0.0 {
            u.column_mut(col).mapv_inplace(|x| -x);
            v.column_mut(col).mapv_inplace(|x| -x);
        }
    }
    Ok(Decomposition {
        singular_values: s.to_vec(),
        left_vectors: u,
        right_vectors: v,
        l,
        k,
        n: traj.series_len(),
    })
}

/// The rank-one elementary matrix X_k = sigma_k U_k V_k^T (1-based k).
pub fn elementary_matrix(d: &Decomposition, k: usize) -> Result<Array2<f64>> {
    d.check_component(k)?;
    let sigma = d.singular_values[k - 1];
    let u = d.left_vectors.column(k - 1);
    let v = d.right_vectors.column(k - 1);
    let mut m = Array2::zeros((d.l, d.k));
    for (i, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
        let ui = sigma * u[i];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = ui * v[j];
        }
    }
    Ok(m)
}

/// Replaces every anti-diagonal by its arithmetic mean (the orthogonal
/// projection onto the Hankel subspace).
pub fn hankelize(matrix: &Array2<f64>) -> Array2<f64> {
    let (l, k) = matrix.dim();
    let n = l + k - 1;
    let mut sums = vec![0.0_f64; n];
    for i in 0..l {
        for j in 0..k {
            sums[i + j] += matrix[(i, j)];
        }
    }
    let w = antidiagonal_weights(l, k);
    let means: Vec<f64> = sums
        .iter()
        .enumerate()
        .map(|(t, s)| s / w.get(t) as f64)
        .collect();
    Array2::from_shape_fn((l, k), |(i, j)| means[i + j])
}

/// The k-th elementary series: inverse_embed(hankelize(X_k)), computed
/// directly as sigma_k / w_t * sum over the anti-diagonal of U_k V_k^T.
pub fn elementary_series(d: &Decomposition, k: usize) -> Result<TimeSeries> {
    d.check_component(k)?;
    let sigma = d.singular_values[k - 1];
    let u = d.left_vectors.column(k - 1);
    let v = d.right_vectors.column(k - 1);
    TimeSeries::new(antidiagonal_series(sigma, u, v, d.l, d.k))
}

fn antidiagonal_series(
    sigma: f64,
    u: ArrayView1<f64>,
    v: ArrayView1<f64>,
    l: usize,
    k: usize,
) -> Vec<f64> {
    let n = l + k - 1;
    let w = antidiagonal_weights(l, k);
    (0..n)
        .map(|t| {
            let i_lo = t.saturating_sub(k - 1);
            let i_hi = t.min(l - 1);
            let mut s = 0.0;
            for i in i_lo..=i_hi {
                s += u[i] * v[t - i];
            }
            sigma * s / w.get(t) as f64
        })
        .collect()
}

/// Sum of the elementary series with indices in I (the grouped
/// reconstruction).
pub fn reconstruct(d: &Decomposition, group: &Grouping) -> Result<TimeSeries> {
    let mut acc = vec![0.0_f64; d.n];
    for &k in group.indices() {
        d.check_component(k)?;
        let part = elementary_series(d, k)?;
        for (a, b) in acc.iter_mut().zip(part.values()) {
            *a += b;
        }
    }
    TimeSeries::new(acc)
}

/// Grouped trajectory matrix X_I = sum over I of the elementary matrices
/// (not Hankelized). Used by the forecast module's extension matrix.
pub fn grouped_matrix(d: &Decomposition, group: &Grouping) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((d.l, d.k));
    for &kk in group.indices() {
        d.check_component(kk)?;
        let sigma = d.singular_values[kk - 1];
        let u = d.left_vectors.column(kk - 1);
        let v = d.right_vectors.column(kk - 1);
        for i in 0..d.l {
            let ui = sigma * u[i];
            for j in 0..d.k {
                m[(i, j)] += ui * v[j];
            }
        }
    }
    Ok(m)
}

/// Last column of the trajectory matrix reassembled from the eigentriples,
/// U diag(sigma) V^T e_K. Equals the final lagged window of the input.
pub(crate) fn last_lag_column(d: &Decomposition) -> Array1<f64> {
    let scaled: Array1<f64> = d
        .right_vectors
        .row(d.k - 1)
        .iter()
        .zip(&d.singular_values)
        .map(|(&vk, &s)| s * vk)
        .collect();
    d.left_vectors.dot(&scaled)
}
