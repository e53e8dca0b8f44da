//! Weighted inner product, w-correlation matrix, clustering-based automatic
//! grouping, prefix groupings, and one-element neighborhoods.
//!
//! The w-correlation between elementary series i and j is their correlation
//! under the anti-diagonal-weighted inner product; near-zero values indicate
//! well-separated components. Automatic grouping clusters components on the
//! dissimilarity 1 - |s_ij| (agglomerative, complete linkage) and returns the
//! cluster containing component 1 as the signal.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::decomposition::{elementary_series, Decomposition};
use crate::error::{Error, Result};
use crate::series::{antidiagonal_weights, AntiDiagonalWeights, TimeSeries};

/// A nonempty sorted set of 1-based component indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Grouping {
    indices: Vec<usize>,
}

impl Grouping {
    /// Sorts, deduplicates, and validates (nonempty, indices >= 1).
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::EmptyGrouping);
        }
        if indices[0] == 0 {
            return Err(Error::IndexOutOfRange { index: 0, bound: usize::MAX });
        }
        Ok(Grouping { indices })
    }

    /// The prefix grouping [M] = {1, ..., M}.
    pub fn prefix(m: usize) -> Result<Self> {
        Grouping::new((1..=m).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn max_index(&self) -> usize {
        *self.indices.last().unwrap()
    }

    /// True when the grouping is exactly {1, ..., len}.
    pub fn is_prefix(&self) -> bool {
        self.indices.iter().enumerate().all(|(i, &k)| k == i + 1)
    }

    /// Indices in [L] that are not in the grouping.
    pub fn complement(&self, l: usize) -> Vec<usize> {
        (1..=l).filter(|k| !self.contains(*k)).collect()
    }

    pub fn with(&self, k: usize) -> Result<Self> {
        let mut v = self.indices.clone();
        v.push(k);
        Grouping::new(v)
    }

    pub fn without(&self, k: usize) -> Result<Self> {
        let v: Vec<usize> = self.indices.iter().copied().filter(|&i| i != k).collect();
        Grouping::new(v)
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|k| k.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Pairwise w-correlations s_ij and the weighted norms of the components.
#[derive(Debug, Clone)]
pub struct WCorMatrix {
    entries: Array2<f64>,
    norms: Vec<f64>,
}

impl WCorMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn size(&self) -> usize {
        self.norms.len()
    }
}

/// Weighted dot product (y, z)_w = sum w_t y_t z_t.
pub fn weighted_inner(y: &TimeSeries, z: &TimeSeries, w: &AntiDiagonalWeights) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: z.len() });
    }
    if y.len() != w.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: w.len() });
    }
    Ok(y.values()
        .iter()
        .zip(z.values())
        .zip(w.weights())
        .map(|((a, b), &wt)| wt as f64 * a * b)
        .sum())
}

/// w-correlation matrix of the given component series. Components with an
/// exactly zero weighted norm get unit diagonal and zero off-diagonal by
/// convention, so clustering isolates them.
pub fn wcor_matrix(elementary: &[TimeSeries], w: &AntiDiagonalWeights) -> Result<WCorMatrix> {
    let m = elementary.len();
    let mut norms = vec![0.0_f64; m];
    for (i, s) in elementary.iter().enumerate() {
        norms[i] = weighted_inner(s, s, w)?.sqrt();
    }
    let mut entries = Array2::zeros((m, m));
    for i in 0..m {
        entries[(i, i)] = 1.0;
        for j in i + 1..m {
            let val = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                weighted_inner(&elementary[i], &elementary[j], w)? / (norms[i] * norms[j])
            };
            entries[(i, j)] = val;
            entries[(j, i)] = val;
        }
    }
    Ok(WCorMatrix { entries, norms })
}

/// Elementary series 1..L of a decomposition, in order.
pub fn all_elementary(d: &Decomposition) -> Result<Vec<TimeSeries>> {
    (1..=d.window()).map(|k| elementary_series(d, k)).collect()
}

/// Automatic grouping: cluster components on dissimilarity 1 - |s_ij|
/// (agglomerative, complete linkage, smallest-index tie-break) cut at
/// `n_clusters`, and return the cluster containing component 1.
pub fn auto_group_wcor(d: &Decomposition, n_clusters: usize) -> Result<Grouping> {
    let l = d.window();
    if n_clusters < 1 || n_clusters > l {
        return Err(Error::InvalidParameter(format!(
            "n_clusters must be in [1, {l}], got {n_clusters}"
        )));
    }
    let elementary = all_elementary(d)?;
    let w = antidiagonal_weights(d.window(), d.lag_count());
    let wcor = wcor_matrix(&elementary, &w)?;
    let members = cluster_of_first(wcor.entries(), n_clusters);
    Grouping::new(members)
}

/// Complete-linkage agglomeration on 1 - |s_ij| down to `n_clusters`
/// clusters; returns the members (1-based) of the cluster holding
/// component 1. Ties on merge distance pick the lexicographically smallest
/// cluster pair, so the outcome is deterministic.
fn cluster_of_first(s: &Array2<f64>, n_clusters: usize) -> Vec<usize> {
    let m = s.nrows();
    let mut dist = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            if i != j {
                dist[(i, j)] = 1.0 - s[(i, j)].abs();
            }
        }
    }
    let mut members: Vec<Option<Vec<usize>>> = (0..m).map(|i| Some(vec![i + 1])).collect();
    let mut alive = m;
    while alive > n_clusters {
        let mut best: Option<(usize, usize)> = None;
        let mut best_d = f64::INFINITY;
        for a in 0..m {
            if members[a].is_none() {
                continue;
            }
            for b in a + 1..m {
                if members[b].is_none() {
                    continue;
                }
                if dist[(a, b)] < best_d {
                    best_d = dist[(a, b)];
                    best = Some((a, b));
                }
            }
        }
        let (a, b) = best.expect("at least two clusters alive");
        // complete linkage: distance to the merged cluster is the max leg
        for c in 0..m {
            if c != a && c != b && members[c].is_some() {
                let d_new = dist[(a, c)].max(dist[(b, c)]);
                dist[(a, c)] = d_new;
                dist[(c, a)] = d_new;
            }
        }
        let taken = members[b].take().expect("b alive");
        members[a].as_mut().expect("a alive").extend(taken);
        alive -= 1;
    }
    let mut own = members
        .into_iter()
        .flatten()
        .find(|c| c.contains(&1))
        .expect("component 1 belongs to some cluster");
    own.sort_unstable();
    own
}

/// Prefix groupings [1], [1,2], ..., [1..l_max], in order.
pub fn prefix_groupings(l_max: usize) -> Vec<Grouping> {
    (1..=l_max).map(|m| Grouping::prefix(m).expect("m >= 1")).collect()
}

/// One-element neighborhood of the prefix [M] inside [l_min]: all removals
/// of a single element (excluding the empty set) followed by all single
/// additions from (M, l_min].
pub fn neighborhood(m: usize, l_min: usize) -> Result<Vec<Grouping>> {
    if m < 1 || m > l_min {
        return Err(Error::InvalidParameter(format!(
            "prefix size {m} must lie in [1, {l_min}]"
        )));
    }
    neighborhood_of(&Grouping::prefix(m)?, l_min)
}

/// One-element neighborhood of an arbitrary grouping inside [l_bound]:
/// removals (skipping the one that would empty the set) then additions, each
/// in ascending element order.
pub fn neighborhood_of(group: &Grouping, l_bound: usize) -> Result<Vec<Grouping>> {
    if group.max_index() > l_bound {
        return Err(Error::IndexOutOfRange { index: group.max_index(), bound: l_bound });
    }
    let mut out = Vec::new();
    if group.len() > 1 {
        for &k in group.indices() {
            out.push(group.without(k)?);
        }
    }
    for k in 1..=l_bound {
        if !group.contains(k) {
            out.push(group.with(k)?);
        }
    }
    Ok(out)
}
