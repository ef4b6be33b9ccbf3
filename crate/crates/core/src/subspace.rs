//! Canonical coordinates for subspaces of `C^T` and signal-subspace
//! estimation from noisy received blocks.
//!
//! An `L`-dimensional subspace spanned by the rows of `R` has many bases
//! `R = C B`. Picking `C` as the columns of `R` at a set of pivot positions
//! makes `B` unique: its pivot columns form the identity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PivotPolicy {
    /// Pivots are the first `L` columns.
    #[default]
    FixedLeading,
    /// Pivots are chosen greedily to keep the pivot block well conditioned.
    GreedyConditioned,
}

/// Canonical basis `B` (`L x T`) whose pivot columns are exactly `I_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSubspace {
    b: CMatrix,
    pivots: Vec<usize>,
    pivot_condition: f64,
}

impl CanonicalSubspace {
    pub fn matrix(&self) -> &CMatrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Pivot columns (0-based, ascending).
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Condition number of the pivot block of the input basis.
    pub fn pivot_condition(&self) -> f64 {
        self.pivot_condition
    }

    /// `B[q, t]`.
    pub fn entry(&self, q: usize, t: usize) -> C64 {
        self.b[(q, t)]
    }

    pub fn column(&self, t: usize) -> CMatrix {
        self.b.columns(t, 1).into_owned()
    }

    /// Entries of `B` outside the pivot columns, column by column.
    pub fn free_coordinates(&self) -> Vec<C64> {
        (0..self.ambient_dim())
            .filter(|t| !self.pivots.contains(t))
            .flat_map(|t| self.b.column(t).iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.b
    }
}

/// `B = C^{-1} R` with `C` the pivot block of `R`.
///
/// Rank-deficient `R` is reported as [`Error::RankDeficient`]. A singular
/// leading block under [`PivotPolicy::FixedLeading`] is reported separately
/// as [`Error::SingularPivotBlock`] so callers can retry with
/// [`PivotPolicy::GreedyConditioned`].
pub fn canonical_form(r: &CMatrix, policy: PivotPolicy) -> Result<CanonicalSubspace> {
    let (l, t) = r.shape();
    if l == 0 || l > t {
        return Err(Error::DimensionMismatch(format!(
            "cannot canonicalize {l} rows in ambient dimension {t}"
        )));
    }
    let ratio = linalg::rank_ratio(r);
    if ratio <= linalg::RANK_TOLERANCE {
        return Err(Error::RankDeficient {
            what: "subspace basis",
            ratio,
        });
    }
    let pivots = match policy {
        PivotPolicy::FixedLeading => (0..l).collect(),
        PivotPolicy::GreedyConditioned => greedy_pivots(r),
    };
    let c = r.select_columns(&pivots);
    let (mut b, pivot_condition) = match linalg::solve_square(&c, r, "pivot block") {
        Ok(solved) => solved,
        Err(Error::Singular { condition, .. }) => {
            return Err(Error::SingularPivotBlock { condition })
        }
        Err(e) => return Err(e),
    };
    for (k, &p) in pivots.iter().enumerate() {
        for row in 0..l {
            b[(row, p)] = if row == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
    }
    Ok(CanonicalSubspace {
        b,
        pivots,
        pivot_condition,
    })
}

/// Adds one column at a time, each time taking the column that maximizes
/// the smallest singular value of the block chosen so far.
fn greedy_pivots(r: &CMatrix) -> Vec<usize> {
    let (l, t) = r.shape();
    let mut chosen: Vec<usize> = Vec::with_capacity(l);
    for _ in 0..l {
        let best = (0..t)
            .filter(|j| !chosen.contains(j))
            .map(|j| {
                let mut cols = chosen.clone();
                cols.push(j);
                let sv = linalg::singular_values(&r.select_columns(&cols));
                (j, sv.last().copied().unwrap_or(0.0))
            })
            .fold((usize::MAX, -1.0), |acc, cand| if cand.1 > acc.1 { cand } else { acc });
        chosen.push(best.0);
    }
    chosen.sort_unstable();
    chosen
}

/// A signal-subspace estimate together with the full singular spectrum of
/// the observation it came from.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    /// `L x T`, orthonormal rows.
    pub basis: CMatrix,
    /// Singular values of the observation, descending.
    pub singular_values: Vec<f64>,
}

impl SubspaceEstimate {
    /// `sigma_L / sigma_1`; zero when the observation has rank below `L`.
    pub fn gap_ratio(&self) -> f64 {
        let l = self.basis.nrows();
        match (self.singular_values.first(), self.singular_values.get(l - 1)) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        }
    }

    /// Fails with [`Error::RankDeficient`] when the `L`-th singular value is
    /// numerically zero.
    pub fn require_full_rank(self) -> Result<Self> {
        let ratio = self.gap_ratio();
        if ratio <= linalg::RANK_TOLERANCE {
            return Err(Error::RankDeficient {
                what: "received signal subspace",
                ratio,
            });
        }
        Ok(self)
    }
}

/// The `L` dominant right singular vectors of `y_noisy`, as rows.
pub fn estimate_signal_subspace(y_noisy: &CMatrix, l: usize) -> Result<CMatrix> {
    signal_subspace(y_noisy, l).map(|e| e.basis)
}

pub fn signal_subspace(y_noisy: &CMatrix, l: usize) -> Result<SubspaceEstimate> {
    let (n_r, t) = y_noisy.shape();
    if l == 0 || l > n_r.min(t) {
        return Err(Error::DimensionMismatch(format!(
            "subspace dimension {l} not in 1..={} for a {n_r}x{t} observation",
            n_r.min(t)
        )));
    }
    let (singular_values, v_t) = linalg::svd_rows(y_noisy);
    Ok(SubspaceEstimate {
        basis: v_t.rows(0, l).into_owned(),
        singular_values,
    })
}

/// Sine of the largest principal angle between the row spans of `u` and
/// `v`, computed as `||P_u - P_v||_2`. Spans of different dimension are at
/// distance 1.
pub fn subspace_distance(u: &CMatrix, v: &CMatrix) -> Result<f64> {
    if u.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions {} and {} differ",
            u.ncols(),
            v.ncols()
        )));
    }
    let qu = linalg::orthonormal_rows(u);
    let qv = linalg::orthonormal_rows(v);
    let diff = qu.adjoint() * &qu - qv.adjoint() * &qv;
    let top = linalg::singular_values(&diff).first().copied().unwrap_or(0.0);
    Ok(top.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, random_cn_matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, &data.iter().map(|&v| c64(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn identity_leading_block_is_already_canonical() {
        let r = real(2, 3, &[1.0, 0.0, 5.0, 0.0, 1.0, 7.0]);
        let b = canonical_form(&r, PivotPolicy::FixedLeading).unwrap();
        assert_eq!(b.matrix(), &r);
        assert_eq!(b.pivots(), &[0, 1]);
    }

    #[test]
    fn scaled_rows_are_normalized() {
        // B = R(1:2)^{-1} R by exact arithmetic
        let r = real(2, 3, &[2.0, 0.0, 1.0, 0.0, 3.0, 2.0]);
        let b = canonical_form(&r, PivotPolicy::FixedLeading).unwrap();
        let expected = real(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, 2.0 / 3.0]);
        assert!((b.matrix() - expected).norm() < 1e-15);
        assert_eq!(b.free_coordinates(), vec![c64(0.5, 0.0), c64(2.0 / 3.0, 0.0)]);
    }

    #[test]
    fn singular_leading_block_is_distinct_error() {
        let r = real(2, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 1.0]);
        let err = canonical_form(&r, PivotPolicy::FixedLeading).unwrap_err();
        assert!(matches!(err, Error::SingularPivotBlock { .. }));
        let b = canonical_form(&r, PivotPolicy::GreedyConditioned).unwrap();
        let pivots = b.pivots().to_vec();
        assert!(pivots.contains(&2));
        let block = b.matrix().select_columns(&pivots);
        assert_eq!(block, CMatrix::identity(2, 2));
        assert!(subspace_distance(b.matrix(), &r).unwrap() < 1e-12);
    }

    #[test]
    fn rank_deficient_rows_rejected() {
        let r = real(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            canonical_form(&r, PivotPolicy::FixedLeading),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn distance_closed_forms() {
        let e1 = real(1, 2, &[1.0, 0.0]);
        let e2 = real(1, 2, &[0.0, 1.0]);
        let diag = real(1, 2, &[1.0, 1.0]);
        assert!(subspace_distance(&e1, &e1).unwrap() < 1e-15);
        assert!((subspace_distance(&e1, &e2).unwrap() - 1.0).abs() < 1e-15);
        assert!((subspace_distance(&e1, &diag).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(subspace_distance(&e1, &real(1, 3, &[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn noiseless_span_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let basis = random_cn_matrix(&mut rng, 2, 6);
        // n_r = L
        let y = random_cn_matrix(&mut rng, 2, 2) * &basis;
        let est = estimate_signal_subspace(&y, 2).unwrap();
        assert!(subspace_distance(&est, &basis).unwrap() < 1e-10);
        // n_r > L: Y = G B with G of shape n_r x L
        let y = random_cn_matrix(&mut rng, 5, 2) * &basis;
        let est = signal_subspace(&y, 2).unwrap().require_full_rank().unwrap();
        assert!(subspace_distance(&est.basis, &basis).unwrap() < 1e-10);
        assert!(signal_subspace(&y, 3).unwrap().require_full_rank().is_err());
        assert!(estimate_signal_subspace(&y, 7).is_err());
    }

    fn arb_seed() -> impl Strategy<Value = u64> {
        any::<u64>()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn left_multiplication_invariance(seed in arb_seed(), l in 1usize..4, extra in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_cn_matrix(&mut rng, l, l + extra);
            let m = random_cn_matrix(&mut rng, l, l);
            let b1 = canonical_form(&r, PivotPolicy::FixedLeading);
            let b2 = canonical_form(&(&m * &r), PivotPolicy::FixedLeading);
            if let (Ok(b1), Ok(b2)) = (b1, b2) {
                if b1.pivot_condition() < 1e6 && b2.pivot_condition() < 1e6 {
                    let scale = linalg::max_abs(b1.matrix());
                    prop_assert!((b1.matrix() - b2.matrix()).norm() <= 1e-10 * scale.max(1.0) * (l as f64));
                }
            }
        }

        #[test]
        fn canonical_idempotence(seed in arb_seed(), l in 1usize..4, extra in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_cn_matrix(&mut rng, l, l + extra);
            if let Ok(b) = canonical_form(&r, PivotPolicy::FixedLeading) {
                let again = canonical_form(b.matrix(), PivotPolicy::FixedLeading).unwrap();
                prop_assert_eq!(again.matrix(), b.matrix());
            }
        }
    }
}
