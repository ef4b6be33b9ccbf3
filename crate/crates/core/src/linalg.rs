//! Small dense complex linear algebra layer over nalgebra.
//!
//! Every solve reports its condition number and refuses to continue past
//! [`CONDITION_LIMIT`] instead of falling back to a pseudo-inverse, so
//! callers can tell conditioning failures from algorithmic ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Matrices with a larger condition number are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Relative singular-value floor used for full-rank tests.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Relative magnitude below which a divisor is treated as zero.
pub const GUARD_TOLERANCE: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Singular values (descending) and the rows of `V^H`, one per singular
/// value.
///
/// Backed by faer: nalgebra's complex SVD occasionally returns factors that
/// do not reproduce the input on rank-deficient matrices.
pub fn svd_rows(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (Vec::new(), CMatrix::zeros(0, cols));
    }
    let f = faer::Mat::<C64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    match f.thin_svd() {
        Ok(svd) => {
            let s = svd.S().column_vector();
            let v = svd.V();
            let values = (0..k).map(|i| s[i].re).collect();
            (values, CMatrix::from_fn(k, cols, |i, j| v[(j, i)].conj()))
        }
        // no convergence: report a zero spectrum so rank checks fail
        Err(_) => (vec![0.0; k], CMatrix::zeros(k, cols)),
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let f = faer::Mat::<C64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    match f.singular_values() {
        Ok(values) => values,
        Err(_) => vec![0.0; m.nrows().min(m.ncols())],
    }
}

/// Ratio of largest to smallest singular value; infinite for an exactly
/// singular (or non-square short) matrix.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 && sv.len() == m.nrows().min(m.ncols()) => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Ratio of smallest to largest singular value, 0 for a zero matrix.
pub fn rank_ratio(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

pub fn has_full_row_rank(m: &CMatrix) -> bool {
    m.nrows() <= m.ncols() && rank_ratio(m) > RANK_TOLERANCE
}

/// Solves `m * x = rhs` for square `m`, returning the solution and the
/// condition number of `m`.
pub fn solve_square(m: &CMatrix, rhs: &CMatrix, what: &'static str) -> Result<(CMatrix, f64)> {
    if m.nrows() != m.ncols() || rhs.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} system with {} right-hand rows",
            m.nrows(),
            m.ncols(),
            rhs.nrows()
        )));
    }
    let condition = condition_number(m);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Singular { what, condition });
    }
    let x = m
        .clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::Singular { what, condition })?;
    Ok((x, condition))
}

/// Least-squares solution of a tall system via Householder QR.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CMatrix,
    pub condition: f64,
    /// `||m x - rhs|| / ||rhs||` (Frobenius), zero for a zero right side.
    pub relative_residual: f64,
}

pub fn least_squares(m: &CMatrix, rhs: &CMatrix, what: &'static str) -> Result<LeastSquares> {
    if rhs.nrows() != m.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} rows against {} right-hand rows",
            m.nrows(),
            rhs.nrows()
        )));
    }
    if m.nrows() < m.ncols() {
        return Err(Error::Underdetermined {
            equations: m.nrows(),
            unknowns: m.ncols(),
        });
    }
    let condition = condition_number(m);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Singular { what, condition });
    }
    let n = m.ncols();
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qtb = q.adjoint() * rhs;
    let solution = r
        .rows(0, n)
        .into_owned()
        .solve_upper_triangular(&qtb.rows(0, n).into_owned())
        .ok_or(Error::Singular { what, condition })?;
    let rhs_norm = rhs.norm();
    let relative_residual = if rhs_norm > 0.0 {
        (m * &solution - rhs).norm() / rhs_norm
    } else {
        0.0
    };
    Ok(LeastSquares {
        solution,
        condition,
        relative_residual,
    })
}

/// Orthonormal basis (as rows) of the row space of `m`.
pub fn orthonormal_rows(m: &CMatrix) -> CMatrix {
    let (values, v_t) = svd_rows(m);
    let top = values.iter().copied().fold(0.0, f64::max);
    let rank = values
        .iter()
        .filter(|&&s| s > RANK_TOLERANCE * top)
        .count();
    v_t.rows(0, rank).into_owned()
}

/// Circularly-symmetric complex Gaussian with unit variance: real and
/// imaginary parts are independent N(0, 1/2).
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_cn_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill order keeps draws stable across nalgebra versions
    let data: Vec<C64> = (0..rows * cols).map(|_| sample_cn(rng)).collect();
    CMatrix::from_vec(rows, cols, data)
}

/// Matrix as row-major nested lists of `[re, im]` pairs.
pub fn to_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::DimensionMismatch("empty matrix literal".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix literal".into()));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    }))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
