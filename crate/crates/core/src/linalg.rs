//! The dense linear-algebra contract used by calibration, kinematics and
//! control: least squares, wrench-transform inversion, rank and conditioning.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Condition number above which a wrench transform counts as singular.
pub const SINGULAR_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinAlgError {
    #[error("rank-deficient system: numerical rank {rank} for {cols} unknowns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("underdetermined system: {rows} equations for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular configuration: condition number {condition:.3e} exceeds {limit:.0e}")]
    Singular { condition: f64, limit: f64 },
    #[error("wrench transform must have 3 rows, got {0}")]
    NotThreeRows(usize),
    #[error("non-finite entries in input")]
    NonFinite,
}

fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

/// Numerical rank with the usual `max(m, n) · ε · σ_max` threshold.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = singular_values(a);
    let smax = sv.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Ratio of the largest to the smallest singular value (2-norm condition).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    let smin = sv.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// `argmin ‖A x − b‖₂` via Householder QR.
///
/// Requires `m ≥ n` and full column rank; a rank-deficient `A` is reported
/// with its numerical rank rather than silently regularised.
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinAlgError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(LinAlgError::DimensionMismatch {
            expected: m,
            found: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(LinAlgError::NonFinite);
    }
    if m < n || n == 0 {
        return Err(LinAlgError::Underdetermined { rows: m, cols: n });
    }
    let rank = numerical_rank(a);
    if rank < n {
        return Err(LinAlgError::RankDeficient { rank, cols: n });
    }
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * b;
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or(LinAlgError::RankDeficient { rank, cols: n })
}

/// Inverse of a `3 x n` wrench transform.
///
/// * `n = 3`: the exact inverse.
/// * `n > 3`: the right pseudo-inverse `Hᵀ(HHᵀ)⁻¹`, so `H·H⁺ = I₃`.
/// * `n < 3`: the left pseudo-inverse `(HᵀH)⁻¹Hᵀ`, so `H⁺·H = Iₙ`; this is
///   what lets a single SFA (`H = [0;0;1]`) share the SEE code path.
pub fn invert_transform(h: &DMatrix<f64>) -> Result<DMatrix<f64>, LinAlgError> {
    if h.nrows() != 3 {
        return Err(LinAlgError::NotThreeRows(h.nrows()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(LinAlgError::NonFinite);
    }
    let n = h.ncols();
    if n == 0 {
        return Err(LinAlgError::Underdetermined { rows: 3, cols: 0 });
    }
    let condition = condition_number(h);
    if !(condition <= SINGULAR_CONDITION_LIMIT) {
        return Err(LinAlgError::Singular {
            condition,
            limit: SINGULAR_CONDITION_LIMIT,
        });
    }
    let singular = || LinAlgError::Singular {
        condition,
        limit: SINGULAR_CONDITION_LIMIT,
    };
    match n {
        3 => h.clone().try_inverse().ok_or_else(singular),
        n if n > 3 => {
            let hht = h * h.transpose();
            let inv = hht.try_inverse().ok_or_else(singular)?;
            Ok(h.transpose() * inv)
        }
        _ => {
            let hth = h.transpose() * h;
            let inv = hth.try_inverse().ok_or_else(singular)?;
            Ok(inv * h.transpose())
        }
    }
}
