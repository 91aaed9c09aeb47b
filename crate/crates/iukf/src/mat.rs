//! Small matrix-hygiene helpers used throughout the filters.

use nalgebra::{DMatrix, DVector};

/// Force exact symmetry: (M + M^T) / 2.
///
/// Every covariance the filters emit goes through this so that asymmetry from
/// floating-point accumulation never grows past one rounding step.
pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    symmetrize_in_place(&mut out);
    out
}

/// In-place variant of [`symmetrized`].
pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest absolute difference |M_ij - M_ji| over all entries.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest absolute entry, used to scale tolerances.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn vector_is_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn matrix_is_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Rough 2-norm condition estimate via singular values. Only used to attach
/// diagnostics to errors, so the cost of an SVD on these small matrices is
/// irrelevant.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let sv = &svd.singular_values;
    if sv.is_empty() {
        return f64::INFINITY;
    }
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    PI - (PI - a).rem_euclid(TAU)
}
