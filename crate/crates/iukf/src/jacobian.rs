//! Central finite-difference Jacobians.
//!
//! Models may carry analytic Jacobians; where they do not, the filters fall
//! back to these differences. The inverse filter's transition map has no
//! closed form at all, so its Jacobian (needed for the information-matrix
//! recursion) always comes through here.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Relative step for the filters' Jacobian fallback.
pub const FILTER_FD_STEP: f64 = 1e-6;

/// Relative step when differentiating the inverse transition map for the
/// information-matrix recursion. Larger than [`FILTER_FD_STEP`] because each
/// evaluation is a full filter step and carries more rounding noise.
pub const BOUND_FD_STEP: f64 = 1e-5;

/// Jacobian of `func` at `x` by central differences.
///
/// The step for component `i` is `rel_step * (1 + |x_i|)`: proportional to the
/// coordinate's magnitude, without collapsing near zero.
pub fn central_jacobian<F>(func: F, x: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    try_central_jacobian(|x| Ok(func(x)), x, rel_step)
        .expect("infallible closure cannot produce an error")
}

/// Same as [`central_jacobian`] for maps that can fail (e.g. a map that runs a
/// filter step internally). The first failure is propagated.
pub fn try_central_jacobian<F>(func: F, x: &DVector<f64>, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let step = rel_step * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        let fp = func(&xp)?;
        let fm = func(&xm)?;
        columns.push((fp - fm) / (2.0 * step));
    }
    let m = columns.first().map_or(0, |c| c.len());
    let mut jac = DMatrix::zeros(m, n);
    for (i, col) in columns.iter().enumerate() {
        jac.set_column(i, col);
    }
    Ok(jac)
}
