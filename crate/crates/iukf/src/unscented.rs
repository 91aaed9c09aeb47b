//! Sigma-point machinery: deterministic sampling of a Gaussian and moment
//! reconstruction after pushing the samples through a nonlinear map.
//!
//! The sampling follows the classic unscented construction. For an n-dim
//! estimate `xhat` with covariance `Sigma` and spread parameter `kappa`
//! (requiring n + kappa > 0):
//!
//! ```text
//!   p_0     = xhat                                 w_0 = kappa / (n + kappa)
//!   p_i     = xhat + col_i( sqrt((n+kappa) Sigma) )  w_i = 1 / (2 (n+kappa))
//!   p_{i+n} = xhat - col_i( sqrt((n+kappa) Sigma) )
//! ```
//!
//! where the matrix square root is the lower-triangular Cholesky factor and
//! `col_i` is its i-th column. Negative `kappa` (hence a negative center
//! weight) is allowed; downstream covariance repairs deal with any transient
//! indefiniteness that may cause.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mat::{max_abs, max_asymmetry, symmetrized};

/// Jitter ladder used by [`robust_cholesky`], as multiples of
/// `max(1, trace/n)`.
const JITTER_LADDER: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];

/// A symmetric set of 2n+1 sigma points with their weights.
#[derive(Debug, Clone)]
pub struct SigmaPointSet {
    /// The points; index 0 is the center (the mean itself).
    pub points: Vec<DVector<f64>>,
    /// Weights, summing to one. The center weight is negative when kappa < 0.
    pub weights: Vec<f64>,
    /// The spread parameter the set was generated with.
    pub kappa: f64,
}

impl SigmaPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dimension of the underlying state.
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

/// Outcome of a robust Cholesky factorization.
#[derive(Debug, Clone)]
pub struct CholeskyOutcome {
    /// Lower-triangular factor L with L L^T ~= Sigma (+ jitter I).
    pub factor: DMatrix<f64>,
    /// The diagonal jitter that had to be added; 0.0 when the plain
    /// factorization succeeded.
    pub jitter: f64,
}

/// Lower-triangular Cholesky factor of a covariance, with escalating diagonal
/// jitter when the matrix is not numerically positive definite.
///
/// Jitter `delta * I` is tried for `delta` in `{1e-12, 1e-10, 1e-8, 1e-6}`
/// scaled by `max(1, trace/n)`. An exactly zero matrix short-circuits to the
/// zero factor, which is its exact Cholesky factor. If the whole ladder
/// fails, the error carries the offending matrix.
pub fn robust_cholesky(sigma: &DMatrix<f64>) -> Result<CholeskyOutcome> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::Dimension {
            context: "robust_cholesky",
            expected: "square matrix".to_string(),
            got: format!("{}x{}", sigma.nrows(), sigma.ncols()),
        });
    }
    let asym = max_asymmetry(sigma);
    if asym > 1e-8 * (1.0 + max_abs(sigma)) {
        return Err(Error::NotSymmetric {
            context: "robust_cholesky",
            asymmetry: asym,
        });
    }
    if sigma.iter().all(|&v| v == 0.0) {
        return Ok(CholeskyOutcome {
            factor: DMatrix::zeros(n, n),
            jitter: 0.0,
        });
    }
    let sym = symmetrized(sigma);
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return Ok(CholeskyOutcome {
            factor: chol.l(),
            jitter: 0.0,
        });
    }
    let scale = (sym.trace() / n as f64).max(1.0);
    let mut max_jitter = 0.0;
    for base in JITTER_LADDER {
        let jitter = base * scale;
        max_jitter = jitter;
        let jittered = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(CholeskyOutcome {
                factor: chol.l(),
                jitter,
            });
        }
    }
    Err(Error::Factorization {
        context: "robust_cholesky",
        max_jitter,
        matrix: sigma.clone(),
    })
}

/// Generate the 2n+1 sigma points for `(xhat, sigma)` with spread `kappa`.
pub fn generate_sigma_points(
    xhat: &DVector<f64>,
    sigma: &DMatrix<f64>,
    kappa: f64,
) -> Result<SigmaPointSet> {
    let n = xhat.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::Dimension {
            context: "generate_sigma_points",
            expected: format!("{n}x{n} covariance"),
            got: format!("{}x{}", sigma.nrows(), sigma.ncols()),
        });
    }
    let spread = n as f64 + kappa;
    if spread <= 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidKappa { kappa, n });
    }
    let scaled = sigma * spread;
    let root = robust_cholesky(&scaled)?.factor;

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(xhat.clone());
    for i in 0..n {
        points.push(xhat + root.column(i));
    }
    for i in 0..n {
        points.push(xhat - root.column(i));
    }

    let mut weights = Vec::with_capacity(2 * n + 1);
    weights.push(kappa / spread);
    let side = 1.0 / (2.0 * spread);
    weights.extend(std::iter::repeat_n(side, 2 * n));

    Ok(SigmaPointSet {
        points,
        weights,
        kappa,
    })
}

/// Weighted mean and covariance of `propagated` points under the set's
/// weights, plus an optional additive covariance (process or measurement
/// noise).
///
/// The covariance is accumulated in centered form, which is algebraically
/// identical to the raw-moment expression `sum w p p^T - mean mean^T` because
/// the weights sum to one, but does not cancel catastrophically when the mean
/// is large relative to the spread. The result is symmetrized.
pub fn unscented_moments(
    set: &SigmaPointSet,
    propagated: &[DVector<f64>],
    additive_cov: Option<&DMatrix<f64>>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if propagated.len() != set.weights.len() {
        return Err(Error::Dimension {
            context: "unscented_moments",
            expected: format!("{} propagated points", set.weights.len()),
            got: format!("{}", propagated.len()),
        });
    }
    let dim = propagated[0].len();
    let mut mean = DVector::zeros(dim);
    for (w, p) in set.weights.iter().zip(propagated) {
        if p.len() != dim {
            return Err(Error::Dimension {
                context: "unscented_moments",
                expected: format!("points of dimension {dim}"),
                got: format!("{}", p.len()),
            });
        }
        mean += p * *w;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for (w, p) in set.weights.iter().zip(propagated) {
        let d = p - &mean;
        cov += (&d * d.transpose()) * *w;
    }
    if let Some(add) = additive_cov {
        if add.nrows() != dim || add.ncols() != dim {
            return Err(Error::Dimension {
                context: "unscented_moments additive covariance",
                expected: format!("{dim}x{dim}"),
                got: format!("{}x{}", add.nrows(), add.ncols()),
            });
        }
        cov += add;
    }
    Ok((mean, symmetrized(&cov)))
}

/// Weighted cross-covariance between two propagated families under the set's
/// weights.
///
/// `left_mean` and `right_mean` must be the weighted means of the two
/// families; with that, the centered accumulation below equals
/// `sum w l r^T - left_mean right_mean^T` exactly.
pub fn cross_covariance(
    set: &SigmaPointSet,
    left: &[DVector<f64>],
    right: &[DVector<f64>],
    left_mean: &DVector<f64>,
    right_mean: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if left.len() != set.weights.len() || right.len() != set.weights.len() {
        return Err(Error::Dimension {
            context: "cross_covariance",
            expected: format!("{} points in each family", set.weights.len()),
            got: format!("{} and {}", left.len(), right.len()),
        });
    }
    let mut cov = DMatrix::zeros(left_mean.len(), right_mean.len());
    for ((w, l), r) in set.weights.iter().zip(left).zip(right) {
        let dl = l - left_mean;
        let dr = r - right_mean;
        cov += (dl * dr.transpose()) * *w;
    }
    Ok(cov)
}
