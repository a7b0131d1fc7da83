//! Ridge-regularized least squares over sparse feature rows.
//!
//! Rows are accumulated into the normal equations `(XᵀX + ρI)θ = Xᵀv` in
//! row order, the system is symmetrically scaled to unit diagonal, and
//! solved by Cholesky. The scaling leaves the solution unchanged but keeps
//! the factorization stable when feature columns differ in magnitude by
//! many orders (raw distances next to interpolation weights).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::WeightVector;

/// Scaled Cholesky pivots below this mark a numerically singular system.
const PIVOT_EPS: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub theta: WeightVector,
    /// Root-mean-square residual over the fitted rows.
    pub residual_rms: f64,
}

/// Minimize `Σ (xᵢᵀθ − vᵢ)² + ridge·‖θ‖²` over `n_features` weights.
pub fn fit_least_squares<R: AsRef<[(usize, f64)]>>(
    rows: &[R],
    targets: &[f64],
    n_features: usize,
    ridge: f64,
) -> Result<Fit> {
    assert_eq!(rows.len(), targets.len(), "one target per row");
    if rows.is_empty() {
        return Err(Error::invalid("n_state", "least squares needs at least one sample"));
    }
    let mut gram = DMatrix::<f64>::zeros(n_features, n_features);
    let mut rhs = DVector::<f64>::zeros(n_features);
    for (row, &v) in rows.iter().zip(targets) {
        let row = row.as_ref();
        for &(i, wi) in row {
            rhs[i] += wi * v;
            for &(j, wj) in row {
                gram[(i, j)] += wi * wj;
            }
        }
    }

    let mut scale = DVector::<f64>::zeros(n_features);
    for i in 0..n_features {
        let d = gram[(i, i)] + ridge;
        if !(d > 0.0) {
            return Err(Error::SingularSystem { ridge });
        }
        scale[i] = 1.0 / d.sqrt();
    }
    for j in 0..n_features {
        for i in 0..n_features {
            let r = if i == j { ridge } else { 0.0 };
            gram[(i, j)] = (gram[(i, j)] + r) * scale[i] * scale[j];
        }
    }
    let scaled_rhs = rhs.component_mul(&scale);

    let chol = Cholesky::new(gram).ok_or(Error::SingularSystem { ridge })?;
    let l = chol.l_dirty();
    if (0..n_features).any(|i| l[(i, i)] * l[(i, i)] < PIVOT_EPS) {
        return Err(Error::SingularSystem { ridge });
    }
    let y = chol.solve(&scaled_rhs);
    let theta = WeightVector(y.component_mul(&scale).iter().copied().collect());

    let sse: f64 = rows
        .iter()
        .zip(targets)
        .map(|(row, &v)| (theta.dot(row.as_ref()) - v).powi(2))
        .sum();
    Ok(Fit {
        residual_rms: (sse / rows.len() as f64).sqrt(),
        theta,
    })
}

/// Dense row helper for callers holding full feature vectors.
pub fn sparse_row(dense: &[f64]) -> Vec<(usize, f64)> {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect()
}
