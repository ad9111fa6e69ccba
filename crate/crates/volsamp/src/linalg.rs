//! Dense linear algebra primitives shared by the samplers and estimators.
//!
//! The design matrix is tall (`n x d`, `n >= d`) and assumed full column
//! rank; every factorization here checks that assumption against
//! [`RANK_TOL`] and reports [`Error::RankDeficient`] instead of returning
//! garbage. Determinants are only ever consumed as ratios, so they are kept
//! in log space until the point of use.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative rank tolerance: a matrix is treated as rank deficient when its
/// smallest singular value does not exceed `RANK_TOL` times its largest.
pub const RANK_TOL: f64 = 1e-10;

/// Relative asymmetry tolerated by [`min_eigenvalue_sym`].
pub const SYM_TOL: f64 = 1e-8;

const RANK_HINT: &str = "the columns must be linearly independent";

/// Spectral factorization of the Gram matrix `X^T X` of a full-column-rank
/// design matrix, exposing the derived quantities the samplers need.
///
/// All fields are computed from one singular value decomposition of `X`, so
/// `inverse`, `inv_sqrt` and `log_det` are mutually consistent by
/// construction.
#[derive(Debug, Clone)]
pub struct GramFactorization {
    gram: Matrix,
    inverse: Matrix,
    inv_sqrt: Matrix,
    log_det: f64,
}

impl GramFactorization {
    /// `X^T X`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `(X^T X)^{-1}`.
    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    /// Symmetric inverse square root `(X^T X)^{-1/2}`.
    pub fn inv_sqrt(&self) -> &Matrix {
        &self.inv_sqrt
    }

    /// `ln det(X^T X)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Column dimension `d`.
    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }
}

/// Factorizes the Gram matrix of `x`, verifying full column rank.
pub fn gram_factorize(x: &Matrix) -> Result<GramFactorization> {
    let (n, d) = x.shape();
    if d == 0 {
        return Err(Error::ShapeMismatch {
            reason: "design matrix needs at least one column".into(),
        });
    }
    if n < d {
        return Err(Error::RankDeficient {
            ratio: 0.0,
            hint: RANK_HINT,
        });
    }
    let svd = x.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax.is_nan() || smax <= 0.0 || smin <= RANK_TOL * smax {
        return Err(Error::RankDeficient {
            ratio: if smax > 0.0 { smin / smax } else { 0.0 },
            hint: RANK_HINT,
        });
    }
    let v_t = svd.v_t.expect("svd requested with right singular vectors");
    let v = v_t.transpose();

    // inverse = V S^{-2} V^T, inv_sqrt = V S^{-1} V^T: scale the columns of V
    // once per power instead of forming diagonal matrices.
    let mut v_inv = v.clone();
    let mut v_inv_sqrt = v;
    for j in 0..d {
        let s = svd.singular_values[j];
        v_inv.column_mut(j).scale_mut(1.0 / (s * s));
        v_inv_sqrt.column_mut(j).scale_mut(1.0 / s);
    }
    let inverse = &v_inv * &v_t;
    let inv_sqrt = &v_inv_sqrt * &v_t;
    let log_det = 2.0 * svd.singular_values.iter().map(|s| s.ln()).sum::<f64>();

    Ok(GramFactorization {
        gram: x.tr_mul(x),
        inverse,
        inv_sqrt,
        log_det,
    })
}

/// Statistical leverage scores `l_i = x_i^T (X^T X)^{-1} x_i`.
///
/// Rejects matrices containing an all-zero row: such rows carry no leverage
/// and the samplers built on these scores assume `l_i > 0`.
pub fn leverage_scores(x: &Matrix) -> Result<Vec<f64>> {
    let fact = gram_factorize(x)?;
    leverage_scores_with(x, &fact)
}

/// Leverage scores given a precomputed factorization of the same matrix.
pub fn leverage_scores_with(x: &Matrix, fact: &GramFactorization) -> Result<Vec<f64>> {
    if let Some(row) = find_zero_row(x) {
        return Err(Error::ZeroRow { row });
    }
    // l_i = || (X^T X)^{-1/2} x_i ||^2, via one n x d product.
    let b = x * fact.inv_sqrt();
    Ok((0..x.nrows()).map(|i| b.row(i).norm_squared()).collect())
}

/// Index of the first all-zero row, if any.
pub fn find_zero_row(x: &Matrix) -> Option<usize> {
    (0..x.nrows()).find(|&i| x.row(i).iter().all(|&v| v == 0.0))
}

/// Maps `x` to an orthonormal basis of its column space,
/// `U = X (X^T X)^{-1/2}`, preserving row indexing and leverage scores.
pub fn orthogonalize(x: &Matrix) -> Result<Matrix> {
    let fact = gram_factorize(x)?;
    Ok(x * fact.inv_sqrt())
}

/// Weighted Gram matrix `sum_j w_j x_{i_j} x_{i_j}^T` over a sequence of row
/// indices. Repeats accumulate; an empty sequence yields the zero matrix.
pub fn weighted_gram(x: &Matrix, indices: &[usize], weights: &[f64]) -> Result<Matrix> {
    if indices.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            reason: format!("{} indices vs {} weights", indices.len(), weights.len()),
        });
    }
    let (n, d) = x.shape();
    let mut w = Matrix::zeros(d, d);
    for (&i, &wt) in indices.iter().zip(weights) {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, rows: n });
        }
        accumulate_outer(&mut w, x, i, wt);
    }
    Ok(w)
}

/// Adds `wt * x_i x_i^T` to `acc` without allocating.
pub fn accumulate_outer(acc: &mut Matrix, x: &Matrix, i: usize, wt: f64) {
    let d = acc.nrows();
    let row = x.row(i);
    for a in 0..d {
        let ra = wt * row[a];
        for b in 0..d {
            acc[(a, b)] += ra * row[b];
        }
    }
}

/// Quadratic form `x_i^T m x_i` for row `i` of `x`, allocation-free.
pub fn quad_form_row(m: &Matrix, x: &Matrix, i: usize) -> f64 {
    let d = m.nrows();
    let row = x.row(i);
    let mut s = 0.0;
    for a in 0..d {
        let mut t = 0.0;
        for b in 0..d {
            t += m[(a, b)] * row[b];
        }
        s += row[a] * t;
    }
    s
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// The input is checked for symmetry up to [`SYM_TOL`] (relative to the
/// largest entry) and then symmetrized, so roundoff-level asymmetry from
/// accumulated products is tolerated but structurally asymmetric input is
/// rejected.
pub fn min_eigenvalue_sym(m: &Matrix) -> Result<f64> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::ShapeMismatch {
            reason: format!("{r}x{c} matrix is not square"),
        });
    }
    let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut asymmetry = 0.0f64;
    for i in 0..r {
        for j in (i + 1)..r {
            asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asymmetry > SYM_TOL * scale.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (m + m.transpose()).scale(0.5);
    let eigenvalues = sym.symmetric_eigenvalues();
    Ok(eigenvalues.min())
}

/// `ln det(m)` via Cholesky for a symmetric positive definite matrix, or
/// `None` when `m` is not numerically positive definite (determinant ratios
/// treat that as zero).
pub fn logdet_spd(m: &Matrix) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(m.clone())?;
    Some(
        2.0 * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>(),
    )
}

/// Minimum-norm least squares solution of `a w ~ b`.
///
/// Singular values at or below `RANK_TOL` times the largest are treated as
/// zero, so rank-deficient systems get the pseudoinverse solution rather
/// than an error. An empty or all-zero system solves to the zero vector.
pub fn min_norm_lstsq(a: &Matrix, b: &Vector) -> Result<Vector> {
    let (n, d) = a.shape();
    if b.len() != n {
        return Err(Error::ShapeMismatch {
            reason: format!("matrix has {n} rows but rhs has {} entries", b.len()),
        });
    }
    if n == 0 || d == 0 {
        return Ok(Vector::zeros(d));
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .as_ref()
        .expect("svd requested with left singular vectors");
    let v_t = svd
        .v_t
        .as_ref()
        .expect("svd requested with right singular vectors");
    let smax = svd.singular_values.max();
    let mut w = Vector::zeros(d);
    if smax <= 0.0 {
        return Ok(w);
    }
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        if s > RANK_TOL * smax {
            let coeff = u.column(i).dot(b) / s;
            w.axpy(coeff, &v_t.row(i).transpose(), 1.0);
        }
    }
    Ok(w)
}
