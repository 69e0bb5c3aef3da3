//! Dense double-precision linear algebra: matrices, thin SVD, and nullspace
//! projectors.

mod matrix;
mod projector;
mod svd;
mod vector;

pub use matrix::Matrix;
pub use projector::{nullspace_projector, NullspaceProjector, DEFAULT_RANK_TOL};
pub use svd::{numerical_rank, thin_svd, SvdFactors};
pub use vector::{cosine, dot, l2_normalize, norm};

use crate::error::{Error, Result};

/// Orthonormalizes the columns of `a` (rows ≥ cols) with two passes of
/// modified Gram–Schmidt, i.e. the `Q` factor of a thin QR.
pub fn orthonormal_columns(a: &Matrix) -> Result<Matrix> {
    let (m, n) = a.shape();
    if n > m {
        return Err(Error::DimensionError(format!("cannot orthonormalize {n} columns in R^{m}")));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v = a.col(c);
        for _ in 0..2 {
            for prev in &q {
                let proj = dot(prev, &v);
                for (x, y) in v.iter_mut().zip(prev) {
                    *x -= proj * y;
                }
            }
        }
        let n = norm(&v);
        if n <= 1e-12 {
            return Err(Error::InvalidMatrix(format!("column {c} is linearly dependent")));
        }
        q.push(v.into_iter().map(|x| x / n).collect());
    }
    let mut out = Matrix::zeros(m, n);
    for (c, col) in q.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// Factored `A⁺` for a full-row-rank `A` (rows ≤ cols), reusable across
/// right-hand sides.
#[derive(Clone, Debug)]
pub struct Pseudoinverse {
    factors: SvdFactors,
    rank: usize,
}

impl Pseudoinverse {
    pub fn new(a: &Matrix) -> Result<Self> {
        let factors = thin_svd(a)?;
        let rank = numerical_rank(&factors.singular_values, DEFAULT_RANK_TOL);
        Ok(Self { factors, rank })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let f = &self.factors;
        if b.len() != f.u.rows() {
            return Err(Error::DimensionError(format!(
                "rhs of length {} for {}x{} system",
                b.len(),
                f.u.rows(),
                f.vt.cols()
            )));
        }
        // x = V · diag(1/s) · Uᵀ b over the retained triplets
        let utb = f.u.vecmat(b)?;
        let mut x = vec![0.0; f.vt.cols()];
        for (k, (&s, &c)) in f.singular_values.iter().zip(&utb).take(self.rank).enumerate() {
            let w = c / s;
            for (xi, &vi) in x.iter_mut().zip(f.vt.row(k)) {
                *xi += w * vi;
            }
        }
        Ok(x)
    }
}

/// `A⁺ · b`; see [`Pseudoinverse`] for repeated solves.
pub fn pinv_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionError(format!(
            "rhs of length {} for {}x{} system",
            b.len(),
            a.rows(),
            a.cols()
        )));
    }
    Pseudoinverse::new(a)?.solve(b)
}
