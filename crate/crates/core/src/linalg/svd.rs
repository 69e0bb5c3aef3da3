//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The Jacobi sweep orthogonalizes the columns of `A` in place while
//! accumulating the right rotations into `V`; the column norms are then the
//! singular values and the normalized columns the left singular vectors.
//! Orthogonality of the result is relative to each column pair, so small but
//! nonzero singular values keep accurate singular vectors.

use super::{dot, norm, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Columns whose singular value falls below this fraction of the largest are
/// rebuilt by orthogonal completion instead of normalization.
const COMPLETION_REL: f64 = 1e-14;

/// `A = U · diag(s) · Vt` with `U` having orthonormal columns.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactors {
    pub fn rank(&self, rel_tol: f64) -> usize {
        numerical_rank(&self.singular_values, rel_tol)
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.singular_values.iter().enumerate() {
                us.set(r, c, us.get(r, c) * s);
            }
        }
        us.matmul(&self.vt).expect("factor shapes agree by construction")
    }
}

/// Number of singular values strictly above `rel_tol · s[0]`.
pub fn numerical_rank(s: &[f64], rel_tol: f64) -> usize {
    let Some(&largest) = s.first() else {
        return 0;
    };
    if largest <= 0.0 {
        return 0;
    }
    let cutoff = rel_tol * largest;
    s.iter().take_while(|&&v| v > cutoff).count()
}

/// Thin SVD with `r = min(rows, cols)` singular triplets.
pub fn thin_svd(a: &Matrix) -> Result<SvdFactors> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    if a.rows() >= a.cols() {
        Ok(jacobi_tall(a))
    } else {
        // A = (Aᵀ)ᵀ = (U' S V'ᵀ)ᵀ = V' S U'ᵀ
        let t = jacobi_tall(&a.transpose());
        Ok(SvdFactors {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        })
    }
}

fn jacobi_tall(a: &Matrix) -> SvdFactors {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| a.col(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = cols.iter().map(|c| norm(c)).enumerate().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let largest = order[0].1;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut vt = Matrix::zeros(n, n);
    for (k, &(idx, sigma)) in order.iter().enumerate() {
        singular_values.push(sigma);
        for (c, &val) in v[idx].iter().enumerate() {
            vt.set(k, c, val);
        }
        if largest > 0.0 && sigma > COMPLETION_REL * largest {
            u_cols.push(cols[idx].iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(complete_basis(&u_cols, m));
        }
    }

    let mut u = Matrix::zeros(m, n);
    for (c, col) in u_cols.iter().enumerate() {
        for (r, &val) in col.iter().enumerate() {
            u.set(r, c, val);
        }
    }
    SvdFactors { u, singular_values, vt }
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// A unit vector orthogonal to every vector in `basis`, taken from the
/// standard basis vector with the largest residual after two passes of
/// Gram–Schmidt.
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        for _ in 0..2 {
            for q in basis {
                let proj = dot(q, &e);
                for (x, y) in e.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
        }
        let n = norm(&e);
        if best.as_ref().is_none_or(|(b, _)| n > *b) {
            best = Some((n, e));
        }
    }
    let (n, e) = best.expect("m >= 1");
    e.into_iter().map(|x| x / n).collect()
}
