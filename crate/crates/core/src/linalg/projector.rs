use super::{numerical_rank, thin_svd, Matrix};
use crate::error::{Error, Result};

/// Relative singular-value cutoff used when counting the forget rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthogonal projector onto the complement of a row span, `P = I − U Uᵀ`.
#[derive(Clone, Debug)]
pub struct NullspaceProjector {
    p: Matrix,
    basis: Matrix,
    rank_removed: usize,
}

impl NullspaceProjector {
    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    /// Orthonormal basis of the removed subspace, one column per direction.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn rank_removed(&self) -> usize {
        self.rank_removed
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.p.matvec(v)
    }
}

/// Builds the projector that annihilates every row of `rows` (k × E).
///
/// The rows are transposed into an E × k matrix whose left singular vectors
/// above `rel_tol` span the forget subspace.
pub fn nullspace_projector(rows: &Matrix, rel_tol: f64) -> Result<NullspaceProjector> {
    let (k, dim) = rows.shape();
    if k == 0 || dim == 0 {
        return Err(Error::InvalidMatrix("forget matrix has no rows".into()));
    }
    if k >= dim {
        return Err(Error::ForgetSubspaceFull { rows: k, rank: k.min(dim), dim });
    }
    let factors = thin_svd(&rows.transpose())?;
    let rank = numerical_rank(&factors.singular_values, rel_tol);
    if rank == 0 {
        return Err(Error::InvalidMatrix("forget matrix is numerically zero".into()));
    }
    if rank >= dim {
        return Err(Error::ForgetSubspaceFull { rows: k, rank, dim });
    }
    let basis = factors.u.leading_columns(rank);
    let mut p = Matrix::identity(dim);
    for i in 0..dim {
        let ui = basis.row(i);
        for j in i..dim {
            let uj = basis.row(j);
            let v = p.get(i, j) - super::dot(ui, uj);
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    Ok(NullspaceProjector { p, basis, rank_removed: rank })
}
