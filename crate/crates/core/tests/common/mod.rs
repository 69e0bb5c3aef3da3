//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use nullspace_unlearn::linalg::Matrix;
use nullspace_unlearn::rng::{seeded, standard_normal_vec};

pub fn gaussian_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut r = seeded(seed);
    Matrix::new(rows, cols, standard_normal_vec(&mut r, rows * cols)).unwrap()
}

pub fn gaussian_vec(seed: u64, n: usize) -> Vec<f64> {
    standard_normal_vec(&mut seeded(seed), n)
}

/// Classical two-sided cyclic Jacobi on a symmetric matrix. Returns
/// eigenvalues in descending order and the matching eigenvectors as columns.
pub fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let n = sym.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| sym.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off.sqrt() < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p].clone(), a[q].clone());
                for (k, (apk, aqk)) in rp.into_iter().zip(rq).enumerate() {
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for (k, row) in v.iter().enumerate() {
            vecs.set(k, dst, row[src]);
        }
    }
    (values, vecs)
}

/// Singular values of `a` as square roots of the eigenvalues of `AᵀA`.
pub fn singular_values_oracle(a: &Matrix) -> Vec<f64> {
    let ata = a.transpose().matmul(a).unwrap();
    jacobi_eigen(&ata).0.into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// `I − QQᵀ` where `Q` is built by modified Gram–Schmidt (two passes) over
/// the rows of `m`; rows whose residual falls below `drop_tol` times their
/// original norm are treated as dependent.
pub fn mgs_projector(m: &Matrix, drop_tol: f64) -> (Matrix, usize) {
    let dim = m.cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in m.row_iter() {
        let scale = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut v = r.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > drop_tol * scale {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut p = Matrix::identity(dim);
    for q in &basis {
        for i in 0..dim {
            for j in 0..dim {
                p.set(i, j, p.get(i, j) - q[i] * q[j]);
            }
        }
    }
    (p, basis.len())
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

use nullspace_unlearn::dataio::synthetic::DeskSuite;
use nullspace_unlearn::{ForgetContext, SynthesisConfig, TextEmbedder, UnlearnOptions};

pub fn context<'a>(desk: &'a DeskSuite, text: &'a TextEmbedder, options: UnlearnOptions) -> ForgetContext<'a> {
    ForgetContext::from_manifest(
        &desk.suite.manifest,
        text,
        Some(&desk.encoder),
        &desk.projection,
        SynthesisConfig::default(),
        options,
    )
    .unwrap()
}
