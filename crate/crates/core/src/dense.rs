//! Dense decompositions, delegated to faer.

use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::CMat;

pub(crate) type RMat = DMatrix<f64>;

fn to_faer_c(m: &CMat) -> Mat<faer::c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn to_faer_r(m: &RMat) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues in ascending order and the matching eigenvectors as columns.
pub(crate) fn herm_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], CMat::zeros(0, 0)));
    }
    let e = to_faer_c(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    let vals = (0..n).map(|i| s[i].re).collect();
    Ok((vals, CMat::from_fn(n, n, |i, j| u[(i, j)])))
}

/// Real symmetric eigendecomposition, ascending.
pub(crate) fn sym_eigen(m: &RMat) -> Result<(Vec<f64>, RMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], RMat::zeros(0, 0)));
    }
    let e = to_faer_r(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver: {e:?}")))?;
    let s = e.S().column_vector();
    let u = e.U();
    Ok(((0..n).map(|i| s[i]).collect(), RMat::from_fn(n, n, |i, j| u[(i, j)])))
}

/// Singular values in descending order and the thin left factor.
pub(crate) fn svd_left(m: &RMat) -> Result<(Vec<f64>, RMat)> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok((vec![], RMat::zeros(r, 0)));
    }
    let s = to_faer_r(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD: {e:?}")))?;
    let sv = s.S().column_vector();
    let u = s.U();
    let k = sv.nrows();
    Ok((
        (0..k).map(|i| sv[i]).collect(),
        RMat::from_fn(r, k, |i, j| u[(i, j)]),
    ))
}

/// Complex thin SVD `m = U Σ V*`, singular values descending.
pub(crate) fn svd_complex(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let (r, c) = m.shape();
    let s = to_faer_c(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD: {e:?}")))?;
    let sv = s.S().column_vector();
    let (u, v) = (s.U(), s.V());
    let k = sv.nrows();
    Ok((
        CMat::from_fn(r, k, |i, j| u[(i, j)]),
        (0..k).map(|i| sv[i].re).collect(),
        CMat::from_fn(c, k, |i, j| v[(i, j)]),
    ))
}

/// Full orthogonal factor of a QR decomposition.
pub(crate) fn full_q(m: &RMat) -> RMat {
    let q = to_faer_r(m).qr().compute_Q();
    RMat::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)])
}

/// Thin QR of a complex matrix, rescaled so that `R` has a nonnegative
/// real diagonal.
pub(crate) fn qr_positive(m: &CMat) -> (CMat, CMat) {
    let qr = to_faer_c(m).qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let mut q = CMat::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)]);
    let mut r = CMat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)]);
    for k in 0..r.nrows().min(r.ncols()) {
        let z = r[(k, k)];
        if z.norm() > 0.0 {
            let ph = z / z.norm();
            for z in q.column_mut(k).iter_mut() {
                *z *= ph;
            }
            for z in r.row_mut(k).iter_mut() {
                *z *= ph.conj();
            }
        }
    }
    (q, r)
}
