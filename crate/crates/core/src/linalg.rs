//! Thin dense linear-algebra layer over `faer`.
//!
//! Everything in the crate works on `Mat<c64>`; this module keeps the handful
//! of decompositions and vectorization helpers in one place.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Below this size singular values are computed directly; above it through
/// the smaller Gram matrix, which is several times cheaper for the n² x m
/// operators assembled by the analysis module.
const DIRECT_SVD_LIMIT: usize = 200;

pub(crate) fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub(crate) fn real(re: f64) -> c64 {
    c64::new(re, 0.0)
}

/// Column-major `vec(A)`.
pub fn vec(a: &Mat<c64>) -> Vec<c64> {
    let mut out = Vec::with_capacity(a.nrows() * a.ncols());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`] for an `n x n` matrix.
pub fn unvec(v: &[c64], n: usize) -> Result<Mat<c64>> {
    if v.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: v.len(),
        });
    }
    Ok(Mat::from_fn(n, n, |i, j| v[i + j * n]))
}

pub fn adjoint(a: &Mat<c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

pub fn conjugate(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn transpose(a: &Mat<c64>) -> Mat<c64> {
    a.transpose().to_owned()
}

pub fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn frobenius(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs(a: &Mat<c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn scale(a: &Mat<c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(a: &Mat<c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(a: &Mat<c64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    // Zero columns contribute only zero eigenvalues: after a symmetric
    // permutation the matrix is block lower triangular with a zero block.
    let keep: Vec<usize> = (0..a.ncols())
        .filter(|&j| (0..a.nrows()).any(|i| a[(i, j)] != c64::new(0.0, 0.0)))
        .collect();
    if keep.is_empty() {
        return Ok(0.0);
    }
    let reduced;
    let a = if keep.len() < a.ncols() {
        reduced = Mat::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])]);
        &reduced
    } else {
        a
    };
    let values = a
        .eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok(values.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat<c64>) -> Result<f64> {
    let a = drop_zero_rows(a);
    let (r, k) = (a.nrows(), a.ncols());
    if r == 0 || k == 0 {
        return Ok(0.0);
    }
    if r.min(k) <= DIRECT_SVD_LIMIT {
        let s = a
            .singular_values()
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        return Ok(s.first().copied().unwrap_or(0.0));
    }
    let gram = if k <= r {
        a.adjoint() * &a
    } else {
        &a * a.adjoint()
    };
    let values = hermitian_eigenvalues(&gram)?;
    Ok(values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Removes rows that are exactly zero; singular values are unchanged.
fn drop_zero_rows(a: &Mat<c64>) -> Mat<c64> {
    let keep: Vec<usize> = (0..a.nrows())
        .filter(|&i| (0..a.ncols()).any(|j| a[(i, j)] != c64::new(0.0, 0.0)))
        .collect();
    if keep.len() == a.nrows() {
        return a.clone();
    }
    Mat::from_fn(keep.len(), a.ncols(), |i, j| a[(keep[i], j)])
}

/// Inverse of a real square matrix via LU with partial pivoting.
pub fn real_inverse(a: &Mat<f64>) -> Result<Mat<f64>> {
    use faer::linalg::solvers::DenseSolveCore;
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.partial_piv_lu().inverse())
}

pub fn complex_inverse(a: &Mat<c64>) -> Result<Mat<c64>> {
    use faer::linalg::solvers::DenseSolveCore;
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.partial_piv_lu().inverse())
}

pub fn to_complex(a: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| real(a[(i, j)]))
}
