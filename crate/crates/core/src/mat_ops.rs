//! Half-vectorization algebra, symmetrization and the spectral filters that
//! turn an operator into a density matrix.
//!
//! Index conventions are 0-based throughout. `vech` stacks the lower triangle
//! column by column: `(w00, w10, .., w(n-1)0, w11, .., w(n-1)(n-1))`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, real};

/// Dense complex Hermitian matrix.
///
/// Construction checks `a[i][j] == conj(a[j][i])` to `1e-12 * max(1, max|a|)`
/// and then stores the exactly Hermitian part.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(Mat<c64>);

impl HermitianMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(a: Mat<c64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: a.ncols(),
            });
        }
        let tol = Self::TOLERANCE * linalg::max_abs(&a).max(1.0);
        for j in 0..n {
            for i in j..n {
                let deviation = (a[(i, j)] - a[(j, i)].conj()).norm();
                if deviation > tol {
                    return Err(Error::NotHermitian { i, j, deviation });
                }
            }
        }
        Ok(Self::hermitian_part(&a))
    }

    /// `(A + A^H) / 2` without validation.
    pub(crate) fn hermitian_part(a: &Mat<c64>) -> Self {
        let n = a.nrows();
        Self(Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        Self::new(Mat::from_fn(n, n, f))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(Mat::from_fn(n, n, |i, j| if i == j { real(d[i]) } else { real(0.0) }))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat<c64> {
        &self.0
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Ascending eigenvalues and the matching orthonormal eigenvectors.
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<c64>)> {
        linalg::hermitian_eigen(&self.0)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        linalg::frobenius(&(&self.0 - &other.0))
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.0)
    }

    pub fn is_real(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (0..n).all(|i| self.0[(i, j)].im == 0.0))
    }

    /// `(1 - theta) * self + theta * other`.
    pub fn mix(&self, other: &Self, theta: f64) -> Self {
        let n = self.n();
        Self(Mat::from_fn(n, n, |i, j| {
            self.0[(i, j)] * (1.0 - theta) + other.0[(i, j)] * theta
        }))
    }
}

/// Column-major lower-triangle vector of an `n x n` matrix, length `n(n+1)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfVector {
    n: usize,
    data: Vec<c64>,
}

impl HalfVector {
    pub fn new(data: Vec<c64>) -> Result<Self> {
        let n = triangular_root(data.len()).ok_or(Error::NotTriangular(data.len()))?;
        Ok(Self { n, data })
    }

    /// The `j`-th unit vector of length `n(n+1)/2`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut data = vec![real(0.0); half_len(n)];
        data[j] = real(1.0);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[c64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<c64> {
        self.data
    }
}

pub fn half_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `Some(n)` when `len == n(n+1)/2`.
pub fn triangular_root(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n.saturating_sub(1)..=n + 1).find(|&k| half_len(k) == len)
}

/// Position of entry `(i, j)`, `i >= j`, inside `vech`.
pub fn vech_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// `(i, j)` pairs in `vech` order.
pub fn vech_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |j| (j..n).map(move |i| (i, j)))
}

pub fn vech(w: &Mat<c64>) -> Result<HalfVector> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: w.ncols(),
        });
    }
    let data = vech_pairs(n).map(|(i, j)| w[(i, j)]).collect();
    Ok(HalfVector { n, data })
}

/// Fills the lower triangle from `v` and completes the upper triangle with the
/// *transpose* (not the conjugate transpose), so `vech_inv(vech(W)) == W` holds
/// for complex-symmetric `W` but not for Hermitian `W` with complex entries.
pub fn vech_inv(v: &HalfVector) -> Mat<c64> {
    let n = v.n;
    let mut w = Mat::zeros(n, n);
    for ((i, j), x) in vech_pairs(n).zip(v.data.iter()) {
        w[(i, j)] = *x;
        w[(j, i)] = *x;
    }
    w
}

/// `vech_inv(e_k)` without allocating the unit vector.
pub fn vech_inv_unit(n: usize, k: usize) -> Mat<c64> {
    let (i, j) = vech_pairs(n).nth(k).expect("unit index within n(n+1)/2");
    let mut w = Mat::zeros(n, n);
    w[(i, j)] = real(1.0);
    w[(j, i)] = real(1.0);
    w
}

/// The `m x n²` 0/1 selector with `T vec(W) = vech(W)`, stored as the `vec`
/// index picked by each row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorT {
    n: usize,
    rows: Vec<usize>,
}

impl SelectorT {
    pub fn new(n: usize) -> Self {
        let rows = vech_pairs(n).map(|(i, j)| i + j * n).collect();
        Self { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Column (in `vec` numbering) of the single 1 in each row.
    pub fn selected(&self) -> &[usize] {
        &self.rows
    }

    pub fn apply(&self, vec_w: &[c64]) -> Result<HalfVector> {
        if vec_w.len() != self.n * self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.n,
                found: vec_w.len(),
            });
        }
        Ok(HalfVector {
            n: self.n,
            data: self.rows.iter().map(|&k| vec_w[k]).collect(),
        })
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut t = Mat::zeros(self.rows.len(), self.n * self.n);
        for (r, &k) in self.rows.iter().enumerate() {
            t[(r, k)] = real(1.0);
        }
        t
    }

    /// `T * M` for a matrix with `n²` rows.
    pub fn select_rows(&self, m: &Mat<c64>) -> Mat<c64> {
        Mat::from_fn(self.rows.len(), m.ncols(), |r, j| m[(self.rows[r], j)])
    }
}

/// `S(L + D + R) = L + D + L^T` for the strict-lower/diagonal/strict-upper split.
pub fn symmetrize(x: &Mat<c64>) -> Mat<c64> {
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| if i >= j { x[(i, j)] } else { x[(j, i)] })
}

/// Smallest admissible occupied/virtual separation relative to the spectrum scale.
pub const GAP_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_occupation(n: usize, p: usize) -> Result<()> {
    if p == 0 || p >= n {
        return Err(Error::InvalidOccupation { p, n });
    }
    Ok(())
}

/// Fails with [`Error::ZeroGap`] when `lambda_{p+1} - lambda_p` vanishes.
pub fn check_gap(lambdas: &[f64], p: usize) -> Result<f64> {
    check_occupation(lambdas.len(), p)?;
    let scale = lambdas.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = lambdas[p] - lambdas[p - 1];
    if gap <= GAP_TOLERANCE * scale || gap <= 0.0 {
        return Err(Error::ZeroGap { p, gap });
    }
    Ok(gap)
}

/// Projector onto the invariant subspace of the `p` smallest eigenvalues of `b`.
pub fn spectral_filter_density(b: &HermitianMatrix, p: usize) -> Result<HermitianMatrix> {
    let (lambdas, x) = b.eigen()?;
    check_gap(&lambdas, p)?;
    Ok(occupied_projector(&x, p))
}

pub(crate) fn occupied_projector(x: &Mat<c64>, p: usize) -> HermitianMatrix {
    let x1 = x.subcols(0, p);
    HermitianMatrix::hermitian_part(&(x1 * x1.adjoint()))
}

/// How eigenvalues are turned into occupations when forming a density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityFilter {
    /// Occupy exactly the `p` lowest eigenvectors.
    #[default]
    Step,
    /// Fermi-Dirac occupations with the chemical potential fixed by `trace = p`.
    Fermi { beta: f64 },
}

/// Filter function with all parameters fixed, used for divided differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterFunction {
    Step,
    Fermi { beta: f64, mu: f64 },
}

/// `1 / (1 + exp(beta (t - mu)))`, evaluated without overflow.
pub fn fermi_dirac(t: f64, mu: f64, beta: f64) -> f64 {
    let x = beta * (t - mu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Derivative of [`fermi_dirac`] with respect to `t`.
pub fn fermi_dirac_derivative(t: f64, mu: f64, beta: f64) -> f64 {
    let s = (-(beta * (t - mu)).abs()).exp();
    -beta * s / ((1.0 + s) * (1.0 + s))
}

const MU_TOLERANCE: f64 = 1e-13;
const MU_MAX_ITER: usize = 200;
const MU_MAX_EXPANSIONS: usize = 100;

/// Chemical potential with `sum_i f(lambda_i) = p`, by bisection starting
/// from `[lambda_1 - 1, lambda_n + 1]` (widened if it does not bracket).
pub fn chemical_potential(lambdas: &[f64], beta: f64, p: usize) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidOption(format!("beta must be positive, got {beta}")));
    }
    check_occupation(lambdas.len(), p)?;
    let target = p as f64;
    let excess = |mu: f64| lambdas.iter().map(|&l| fermi_dirac(l, mu, beta)).sum::<f64>() - target;
    let mut lo = lambdas[0] - 1.0;
    let mut hi = lambdas[lambdas.len() - 1] + 1.0;
    // Small beta flattens the filter and pushes mu far from the spectrum.
    let mut width = 1.0;
    for _ in 0..MU_MAX_EXPANSIONS {
        if excess(lo) <= 0.0 && excess(hi) >= 0.0 {
            break;
        }
        if excess(lo) > 0.0 {
            lo -= width;
        }
        if excess(hi) < 0.0 {
            hi += width;
        }
        width *= 2.0;
    }
    let bracket_err = Error::ChemicalPotentialBracket { target, lo, hi };
    if excess(lo) > 0.0 || excess(hi) < 0.0 {
        return Err(bracket_err);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MU_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let g = excess(mid);
        if g.abs() <= MU_TOLERANCE {
            return Ok(mid);
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    if excess(mid).abs() <= 1e-12 {
        Ok(mid)
    } else {
        Err(bracket_err)
    }
}

/// Fermi-Dirac smeared density matrix `X f(Lambda) X^H` with `trace = p`.
pub fn fermi_density(b: &HermitianMatrix, beta: f64, p: usize) -> Result<HermitianMatrix> {
    let (lambdas, x) = b.eigen()?;
    let mu = chemical_potential(&lambdas, beta, p)?;
    Ok(weighted_projector(&x, &lambdas, |l| fermi_dirac(l, mu, beta)))
}

pub(crate) fn weighted_projector(x: &Mat<c64>, lambdas: &[f64], f: impl Fn(f64) -> f64) -> HermitianMatrix {
    let n = x.nrows();
    let weights: Vec<f64> = lambdas.iter().map(|&l| f(l)).collect();
    let scaled = Mat::from_fn(n, n, |i, k| x[(i, k)] * weights[k]);
    HermitianMatrix::hermitian_part(&(&scaled * x.adjoint()))
}

/// Divided differences of the occupation filter at the eigenvalues.
///
/// For the step filter this is the reciprocal-gap matrix `R` (entries
/// `1/|lambda_i - lambda_j|` on occupied/virtual pairs, zero elsewhere); for
/// the Fermi filter it is `(f(l_i) - f(l_j)) / (l_i - l_j)` with `f'(l_i)` on
/// the diagonal. Note the sign: the step filter's divided differences are `-R`.
pub fn divided_difference_matrix(lambdas: &[f64], p: usize, filter: FilterFunction) -> Result<Mat<f64>> {
    let n = lambdas.len();
    check_occupation(n, p)?;
    match filter {
        FilterFunction::Step => {
            check_gap(lambdas, p)?;
            let mut r = Mat::zeros(n, n);
            for i in 0..p {
                for j in p..n {
                    let v = 1.0 / (lambdas[j] - lambdas[i]);
                    r[(i, j)] = v;
                    r[(j, i)] = v;
                }
            }
            Ok(r)
        }
        FilterFunction::Fermi { beta, mu } => {
            let f: Vec<f64> = lambdas.iter().map(|&l| fermi_dirac(l, mu, beta)).collect();
            let scale = lambdas.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            Ok(Mat::from_fn(n, n, |i, j| {
                let d = lambdas[i] - lambdas[j];
                if i == j || d.abs() <= 1e-10 * scale {
                    fermi_dirac_derivative(0.5 * (lambdas[i] + lambdas[j]), mu, beta)
                } else {
                    (f[i] - f[j]) / d
                }
            }))
        }
    }
}
