//! Convergence factor and the ladder of upper bounds on it.

use faer::{c64, Mat};

use crate::analysis::gaps::GapStructure;
use crate::analysis::jacobian::JacobianBundle;
use crate::error::{Error, Result};
use crate::linalg::{self, real};
use crate::mat_ops::{symmetrize, SelectorT};
use crate::problems::Problem;

/// `c = rho(J_P)`.
pub fn convergence_factor(j: &Mat<c64>) -> Result<f64> {
    linalg::spectral_radius(j)
}

/// `c2 = ||J_P||_2`.
pub fn bound_c2(j: &Mat<c64>) -> Result<f64> {
    linalg::spectral_norm(j)
}

/// `||L'||_2 / delta_1`.
pub fn bound_naive(lprime: &Mat<c64>, delta1: f64) -> Result<f64> {
    Ok(naive_from_norm(linalg::spectral_norm(lprime)?, delta1))
}

fn naive_from_norm(lprime_norm: f64, delta: f64) -> f64 {
    if lprime_norm == 0.0 {
        0.0
    } else {
        lprime_norm / delta
    }
}

/// `D (X^T ⊗ X^H) L'`; its norm equals `||D (X^T ⊗ X^H) L' T||_2` since `T`
/// has orthonormal rows.
pub fn c2a_matrix(bundle: &JacobianBundle) -> Mat<c64> {
    let n = bundle.n();
    Mat::from_fn(bundle.rotated.nrows(), bundle.rotated.ncols(), |k, j| {
        bundle.rotated[(k, j)] * bundle.r[(k % n, k / n)]
    })
}

/// Column `(l, m)` of `L' T (conj(X) ⊗ X) D`: `vec(L(S(x_l x_m^H))) * R[l][m]`.
pub fn c2b_column(bundle: &JacobianBundle, l: usize, m: usize) -> Result<Vec<c64>> {
    let image = bundle.op.apply(&symmetrize(&bundle.outer(l, m)))?;
    let w = real(bundle.r[(l, m)]);
    Ok(linalg::vec(&image).into_iter().map(|z| z * w).collect())
}

/// `L' T (conj(X) ⊗ X) D` restricted to its columns with `R[l][m] != 0`.
pub fn c2b_matrix(bundle: &JacobianBundle) -> Result<Mat<c64>> {
    let n = bundle.n();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|m| (0..n).map(move |l| (l, m)))
        .filter(|&(l, m)| bundle.r[(l, m)] != 0.0)
        .collect();
    let columns = pairs
        .iter()
        .map(|&(l, m)| c2b_column(bundle, l, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_fn(n * n, columns.len(), |i, k| columns[k][i]))
}

/// `(c2a, c2b)`: spectral norms of the two cyclically reordered products.
pub fn bound_cyclic(bundle: &JacobianBundle) -> Result<(f64, f64)> {
    let a = linalg::spectral_norm(&c2a_matrix(bundle))?;
    let b = linalg::spectral_norm(&c2b_matrix(bundle)?)?;
    Ok((a, b))
}

/// `||L(S(x_l x_m^H))||_F / |lambda_l - lambda_m|` for each pair of `Omega`.
fn omega_terms(bundle: &JacobianBundle, omega: &[(usize, usize)]) -> Result<Vec<f64>> {
    omega
        .iter()
        .map(|&(l, m)| {
            let image = bundle.op.apply(&symmetrize(&bundle.outer(l, m)))?;
            Ok(linalg::frobenius(&image) / (bundle.lambdas[l] - bundle.lambdas[m]).abs())
        })
        .collect()
}

/// `c_gap,q = ||L'||_2 / delta_{q+1} + sum over Omega_q`.
pub fn bound_gap(bundle: &JacobianBundle, gaps: &GapStructure, q: usize) -> Result<f64> {
    let omega = gaps.omega(q)?;
    let tail: f64 = omega_terms(bundle, &omega)?.iter().sum();
    Ok(naive_from_norm(bundle.lprime_norm()?, gaps.delta(q + 1)?) + tail)
}

/// `c_gap,q` for `q = 0..=q_max` in one pass.
pub fn bound_gap_all(bundle: &JacobianBundle, gaps: &GapStructure, q_max: usize) -> Result<Vec<f64>> {
    let omega = gaps.omega(q_max)?;
    let terms = omega_terms(bundle, &omega)?;
    let norm = bundle.lprime_norm()?;
    let mut out = Vec::with_capacity(q_max + 1);
    let mut running = 0.0;
    for q in 0..=q_max {
        if q > 0 {
            running += terms[2 * q - 2] + terms[2 * q - 1];
        }
        out.push(naive_from_norm(norm, gaps.delta(q + 1)?) + running);
    }
    Ok(out)
}

/// `||T (conj(X) ⊗ X) D_k (X^T ⊗ X^H) L'||_2` with `D_k` keeping only the
/// entries of `D` indexed by `Omega_k`.
///
/// The truncated Jacobian is `U W` with `U` (`m x 2k`) the columns
/// `vech(x_l x_m^H) R[l][m]` and `W` (`2k x m`) the matching rows of
/// `(X^T ⊗ X^H) L'`; its norm is taken through the Gram matrix of `U`.
pub fn bound_rank_truncated(bundle: &JacobianBundle, gaps: &GapStructure, k: usize) -> Result<f64> {
    if k == 0 || k > gaps.len() {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            max: gaps.len(),
        });
    }
    let n = bundle.n();
    let omega = gaps.omega(k)?;
    let selector = SelectorT::new(n);
    let u = Mat::from_fn(selector.selected().len(), omega.len(), |row, col| {
        let (l, m) = omega[col];
        let v = selector.selected()[row];
        let (a, b) = (v % n, v / n);
        bundle.x[(a, l)] * bundle.x[(b, m)].conj() * bundle.r[(l, m)]
    });
    let w = Mat::from_fn(omega.len(), bundle.m(), |row, j| {
        let (l, m) = omega[row];
        bundle.rotated[(l + m * n, j)]
    });
    let gram = u.adjoint() * &u;
    let (values, vectors) = linalg::hermitian_eigen(&gram)?;
    let root = Mat::from_fn(values.len(), values.len(), |i, j| vectors[(j, i)].conj() * values[i].max(0.0).sqrt());
    linalg::spectral_norm(&(root * w))
}

/// `2 alpha sqrt(n) ||A0^{-1}||_2 / delta_1`, for problems carrying `alpha`.
pub fn bound_liu(problem: &Problem, delta1: f64) -> Result<f64> {
    let alpha = problem.meta().alpha.ok_or(Error::MissingMeta("alpha"))?;
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let inverse = linalg::complex_inverse(problem.a0().as_mat())?;
    let norm = linalg::spectral_norm(&inverse)?;
    Ok(2.0 * alpha.abs() * (problem.n() as f64).sqrt() * norm / delta1)
}

/// Largest `n` for which [`cyclic_spectral_radii`] forms the `n² x n²` products.
pub const CYCLIC_CHECK_CAP: usize = 12;

/// Spectral radii of `J_P` and of the three other cyclic reorderings of its
/// factors: `D (X^T⊗X^H) L' T (X̄⊗X)`, `(X^T⊗X^H) L' T (X̄⊗X) D` and
/// `L' T (X̄⊗X) D (X^T⊗X^H)`. Nonzero spectra coincide, so all four agree.
pub fn cyclic_spectral_radii(bundle: &JacobianBundle) -> Result<[f64; 4]> {
    let n = bundle.n();
    if n > CYCLIC_CHECK_CAP {
        return Err(Error::OutOfRange {
            what: "n for dense cyclic check",
            value: n,
            max: CYCLIC_CHECK_CAP,
        });
    }
    let t = SelectorT::new(n).to_dense();
    let left = linalg::kron(&linalg::conjugate(&bundle.x), &bundle.x);
    let right = linalg::kron(&linalg::transpose(&bundle.x), &linalg::adjoint(&bundle.x));
    let d = Mat::from_fn(n * n, n * n, |i, j| if i == j { real(bundle.r[(i % n, i / n)]) } else { real(0.0) });
    let lt = &bundle.lprime * &t;
    let orders = [
        bundle.j.clone(),
        &d * &right * &lt * &left,
        &right * &lt * &left * &d,
        &lt * &left * &d * &right,
    ];
    let mut out = [0.0; 4];
    for (slot, m) in out.iter_mut().zip(orders.iter()) {
        *slot = linalg::spectral_radius(m)?;
    }
    Ok(out)
}

/// Max entrywise change of `J_P` when the eigenvectors are rescaled by
/// unit-modulus phases.
pub fn phase_invariance_residual(bundle: &JacobianBundle, phases: &[c64]) -> Result<f64> {
    use crate::analysis::jacobian::{assemble_from_eigenpairs, AssemblyRoute};
    let n = bundle.n();
    if phases.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phases.len(),
        });
    }
    let x = Mat::from_fn(n, n, |i, k| bundle.x[(i, k)] * phases[k]);
    let other = assemble_from_eigenpairs(&x, &bundle.lambdas, bundle.p, &bundle.op, bundle.filter, AssemblyRoute::Auto)?;
    Ok(linalg::max_abs(&(&bundle.j - &other.j)))
}
