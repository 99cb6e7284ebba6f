//! The SCF Jacobian `J_P = -T (conj(X) ⊗ X) D (X^T ⊗ X^H) L'` at a fixed
//! point, and its finite-difference counterpart.

use std::sync::OnceLock;

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, real};
use crate::mat_ops::{
    chemical_potential, divided_difference_matrix, half_len, vech_index, vech_inv_unit, vech_pairs, DensityFilter,
    FilterFunction, HermitianMatrix, SelectorT,
};
use crate::problems::{assemble_lprime, OperatorSpec, Problem};
use crate::scf::{scf_step, FixedPointBundle};

/// Largest `n` for which the Kronecker factors are formed explicitly.
pub const DEFAULT_KRONECKER_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AssemblyRoute {
    /// Kronecker products up to [`DEFAULT_KRONECKER_CAP`], structured above.
    #[default]
    Auto,
    Kronecker,
    /// Column by column: `-vech(X (R ∘ (X^H L(E_j) X)) X^H)`.
    Structured,
}

/// Everything needed to evaluate the bound ladder at one fixed point.
#[derive(Debug)]
pub struct JacobianBundle {
    /// `m x m`, `m = n(n+1)/2`.
    pub j: Mat<c64>,
    /// `R` (step filter) or the Fermi divided differences; `D = diag(vec(r))`.
    pub r: Mat<f64>,
    /// `-1` for the step filter (`J = -T .. D ..`), `+1` for the Fermi filter.
    pub sign: f64,
    pub filter: FilterFunction,
    /// `n² x m`.
    pub lprime: Mat<c64>,
    /// `(X^T ⊗ X^H) L'`, column `j` is `vec(X^H L(E_j) X)`.
    pub rotated: Mat<c64>,
    pub x: Mat<c64>,
    pub lambdas: Vec<f64>,
    pub p: usize,
    pub op: OperatorSpec,
    lprime_norm: OnceLock<f64>,
}

impl JacobianBundle {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        half_len(self.n())
    }

    /// Diagonal of `D`, i.e. `vec(R)`.
    pub fn d_diag(&self) -> Vec<f64> {
        let n = self.n();
        (0..n * n).map(|k| self.r[(k % n, k / n)]).collect()
    }

    /// `||D||_2`.
    pub fn d_norm(&self) -> f64 {
        self.d_diag().iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// `||L'||_2`, computed once.
    pub fn lprime_norm(&self) -> Result<f64> {
        if let Some(v) = self.lprime_norm.get() {
            return Ok(*v);
        }
        let v = linalg::spectral_norm(&self.lprime)?;
        Ok(*self.lprime_norm.get_or_init(|| v))
    }

    /// `x_l x_m^H`.
    pub fn outer(&self, l: usize, m: usize) -> Mat<c64> {
        let n = self.n();
        Mat::from_fn(n, n, |i, k| self.x[(i, l)] * self.x[(k, m)].conj())
    }
}

/// Jacobian at a converged SCF result, using the filter the run used.
pub fn assemble_jacobian(fixed_point: &FixedPointBundle, problem: &Problem) -> Result<JacobianBundle> {
    let filter = match fixed_point.filter {
        DensityFilter::Step => FilterFunction::Step,
        DensityFilter::Fermi { beta } => FilterFunction::Fermi {
            beta,
            mu: chemical_potential(&fixed_point.lambdas, beta, fixed_point.p())?,
        },
    };
    assemble_from_eigenpairs(
        &fixed_point.x,
        &fixed_point.lambdas,
        fixed_point.p(),
        problem.op(),
        filter,
        AssemblyRoute::Auto,
    )
}

/// Fermi-Dirac Jacobian `+T (conj(X) ⊗ X) D_f (X^T ⊗ X^H) L'` at the
/// eigenpairs of a fixed point.
pub fn fermi_jacobian(fixed_point: &FixedPointBundle, op: &OperatorSpec, beta: f64, mu: f64) -> Result<JacobianBundle> {
    assemble_from_eigenpairs(
        &fixed_point.x,
        &fixed_point.lambdas,
        fixed_point.p(),
        op,
        FilterFunction::Fermi { beta, mu },
        AssemblyRoute::Auto,
    )
}

/// Jacobian from explicit eigenpairs (columns of `x` matching `lambdas`).
pub fn assemble_from_eigenpairs(
    x: &Mat<c64>,
    lambdas: &[f64],
    p: usize,
    op: &OperatorSpec,
    filter: FilterFunction,
    route: AssemblyRoute,
) -> Result<JacobianBundle> {
    let n = x.nrows();
    if op.dim() != n || x.ncols() != n || lambdas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: op.dim(),
        });
    }
    let r = divided_difference_matrix(lambdas, p, filter)?;
    let sign = match filter {
        FilterFunction::Step => -1.0,
        FilterFunction::Fermi { .. } => 1.0,
    };
    let lprime = assemble_lprime(op)?;
    let kronecker = match route {
        AssemblyRoute::Auto => n <= DEFAULT_KRONECKER_CAP,
        AssemblyRoute::Kronecker => true,
        AssemblyRoute::Structured => false,
    };
    let (rotated, j) = if kronecker {
        kronecker_product(x, &r, sign, &lprime)
    } else {
        structured_product(x, &r, sign, op)?
    };
    Ok(JacobianBundle {
        j,
        r,
        sign,
        filter,
        lprime,
        rotated,
        x: x.clone(),
        lambdas: lambdas.to_vec(),
        p,
        op: op.clone(),
        lprime_norm: OnceLock::new(),
    })
}

fn scale_rows_by_r(rotated: &Mat<c64>, r: &Mat<f64>) -> Mat<c64> {
    let n = r.nrows();
    Mat::from_fn(rotated.nrows(), rotated.ncols(), |k, j| rotated[(k, j)] * r[(k % n, k / n)])
}

fn kronecker_product(x: &Mat<c64>, r: &Mat<f64>, sign: f64, lprime: &Mat<c64>) -> (Mat<c64>, Mat<c64>) {
    let n = x.nrows();
    let left = linalg::kron(&linalg::conjugate(x), x);
    let right = linalg::kron(&linalg::transpose(x), &linalg::adjoint(x));
    let rotated = &right * lprime;
    let full = &left * scale_rows_by_r(&rotated, r);
    let j = SelectorT::new(n).select_rows(&full);
    (rotated, linalg::scale(&j, real(sign)))
}

fn structured_product(x: &Mat<c64>, r: &Mat<f64>, sign: f64, op: &OperatorSpec) -> Result<(Mat<c64>, Mat<c64>)> {
    let n = x.nrows();
    let m = half_len(n);
    let xh = linalg::adjoint(x);
    let columns: Vec<(Vec<c64>, Vec<c64>)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let y = &xh * op.apply(&vech_inv_unit(n, k))? * x;
            let weighted = Mat::from_fn(n, n, |a, b| y[(a, b)] * r[(a, b)]);
            let back = x * &weighted * &xh;
            let col = vech_pairs(n).map(|(a, b)| back[(a, b)] * sign).collect();
            Ok((linalg::vec(&y), col))
        })
        .collect::<Result<_>>()?;
    let rotated = Mat::from_fn(n * n, m, |i, k| columns[k].0[i]);
    let j = Mat::from_fn(m, m, |i, k| columns[k].1[i]);
    Ok((rotated, j))
}

/// Default central-difference step `1e-5 (1 + ||P*||_F)`.
pub fn default_fd_step(p_star: &HermitianMatrix) -> f64 {
    1e-5 * (1.0 + p_star.frobenius())
}

/// Column `j` is the central difference of `vech(Psi(.))` at `P*` along the
/// real symmetric direction `vech_inv(e_j)`.
pub fn jacobian_fd(problem: &Problem, p_star: &HermitianMatrix, step: f64, filter: DensityFilter) -> Result<Mat<c64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidOption(format!("finite-difference step must be positive, got {step}")));
    }
    let n = problem.n();
    let m = half_len(n);
    let columns: Vec<Vec<c64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let e = vech_inv_unit(n, k);
            let psi = |t: f64| -> Result<HermitianMatrix> {
                let shifted = HermitianMatrix::new(p_star.as_mat() + linalg::scale(&e, real(t)))?;
                scf_step(problem, &shifted, filter)
                    .map(|s| s.density)
                    .map_err(|err| match err {
                        Error::ZeroGap { .. } => Error::FiniteDifferenceZeroGap { direction: k },
                        other => other,
                    })
            };
            let plus = psi(step)?;
            let minus = psi(-step)?;
            Ok(vech_pairs(n)
                .map(|(a, b)| (plus.get(a, b) - minus.get(a, b)) / (2.0 * step))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Mat::from_fn(m, m, |i, k| columns[k][i]))
}

/// Columns whose analytic norm is below this are compared in absolute terms.
pub const FD_ZERO_COLUMN: f64 = 1e-8;

/// Per-column `||fd_j - J_j|| / ||J_j||`, absolute for (numerically) zero columns.
pub fn column_errors(analytic: &Mat<c64>, fd: &Mat<c64>) -> Result<Vec<f64>> {
    if analytic.nrows() != fd.nrows() || analytic.ncols() != fd.ncols() {
        return Err(Error::DimensionMismatch {
            expected: analytic.ncols(),
            found: fd.ncols(),
        });
    }
    Ok((0..analytic.ncols())
        .map(|k| {
            let (mut diff, mut norm) = (0.0, 0.0);
            for i in 0..analytic.nrows() {
                diff += (fd[(i, k)] - analytic[(i, k)]).norm_sqr();
                norm += analytic[(i, k)].norm_sqr();
            }
            let norm = norm.sqrt();
            diff.sqrt() / if norm > FD_ZERO_COLUMN { norm } else { 1.0 }
        })
        .collect())
}

pub fn max_column_error(analytic: &Mat<c64>, fd: &Mat<c64>) -> Result<f64> {
    Ok(column_errors(analytic, fd)?.into_iter().fold(0.0, f64::max))
}

/// Real coordinates of a Hermitian matrix: `Re vech(H)` followed by the
/// imaginary parts of the strictly lower entries, `n²` numbers in total.
pub fn hermitian_coordinates(h: &Mat<c64>) -> Vec<f64> {
    let n = h.nrows();
    let mut out: Vec<f64> = vech_pairs(n).map(|(i, j)| h[(i, j)].re).collect();
    out.extend(vech_pairs(n).filter(|(i, j)| i != j).map(|(i, j)| h[(i, j)].im));
    out
}

/// Hermitian direction for coordinate `k` of [`hermitian_coordinates`].
pub fn hermitian_direction(n: usize, k: usize) -> Mat<c64> {
    let m = half_len(n);
    if k < m {
        return vech_inv_unit(n, k);
    }
    let (i, j) = vech_pairs(n).filter(|(i, j)| i != j).nth(k - m).expect("coordinate index below n²");
    let mut e = Mat::zeros(n, n);
    e[(i, j)] = c64::new(0.0, 1.0);
    e[(j, i)] = c64::new(0.0, -1.0);
    e
}

/// Real-linear differential of `Psi` on Hermitian matrices, `n² x n²` in the
/// coordinates of [`hermitian_coordinates`].
pub fn realified_jacobian(bundle: &JacobianBundle) -> Result<Mat<f64>> {
    let n = bundle.n();
    let xh = linalg::adjoint(&bundle.x);
    let columns: Vec<Vec<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let y = &xh * bundle.op.apply(&hermitian_direction(n, k))? * &bundle.x;
            let weighted = Mat::from_fn(n, n, |a, b| y[(a, b)] * bundle.r[(a, b)] * bundle.sign);
            Ok(hermitian_coordinates(&(&bundle.x * &weighted * &xh)))
        })
        .collect::<Result<_>>()?;
    Ok(Mat::from_fn(n * n, n * n, |i, k| columns[k][i]))
}

/// Finite-difference counterpart of [`realified_jacobian`].
pub fn realified_jacobian_fd(
    problem: &Problem,
    p_star: &HermitianMatrix,
    step: f64,
    filter: DensityFilter,
) -> Result<Mat<f64>> {
    let n = problem.n();
    let columns: Vec<Vec<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let e = hermitian_direction(n, k);
            let psi = |t: f64| -> Result<Vec<f64>> {
                let shifted = HermitianMatrix::new(p_star.as_mat() + linalg::scale(&e, real(t)))?;
                let image = scf_step(problem, &shifted, filter).map_err(|err| match err {
                    Error::ZeroGap { .. } => Error::FiniteDifferenceZeroGap { direction: k },
                    other => other,
                })?;
                Ok(hermitian_coordinates(image.density.as_mat()))
            };
            let (plus, minus) = (psi(step)?, psi(-step)?);
            Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * step)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(Mat::from_fn(n * n, n * n, |i, k| columns[k][i]))
}

/// Position of `(i, j)` (either triangle) in `vech`, for callers indexing `J`.
pub fn vech_position(n: usize, i: usize, j: usize) -> usize {
    if i >= j {
        vech_index(n, i, j)
    } else {
        vech_index(n, j, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_illustrative, random_hadamard, DEFAULT_D};
    use crate::random::{random_phases, rng};
    use crate::scf::{scf_solve, ScfOptions};

    fn solved(problem: &Problem) -> FixedPointBundle {
        let fp = scf_solve(problem, None, &ScfOptions { max_iter: 5000, ..Default::default() }).unwrap();
        assert!(fp.converged);
        fp
    }

    #[test]
    fn zero_operator_gives_zero_jacobian() {
        let problem = Problem::new(HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 3.0]), OperatorSpec::zero(3), 1)
            .unwrap();
        let fp = solved(&problem);
        let jb = assemble_jacobian(&fp, &problem).unwrap();
        assert_eq!(linalg::max_abs(&jb.j), 0.0);
        let fd = jacobian_fd(&problem, &fp.p_star, 1e-5, DensityFilter::Step).unwrap();
        assert!(linalg::max_abs(&fd) < 1e-10);
    }

    #[test]
    fn routes_agree() {
        let problem = random_hadamard(7, 3, 11).unwrap();
        let fp = solved(&problem);
        let a = assemble_from_eigenpairs(&fp.x, &fp.lambdas, 3, problem.op(), FilterFunction::Step, AssemblyRoute::Kronecker)
            .unwrap();
        let b = assemble_from_eigenpairs(&fp.x, &fp.lambdas, 3, problem.op(), FilterFunction::Step, AssemblyRoute::Structured)
            .unwrap();
        assert!(linalg::max_abs(&(&a.j - &b.j)) < 1e-12);
        assert!(linalg::max_abs(&(&a.rotated - &b.rotated)) < 1e-12);
    }

    #[test]
    fn fd_matches_analytic_on_illustrative() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        let fp = solved(&problem);
        let jb = assemble_jacobian(&fp, &problem).unwrap();
        let fd = jacobian_fd(&problem, &fp.p_star, default_fd_step(&fp.p_star), DensityFilter::Step).unwrap();
        let err = max_column_error(&jb.j, &fd).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn fd_matches_analytic_on_random_hadamard() {
        let problem = random_hadamard(6, 2, 3).unwrap();
        let fp = solved(&problem);
        let jb = assemble_jacobian(&fp, &problem).unwrap();
        let fd = jacobian_fd(&problem, &fp.p_star, default_fd_step(&fp.p_star), DensityFilter::Step).unwrap();
        let err = max_column_error(&jb.j, &fd).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn d_norm_is_inverse_gap() {
        let problem = random_hadamard(5, 2, 5).unwrap();
        let fp = solved(&problem);
        let jb = assemble_jacobian(&fp, &problem).unwrap();
        assert!((jb.d_norm() * fp.gap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_invariance() {
        let problem = random_hadamard(6, 3, 2).unwrap();
        let fp = solved(&problem);
        let base = assemble_jacobian(&fp, &problem).unwrap();
        let phases = random_phases(&mut rng(3), 6);
        let x = Mat::from_fn(6, 6, |i, k| fp.x[(i, k)] * phases[k]);
        let rotated =
            assemble_from_eigenpairs(&x, &fp.lambdas, 3, problem.op(), FilterFunction::Step, AssemblyRoute::Auto).unwrap();
        assert!(linalg::max_abs(&(&base.j - &rotated.j)) < 1e-12);
    }

    #[test]
    fn realified_analytic_matches_fd() {
        let problem = random_hadamard(5, 2, 10).unwrap();
        let fp = solved(&problem);
        let jb = assemble_jacobian(&fp, &problem).unwrap();
        let analytic = linalg::to_complex(&realified_jacobian(&jb).unwrap());
        let fd = linalg::to_complex(
            &realified_jacobian_fd(&problem, &fp.p_star, default_fd_step(&fp.p_star), DensityFilter::Step).unwrap(),
        );
        let err = max_column_error(&analytic, &fd).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn hermitian_coordinates_round_trip() {
        let n = 4;
        for k in 0..n * n {
            let coords = hermitian_coordinates(&hermitian_direction(n, k));
            for (i, v) in coords.iter().enumerate() {
                assert_eq!(*v, if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn fermi_approaches_step_as_beta_grows() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        let fp = solved(&problem);
        let step = assemble_jacobian(&fp, &problem).unwrap();
        let mut last_d = f64::INFINITY;
        let mut last_j = f64::INFINITY;
        for beta in [10.0, 1e2, 1e3] {
            let mu = chemical_potential(&fp.lambdas, beta, 1).unwrap();
            let fermi = fermi_jacobian(&fp, problem.op(), beta, mu).unwrap();
            // Divided differences of the smeared filter tend to -R; diagonal f' terms vanish.
            let d_err = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (fermi.r[(i, j)] + step.r[(i, j)]).abs())
                .fold(0.0, f64::max);
            let j_err = linalg::max_abs(&(&fermi.j - &step.j));
            assert!(d_err < last_d && j_err < last_j, "beta {beta}: {d_err} {j_err}");
            last_d = d_err;
            last_j = j_err;
        }
        assert!(last_d < 1e-10);
    }

    #[test]
    fn fermi_fd_matches_analytic_at_fixed_mu() {
        // The divided-difference formula differentiates X f(Lambda) X^H with
        // the chemical potential held fixed.
        let problem = random_hadamard(5, 2, 10).unwrap();
        let beta = 5.0;
        let opts = ScfOptions {
            filter: DensityFilter::Fermi { beta },
            max_iter: 5000,
            ..Default::default()
        };
        let fp = scf_solve(&problem, None, &opts).unwrap();
        assert!(fp.converged);
        let mu = chemical_potential(&fp.lambdas, beta, 2).unwrap();
        let jb = fermi_jacobian(&fp, problem.op(), beta, mu).unwrap();
        let n = 5;
        let t = default_fd_step(&fp.p_star);
        let psi = |p: &Mat<c64>| {
            let (l, x) = problem.operator_at(p).unwrap().eigen().unwrap();
            crate::mat_ops::weighted_projector(&x, &l, |v| crate::mat_ops::fermi_dirac(v, mu, beta))
        };
        let fd = Mat::from_fn(half_len(n), half_len(n), |i, k| {
            let e = linalg::scale(&vech_inv_unit(n, k), real(t));
            let plus = psi(&(fp.p_star.as_mat() + &e));
            let minus = psi(&(fp.p_star.as_mat() - &e));
            let (a, b) = vech_pairs(n).nth(i).unwrap();
            (plus.get(a, b) - minus.get(a, b)) / (2.0 * t)
        });
        let err = max_column_error(&jb.j, &fd).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn flat_filter_gives_zero_jacobian() {
        // With all eigenvalues equal to the chemical potential the smeared
        // occupations are constant, so every divided difference is f'(mu).
        // A tiny beta makes the filter nearly flat and the Jacobian vanish.
        let problem = build_illustrative(0.1, DEFAULT_D);
        let fp = solved(&problem);
        let beta = 1e-9;
        let mu = chemical_potential(&fp.lambdas, beta, 1).unwrap();
        let fermi = fermi_jacobian(&fp, problem.op(), beta, mu).unwrap();
        assert!(linalg::max_abs(&fermi.j) < 1e-7);
    }

    #[test]
    fn fd_rejects_bad_step() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        let p = HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        assert!(jacobian_fd(&problem, &p, 0.0, DensityFilter::Step).is_err());
    }
}
