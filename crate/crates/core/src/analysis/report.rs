//! The full set of convergence quantities at one fixed point.

use serde::Serialize;

use crate::analysis::bounds::{
    bound_c2, bound_cyclic, bound_gap_all, bound_liu, bound_naive, bound_rank_truncated, convergence_factor,
};
use crate::analysis::gaps::gap_structure;
use crate::analysis::jacobian::{
    assemble_jacobian, default_fd_step, jacobian_fd, max_column_error, realified_jacobian, JacobianBundle,
};
use crate::error::Result;
use crate::linalg;
use crate::problems::Problem;
use crate::scf::{locate_fixed_point, FixedPointBundle, ScfOptions};

/// Default number of `Omega_q` sets, `c_gap` and `c_tilde` entries reported.
pub const DEFAULT_Q_MAX: usize = 64;
/// Largest `n` for which the finite-difference check runs by default.
pub const FD_CHECK_MAX_N: usize = 30;
/// Largest `n` for which the real-linear Jacobian is formed by default.
pub const REALIFIED_MAX_N: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnalysisOptions {
    pub scf: ScfOptions,
    /// Largest `q` (and `k`) reported; defaults to `min(p(n-p), 64)`.
    pub q_max: Option<usize>,
    /// Run the finite-difference oracle; defaults to `n <= 30`.
    pub fd_check: Option<bool>,
    /// Form the real-linear Jacobian on Hermitian matrices; defaults to `n <= 32`.
    pub realified: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub p: usize,
    pub c: f64,
    pub c2: f64,
    pub c2a: f64,
    pub c2b: f64,
    pub c_naive: f64,
    /// Indexed by `q = 0..=q_max`.
    pub c_gap: Vec<f64>,
    pub c_liu: Option<f64>,
    /// Indexed by `k - 1` for `k = 1..=q_max`.
    pub c_tilde: Vec<f64>,
    /// All cross gaps, ascending.
    pub deltas: Vec<f64>,
    /// `omega[q]` lists `Omega_q` with 1-based index pairs, `q = 0..=q_max`.
    pub omega: Vec<Vec<[usize; 2]>>,
    /// Largest column-wise relative error between the analytic and
    /// finite-difference Jacobians.
    pub fd_check: Option<f64>,
    /// Spectral radius of the real-linear differential on Hermitian matrices.
    pub c_realified: Option<f64>,
    pub converged: bool,
    /// Whether plain (undamped) SCF converged; when it did not, the fixed
    /// point was located with `damping`.
    pub plain_converged: bool,
    pub damping: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Fitted rate of the plain SCF run, when it converged.
    pub measured_rate: Option<f64>,
}

/// Locates the fixed point (damping if needed) and evaluates every quantity.
pub fn analyze(problem: &Problem, opts: &AnalysisOptions) -> Result<ConvergenceReport> {
    let located = locate_fixed_point(problem, &opts.scf)?;
    let mut report = analyze_fixed_point(problem, &located.bundle, opts)?;
    report.plain_converged = located.plain.converged;
    report.measured_rate = if located.plain.converged {
        located.plain.measured_rate().ok().map(|r| r.rate)
    } else {
        None
    };
    Ok(report)
}

/// Evaluates the report at a given (possibly unconverged) SCF result.
pub fn analyze_fixed_point(
    problem: &Problem,
    fixed_point: &FixedPointBundle,
    opts: &AnalysisOptions,
) -> Result<ConvergenceReport> {
    let jb = assemble_jacobian(fixed_point, problem)?;
    let gaps = gap_structure(&fixed_point.lambdas, fixed_point.p())?;
    let n = problem.n();
    let q_max = opts.q_max.unwrap_or(DEFAULT_Q_MAX).min(gaps.len());
    let delta1 = gaps.delta(1)?;

    let c = convergence_factor(&jb.j)?;
    let c2 = bound_c2(&jb.j)?;
    let (c2a, c2b) = bound_cyclic(&jb)?;
    let c_naive = bound_naive(&jb.lprime, delta1)?;
    let c_gap = bound_gap_all(&jb, &gaps, q_max)?;
    let c_tilde = (1..=q_max)
        .map(|k| bound_rank_truncated(&jb, &gaps, k))
        .collect::<Result<Vec<_>>>()?;
    let c_liu = match problem.meta().alpha {
        Some(_) => Some(bound_liu(problem, delta1)?),
        None => None,
    };
    let omega = (0..=q_max)
        .map(|q| gaps.omega_one_based(q))
        .collect::<Result<Vec<_>>>()?;
    let fd_check = if opts.fd_check.unwrap_or(n <= FD_CHECK_MAX_N) {
        let fd = jacobian_fd(problem, &fixed_point.p_star, default_fd_step(&fixed_point.p_star), fixed_point.filter)?;
        Some(max_column_error(&jb.j, &fd)?)
    } else {
        None
    };
    let c_realified = if opts.realified.unwrap_or(n <= REALIFIED_MAX_N) {
        Some(realified_radius(&jb)?)
    } else {
        None
    };

    Ok(ConvergenceReport {
        n,
        p: problem.p(),
        c,
        c2,
        c2a,
        c2b,
        c_naive,
        c_gap,
        c_liu,
        c_tilde,
        deltas: gaps.deltas(),
        omega,
        fd_check,
        c_realified,
        converged: fixed_point.converged,
        plain_converged: fixed_point.converged && fixed_point.damping == 1.0,
        damping: fixed_point.damping,
        iterations: fixed_point.iterations(),
        residual: fixed_point.residual,
        measured_rate: None,
    })
}

/// `rho` of the real-linear differential of `Psi` on Hermitian matrices.
pub fn realified_radius(jb: &JacobianBundle) -> Result<f64> {
    linalg::spectral_radius(&linalg::to_complex(&realified_jacobian(jb)?))
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
