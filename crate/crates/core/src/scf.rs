//! The SCF fixed-point iteration `P_{k+1} = Psi(P_k)` on density matrices.

use faer::{c64, Mat};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat_ops::{
    chemical_potential, check_gap, fermi_dirac, occupied_projector, spectral_filter_density, weighted_projector,
    DensityFilter, HermitianMatrix,
};
use crate::problems::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScfOptions {
    /// Stop once the fixed-point residual `||Psi(P_k) - P_k||_F` is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Mixing weight `theta` in `P_{k+1} = (1 - theta) P_k + theta Psi(P_k)`; 1 is plain SCF.
    pub damping: f64,
    pub filter: DensityFilter,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            damping: 1.0,
            filter: DensityFilter::Step,
        }
    }
}

impl ScfOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidOption(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if let DensityFilter::Fermi { beta } = self.filter {
            if !(beta > 0.0) {
                return Err(Error::InvalidOption(format!("beta must be positive, got {beta}")));
            }
        }
        Ok(())
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }
}

/// One SCF iteration: `iter` produced `P_iter` from `A(P_{iter-1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||P_iter - P_{iter-1}||_F`.
    pub step_err: f64,
    /// `||P_iter - P*||_F`, filled in once the run is finished.
    pub err_to_fixed_point: Option<f64>,
    /// `lambda_p` and `lambda_{p+1}` of `A(P_{iter-1})`.
    pub lambda_p: f64,
    pub lambda_p1: f64,
}

impl IterationRecord {
    pub fn gap(&self) -> f64 {
        self.lambda_p1 - self.lambda_p
    }
}

/// `Psi(P)` together with the full spectrum of `A(P)`.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub density: HermitianMatrix,
    pub lambdas: Vec<f64>,
    pub vectors: Mat<c64>,
}

/// Applies the filter to an already diagonalized operator.
pub(crate) fn filtered_density(
    lambdas: &[f64],
    vectors: &Mat<c64>,
    p: usize,
    filter: DensityFilter,
) -> Result<HermitianMatrix> {
    match filter {
        DensityFilter::Step => {
            check_gap(lambdas, p)?;
            Ok(occupied_projector(vectors, p))
        }
        DensityFilter::Fermi { beta } => {
            let mu = chemical_potential(lambdas, beta, p)?;
            Ok(weighted_projector(vectors, lambdas, |l| fermi_dirac(l, mu, beta)))
        }
    }
}

/// `Psi(P)`: diagonalize `A0 + L(P)` and filter.
pub fn scf_step(problem: &Problem, density: &HermitianMatrix, filter: DensityFilter) -> Result<StepResult> {
    let (lambdas, vectors) = problem.operator_at(density.as_mat())?.eigen()?;
    let density = filtered_density(&lambdas, &vectors, problem.p(), filter)?;
    Ok(StepResult {
        density,
        lambdas,
        vectors,
    })
}

/// Default starting guess: the filter applied to `A0` alone.
pub fn initial_density(problem: &Problem, filter: DensityFilter) -> Result<HermitianMatrix> {
    match filter {
        DensityFilter::Step => spectral_filter_density(problem.a0(), problem.p()),
        DensityFilter::Fermi { beta } => crate::mat_ops::fermi_density(problem.a0(), beta, problem.p()),
    }
}

/// Result of an SCF run. When `converged` is false the fields describe the
/// last iterate.
#[derive(Clone, Debug)]
pub struct FixedPointBundle {
    pub p_star: HermitianMatrix,
    /// Eigenvectors of `A(P*)`, columns ordered like `lambdas`.
    pub x: Mat<c64>,
    /// Ascending eigenvalues of `A(P*)`.
    pub lambdas: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub damping: f64,
    pub filter: DensityFilter,
    /// `||Psi(P*) - P*||_F`.
    pub residual: f64,
    p: usize,
}

impl FixedPointBundle {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// `lambda_{p+1} - lambda_p` at the fixed point.
    pub fn gap(&self) -> f64 {
        self.lambdas[self.p] - self.lambdas[self.p - 1]
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn step_errors(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.step_err).collect()
    }

    pub fn errors_to_fixed_point(&self) -> Vec<f64> {
        self.history.iter().filter_map(|r| r.err_to_fixed_point).collect()
    }

    /// Empirical contraction rate of a plain (undamped) run, fitted to the
    /// step differences `||P_{k+1} - P_k||_F`.
    pub fn measured_rate(&self) -> Result<RateEstimate> {
        if self.damping != 1.0 {
            return Err(Error::InvalidOption(format!(
                "rate measurement is only meaningful for plain SCF, this run used damping {}",
                self.damping
            )));
        }
        estimate_rate(&self.step_errors())
    }
}

/// Runs the (optionally damped) SCF iteration from `initial` or, by default,
/// from the filter applied to `A0`.
///
/// Hitting `max_iter` is not an error: the bundle comes back with
/// `converged == false` and the full history.
pub fn scf_solve(problem: &Problem, initial: Option<&HermitianMatrix>, opts: &ScfOptions) -> Result<FixedPointBundle> {
    opts.validate()?;
    let mut current = match initial {
        Some(p0) => {
            if p0.n() != problem.n() {
                return Err(Error::DimensionMismatch {
                    expected: problem.n(),
                    found: p0.n(),
                });
            }
            p0.clone()
        }
        None => initial_density(problem, opts.filter)?,
    };
    let p = problem.p();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut iterates: Vec<HermitianMatrix> = Vec::new();
    let mut converged = false;

    for iter in 1..=opts.max_iter {
        let step = scf_step(problem, &current, opts.filter).map_err(|e| at_iterate(e, iter - 1))?;
        let residual = step.density.distance(&current);
        let next = if opts.damping == 1.0 {
            step.density
        } else {
            current.mix(&step.density, opts.damping)
        };
        history.push(IterationRecord {
            iter,
            step_err: next.distance(&current),
            err_to_fixed_point: None,
            lambda_p: step.lambdas[p - 1],
            lambda_p1: step.lambdas[p],
        });
        current = next;
        iterates.push(current.clone());
        if residual <= opts.tol {
            converged = true;
            break;
        }
    }

    for (record, iterate) in history.iter_mut().zip(&iterates) {
        record.err_to_fixed_point = Some(iterate.distance(&current));
    }
    let last = history.len();
    let fin = scf_step(problem, &current, opts.filter).map_err(|e| at_iterate(e, last))?;
    Ok(FixedPointBundle {
        residual: fin.density.distance(&current),
        p_star: current,
        x: fin.vectors,
        lambdas: fin.lambdas,
        history,
        converged,
        damping: opts.damping,
        filter: opts.filter,
        p,
    })
}

fn at_iterate(err: Error, iter: usize) -> Error {
    match err {
        Error::ZeroGap { .. } => Error::ZeroGapAtIterate {
            iter,
            source: Box::new(err),
        },
        other => other,
    }
}

/// Damping weights tried, in order, when plain SCF does not settle.
pub const DAMPING_LADDER: [f64; 4] = [0.5, 0.2, 0.1, 0.05];

/// A fixed point together with how it was found.
#[derive(Clone, Debug)]
pub struct LocatedFixedPoint {
    pub bundle: FixedPointBundle,
    /// The undamped run, whether or not it converged.
    pub plain: FixedPointBundle,
}

impl LocatedFixedPoint {
    pub fn plain_converged(&self) -> bool {
        self.plain.converged
    }
}

/// Plain SCF first; if it does not converge, damped runs down
/// [`DAMPING_LADDER`] (each allowed `10 * max_iter` steps) until one does.
/// Fixed points of the damped map are fixed points of `Psi`, so the analysis
/// applies to them even when plain SCF diverges there.
pub fn locate_fixed_point(problem: &Problem, opts: &ScfOptions) -> Result<LocatedFixedPoint> {
    let plain = scf_solve(problem, None, &opts.with_damping(1.0))?;
    if plain.converged {
        return Ok(LocatedFixedPoint {
            bundle: plain.clone(),
            plain,
        });
    }
    let mut last = None;
    for theta in DAMPING_LADDER {
        let damped_opts = ScfOptions {
            max_iter: opts.max_iter * 10,
            ..opts.with_damping(theta)
        };
        match scf_solve(problem, None, &damped_opts) {
            Ok(bundle) if bundle.converged => return Ok(LocatedFixedPoint { bundle, plain }),
            Ok(bundle) => last = Some(bundle),
            // A damped path can cross a degenerate iterate; try the next weight.
            Err(Error::ZeroGapAtIterate { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(LocatedFixedPoint {
        bundle: last.unwrap_or_else(|| plain.clone()),
        plain,
    })
}

/// Minimum number of samples a rate fit accepts.
pub const MIN_TAIL: usize = 6;
/// Default number of trailing samples used by [`estimate_rate`].
pub const DEFAULT_TAIL: usize = 8;
/// Samples at or below this are treated as round-off.
pub const ROUNDOFF_FLOOR: f64 = 100.0 * f64::EPSILON;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Geometric ratio `exp(slope)` of the least-squares fit of `log e_k`.
    pub rate: f64,
    /// `e_{k+1} / e_k` over the fitted window.
    pub ratios: Vec<f64>,
    /// Index of the first sample in the fitted window.
    pub start: usize,
    pub points: usize,
}

pub fn estimate_rate(errors: &[f64]) -> Result<RateEstimate> {
    estimate_rate_with(errors, DEFAULT_TAIL, ROUNDOFF_FLOOR)
}

/// Fits the last `tail` samples before the sequence first drops to `floor`.
pub fn estimate_rate_with(errors: &[f64], tail: usize, floor: f64) -> Result<RateEstimate> {
    let usable = errors
        .iter()
        .position(|&e| !(e.is_finite() && e > floor))
        .unwrap_or(errors.len());
    let needed = MIN_TAIL.max(2);
    if usable < needed {
        return Err(Error::ShortTail {
            needed,
            found: usable,
        });
    }
    let points = tail.max(needed).min(usable);
    let start = usable - points;
    let window = &errors[start..usable];

    let n = points as f64;
    let mean_k = (points - 1) as f64 / 2.0;
    let logs: Vec<f64> = window.iter().map(|e| e.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let dk = k as f64 - mean_k;
        num += dk * (l - mean_log);
        den += dk * dk;
    }
    Ok(RateEstimate {
        rate: (num / den).exp(),
        ratios: window.windows(2).map(|w| w[1] / w[0]).collect(),
        start,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::problems::{build_illustrative, random_hadamard, OperatorSpec, DEFAULT_D};
    use crate::random::{random_hermitian, rng};
    use rand::Rng;

    fn linear_problem(seed: u64) -> Problem {
        let mut g = rng(seed);
        let a0 = random_hermitian(&mut g, 5, true);
        Problem::new(a0, OperatorSpec::zero(5), 2).unwrap()
    }

    #[test]
    fn linear_problem_is_solved_in_one_step() {
        let problem = linear_problem(1);
        let exact = spectral_filter_density(problem.a0(), 2).unwrap();
        let mut g = rng(2);
        let start = spectral_filter_density(&random_hermitian(&mut g, 5, true), 2).unwrap();
        let first = scf_step(&problem, &start, DensityFilter::Step).unwrap();
        assert!(first.density.distance(&exact) < 1e-13);
        let second = scf_step(&problem, &first.density, DensityFilter::Step).unwrap();
        assert!(second.density.distance(&first.density) < 1e-13);

        let bundle = scf_solve(&problem, None, &ScfOptions::default()).unwrap();
        assert!(bundle.converged);
        assert!(bundle.iterations() <= 2);
        assert_eq!(bundle.p_star, exact);
    }

    #[test]
    fn illustrative_zero_eps_fixed_point() {
        let problem = build_illustrative(0.0, DEFAULT_D);
        let e11 = HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        let step = scf_step(&problem, &e11, DensityFilter::Step).unwrap();
        assert!(step.density.distance(&e11) < 1e-15);
        for (l, expected) in step.lambdas.iter().zip([1.0, 1.16, 10.0]) {
            assert!((l - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn illustrative_moves_and_contracts() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        let e11 = HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        let step = scf_step(&problem, &e11, DensityFilter::Step).unwrap();
        assert!(step.density.distance(&e11) > 0.0);
        let bundle = scf_solve(&problem, Some(&e11), &ScfOptions::default()).unwrap();
        assert!(bundle.converged);
        let tail = &bundle.step_errors()[bundle.iterations() - 20..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fixed_point_invariants() {
        let problem = build_illustrative(0.2, DEFAULT_D);
        let bundle = scf_solve(&problem, None, &ScfOptions::default()).unwrap();
        assert!(bundle.converged);
        assert!(bundle.residual <= 1e-12);
        let a = problem.operator_at(bundle.p_star.as_mat()).unwrap();
        let ax = a.as_mat() * &bundle.x;
        let xl = Mat::from_fn(3, 3, |i, j| bundle.x[(i, j)] * bundle.lambdas[j]);
        assert!(linalg::frobenius(&(&ax - &xl)) <= 1e-10 * linalg::frobenius(a.as_mat()));
        let gram = bundle.x.adjoint() * &bundle.x;
        assert!(linalg::frobenius(&(&gram - Mat::<c64>::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn iterates_stay_projectors() {
        let problem = random_hadamard(6, 2, 4).unwrap();
        let mut current = initial_density(&problem, DensityFilter::Step).unwrap();
        for _ in 0..15 {
            current = scf_step(&problem, &current, DensityFilter::Step).unwrap().density;
            let sq = current.as_mat() * current.as_mat();
            assert!(linalg::frobenius(&(&sq - current.as_mat())) < 1e-10);
            assert!((current.trace() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn damped_and_plain_agree() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        let opts = ScfOptions {
            max_iter: 5000,
            ..Default::default()
        };
        let plain = scf_solve(&problem, None, &opts).unwrap();
        let damped = scf_solve(&problem, None, &opts.with_damping(0.5)).unwrap();
        assert!(plain.converged && damped.converged);
        assert!(plain.p_star.distance(&damped.p_star) <= 10.0 * opts.tol);
        assert!(damped.measured_rate().is_err());
    }

    #[test]
    fn max_iter_returns_history() {
        let problem = build_illustrative(0.2, DEFAULT_D);
        let opts = ScfOptions {
            max_iter: 5,
            ..Default::default()
        };
        let bundle = scf_solve(&problem, None, &opts).unwrap();
        assert!(!bundle.converged);
        assert_eq!(bundle.iterations(), 5);
        assert!(bundle.history.iter().all(|r| r.err_to_fixed_point.is_some()));
    }

    #[test]
    fn zero_gap_reports_iterate() {
        let problem = Problem::new(HermitianMatrix::identity(3), OperatorSpec::zero(3), 1).unwrap();
        let start = HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]);
        let err = scf_solve(&problem, Some(&start), &ScfOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ZeroGapAtIterate { iter: 0, .. }), "{err}");
    }

    #[test]
    fn invalid_options() {
        let problem = build_illustrative(0.1, DEFAULT_D);
        for opts in [
            ScfOptions { tol: 0.0, ..Default::default() },
            ScfOptions { damping: 0.0, ..Default::default() },
            ScfOptions { damping: 1.5, ..Default::default() },
        ] {
            assert!(matches!(scf_solve(&problem, None, &opts), Err(Error::InvalidOption(_))));
        }
    }

    #[test]
    fn rate_of_exact_geometric_sequence() {
        let errors: Vec<f64> = (0..80).map(|k| 0.5f64.powi(k)).collect();
        let est = estimate_rate(&errors).unwrap();
        assert!((est.rate - 0.5).abs() < 1e-6);
        assert_eq!(est.points, DEFAULT_TAIL);
        assert!(errors[est.start + est.points - 1] > ROUNDOFF_FLOOR);
    }

    #[test]
    fn rate_with_small_noise() {
        let mut g = rng(8);
        let errors: Vec<f64> = (0..80).map(|k| 0.9f64.powi(k) + 1e-15 * g.gen_range(-1.0..1.0)).collect();
        let est = estimate_rate(&errors).unwrap();
        assert!((est.rate - 0.9).abs() < 1e-3, "{}", est.rate);
    }

    #[test]
    fn rate_needs_enough_points() {
        let errors = [1.0, 1e-3, 1e-6, 1e-9, 1e-12, 1e-16, 0.0];
        assert!(matches!(estimate_rate(&errors), Err(Error::ShortTail { found: 5, .. })));
    }
}
