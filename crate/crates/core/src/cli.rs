//! Command implementations behind the `dmscf` binary: `solve`, `analyze`,
//! `sweep` and `check`. Each returns the process exit code.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    analyze, assemble_jacobian, bound_c2, bound_cyclic, bound_gap_all, convergence_factor, cyclic_spectral_radii,
    default_fd_step, gap_structure, jacobian_fd, max_column_error, phase_invariance_residual, AnalysisOptions,
    ConvergenceReport,
};
use crate::analysis::bounds::CYCLIC_CHECK_CAP;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mat_ops::DensityFilter;
use crate::problems::{
    build_illustrative, build_laplacian, load_problem, random_hadamard, LaplacianVariant, Problem, DEFAULT_D,
};
use crate::random::{random_phases, rng};
use crate::scf::{locate_fixed_point, scf_solve, FixedPointBundle, ScfOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Illustrative,
    LaplacianComplex,
    LaplacianReal,
    RandomHadamard,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FilterKind {
    Step,
    Fermi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Eps,
    Alpha,
    N,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Eps => "eps",
            Axis::Alpha => "alpha",
            Axis::N => "n",
        }
    }
}

/// Where the problem comes from and its family parameters.
#[derive(Args, Clone, Debug, PartialEq)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "illustrative")]
    pub family: Family,
    /// Problem file (JSON); implies `--family file`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_D)]
    pub d: f64,
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    /// Occupied count; defaults to 1 (illustrative), n/2 (Laplacian) or 2 (random).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 40.0)]
    pub alpha: f64,
    /// Grid spacing of the Laplacian families; defaults to 5/(n+1).
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Default for ProblemArgs {
    fn default() -> Self {
        Self {
            family: Family::Illustrative,
            file: None,
            eps: 0.1,
            d: DEFAULT_D,
            n: 30,
            p: None,
            alpha: 40.0,
            h: None,
            seed: 0,
        }
    }
}

impl ProblemArgs {
    pub fn family(&self) -> Family {
        if self.file.is_some() {
            Family::File
        } else {
            self.family
        }
    }

    pub fn build(&self) -> Result<Problem> {
        match self.family() {
            Family::Illustrative => Ok(build_illustrative(self.eps, self.d)),
            Family::LaplacianComplex | Family::LaplacianReal => {
                let variant = if self.family() == Family::LaplacianComplex {
                    LaplacianVariant::Complex
                } else {
                    LaplacianVariant::Real
                };
                build_laplacian(self.n, self.alpha, self.p.unwrap_or(self.n / 2), variant, self.h)
            }
            Family::RandomHadamard => random_hadamard(self.n, self.p.unwrap_or(2), self.seed),
            Family::File => {
                let path = self.file.as_ref().ok_or_else(|| Error::InvalidOption("--family file needs --file".into()))?;
                load_problem(path)
            }
        }
    }

    /// Copy with the sweep axis set to `value`.
    pub fn at(&self, axis: Axis, value: f64) -> Result<ProblemArgs> {
        let mut out = self.clone();
        let family = self.family();
        match (axis, family) {
            (Axis::Eps, Family::Illustrative) => out.eps = value,
            (Axis::Alpha, Family::LaplacianComplex | Family::LaplacianReal) => out.alpha = value,
            (Axis::N, Family::LaplacianComplex | Family::LaplacianReal | Family::RandomHadamard) => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidOption(format!("n must be a positive integer, got {value}")));
                }
                out.n = value as usize;
            }
            _ => {
                return Err(Error::InvalidOption(format!(
                    "axis '{}' is not valid for family {family:?}",
                    axis.name()
                )))
            }
        }
        Ok(out)
    }
}

#[derive(Args, Clone, Debug, PartialEq)]
pub struct ScfArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub damping: f64,
    #[arg(long, value_enum, default_value = "step")]
    pub filter: FilterKind,
    /// Inverse temperature of the Fermi filter.
    #[arg(long, default_value_t = 1e3)]
    pub beta: f64,
}

impl Default for ScfArgs {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            damping: 1.0,
            filter: FilterKind::Step,
            beta: 1e3,
        }
    }
}

impl ScfArgs {
    pub fn options(&self) -> ScfOptions {
        ScfOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            filter: match self.filter {
                FilterKind::Step => DensityFilter::Step,
                FilterKind::Fermi => DensityFilter::Fermi { beta: self.beta },
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dmscf", version, about = "Local convergence analysis of density-matrix SCF iterations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run SCF and write the iteration history as CSV.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        scf: ScfArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate the fixed point and write the convergence report as JSON.
    Analyze {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        scf: ScfArgs,
        /// Largest q (and k) listed for c_gap, omega and c_tilde.
        #[arg(long)]
        q_max: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate quantities over a parameter grid, long-format CSV.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        scf: ScfArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// `v1,v2,...` or `lo:hi:count[:log]`.
        #[arg(long)]
        grid: String,
        /// Comma-separated: c, c2, c2a, c2b, naive, gap:Q, liu, tilde[:K].
        #[arg(long, default_value = "c,c2,c2a,c2b,naive,gap:1,liu,tilde:1")]
        quantities: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference oracle, phase and cyclic invariance, bound chain.
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        scf: ScfArgs,
        /// Perturb the analytic Jacobian before checking (negative control).
        #[arg(long, hide = true)]
        corrupt_jacobian: bool,
    },
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve { problem, scf, out } => {
            let problem = problem.build()?;
            Ok(cmd_solve(&problem, &scf.options(), out.as_deref())?.1)
        }
        Command::Analyze {
            problem,
            scf,
            q_max,
            out,
        } => {
            let problem = problem.build()?;
            let opts = AnalysisOptions {
                scf: scf.options(),
                q_max,
                ..Default::default()
            };
            Ok(cmd_analyze(&problem, &opts, out.as_deref())?.1)
        }
        Command::Sweep {
            problem,
            scf,
            axis,
            grid,
            quantities,
            out,
        } => {
            let spec = SweepSpec {
                problem,
                scf: scf.options(),
                axis,
                grid: parse_grid(&grid)?,
                quantities: parse_quantities(&quantities)?,
            };
            cmd_sweep(&spec, out.as_deref())
        }
        Command::Check {
            problem,
            scf,
            corrupt_jacobian,
        } => {
            let problem = problem.build()?;
            let report = cmd_check(
                &problem,
                &CheckOptions {
                    scf: scf.options(),
                    corrupt_jacobian,
                },
            )?;
            print!("{}", report.render());
            Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_history_csv(bundle: &FixedPointBundle, w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iter", "step_err_fro", "err_to_fixed_point_fro", "lambda_p", "lambda_p1", "gap"])?;
    for r in &bundle.history {
        csv.write_record([
            r.iter.to_string(),
            fmt_f64(r.step_err),
            r.err_to_fixed_point.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.lambda_p),
            fmt_f64(r.lambda_p1),
            fmt_f64(r.gap()),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Runs SCF from the default start and writes the history.
pub fn cmd_solve(problem: &Problem, opts: &ScfOptions, out: Option<&Path>) -> Result<(FixedPointBundle, i32)> {
    let bundle = scf_solve(problem, None, opts)?;
    write_history_csv(&bundle, sink(out)?)?;
    let code = if bundle.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    Ok((bundle, code))
}

/// Writes the report as JSON; exit code 2 flags a report taken at an
/// unconverged iterate.
pub fn cmd_analyze(problem: &Problem, opts: &AnalysisOptions, out: Option<&Path>) -> Result<(ConvergenceReport, i32)> {
    let report = analyze(problem, opts)?;
    let mut w = sink(out)?;
    writeln!(w, "{}", report.to_json()?)?;
    w.flush()?;
    let code = if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    Ok((report, code))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    C,
    C2,
    C2a,
    C2b,
    Naive,
    Gap(usize),
    Liu,
    Tilde(usize),
}

impl Quantity {
    pub fn label(self) -> String {
        match self {
            Quantity::C => "c".into(),
            Quantity::C2 => "c2".into(),
            Quantity::C2a => "c2a".into(),
            Quantity::C2b => "c2b".into(),
            Quantity::Naive => "c_naive".into(),
            Quantity::Gap(q) => format!("c_gap_{q}"),
            Quantity::Liu => "c_liu".into(),
            Quantity::Tilde(k) => format!("c_tilde_{k}"),
        }
    }

    fn pick(self, report: &ConvergenceReport) -> Option<f64> {
        match self {
            Quantity::C => Some(report.c),
            Quantity::C2 => Some(report.c2),
            Quantity::C2a => Some(report.c2a),
            Quantity::C2b => Some(report.c2b),
            Quantity::Naive => Some(report.c_naive),
            Quantity::Gap(q) => report.c_gap.get(q).copied(),
            Quantity::Liu => report.c_liu,
            Quantity::Tilde(k) => report.c_tilde.get(k.wrapping_sub(1)).copied(),
        }
    }
}

pub fn parse_quantities(text: &str) -> Result<Vec<Quantity>> {
    let index = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidOption(format!("bad {what} index '{s}'")))
    };
    let out = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "c" => Ok(Quantity::C),
            "c2" => Ok(Quantity::C2),
            "c2a" => Ok(Quantity::C2a),
            "c2b" => Ok(Quantity::C2b),
            "naive" | "c_naive" => Ok(Quantity::Naive),
            "liu" | "c_liu" => Ok(Quantity::Liu),
            "tilde" | "tilde2" => Ok(Quantity::Tilde(1)),
            _ => {
                if let Some(q) = s.strip_prefix("gap:") {
                    Ok(Quantity::Gap(index(q, "gap")?))
                } else if let Some(k) = s.strip_prefix("tilde:") {
                    match index(k, "tilde")? {
                        0 => Err(Error::InvalidOption("tilde index starts at 1".into())),
                        k => Ok(Quantity::Tilde(k)),
                    }
                } else {
                    Err(Error::InvalidOption(format!("unknown quantity '{s}'")))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::InvalidOption("no quantities requested".into()));
    }
    Ok(out)
}

/// `v1,v2,...` or `lo:hi:count` with an optional `:log` (or `:linear`) suffix.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::InvalidOption(format!("bad grid '{text}': {why}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("'{s}' is not a number")));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad("expected lo:hi:count[:log]"));
        }
        let (lo, hi) = (number(parts[0])?, number(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|_| bad("count must be an integer"))?;
        let log = match parts.get(3).map(|s| s.trim()) {
            None | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(bad(&format!("unknown spacing '{other}'"))),
        };
        if log && !(lo > 0.0 && hi > 0.0) {
            return Err(bad("log spacing needs positive bounds"));
        }
        (0..count)
            .map(|k| {
                let t = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
                if log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect()
    } else {
        text.split(',').filter(|s| !s.trim().is_empty()).map(number).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        return Err(bad("grid is empty"));
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub problem: ProblemArgs,
    pub scf: ScfOptions,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub quantities: Vec<Quantity>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_name: String,
    pub axis_value: f64,
    pub quantity: String,
    pub value: Option<f64>,
    pub converged: bool,
    pub measured_rate: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidOption("sweep grid is empty".into()));
        }
        for &v in &self.grid {
            self.problem.at(self.axis, v)?;
        }
        self.scf.validate()
    }

    fn q_max(&self) -> usize {
        self.quantities
            .iter()
            .map(|q| match q {
                Quantity::Gap(q) => *q,
                Quantity::Tilde(k) => *k,
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    fn point(&self, value: f64) -> Vec<SweepRow> {
        let row = |quantity: String, v: Option<f64>, converged: bool, rate: Option<f64>| SweepRow {
            axis_name: self.axis.name().into(),
            axis_value: value,
            quantity,
            value: v,
            converged,
            measured_rate: rate,
        };
        let opts = AnalysisOptions {
            scf: self.scf,
            q_max: Some(self.q_max()),
            fd_check: Some(false),
            realified: Some(false),
        };
        let report = self
            .problem
            .at(self.axis, value)
            .and_then(|args| args.build())
            .and_then(|problem| analyze(&problem, &opts));
        match report {
            Ok(report) => self
                .quantities
                .iter()
                .map(|q| row(q.label(), q.pick(&report), report.converged, report.measured_rate))
                .collect(),
            Err(_) => self.quantities.iter().map(|q| row(q.label(), None, false, None)).collect(),
        }
    }

    /// All rows, ordered by grid index then quantity, computed in parallel.
    pub fn rows(&self) -> Result<Vec<SweepRow>> {
        self.validate()?;
        let per_point: Vec<Vec<SweepRow>> = self.grid.par_iter().map(|&v| self.point(v)).collect();
        Ok(per_point.into_iter().flatten().collect())
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], w: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["axis_name", "axis_value", "quantity", "value", "converged", "measured_rate"])?;
    for r in rows {
        csv.write_record([
            r.axis_name.clone(),
            fmt_f64(r.axis_value),
            r.quantity.clone(),
            r.value.map(fmt_f64).unwrap_or_default(),
            (r.converged as u8).to_string(),
            r.measured_rate.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn cmd_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<i32> {
    let rows = spec.rows()?;
    write_sweep_csv(&rows, sink(out)?)?;
    Ok(EXIT_OK)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckOptions {
    pub scf: ScfOptions,
    /// Adds `1e-3` to one Jacobian entry before the checks.
    pub corrupt_jacobian: bool,
}

pub const FD_TOLERANCE: f64 = 1e-6;
pub const PHASE_TOLERANCE: f64 = 1e-12;
pub const CYCLIC_TOLERANCE: f64 = 1e-10;
pub const CHAIN_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub fd_error: f64,
    pub phase_residual: f64,
    /// `None` when `n` is above the dense cyclic-check limit.
    pub cyclic_spread: Option<f64>,
    pub c: f64,
    pub chain_violations: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.fd_error <= FD_TOLERANCE
            && self.phase_residual <= PHASE_TOLERANCE
            && self.cyclic_spread.is_none_or(|s| s <= CYCLIC_TOLERANCE)
            && self.chain_violations.is_empty()
    }

    pub fn render(&self) -> String {
        let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
        let mut s = String::new();
        s += &format!(
            "fd_column_error {:.3e} (<= {FD_TOLERANCE:e}) {}\n",
            self.fd_error,
            mark(self.fd_error <= FD_TOLERANCE)
        );
        s += &format!(
            "phase_residual {:.3e} (<= {PHASE_TOLERANCE:e}) {}\n",
            self.phase_residual,
            mark(self.phase_residual <= PHASE_TOLERANCE)
        );
        match self.cyclic_spread {
            Some(v) => s += &format!("cyclic_rho_spread {v:.3e} (<= {CYCLIC_TOLERANCE:e}) {}\n", mark(v <= CYCLIC_TOLERANCE)),
            None => s += &format!("cyclic_rho_spread skipped (n > {CYCLIC_CHECK_CAP})\n"),
        }
        s += &format!(
            "bound_chain_violations {} {}\n",
            self.chain_violations.len(),
            mark(self.chain_violations.is_empty())
        );
        for v in &self.chain_violations {
            s += &format!("  {v}\n");
        }
        s += &format!("c {}\n", fmt_f64(self.c));
        s += if self.passed() { "PASS\n" } else { "FAIL\n" };
        s
    }
}

pub fn cmd_check(problem: &Problem, opts: &CheckOptions) -> Result<CheckReport> {
    let located = locate_fixed_point(problem, &opts.scf)?;
    let fp = &located.bundle;
    let mut jb = assemble_jacobian(fp, problem)?;
    if opts.corrupt_jacobian {
        jb.j[(0, 0)] += linalg::c(1e-3, 0.0);
    }
    let fd = jacobian_fd(problem, &fp.p_star, default_fd_step(&fp.p_star), fp.filter)?;
    let fd_error = max_column_error(&jb.j, &fd)?;
    let phases = random_phases(&mut rng(problem.n() as u64), problem.n());
    let phase_residual = phase_invariance_residual(&jb, &phases)?;
    let cyclic_spread = if problem.n() <= CYCLIC_CHECK_CAP {
        let radii = cyclic_spectral_radii(&jb)?;
        Some(radii.iter().fold(0.0f64, |m, r| m.max((r - radii[0]).abs())))
    } else {
        None
    };

    let c = convergence_factor(&jb.j)?;
    let gaps = gap_structure(&fp.lambdas, fp.p())?;
    let (c2a, c2b) = bound_cyclic(&jb)?;
    let mut bounds = vec![("c2".to_string(), bound_c2(&jb.j)?), ("c2a".into(), c2a), ("c2b".into(), c2b)];
    for (q, v) in bound_gap_all(&jb, &gaps, gaps.len())?.into_iter().enumerate() {
        bounds.push((format!("c_gap_{q}"), v));
    }
    let chain_violations = bounds
        .into_iter()
        .filter(|(_, b)| c > b + CHAIN_SLACK)
        .map(|(name, b)| format!("c = {c:e} exceeds {name} = {b:e}"))
        .collect();
    Ok(CheckReport {
        fd_error,
        phase_residual,
        cyclic_spread,
        c,
        chain_violations,
    })
}
