//! Fermi-Dirac occupations in place of the sharp step. As beta grows the
//! smeared Jacobian approaches the step one.

use dmscf::analysis::{assemble_jacobian, convergence_factor};
use dmscf::mat_ops::{chemical_potential, DensityFilter};
use dmscf::problems::random_hadamard;
use dmscf::scf::{scf_solve, ScfOptions};

fn main() -> dmscf::Result<()> {
    let problem = random_hadamard(6, 2, 3)?;
    let step = scf_solve(&problem, None, &ScfOptions::default())?;
    let c_step = convergence_factor(&assemble_jacobian(&step, &problem)?.j)?;
    println!("step      c = {c_step:.8}");

    for beta in [1.0, 10.0, 100.0, 1e3] {
        let opts = ScfOptions { filter: DensityFilter::Fermi { beta }, ..Default::default() };
        let fp = scf_solve(&problem, None, &opts)?;
        let mu = chemical_potential(&fp.lambdas, beta, fp.p())?;
        let c = convergence_factor(&assemble_jacobian(&fp, &problem)?.j)?;
        println!("beta {beta:>6}  mu = {mu:+.5}  c = {c:.8}  iterations = {}", fp.iterations());
    }
    Ok(())
}
