//! Plain SCF on the complex Laplacian family: the error ratio of the
//! iterates settles at the spectral radius of the Jacobian.

use dmscf::analysis::{assemble_jacobian, convergence_factor};
use dmscf::problems::{build_laplacian, LaplacianVariant};
use dmscf::scf::{scf_solve, ScfOptions};

fn main() -> dmscf::Result<()> {
    let problem = build_laplacian(30, 40.0, 15, LaplacianVariant::Complex, None)?;
    let fp = scf_solve(&problem, None, &ScfOptions::default())?;
    assert!(fp.converged);

    for rec in &fp.history {
        println!(
            "{:>3}  step {:.3e}  gap {:.4}",
            rec.iter,
            rec.step_err,
            rec.gap()
        );
    }
    let c = convergence_factor(&assemble_jacobian(&fp, &problem)?.j)?;
    let rate = fp.measured_rate()?;
    println!("predicted {c:.6}  measured {:.6}  over {} points", rate.rate, rate.points);
    Ok(())
}
