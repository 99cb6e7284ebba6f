// Plain SCF oscillates on a coarse Laplacian grid. The damping ladder
// still finds the fixed point, whose Jacobian has spectral radius >= 1.

use dmscf::analysis::{assemble_jacobian, convergence_factor};
use dmscf::problems::{build_laplacian, LaplacianVariant};
use dmscf::scf::{locate_fixed_point, ScfOptions};

fn main() -> dmscf::Result<()> {
    let problem = build_laplacian(10, 40.0, 5, LaplacianVariant::Complex, Some(0.5))?;
    let located = locate_fixed_point(&problem, &ScfOptions::default())?;
    println!("plain converged: {}", located.plain.converged);
    let fp = &located.bundle;
    println!("damping {} converged: {} after {} iterations", fp.damping, fp.converged, fp.iterations());
    let c = convergence_factor(&assemble_jacobian(&located.bundle, &problem)?.j)?;
    println!("c = {c:.6}");
    Ok(())
}
