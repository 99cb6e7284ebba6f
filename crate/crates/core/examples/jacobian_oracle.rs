//! Analytic Jacobian against central finite differences of the SCF map,
//! column by column.

use dmscf::analysis::{assemble_jacobian, column_errors, default_fd_step, jacobian_fd};
use dmscf::mat_ops::DensityFilter;
use dmscf::problems::{build_illustrative, DEFAULT_D};
use dmscf::scf::{scf_solve, ScfOptions};

fn main() -> dmscf::Result<()> {
    let problem = build_illustrative(0.1, DEFAULT_D);
    let fp = scf_solve(&problem, None, &ScfOptions::default())?;
    let jb = assemble_jacobian(&fp, &problem)?;
    let step = default_fd_step(&fp.p_star);
    let fd = jacobian_fd(&problem, &fp.p_star, step, DensityFilter::Step)?;

    println!("step {step:.2e}");
    for (j, err) in column_errors(&jb.j, &fd)?.iter().enumerate() {
        println!("column {j}: {err:.3e}");
    }
    Ok(())
}
