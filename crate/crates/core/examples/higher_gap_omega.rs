//! Cross gaps and the index sets Omega_q for a seven-level spectrum with
//! three occupied states.

use dmscf::analysis::gap_structure;

fn main() -> dmscf::Result<()> {
    let lambdas = [0.0, 2.0, 3.0, 4.0, 5.5, 8.0, 10.0];
    let gaps = gap_structure(&lambdas, 3)?;
    for q in 0..=gaps.len() {
        let delta = gaps.delta(q + 1)?;
        println!("q = {q:>2}  delta_(q+1) = {delta:<5}  Omega = {:?}", gaps.omega_one_based(q)?);
    }
    Ok(())
}
