//! Every bound for the 3x3 illustrative problem at one coupling strength.
//!
//! ```bash
//! cargo run --example illustrative_bounds -- 0.2
//! ```

use dmscf::analysis::{analyze, AnalysisOptions};
use dmscf::problems::{build_illustrative, DEFAULT_D};

fn main() -> dmscf::Result<()> {
    let eps = std::env::args().nth(1).map_or(0.2, |s| s.parse().expect("epsilon"));
    let report = analyze(&build_illustrative(eps, DEFAULT_D), &AnalysisOptions::default())?;

    println!("epsilon = {eps}, iterations = {}", report.iterations);
    println!("c        {:.6}", report.c);
    println!("c2       {:.6}", report.c2);
    println!("c2a      {:.6}", report.c2a);
    println!("c2b      {:.6}", report.c2b);
    println!("c_naive  {:.6}", report.c_naive);
    for (q, v) in report.c_gap.iter().enumerate() {
        println!("c_gap,{q}  {v:.6}");
    }
    for (k, v) in report.c_tilde.iter().enumerate() {
        println!("c~_{}     {v:.6}", k + 1);
    }
    if let Some(rate) = report.measured_rate {
        println!("measured {rate:.6}");
    }
    Ok(())
}
