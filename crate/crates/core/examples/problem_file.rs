//! Round trip through the JSON problem format, then analyse the reloaded
//! problem. The written file can be passed to `dmscf --file`.

use dmscf::analysis::{analyze, AnalysisOptions};
use dmscf::problems::{load_problem, random_hadamard, save_problem};

fn main() -> dmscf::Result<()> {
    let path = std::env::temp_dir().join("dmscf_problem.json");
    let problem = random_hadamard(5, 2, 11)?;
    save_problem(&problem, &path)?;
    let reloaded = load_problem(&path)?;
    assert_eq!(reloaded, problem);

    let report = analyze(&reloaded, &AnalysisOptions::default())?;
    println!("wrote {}", path.display());
    println!("{}", report.to_json()?);
    Ok(())
}
