//! Small-coupling behaviour of the illustrative problem: c grows like
//! eps^2 while the norm bound grows like eps.

use dmscf::analysis::{analyze, AnalysisOptions};
use dmscf::problems::{build_illustrative, DEFAULT_D};

fn fit(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn main() -> dmscf::Result<()> {
    let eps: Vec<f64> = (0..12).map(|k| 1e-4 * 10f64.powf(k as f64 / 5.5)).collect();
    let (mut lc, mut lc2) = (Vec::new(), Vec::new());
    for &e in &eps {
        let r = analyze(&build_illustrative(e, DEFAULT_D), &AnalysisOptions::default())?;
        println!("{e:.3e}  c {:.4e}  c2 {:.4e}", r.c, r.c2);
        lc.push(r.c.ln());
        lc2.push(r.c2.ln());
    }
    let le: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    println!("slope c  {:.3}", fit(&le, &lc));
    println!("slope c2 {:.3}", fit(&le, &lc2));
    Ok(())
}
