//! Seeded random matrices and problem instances for oracles and sweeps.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, real};
use crate::mat_ops::HermitianMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn symmetric_unit(g: &mut SeededRng) -> f64 {
    g.gen_range(-1.0..1.0)
}

/// Entries uniform in `[-1, 1]` (real and imaginary parts independently).
pub fn random_complex(g: &mut SeededRng, rows: usize, cols: usize) -> Mat<c64> {
    Mat::from_fn(rows, cols, |_, _| c(symmetric_unit(g), symmetric_unit(g)))
}

/// Hermitian matrix with entries uniform in `[-1, 1]`; real symmetric when
/// `complex` is false.
pub fn random_hermitian(g: &mut SeededRng, n: usize, complex: bool) -> HermitianMatrix {
    let mut a = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let z = if i == j || !complex {
                real(symmetric_unit(g))
            } else {
                c(symmetric_unit(g), symmetric_unit(g))
            };
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    HermitianMatrix::new(a).expect("constructed Hermitian")
}

/// Real symmetric matrix with entries uniform in `[-scale, scale]`.
pub fn random_symmetric_real(g: &mut SeededRng, n: usize, scale: f64) -> Mat<c64> {
    let mut a = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = real(scale * symmetric_unit(g));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Diagonal matrix of unit-modulus phases.
pub fn random_phases(g: &mut SeededRng, n: usize) -> Vec<c64> {
    (0..n)
        .map(|_| {
            let theta = g.gen_range(0.0..std::f64::consts::TAU);
            c(theta.cos(), theta.sin())
        })
        .collect()
}

pub fn random_scalar(g: &mut SeededRng) -> c64 {
    c(symmetric_unit(g), symmetric_unit(g))
}
