//! Problem definitions `A(P) = A0 + L(P)`: the linear operator `L`, its
//! half-vectorized matrix `L'`, the benchmark families and the JSON problem file.

use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, real};
use crate::mat_ops::{check_occupation, half_len, vech_inv_unit, HermitianMatrix};
use crate::random;

/// The complex-linear map `L` in one of three representations.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec {
    /// `L(P) = mask ∘ P`.
    HadamardMask { mask: Mat<c64> },
    /// `L(P) = alpha * Diag(coeff * diag(P))`; depends only on the diagonal of `P`.
    DiagonalMap { coeff: Mat<f64>, alpha: f64 },
    /// `vec(L(P)) = matrix * vec(P)` with an `n² x n²` matrix.
    GeneralVec { matrix: Mat<c64> },
}

impl OperatorSpec {
    pub fn zero(n: usize) -> Self {
        OperatorSpec::HadamardMask { mask: Mat::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::HadamardMask { mask } => mask.nrows(),
            OperatorSpec::DiagonalMap { coeff, .. } => coeff.nrows(),
            OperatorSpec::GeneralVec { matrix } => (matrix.nrows() as f64).sqrt().round() as usize,
        }
    }

    fn validate(&self) -> Result<usize> {
        let (rows, cols, n) = match self {
            OperatorSpec::HadamardMask { mask } => (mask.nrows(), mask.ncols(), mask.nrows()),
            OperatorSpec::DiagonalMap { coeff, .. } => (coeff.nrows(), coeff.ncols(), coeff.nrows()),
            OperatorSpec::GeneralVec { matrix } => {
                let n = self.dim();
                if n * n != matrix.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: n * n,
                        found: matrix.nrows(),
                    });
                }
                (matrix.nrows(), matrix.ncols(), n)
            }
        };
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        Ok(n)
    }

    /// `L(P)` for an arbitrary square `P` of matching size.
    pub fn apply(&self, p: &Mat<c64>) -> Result<Mat<c64>> {
        let n = self.dim();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.nrows().max(p.ncols()),
            });
        }
        Ok(match self {
            OperatorSpec::HadamardMask { mask } => Mat::from_fn(n, n, |i, j| mask[(i, j)] * p[(i, j)]),
            OperatorSpec::DiagonalMap { coeff, alpha } => {
                let mut out = Mat::zeros(n, n);
                for i in 0..n {
                    let s: c64 = (0..n).map(|k| p[(k, k)] * coeff[(i, k)]).sum();
                    out[(i, i)] = s * *alpha;
                }
                out
            }
            OperatorSpec::GeneralVec { matrix } => {
                let v = matrix * Mat::from_fn(n * n, 1, |k, _| p[(k % n, k / n)]);
                Mat::from_fn(n, n, |i, j| v[(i + j * n, 0)])
            }
        })
    }

    /// Dense `n² x n²` representation of the same map.
    pub fn to_general(&self) -> Result<OperatorSpec> {
        let n = self.dim();
        let mut matrix = Mat::zeros(n * n, n * n);
        for col in 0..n * n {
            let mut e = Mat::<c64>::zeros(n, n);
            e[(col % n, col / n)] = real(1.0);
            let image = self.apply(&e)?;
            for (row, z) in linalg::vec(&image).into_iter().enumerate() {
                matrix[(row, col)] = z;
            }
        }
        Ok(OperatorSpec::GeneralVec { matrix })
    }
}

/// `L'`: the `n² x m` matrix whose `k`-th column is `vec(L(vech_inv(e_k)))`.
pub fn assemble_lprime(op: &OperatorSpec) -> Result<Mat<c64>> {
    let n = op.dim();
    let m = half_len(n);
    let mut lp = Mat::zeros(n * n, m);
    for k in 0..m {
        let image = op.apply(&vech_inv_unit(n, k))?;
        for j in 0..n {
            for i in 0..n {
                lp[(i + j * n, k)] = image[(i, j)];
            }
        }
    }
    Ok(lp)
}

/// Optional family parameters carried along with a problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `A(X1 X1^H) X1 = X1 Lambda1` with `A(P) = A0 + L(P)` and `p` occupied vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    a0: HermitianMatrix,
    op: OperatorSpec,
    p: usize,
    meta: ProblemMeta,
}

impl Problem {
    pub fn new(a0: HermitianMatrix, op: OperatorSpec, p: usize) -> Result<Self> {
        let n = a0.n();
        let op_n = op.validate()?;
        if op_n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: op_n,
            });
        }
        check_occupation(n, p)?;
        Ok(Self {
            a0,
            op,
            p,
            meta: ProblemMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ProblemMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.a0.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a0(&self) -> &HermitianMatrix {
        &self.a0
    }

    pub fn op(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn meta(&self) -> &ProblemMeta {
        &self.meta
    }

    /// `A(P) = A0 + L(P)`, checked to be Hermitian.
    pub fn operator_at(&self, p: &Mat<c64>) -> Result<HermitianMatrix> {
        let lp = self.op.apply(p)?;
        HermitianMatrix::new(self.a0.as_mat() + &lp)
    }

    pub fn lprime(&self) -> Result<Mat<c64>> {
        assemble_lprime(&self.op)
    }
}

pub const DEFAULT_D: f64 = 0.16;

/// The 3x3 example with a nonlinearity acting only on the diagonal:
/// `A0 = [[0, eps, 0], [eps, 1 + d, eps], [0, eps, 10]]`, `L(P) = diag(1, 1, 100) ∘ P`, `p = 1`.
pub fn build_illustrative(epsilon: f64, d: f64) -> Problem {
    let a0 = [[0.0, epsilon, 0.0], [epsilon, 1.0 + d, epsilon], [0.0, epsilon, 10.0]];
    let a0 = HermitianMatrix::from_fn(3, |i, j| real(a0[i][j])).expect("symmetric");
    let weights = [1.0, 1.0, 100.0];
    let mask = Mat::from_fn(3, 3, |i, j| if i == j { real(weights[i]) } else { real(0.0) });
    Problem::new(a0, OperatorSpec::HadamardMask { mask }, 1)
        .expect("valid illustrative problem")
        .with_meta(ProblemMeta {
            family: Some("illustrative".into()),
            epsilon: Some(epsilon),
            d: Some(d),
            ..Default::default()
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianVariant {
    /// Diffusion plus a central-difference convection term `i d/dx`.
    Complex,
    /// Plain second-difference operator.
    Real,
}

/// Length of the discretized interval; the default grid spacing is
/// `DEFAULT_DOMAIN_LENGTH / (n + 1)` with homogeneous Dirichlet ends.
pub const DEFAULT_DOMAIN_LENGTH: f64 = 5.0;

pub fn default_grid_spacing(n: usize) -> f64 {
    DEFAULT_DOMAIN_LENGTH / (n as f64 + 1.0)
}

/// Tridiagonal 1D operator with the charge-density style nonlinearity
/// `L(P) = alpha * Diag(Re(A0)^{-1} diag(P))`.
pub fn build_laplacian(
    n: usize,
    alpha: f64,
    p: usize,
    variant: LaplacianVariant,
    h: Option<f64>,
) -> Result<Problem> {
    if n < 2 {
        return Err(Error::InvalidOption(format!("laplacian needs n >= 2, got {n}")));
    }
    let h = h.unwrap_or_else(|| default_grid_spacing(n));
    if !(h > 0.0) {
        return Err(Error::InvalidOption(format!("grid spacing must be positive, got {h}")));
    }
    let diag = 2.0 / (h * h);
    let off = -1.0 / (h * h);
    let convection = match variant {
        LaplacianVariant::Complex => 1.0 / (2.0 * h),
        LaplacianVariant::Real => 0.0,
    };
    let a0 = HermitianMatrix::from_fn(n, |i, j| {
        if i == j {
            real(diag)
        } else if j == i + 1 {
            c(off, convection)
        } else if i == j + 1 {
            c(off, -convection)
        } else {
            real(0.0)
        }
    })?;
    let re_a0 = Mat::from_fn(n, n, |i, j| a0.get(i, j).re);
    let coeff = linalg::real_inverse(&re_a0)?;
    let family = match variant {
        LaplacianVariant::Complex => "laplacian_complex",
        LaplacianVariant::Real => "laplacian_real",
    };
    Ok(Problem::new(a0, OperatorSpec::DiagonalMap { coeff, alpha }, p)?.with_meta(ProblemMeta {
        family: Some(family.into()),
        alpha: Some(alpha),
        h: Some(h),
        ..Default::default()
    }))
}

/// Seeded Hadamard-mask problem: a well-separated complex Hermitian `A0`
/// (diagonal `0, 1, .., n-1` plus a perturbation of size `0.3`) and a real
/// symmetric mask with entries in `[-0.5, 0.5]`.
pub fn random_hadamard(n: usize, p: usize, seed: u64) -> Result<Problem> {
    let mut g = random::rng(seed);
    let noise = random::random_hermitian(&mut g, n, true);
    let a0 = HermitianMatrix::from_fn(n, |i, j| {
        let base = if i == j { real(i as f64) } else { real(0.0) };
        base + noise.get(i, j) * 0.3
    })?;
    let mask = random::random_symmetric_real(&mut g, n, 0.5);
    Ok(Problem::new(a0, OperatorSpec::HadamardMask { mask }, p)?.with_meta(ProblemMeta {
        family: Some("random_hadamard".into()),
        seed: Some(seed),
        ..Default::default()
    }))
}

type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    p: usize,
    #[serde(rename = "A0")]
    a0: ComplexRows,
    operator: serde_json::Value,
    #[serde(default)]
    meta: ProblemMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OperatorFile {
    Hadamard { mask: ComplexRows },
    DiagonalMap { coeff: Vec<Vec<f64>>, alpha: f64 },
    GeneralVec { matrix: ComplexRows },
}

fn rows_from_mat(m: &Mat<c64>) -> ComplexRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn mat_from_rows(rows: &ComplexRows, expected: usize) -> Result<Mat<c64>> {
    if rows.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: rows.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != expected) {
        return Err(Error::DimensionMismatch {
            expected,
            found: bad.len(),
        });
    }
    Ok(Mat::from_fn(expected, expected, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl Problem {
    pub fn to_json(&self) -> Result<String> {
        let n = self.n();
        let operator = match &self.op {
            OperatorSpec::HadamardMask { mask } => OperatorFile::Hadamard {
                mask: rows_from_mat(mask),
            },
            OperatorSpec::DiagonalMap { coeff, alpha } => OperatorFile::DiagonalMap {
                coeff: (0..n).map(|i| (0..n).map(|j| coeff[(i, j)]).collect()).collect(),
                alpha: *alpha,
            },
            OperatorSpec::GeneralVec { matrix } => OperatorFile::GeneralVec {
                matrix: rows_from_mat(matrix),
            },
        };
        let file = ProblemFile {
            n,
            p: self.p,
            a0: rows_from_mat(self.a0.as_mat()),
            operator: serde_json::to_value(operator)?,
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        let n = file.n;
        let kind = file
            .operator
            .get("kind")
            .and_then(|k| k.as_str())
            .unwrap_or("<missing>")
            .to_owned();
        if !matches!(kind.as_str(), "hadamard" | "diagonal_map" | "general_vec") {
            return Err(Error::UnknownOperator(kind));
        }
        let op = match serde_json::from_value::<OperatorFile>(file.operator)? {
            OperatorFile::Hadamard { mask } => OperatorSpec::HadamardMask {
                mask: mat_from_rows(&mask, n)?,
            },
            OperatorFile::DiagonalMap { coeff, alpha } => {
                if coeff.len() != n || coeff.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: coeff.len(),
                    });
                }
                OperatorSpec::DiagonalMap {
                    coeff: Mat::from_fn(n, n, |i, j| coeff[i][j]),
                    alpha,
                }
            }
            OperatorFile::GeneralVec { matrix } => OperatorSpec::GeneralVec {
                matrix: mat_from_rows(&matrix, n * n)?,
            },
        };
        let a0 = HermitianMatrix::new(mat_from_rows(&file.a0, n)?)?;
        Ok(Problem::new(a0, op, file.p)?.with_meta(file.meta))
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    Problem::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_problem(problem: &Problem, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, problem.to_json()?)?;
    Ok(())
}
