//! Dense linear algebra for the small symmetric matrices that show up in the
//! analysis: graph Laplacians, their reductions onto the disagreement
//! subspace, and the 3x3 certificate matrix.

use thiserror::Error;

/// Sweep limit for the cyclic Jacobi method.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Largest dimension accepted by [`sym_eigen`].
pub const MAX_EIGEN_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NotConverged { sweeps: usize, off_norm: f64 },
    #[error("eigenvalue verdict (margin {margin:e}) disagrees with Sylvester minors {minors:?}")]
    DefinitenessMismatch { margin: f64, minors: Vec<f64> },
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from a row-major array, replacing each
    /// off-diagonal pair by its average so that symmetry holds exactly.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::InvalidDimension { dim, reason: "matrix dimension must be at least 1" });
        }
        if entries.len() != dim * dim {
            return Err(LinalgError::InvalidDimension { dim, reason: "entry count is not dim * dim" });
        }
        let mut data = entries.to_vec();
        for i in 0..dim {
            for j in 0..dim {
                if !data[i * dim + j].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = avg;
                data[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, entries: data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LinalgError::InvalidDimension { dim, reason: "rows are not square" });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(dim, &flat)
    }

    pub fn zeros(dim: usize) -> Result<Self, LinalgError> {
        Self::from_row_major(dim, &vec![0.0; dim * dim])
    }

    pub fn identity(dim: usize) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        Ok(m)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = d;
        }
        Ok(m)
    }

    /// Centering matrix `I - (1/n) 1 1^T`.
    pub fn centering(n: usize) -> Result<Self, LinalgError> {
        let mut m = Self::identity(n)?;
        let inv = 1.0 / n as f64;
        for e in m.entries.iter_mut() {
            *e -= inv;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|e| e * s).collect() }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Quadratic form `v^T A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Congruence `B^T A B` for a `dim x k` column-major-by-column basis `B`.
    pub fn congruence(&self, basis: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if basis.iter().any(|c| c.len() != self.dim) {
            return Err(LinalgError::InvalidDimension { dim: self.dim, reason: "basis column length mismatch" });
        }
        let k = basis.len();
        let images: Vec<Vec<f64>> = basis.iter().map(|c| self.mul_vec(c)).collect();
        let mut out = vec![0.0; k * k];
        for p in 0..k {
            for q in 0..k {
                out[p * k + q] = dot(&basis[p], &images[q]);
            }
        }
        Self::from_row_major(k, &out)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("decomposition is never empty")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 * (1 + ||A||_F)`. Eigenvectors are normalized so that their first
/// non-negligible component is positive.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = a.dim;
    if n > MAX_EIGEN_DIM {
        return Err(LinalgError::InvalidDimension { dim: n, reason: "eigensolver limited to dimension 64" });
    }
    let threshold = 1e-12 * (1.0 + a.frobenius_norm());
    let mut m = a.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&m) >= threshold {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(LinalgError::NotConverged { sweeps, off_norm: off_norm(&m) });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            if let Some(first) = vec.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    vec.iter_mut().for_each(|x| *x = -*x);
                }
            }
            vec
        })
        .collect();

    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Outcome of a negative-definiteness test.
#[derive(Debug, Clone, PartialEq)]
pub struct Definiteness {
    /// True iff the largest eigenvalue is below `-tol`.
    pub negative_definite: bool,
    /// Largest eigenvalue.
    pub margin: f64,
    /// Leading principal minors, used for the Sylvester cross-check.
    pub minors: Vec<f64>,
}

impl Definiteness {
    /// The margin falls inside the `[-tol, tol]` tie zone.
    pub fn is_indeterminate(&self, tol: f64) -> bool {
        self.margin.abs() <= tol
    }
}

/// Tests `A < 0` through the largest eigenvalue and cross-checks the result
/// against Sylvester's criterion (leading minors alternate in sign, starting
/// negative).
///
/// Outside the tie zone the two routes must agree; a disagreement is an error.
pub fn is_negative_definite(a: &SymMatrix, tol: f64) -> Result<Definiteness, LinalgError> {
    let eig = sym_eigen(a)?;
    let margin = eig.max_eigenvalue();
    let minors = leading_principal_minors(a);
    let negative_definite = margin < -tol;

    let scale = 1e-9 * (1.0 + a.frobenius_norm());
    if margin.abs() > tol.max(scale) && negative_definite != sylvester_negative_definite(&minors) {
        return Err(LinalgError::DefinitenessMismatch { margin, minors });
    }
    Ok(Definiteness { negative_definite, margin, minors })
}

/// Sylvester's criterion for negative definiteness: `(-1)^k det(A_k) > 0`.
pub fn sylvester_negative_definite(minors: &[f64]) -> bool {
    minors
        .iter()
        .enumerate()
        .all(|(k, &d)| if k % 2 == 0 { d < 0.0 } else { d > 0.0 })
}

/// Determinants of the leading `k x k` blocks for `k = 1..=dim`.
pub fn leading_principal_minors(a: &SymMatrix) -> Vec<f64> {
    (1..=a.dim)
        .map(|k| {
            let mut block = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    block[i * k + j] = a.get(i, j);
                }
            }
            determinant(k, &mut block)
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `m`).
fn determinant(n: usize, m: &mut [f64]) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| m[r1 * n + col].abs().total_cmp(&m[r2 * n + col].abs()))
            .expect("non-empty range");
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = m[col * n + col];
        det *= d;
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
            }
        }
    }
    det
}

/// Orthonormal basis `U1` of the complement of the all-ones direction, such
/// that `[U1, 1/sqrt(n)]` is orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementBasis {
    n: usize,
    /// `n - 1` columns, each of length `n`.
    columns: Vec<Vec<f64>>,
}

impl ComplementBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `U1^T v` for a length-`n` vector.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, v)).collect()
    }
}

/// Builds `U1` from the Householder reflection that maps `e_n` onto
/// `1_n / sqrt(n)`; the first `n - 1` columns of the reflector form the basis.
pub fn complement_basis(n: usize) -> Result<ComplementBasis, LinalgError> {
    if n < 2 {
        return Err(LinalgError::InvalidDimension { dim: n, reason: "complement basis needs n >= 2" });
    }
    let u = 1.0 / (n as f64).sqrt();
    // v = e_n - u 1
    let mut v = vec![-u; n];
    v[n - 1] += 1.0;
    let vv = dot(&v, &v);
    let columns = (0..n - 1)
        .map(|col| {
            (0..n)
                .map(|row| {
                    let delta = if row == col { 1.0 } else { 0.0 };
                    delta - 2.0 * v[row] * v[col] / vv
                })
                .collect()
        })
        .collect();
    Ok(ComplementBasis { n, columns })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
