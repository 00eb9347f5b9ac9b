//! Density matrices on `C^N (x) C^N` and their eigenvector coefficient matrices.
//!
//! The product basis is ordered `|k l>` -> `k * N + l`, first factor slow. An eigenvector
//! `|v> = sum a_kl |k l>` is identified with the `N x N` coefficient matrix `A_kl = a_kl`,
//! so that `Tr_2 |v><v| = A A^dagger` and a local unitary `U1 (x) U2` acts as
//! `A -> U1 A U2^T`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{self, c, frobenius, kron, ComplexMatrix};

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim_local: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn dim_local(&self) -> usize {
        self.dim_local
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Wraps a matrix after checking only shape, finiteness and hermiticity.
    ///
    /// For tooling that needs to inspect slightly unphysical inputs; everything else
    /// should go through [`validate_density`].
    pub fn from_hermitian_unchecked(
        matrix: ComplexMatrix,
        dim_local: usize,
        tol: &Tolerances,
    ) -> Result<Self> {
        check_shape(&matrix, dim_local)?;
        let deviation = linalg::hermiticity_defect(&matrix);
        if deviation > tol.eps_herm * frobenius(&matrix).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { dim_local, matrix })
    }

    pub fn pure(vector: &DVector<Complex64>, dim_local: usize, tol: &Tolerances) -> Result<Self> {
        let norm = vector.norm();
        let v = vector.unscale(norm);
        validate_density(&v * v.adjoint(), dim_local, tol)
    }
}

fn check_shape(m: &ComplexMatrix, n: usize) -> Result<()> {
    if n == 0 || m.nrows() != n * n || m.ncols() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "expected a {0}x{0} matrix for local dimension {n}, got {1}x{2}",
            n * n,
            m.nrows(),
            m.ncols()
        )));
    }
    if !linalg::is_finite(m) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Checks every density-matrix invariant; never repairs the input.
pub fn validate_density(m: ComplexMatrix, n: usize, tol: &Tolerances) -> Result<DensityMatrix> {
    check_shape(&m, n)?;
    let eig = linalg::hermitian_eigendecompose_with(&m, tol.eps_herm, tol.max_iterations)?;
    let trace = linalg::trace(&m).re;
    if (trace - 1.0).abs() > tol.eps_trace {
        return Err(Error::NotUnitTrace { trace });
    }
    let min_eigenvalue = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -tol.eps_psd {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue });
    }
    Ok(DensityMatrix { dim_local: n, matrix: m })
}

/// `rho = sum_i lambda_i |v_i><v_i|` over the eigenvalues above the rank cutoff.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub dim_local: usize,
    /// Descending, all positive.
    pub eigenvalues: Vec<f64>,
    /// `A_i` for each retained eigenvector.
    pub coeff_matrices: Vec<ComplexMatrix>,
    /// Maximal degeneracy blocks, as sorted 0-based index lists in eigenvalue order.
    pub blocks: Vec<Vec<usize>>,
}

impl SpectralDecomposition {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Indices that sit alone in their degeneracy block.
    pub fn singleton_indices(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| b.len() == 1)
            .map(|b| b[0])
            .collect()
    }

    /// `sum_i lambda_i vec(A_i) vec(A_i)^dagger`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.dim_local * self.dim_local;
        let mut out = ComplexMatrix::zeros(d, d);
        for (lambda, a) in self.eigenvalues.iter().zip(&self.coeff_matrices) {
            let v = coeff_to_vector(a);
            out += (&v * v.adjoint()) * c(*lambda, 0.0);
        }
        out
    }

    /// The same decomposition with every coefficient matrix mapped to `U1 A U2^T`.
    pub fn transformed(&self, u1: &ComplexMatrix, u2: &ComplexMatrix) -> Self {
        let u2t = u2.transpose();
        Self {
            coeff_matrices: self.coeff_matrices.iter().map(|a| u1 * a * &u2t).collect(),
            ..self.clone()
        }
    }
}

/// Groups descending eigenvalues into blocks by chaining neighbours whose gap is at most
/// `eps_deg * max(lambda_1, 1/N^2)`.
pub fn degeneracy_blocks(eigenvalues: &[f64], dim_local: usize, eps_deg: f64) -> Vec<Vec<usize>> {
    let Some(&top) = eigenvalues.first() else {
        return Vec::new();
    };
    let scale = top.max(1.0 / (dim_local * dim_local) as f64);
    let mut blocks: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..eigenvalues.len() {
        if (eigenvalues[i - 1] - eigenvalues[i]).abs() <= eps_deg * scale {
            blocks.last_mut().expect("nonempty").push(i);
        } else {
            blocks.push(vec![i]);
        }
    }
    blocks
}

pub fn spectral_decompose(rho: &DensityMatrix, tol: &Tolerances) -> Result<SpectralDecomposition> {
    let n = rho.dim_local;
    let eig = linalg::hermitian_eigendecompose_with(&rho.matrix, tol.eps_herm, tol.max_iterations)?;
    let mut eigenvalues = Vec::new();
    let mut coeff_matrices = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= tol.eps_rank {
            break;
        }
        eigenvalues.push(lambda);
        coeff_matrices.push(vector_to_coeff(&eig.eigenvectors.column(k).clone_owned(), n));
    }
    let blocks = degeneracy_blocks(&eigenvalues, n, tol.eps_deg);
    Ok(SpectralDecomposition {
        dim_local: n,
        eigenvalues,
        coeff_matrices,
        blocks,
    })
}

/// `(U1 (x) U2) rho (U1 (x) U2)^dagger`.
pub fn apply_local_unitary(
    rho: &DensityMatrix,
    u1: &ComplexMatrix,
    u2: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<DensityMatrix> {
    let n = rho.dim_local;
    for u in [u1, u2] {
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "local unitary must be {n}x{n}, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let deviation = linalg::unitarity_defect(u);
        if deviation > tol.eps_unitary {
            return Err(Error::NotUnitary { deviation });
        }
    }
    let w = kron(u1, u2);
    let out = &w * &rho.matrix * w.adjoint();
    let out = (&out + out.adjoint()).scale(0.5);
    validate_density(out, n, tol)
}

/// Row-major flattening `A -> sum_kl A_kl |k l>`.
pub fn coeff_to_vector(a: &ComplexMatrix) -> DVector<Complex64> {
    let (r, cols) = a.shape();
    DVector::from_iterator(r * cols, (0..r).flat_map(|k| (0..cols).map(move |l| a[(k, l)])))
}

/// Inverse of [`coeff_to_vector`] for a vector of length `N^2`.
pub fn vector_to_coeff(v: &DVector<Complex64>, n: usize) -> ComplexMatrix {
    assert_eq!(v.len(), n * n, "vector length must be N^2");
    ComplexMatrix::from_fn(n, n, |k, l| v[k * n + l])
}
