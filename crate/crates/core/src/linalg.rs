//! Dense complex matrix kernels.
//!
//! Factorizations delegate to nalgebra; this module fixes orderings, tolerances and
//! error reporting so the rest of the crate sees deterministic, sorted results.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
#[cfg(test)]
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| c(x, 0.0)),
        ));
        v * d * v.adjoint()
    }
}

/// `M = left * diag(singulars) * right^dagger` with `singulars` descending.
///
/// For rectangular inputs `left` and `right` are the thin factors with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: ComplexMatrix,
    pub singulars: Vec<f64>,
    pub right: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singulars.len();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            k,
            self.singulars.iter().map(|&x| c(x, 0.0)),
        ));
        &self.left * d * self.right.adjoint()
    }
}

/// `M = unitary_part * positive_part`.
#[derive(Debug, Clone)]
pub struct PolarResult {
    pub unitary_part: ComplexMatrix,
    pub positive_part: ComplexMatrix,
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `Tr(a * b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Entrywise complex conjugate.
pub fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}

/// `|U^dagger U - I|_F`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    frobenius(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

fn check_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.is_square() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square and nonempty, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Indices that sort `values` descending; ties keep their original order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

pub fn hermitian_eigendecompose_with(
    m: &ComplexMatrix,
    eps_herm: f64,
    max_iterations: usize,
) -> Result<HermitianEig> {
    check_square(m, "Hermitian eigenproblem input")?;
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_defect(m);
    if deviation > eps_herm * frobenius(m).max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    // The solver reads one triangle; symmetrize so both contribute equally.
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, max_iterations)
        .ok_or(Error::ConvergenceFailure("Hermitian eigensolver"))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    let n = values.len();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors: vectors,
    })
}

pub fn hermitian_eigendecompose(m: &ComplexMatrix, eps_herm: f64) -> Result<HermitianEig> {
    hermitian_eigendecompose_with(m, eps_herm, 10_000)
}

pub fn svd_with(m: &ComplexMatrix, max_iterations: usize) -> Result<SvdResult> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let decomposition = SVD::try_new(m.clone(), true, true, f64::EPSILON, max_iterations)
        .ok_or(Error::ConvergenceFailure("SVD"))?;
    let u = decomposition.u.expect("requested U");
    let v = decomposition.v_t.expect("requested V^dagger").adjoint();
    let values: Vec<f64> = decomposition.singular_values.iter().copied().collect();
    let order = descending_order(&values);
    let mut left = ComplexMatrix::zeros(u.nrows(), order.len());
    let mut right = ComplexMatrix::zeros(v.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        left.set_column(dst, &u.column(src));
        right.set_column(dst, &v.column(src));
    }
    Ok(SvdResult {
        left,
        singulars: order.iter().map(|&i| values[i]).collect(),
        right,
    })
}

pub fn svd(m: &ComplexMatrix) -> Result<SvdResult> {
    svd_with(m, 10_000)
}

/// Polar decomposition `M = u P` of a square matrix, assembled from the SVD.
pub fn polar_decompose(m: &ComplexMatrix) -> Result<PolarResult> {
    check_square(m, "polar decomposition input")?;
    let s = svd(m)?;
    let n = s.singulars.len();
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        s.singulars.iter().map(|&x| c(x, 0.0)),
    ));
    Ok(PolarResult {
        unitary_part: &s.left * s.right.adjoint(),
        positive_part: &s.right * d * s.right.adjoint(),
    })
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which tensor factor of `H (x) H` a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of an operator on `C^N (x) C^N`, with basis index `k * N + l` for `|k l>`.
pub fn partial_trace(m: &ComplexMatrix, which: Subsystem, n: usize) -> Result<ComplexMatrix> {
    if n == 0 || m.nrows() != n * n || m.ncols() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace expects a {0}x{0} matrix for local dimension {n}, got {1}x{2}",
            n * n,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = ZERO;
            for t in 0..n {
                acc += match which {
                    Subsystem::Second => m[(a * n + t, b * n + t)],
                    Subsystem::First => m[(t * n + a, t * n + b)],
                };
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// The sesquilinear form `Tr(sigma tau^dagger)`.
pub fn trace_inner(sigma: &ComplexMatrix, tau: &ComplexMatrix) -> Result<Complex64> {
    if sigma.shape() != tau.shape() || !sigma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "trace inner product of {:?} and {:?}",
            sigma.shape(),
            tau.shape()
        )));
    }
    Ok(sigma.iter().zip(tau.iter()).map(|(s, t)| s * t.conj()).sum())
}

/// One summand `left * X[unknown] * right` of a linear matrix equation.
#[derive(Debug, Clone)]
pub struct SylvesterTerm {
    pub left: ComplexMatrix,
    pub unknown: usize,
    pub right: ComplexMatrix,
}

/// Homogeneous constraint `sum_k left_k * X[u_k] * right_k = 0` over square unknowns.
#[derive(Debug, Clone, Default)]
pub struct LinearConstraint {
    pub terms: Vec<SylvesterTerm>,
}

impl LinearConstraint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, left: ComplexMatrix, unknown: usize, right: ComplexMatrix) -> Self {
        self.terms.push(SylvesterTerm { left, unknown, right });
        self
    }

    /// `a X - X b = 0` on unknown 0.
    pub fn intertwines(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let n = a.nrows();
        Self::new()
            .term(a.clone(), 0, identity(n))
            .term(-identity(n), 0, b.clone())
    }

    fn output_shape(&self) -> Option<(usize, usize)> {
        self.terms.first().map(|t| (t.left.nrows(), t.right.ncols()))
    }
}

/// Approximate null space of a system over `unknowns` square `dim x dim` matrices.
///
/// Returns an orthonormal basis (in the stacked Frobenius inner product) of the right
/// singular vectors whose singular value is at most `eps_null * sigma_max`.
pub fn nullspace_multi(
    rows: &[LinearConstraint],
    dim: usize,
    unknowns: usize,
    eps_null: f64,
) -> Result<Vec<Vec<ComplexMatrix>>> {
    let block = dim * dim;
    let cols = block * unknowns;
    let mut total_rows = 0;
    for row in rows {
        let (p, q) = row
            .output_shape()
            .ok_or_else(|| Error::DimensionMismatch("empty constraint".into()))?;
        for t in &row.terms {
            if t.unknown >= unknowns
                || t.left.ncols() != dim
                || t.right.nrows() != dim
                || t.left.nrows() != p
                || t.right.ncols() != q
            {
                return Err(Error::DimensionMismatch(
                    "inconsistent term in linear constraint".into(),
                ));
            }
        }
        total_rows += p * q;
    }
    // Pad with zero rows so the SVD returns a full set of right singular vectors.
    let mut system = ComplexMatrix::zeros(total_rows.max(cols), cols);
    let mut offset = 0;
    for row in rows {
        let (p, q) = row.output_shape().expect("validated above");
        for t in &row.terms {
            // Column-major vec: vec(L X R) = (R^T (x) L) vec(X).
            let coeff = kron(&t.right.transpose(), &t.left);
            let mut view = system.view_mut((offset, t.unknown * block), (p * q, block));
            view += coeff;
        }
        offset += p * q;
    }
    let s = svd(&system)?;
    let sigma_max = s.singulars.first().copied().unwrap_or(0.0);
    let cutoff = eps_null * sigma_max;
    let mut basis = Vec::new();
    for (k, &sigma) in s.singulars.iter().enumerate() {
        if sigma <= cutoff {
            let v = s.right.column(k);
            let parts = (0..unknowns)
                .map(|u| {
                    ComplexMatrix::from_column_slice(
                        dim,
                        dim,
                        v.rows(u * block, block).clone_owned().as_slice(),
                    )
                })
                .collect();
            basis.push(parts);
        }
    }
    Ok(basis)
}

/// Null space of constraints over a single `dim x dim` unknown.
pub fn lstsq_nullspace(
    rows: &[LinearConstraint],
    dim: usize,
    eps_null: f64,
) -> Result<Vec<ComplexMatrix>> {
    Ok(nullspace_multi(rows, dim, 1, eps_null)?
        .into_iter()
        .map(|mut parts| parts.remove(0))
        .collect())
}
