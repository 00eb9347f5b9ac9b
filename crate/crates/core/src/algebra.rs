//! The matrix algebras spanned by word products.
//!
//! The left algebra is spanned by products of `A_i A_j^dagger`, the right algebra by
//! products of `A_i^dagger A_j`. Both are closed under multiplication and adjoint, so
//! the bilinear trace form `Tr(x y)` is nondegenerate on them. A basis is grown by a
//! deterministic breadth-first closure; each admitted element remembers the word that
//! produced it, so the same words evaluated on a second state give the corresponding
//! basis there.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::invariants::{Side, Word};
use crate::linalg::{self, frobenius, trace_inner, trace_of_product, ComplexMatrix};
use crate::states::SpectralDecomposition;

#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    pub side: Side,
    /// Word that produced each basis element.
    pub words: Vec<Word>,
    /// Word products scaled to unit Frobenius norm.
    pub elements: Vec<ComplexMatrix>,
    /// Frobenius norm of each raw word product.
    pub scales: Vec<f64>,
    /// `Omega_ij = Tr(e_i e_j)`.
    pub gram: DMatrix<Complex64>,
    pub gram_inverse: DMatrix<Complex64>,
    /// `e*_i = sum_j (Omega^-1)_ij e_j`, so that `Tr(e_i e*_j) = delta_ij`.
    pub duals: Vec<ComplexMatrix>,
    /// `c_ij^k = Tr(e_i e_j e*_k)` stored at `(i * m + j) * m + k`.
    pub structure: Vec<Complex64>,
}

impl AlgebraBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let m = self.dim();
        self.structure[(i * m + j) * m + k]
    }

    /// `|Omega Omega^-1 - I|_F`.
    pub fn gram_inverse_defect(&self) -> f64 {
        let m = self.dim();
        frobenius(&(&self.gram * &self.gram_inverse - linalg::identity(m)))
    }

    /// `max_ij |Tr(e_i e*_j) - delta_ij|`.
    pub fn duality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, e) in self.elements.iter().enumerate() {
            for (j, d) in self.duals.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((trace_of_product(e, d) - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// `max_ij |e_i e_j - sum_k c_ij^k e_k|_F`.
    pub fn closure_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let mut expanded = &self.elements[i] * &self.elements[j];
                for k in 0..m {
                    expanded -= &self.elements[k] * self.structure_constant(i, j, k);
                }
                worst = worst.max(frobenius(&expanded));
            }
        }
        worst
    }

    /// `max |sum_k c_ij^k c_kl^p - sum_k c_jl^k c_ik^p|` over all index tuples.
    pub fn associativity_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    for p in 0..m {
                        let mut lhs = Complex64::new(0.0, 0.0);
                        let mut rhs = Complex64::new(0.0, 0.0);
                        for k in 0..m {
                            lhs += self.structure_constant(i, j, k) * self.structure_constant(k, l, p);
                            rhs += self.structure_constant(j, l, k) * self.structure_constant(i, k, p);
                        }
                        worst = worst.max((lhs - rhs).norm());
                    }
                }
            }
        }
        worst
    }

    /// Evaluates the given words on another decomposition and builds the basis they span.
    pub fn from_words(
        spec: &SpectralDecomposition,
        side: Side,
        words: &[Word],
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = spec.dim_local;
        let table = crate::invariants::factor_table(&spec.coeff_matrices, side);
        let rank = spec.rank();
        let mut raw = Vec::with_capacity(words.len());
        for w in words {
            if let Some(m) = w.max_index() {
                if m >= rank {
                    return Err(Error::IndexOutOfRange { index: m + 1, rank });
                }
            }
            let mut p = linalg::identity(n);
            for &(i, j) in &w.letters {
                p *= &table[i * rank + j];
            }
            raw.push(p);
        }
        finalize(side, words.to_vec(), raw, tol)
    }
}

/// LU inverse followed by Newton-Schulz steps `X <- X (2I - Omega X)` while the
/// residual `|Omega X - I|_F` keeps shrinking.
fn refined_inverse(gram: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let m = gram.nrows();
    let id = DMatrix::<Complex64>::identity(m, m);
    let mut x = gram.clone().lu().try_inverse()?;
    let mut residual = (gram * &x - &id).norm();
    for _ in 0..3 {
        let next = &x * (&id * Complex64::new(2.0, 0.0) - gram * &x);
        let r = (gram * &next - &id).norm();
        if r >= residual {
            break;
        }
        x = next;
        residual = r;
    }
    Some(x)
}

fn finalize(side: Side, words: Vec<Word>, raw: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<AlgebraBasis> {
    let m = raw.len();
    let scales: Vec<f64> = raw.iter().map(frobenius).collect();
    let elements: Vec<ComplexMatrix> = raw
        .into_iter()
        .zip(&scales)
        .map(|(x, &s)| if s > 0.0 { x.unscale(s) } else { x })
        .collect();
    let gram = DMatrix::from_fn(m, m, |i, j| trace_of_product(&elements[i], &elements[j]));
    let det = gram.clone().lu().determinant().norm();
    if det.is_nan() || det < tol.eps_det {
        return Err(Error::GramSingular { det });
    }
    let gram_inverse = refined_inverse(&gram).ok_or(Error::GramSingular { det })?;
    let n = elements.first().map(|e| e.nrows()).unwrap_or(0);
    let duals: Vec<ComplexMatrix> = (0..m)
        .map(|i| {
            let mut d = ComplexMatrix::zeros(n, n);
            for j in 0..m {
                d += &elements[j] * gram_inverse[(i, j)];
            }
            d
        })
        .collect();
    let mut structure = Vec::with_capacity(m * m * m);
    for i in 0..m {
        for j in 0..m {
            let prod = &elements[i] * &elements[j];
            for dual in &duals {
                structure.push(trace_of_product(&prod, dual));
            }
        }
    }
    Ok(AlgebraBasis {
        side,
        words,
        elements,
        scales,
        gram,
        gram_inverse,
        duals,
        structure,
    })
}

/// Incremental orthonormal basis under `<x, y> = Tr(x y^dagger)`.
struct SpanTracker {
    orthonormal: Vec<ComplexMatrix>,
}

impl SpanTracker {
    fn residual(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut r = x.clone();
        // Two passes of Gram-Schmidt keep the basis orthonormal to rounding.
        for _ in 0..2 {
            for q in &self.orthonormal {
                let coeff = trace_inner(&r, q).expect("same shape");
                r -= q * coeff;
            }
        }
        r
    }

    fn try_admit(&mut self, x: &ComplexMatrix, eps_indep: f64) -> bool {
        // Word products are built from unit-norm coefficient matrices, so a norm at the
        // independence threshold is rounding noise of a vanishing product.
        let norm = frobenius(x);
        if norm <= eps_indep {
            return false;
        }
        let r = self.residual(x);
        let rn = frobenius(&r);
        if rn > eps_indep * norm {
            self.orthonormal.push(r.unscale(rn));
            true
        } else {
            false
        }
    }
}

/// Selects `m` candidates by pivoted Gram-Schmidt: each step takes the candidate with the
/// largest component orthogonal to those already chosen, relative to its own norm.
/// Ties go to the earlier candidate.
fn pivoted_selection(candidates: &[ComplexMatrix], m: usize, eps_indep: f64) -> Vec<usize> {
    let norms: Vec<f64> = candidates.iter().map(frobenius).collect();
    let mut residuals: Vec<ComplexMatrix> = candidates.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    while chosen.len() < m {
        let mut best: Option<(f64, usize)> = None;
        for (k, r) in residuals.iter().enumerate() {
            if norms[k] <= eps_indep || chosen.contains(&k) {
                continue;
            }
            let rel = frobenius(r) / norms[k];
            if best.is_none_or(|(b, _)| rel > b) {
                best = Some((rel, k));
            }
        }
        let Some((rel, k)) = best else { break };
        if rel <= eps_indep {
            break;
        }
        chosen.push(k);
        let q = residuals[k].unscale(frobenius(&residuals[k]));
        for r in residuals.iter_mut() {
            let coeff = trace_inner(r, &q).expect("same shape");
            *r -= &q * coeff;
        }
    }
    chosen
}

/// Breadth-first closure of the algebra generated by the letters of one side.
///
/// Generators `G(i, j)` are seeded in lexicographic `(i, j)` order; then every admitted
/// element, in admission order, is multiplied on the right by every generator, and a
/// product is admitted when its component orthogonal to the current span exceeds
/// `eps_indep` times its norm. This fixes the dimension `m`. The basis itself is then
/// chosen among all generators and tried products by pivoted Gram-Schmidt, which keeps
/// the Gram matrix well conditioned.
pub fn build_algebra(spec: &SpectralDecomposition, side: Side, tol: &Tolerances) -> Result<AlgebraBasis> {
    let rank = spec.rank();
    if rank == 0 {
        return Err(Error::DimensionMismatch("algebra of a rank-0 decomposition".into()));
    }
    let n = spec.dim_local;
    let max_dim = n * n;
    let table = crate::invariants::factor_table(&spec.coeff_matrices, side);
    let generators: Vec<(usize, usize)> = (0..rank)
        .flat_map(|i| (0..rank).map(move |j| (i, j)))
        .filter(|&(i, j)| frobenius(&table[i * rank + j]) > tol.eps_indep)
        .collect();

    let mut span = SpanTracker { orthonormal: Vec::new() };
    let mut words: Vec<Word> = Vec::new();
    let mut raw: Vec<ComplexMatrix> = Vec::new();
    let mut tried_words: Vec<Word> = Vec::new();
    let mut tried: Vec<ComplexMatrix> = Vec::new();
    for &(i, j) in &generators {
        let g = &table[i * rank + j];
        let word = Word::new(side, vec![(i, j)]);
        if raw.len() < max_dim && span.try_admit(g, tol.eps_indep) {
            words.push(word.clone());
            raw.push(g.clone());
        }
        tried_words.push(word);
        tried.push(g.clone());
    }
    let mut cursor = 0;
    while cursor < raw.len() {
        for &(i, j) in &generators {
            let candidate = &raw[cursor] * &table[i * rank + j];
            let mut letters = words[cursor].letters.clone();
            letters.push((i, j));
            let word = Word::new(side, letters);
            if raw.len() < max_dim && span.try_admit(&candidate, tol.eps_indep) {
                words.push(word.clone());
                raw.push(candidate.clone());
            }
            tried_words.push(word);
            tried.push(candidate);
        }
        cursor += 1;
    }
    let chosen = pivoted_selection(&tried, raw.len(), tol.eps_indep);
    if chosen.len() < raw.len() {
        // The pivoted pass lost a direction the closure admitted; keep the closure basis.
        return finalize(side, words, raw, tol);
    }
    let words = chosen.iter().map(|&k| tried_words[k].clone()).collect();
    let raw = chosen.iter().map(|&k| tried[k].clone()).collect();
    finalize(side, words, raw, tol)
}

/// `|det Omega|`.
pub fn gram_det(basis: &AlgebraBasis) -> f64 {
    basis.gram.clone().lu().determinant().norm()
}

/// Coefficients of `x` in the basis, `c_k = Tr(x e*_k)`.
pub fn express_in_basis(basis: &AlgebraBasis, x: &ComplexMatrix, eps_span: f64) -> Result<Vec<Complex64>> {
    let coeffs: Vec<Complex64> = basis.duals.iter().map(|d| trace_of_product(x, d)).collect();
    let mut residual = x.clone();
    for (c, e) in coeffs.iter().zip(&basis.elements) {
        residual -= e * *c;
    }
    let residual = frobenius(&residual);
    if residual > eps_span * frobenius(x).max(1.0) {
        return Err(Error::NotInSpan { residual });
    }
    Ok(coeffs)
}
