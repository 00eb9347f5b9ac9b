//! Deciding local unitary equivalence and constructing certificates.
//!
//! The decision runs in three stages:
//!
//! 1. power traces `J^s` must agree, otherwise the spectra differ;
//! 2. fingerprints (balanced words and degenerate-block sums) must agree;
//! 3. a certificate `(u, w)` with `rho2 = (u^dagger (x) (w*)^dagger) rho (u (x) w*)` is
//!    reconstructed and checked directly.
//!
//! Eigenvectors of the two states are only defined up to a phase (and up to a unitary
//! remix inside a degenerate eigenspace), while intertwiner equations compare the two
//! families of coefficient matrices entry for entry. Before stage 3 the two
//! decompositions are therefore brought into a common gauge using covariant quantities:
//! degenerate blocks are rotated into the eigenbasis of a remix-covariant Hermitian
//! form, and phases are fixed by making selected unbalanced traces real and positive.
//! The final residual check is gauge-free, so a wrong gauge can only cost a
//! certificate, never produce a false one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::{build_algebra, AlgebraBasis};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::invariants::{
    fingerprint_spectral, power_trace_key, power_traces_from_spectrum, Side, SignatureComparison,
};
use crate::linalg::{
    self, frobenius, hermitian_eigendecompose_with, identity, kron, nullspace_multi, polar_decompose,
    svd, trace_of_product, ComplexMatrix, LinearConstraint,
};
use crate::states::{spectral_decompose, DensityMatrix, SpectralDecomposition};

pub use crate::invariants::{Witness, WitnessKind};

/// Smallest eigenvalue gap of the block-rotation form that is trusted to fix a basis.
const MIN_REMIX_GAP: f64 = 1e-6;
/// Unbalanced traces below this magnitude are not used as phase references.
const MIN_PHASE_REFERENCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateRoute {
    /// The two matrices coincide.
    Identity,
    /// Polar parts of separate left- and right-algebra intertwiners.
    AlgebraIntertwiners,
    /// Polar parts of a solution of the coupled system `P B_i = A_i R`, `A_i^dagger P = R B_i^dagger`.
    CoupledIntertwiner,
}

/// Unitaries `u`, `w` with `rho2 = (u^dagger (x) (w*)^dagger) rho (u (x) w*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub u: ComplexMatrix,
    pub w: ComplexMatrix,
    pub residual: f64,
    pub route: CertificateRoute,
}

impl Certificate {
    /// The local unitaries `(U1, U2)` with `rho2 = (U1 (x) U2) rho (U1 (x) U2)^dagger`.
    pub fn local_unitaries(&self) -> (ComplexMatrix, ComplexMatrix) {
        (self.u.adjoint(), self.w.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InconclusiveReason {
    /// Invariants agree but a degenerate spectrum left the certificate search without a unique gauge.
    DegenerateNoCertificate,
    /// Invariants agree on a nondegenerate spectrum but no certificate passed, even after retries.
    Numerical,
    /// Spectra agree within tolerance but the ranks or degeneracy blocks differ.
    BlockStructureMismatch,
}

impl InconclusiveReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::DegenerateNoCertificate => "degenerate-no-certificate",
            Self::Numerical => "numerical",
            Self::BlockStructureMismatch => "block-structure-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquivalenceVerdict {
    Equivalent(Certificate),
    NotEquivalent(Witness),
    Inconclusive(InconclusiveReason),
}

impl EquivalenceVerdict {
    pub fn outcome(&self) -> &'static str {
        match self {
            Self::Equivalent(_) => "Equivalent",
            Self::NotEquivalent(_) => "NotEquivalent",
            Self::Inconclusive(_) => "Inconclusive",
        }
    }

    pub fn is_equivalent(&self) -> bool {
        matches!(self, Self::Equivalent(_))
    }
}

/// Nonsingular `T` with `e_k T = T e'_k` for all corresponding basis elements.
#[derive(Debug, Clone)]
pub struct Intertwiner {
    /// Normalized to unit Frobenius norm.
    pub t: ComplexMatrix,
    /// `max_k |e_k T - T e'_k|_F`.
    pub residual: f64,
    /// Dimension of the solution space the element was drawn from.
    pub null_dim: usize,
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

fn normalized(m: ComplexMatrix) -> ComplexMatrix {
    let n = frobenius(&m);
    if n > 0.0 {
        m.unscale(n)
    } else {
        m
    }
}

fn smallest_singular(m: &ComplexMatrix) -> Result<f64> {
    Ok(svd(m)?.singulars.last().copied().unwrap_or(0.0))
}

/// Draws elements of a solution space until every component is nonsingular.
fn nonsingular_element(
    basis: &[Vec<ComplexMatrix>],
    tol: &Tolerances,
    salt: u64,
) -> Result<Vec<ComplexMatrix>> {
    if basis.is_empty() {
        return Err(Error::NoIntertwiner);
    }
    let parts = basis[0].len();
    let accept = |candidate: &[ComplexMatrix]| -> Result<bool> {
        for m in candidate {
            if smallest_singular(m)? <= tol.eps_det {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if basis.len() == 1 {
        let only: Vec<ComplexMatrix> = basis[0].iter().cloned().map(normalized).collect();
        if accept(&only)? {
            return Ok(only);
        }
        return Err(Error::NoNonsingularElement { dim: 1, draws: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed ^ salt);
    for _ in 0..tol.intertwiner_draws {
        let coeffs: Vec<Complex64> = basis.iter().map(|_| complex_gaussian(&mut rng)).collect();
        let candidate: Vec<ComplexMatrix> = (0..parts)
            .map(|p| {
                let mut m = ComplexMatrix::zeros(basis[0][p].nrows(), basis[0][p].ncols());
                for (b, c) in basis.iter().zip(&coeffs) {
                    m += &b[p] * *c;
                }
                normalized(m)
            })
            .collect();
        if accept(&candidate)? {
            return Ok(candidate);
        }
    }
    Err(Error::NoNonsingularElement {
        dim: basis.len(),
        draws: tol.intertwiner_draws,
    })
}

/// Solves `e_k T = T e'_k` over corresponding bases of two states and returns a
/// nonsingular solution.
pub fn find_intertwiner(first: &AlgebraBasis, second: &AlgebraBasis, tol: &Tolerances) -> Result<Intertwiner> {
    if first.side != second.side || first.dim() != second.dim() || first.words != second.words {
        return Err(Error::PatternMismatch(
            "intertwined bases must share side and word list".into(),
        ));
    }
    let Some(n) = first.elements.first().map(|e| e.nrows()) else {
        return Err(Error::NoIntertwiner);
    };
    let rows: Vec<LinearConstraint> = first
        .elements
        .iter()
        .zip(&second.elements)
        .map(|(a, b)| LinearConstraint::intertwines(a, b))
        .collect();
    let null = nullspace_multi(&rows, n, 1, tol.eps_null)?;
    let salt = match first.side {
        Side::Left => 0x1ef,
        Side::Right => 0x719,
    };
    let t = nonsingular_element(&null, tol, salt)?.remove(0);
    let residual = first
        .elements
        .iter()
        .zip(&second.elements)
        .map(|(a, b)| frobenius(&(a * &t - &t * b)))
        .fold(0.0, f64::max);
    if residual > tol.eps_twine {
        return Err(Error::NoIntertwiner);
    }
    Ok(Intertwiner {
        t,
        residual,
        null_dim: null.len(),
    })
}

/// Unitary parts of the left and right intertwiners.
///
/// Checks `A_i A_i^dagger = u B_i B_i^dagger u^dagger` and
/// `A_i^dagger A_i = w B_i^dagger B_i w^dagger` for every index.
pub fn extract_unitaries(
    first: &SpectralDecomposition,
    second: &SpectralDecomposition,
    left: &Intertwiner,
    right: &Intertwiner,
    tol: &Tolerances,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let u = polar_decompose(&left.t)?.unitary_part;
    let w = polar_decompose(&right.t)?.unitary_part;
    let mut residual = 0.0f64;
    for (a, b) in first.coeff_matrices.iter().zip(&second.coeff_matrices) {
        let l = a * a.adjoint() - &u * b * b.adjoint() * u.adjoint();
        let r = a.adjoint() * a - &w * b.adjoint() * b * w.adjoint();
        residual = residual.max(frobenius(&l)).max(frobenius(&r));
    }
    if residual > tol.eps_cert {
        return Err(Error::ExtractionMismatch { residual });
    }
    Ok((u, w))
}

/// `|rho2 - (u^dagger (x) (w*)^dagger) rho (u (x) w*)|_F`, where `w*` is the entrywise conjugate.
pub fn certify(
    rho: &DensityMatrix,
    rho2: &DensityMatrix,
    u: &ComplexMatrix,
    w: &ComplexMatrix,
    tol: &Tolerances,
) -> Result<f64> {
    let n = rho.dim_local();
    if rho2.dim_local() != n {
        return Err(Error::DimensionMismatch(format!(
            "states have local dimensions {n} and {}",
            rho2.dim_local()
        )));
    }
    for m in [u, w] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "certificate unitaries must be {n}x{n}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let deviation = linalg::unitarity_defect(m);
        if deviation > tol.eps_unitary {
            return Err(Error::NotUnitary { deviation });
        }
    }
    // (w*)^dagger = w^T.
    let k = kron(&u.adjoint(), &w.transpose());
    Ok(frobenius(&(rho2.matrix() - &k * rho.matrix() * k.adjoint())))
}

/// Two decompositions brought into a common gauge.
#[derive(Debug, Clone)]
pub struct GaugeAlignment {
    pub first: SpectralDecomposition,
    pub second: SpectralDecomposition,
    /// False when some degenerate block could not be given a canonical basis.
    pub blocks_aligned: bool,
}

/// Remix-covariant Hermitian operators used to fix a basis inside degenerate blocks.
fn block_rotation_operators(spec: &SpectralDecomposition, side: Side) -> Vec<ComplexMatrix> {
    let sums: Vec<ComplexMatrix> = spec
        .blocks
        .iter()
        .map(|block| {
            let mut s = ComplexMatrix::zeros(spec.dim_local, spec.dim_local);
            for &i in block {
                let a = &spec.coeff_matrices[i];
                s += side.factor(a, a);
            }
            s
        })
        .collect();
    let mut out = sums.clone();
    for c in 0..sums.len() {
        for d in c..sums.len() {
            out.push(&sums[c] * &sums[d] + &sums[d] * &sums[c]);
        }
    }
    out
}

/// `G_ik = Tr(A_i A_k^dagger Z)` (left) or `Tr(A_k^dagger A_i Z)` (right); under a remix
/// `A -> V A` it transforms as `V G V^dagger`.
fn block_form(spec: &SpectralDecomposition, block: &[usize], side: Side, z: &ComplexMatrix) -> ComplexMatrix {
    let r = block.len();
    let a = &spec.coeff_matrices;
    DMatrix::from_fn(r, r, |i, k| {
        let (ai, ak) = (&a[block[i]], &a[block[k]]);
        match side {
            Side::Left => trace_of_product(&(ai * ak.adjoint()), z),
            Side::Right => trace_of_product(&(ak.adjoint() * ai), z),
        }
    })
}

fn min_gap(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[0] - w[1]).abs()).fold(f64::INFINITY, f64::min)
}

/// Replaces the block's coefficient matrices by `sum_j conj(E_jk) A_j` for the eigenvectors `E`.
fn rotate_block(spec: &mut SpectralDecomposition, block: &[usize], eigenvectors: &ComplexMatrix) {
    let old: Vec<ComplexMatrix> = block.iter().map(|&i| spec.coeff_matrices[i].clone()).collect();
    for (k, &target) in block.iter().enumerate() {
        let mut a = ComplexMatrix::zeros(spec.dim_local, spec.dim_local);
        for (j, oj) in old.iter().enumerate() {
            a += oj * eigenvectors[(j, k)].conj();
        }
        spec.coeff_matrices[target] = a;
    }
}

fn align_blocks(first: &mut SpectralDecomposition, second: &mut SpectralDecomposition, tol: &Tolerances) -> bool {
    let mut all = true;
    let blocks = first.blocks.clone();
    for block in blocks.iter().filter(|b| b.len() > 1) {
        let mut best: Option<(f64, Side, usize)> = None;
        for side in Side::BOTH {
            for (idx, z) in block_rotation_operators(first, side).iter().enumerate() {
                let g = block_form(first, block, side, z);
                let Ok(eig) = hermitian_eigendecompose_with(&g, 1e-6, tol.max_iterations) else {
                    continue;
                };
                let gap = min_gap(&eig.eigenvalues);
                if best.is_none_or(|(g, _, _)| gap > g) {
                    best = Some((gap, side, idx));
                }
            }
        }
        match best {
            Some((gap, side, idx)) if gap > MIN_REMIX_GAP => {
                for spec in [&mut *first, &mut *second] {
                    let z = block_rotation_operators(spec, side).swap_remove(idx);
                    let g = block_form(spec, block, side, &z);
                    match hermitian_eigendecompose_with(&g, 1e-6, tol.max_iterations) {
                        Ok(eig) => rotate_block(spec, block, &eig.eigenvectors),
                        Err(_) => all = false,
                    }
                }
            }
            _ => all = false,
        }
    }
    all
}

/// Phase reference candidates: the letter `(j, i)` followed by a phase-free tail.
fn phase_tails(spec: &SpectralDecomposition, side: Side) -> Vec<ComplexMatrix> {
    let n = spec.dim_local;
    let singles: Vec<ComplexMatrix> = spec.coeff_matrices.iter().map(|a| side.factor(a, a)).collect();
    let mut tails = vec![identity(n)];
    tails.extend(singles.iter().cloned());
    for a in &singles {
        for b in &singles {
            tails.push(a * b);
        }
    }
    tails
}

fn phase_reference(spec: &SpectralDecomposition, side: Side, j: usize, i: usize, tail: &ComplexMatrix) -> Complex64 {
    let (aj, ai) = (&spec.coeff_matrices[j], &spec.coeff_matrices[i]);
    trace_of_product(&side.factor(aj, ai), tail)
}

/// Multiplier that makes the reference real and positive when applied to `A_i`.
fn phase_fix(side: Side, value: Complex64) -> Complex64 {
    let unit = value / value.norm();
    match side {
        // Tr(A_j (c A_i)^dagger T) = conj(c) * value.
        Side::Left => unit,
        // Tr(A_j^dagger (c A_i) T) = c * value.
        Side::Right => unit.conj(),
    }
}

fn align_phases(first: &mut SpectralDecomposition, second: &mut SpectralDecomposition) {
    let n = first.rank();
    if n < 2 || second.rank() != n {
        return;
    }
    // Reference magnitudes do not depend on phases, so the spanning tree is fixed up front.
    let tails: Vec<(Side, Vec<ComplexMatrix>)> = Side::BOTH.iter().map(|&s| (s, phase_tails(first, s))).collect();
    let mut best: Vec<Vec<(f64, Side, usize)>> = vec![vec![(0.0, Side::Left, 0); n]; n];
    for (j, row) in best.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            for (side, list) in &tails {
                for (t, tail) in list.iter().enumerate() {
                    let m = phase_reference(first, *side, j, i, tail).norm();
                    if m > slot.0 {
                        *slot = (m, *side, t);
                    }
                }
            }
        }
    }
    let second_tails: Vec<(Side, Vec<ComplexMatrix>)> = Side::BOTH.iter().map(|&s| (s, phase_tails(second, s))).collect();
    let mut fixed = vec![false; n];
    fixed[0] = true;
    for _ in 1..n {
        let mut choice: Option<(f64, usize, usize)> = None;
        for j in (0..n).filter(|&j| fixed[j]) {
            for i in (0..n).filter(|&i| !fixed[i]) {
                let m = best[j][i].0;
                if choice.is_none_or(|(cm, _, _)| m > cm) {
                    choice = Some((m, j, i));
                }
            }
        }
        let Some((m, j, i)) = choice else { break };
        if m < MIN_PHASE_REFERENCE {
            // Disconnected from everything fixed so far: start a new component.
            let root = (0..n).find(|&k| !fixed[k]).expect("unfixed index exists");
            fixed[root] = true;
            continue;
        }
        let (_, side, t) = best[j][i];
        let side_idx = if side == Side::Left { 0 } else { 1 };
        let v1 = phase_reference(first, side, j, i, &tails[side_idx].1[t]);
        first.coeff_matrices[i] *= phase_fix(side, v1);
        let v2 = phase_reference(second, side, j, i, &second_tails[side_idx].1[t]);
        if v2.norm() > 0.0 {
            second.coeff_matrices[i] *= phase_fix(side, v2);
        }
        fixed[i] = true;
    }
}

/// Puts two decompositions with identical block structure into a common gauge.
pub fn align_gauge(first: &SpectralDecomposition, second: &SpectralDecomposition, tol: &Tolerances) -> GaugeAlignment {
    let mut a = first.clone();
    let mut b = second.clone();
    let blocks_aligned = if a.blocks == b.blocks {
        align_blocks(&mut a, &mut b, tol)
    } else {
        false
    };
    align_phases(&mut a, &mut b);
    GaugeAlignment {
        first: a,
        second: b,
        blocks_aligned,
    }
}

/// Nonsingular `(P, R)` with `P B_i = A_i R` and `A_i^dagger P = R B_i^dagger` for all `i`.
///
/// The solutions form a *-algebra, so the unitary parts of `P` and `R` solve the same
/// system and give `A_i = u B_i w^dagger` directly.
pub fn coupled_intertwiner(
    first: &SpectralDecomposition,
    second: &SpectralDecomposition,
    tol: &Tolerances,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if first.rank() != second.rank() || first.dim_local != second.dim_local {
        return Err(Error::DimensionMismatch("coupled system needs equal ranks".into()));
    }
    let n = first.dim_local;
    let id = identity(n);
    let mut rows = Vec::with_capacity(2 * first.rank());
    for (a, b) in first.coeff_matrices.iter().zip(&second.coeff_matrices) {
        rows.push(
            LinearConstraint::new()
                .term(id.clone(), 0, b.clone())
                .term(-a.clone(), 1, id.clone()),
        );
        rows.push(
            LinearConstraint::new()
                .term(a.adjoint(), 0, id.clone())
                .term(-id.clone(), 1, b.adjoint()),
        );
    }
    let null = nullspace_multi(&rows, n, 2, tol.eps_null)?;
    let mut pair = nonsingular_element(&null, tol, 0xc0u64)?;
    let r = pair.pop().expect("two unknowns");
    let p = pair.pop().expect("two unknowns");
    Ok((p, r))
}

fn certificate_via_algebras(
    rho: &DensityMatrix,
    rho2: &DensityMatrix,
    aligned: &GaugeAlignment,
    tol: &Tolerances,
) -> Result<Certificate> {
    let mut twines = Vec::with_capacity(2);
    for side in Side::BOTH {
        let first = build_algebra(&aligned.first, side, tol)?;
        let second = AlgebraBasis::from_words(&aligned.second, side, &first.words, tol)?;
        twines.push(find_intertwiner(&first, &second, tol)?);
    }
    let (u, w) = extract_unitaries(&aligned.first, &aligned.second, &twines[0], &twines[1], tol)?;
    let residual = certify(rho, rho2, &u, &w, tol)?;
    Ok(Certificate {
        u,
        w,
        residual,
        route: CertificateRoute::AlgebraIntertwiners,
    })
}

fn certificate_via_coupled(
    rho: &DensityMatrix,
    rho2: &DensityMatrix,
    aligned: &GaugeAlignment,
    tol: &Tolerances,
) -> Result<Certificate> {
    let (p, r) = coupled_intertwiner(&aligned.first, &aligned.second, tol)?;
    let u = polar_decompose(&p)?.unitary_part;
    let w = polar_decompose(&r)?.unitary_part;
    let residual = certify(rho, rho2, &u, &w, tol)?;
    Ok(Certificate {
        u,
        w,
        residual,
        route: CertificateRoute::CoupledIntertwiner,
    })
}

type Route = fn(&DensityMatrix, &DensityMatrix, &GaugeAlignment, &Tolerances) -> Result<Certificate>;

/// Tries every certificate route; returns the first certificate within `eps_cert`.
pub fn construct_certificate(
    rho: &DensityMatrix,
    rho2: &DensityMatrix,
    first: &SpectralDecomposition,
    second: &SpectralDecomposition,
    tol: &Tolerances,
) -> Option<Certificate> {
    let n = rho.dim_local();
    if let Ok(residual) = certify(rho, rho2, &identity(n), &identity(n), tol) {
        if residual <= tol.eps_cert {
            return Some(Certificate {
                u: identity(n),
                w: identity(n),
                residual,
                route: CertificateRoute::Identity,
            });
        }
    }
    let aligned = align_gauge(first, second, tol);
    let routes: [Route; 2] = [certificate_via_algebras, certificate_via_coupled];
    routes
        .iter()
        .filter_map(|route| route(rho, rho2, &aligned, tol).ok())
        .find(|cert| cert.residual <= tol.eps_cert)
}

/// Decides whether `rho2 = (U1 (x) U2) rho (U1 (x) U2)^dagger` for some local unitaries.
pub fn decide(rho: &DensityMatrix, rho2: &DensityMatrix, tol: &Tolerances) -> Result<EquivalenceVerdict> {
    if rho.dim_local() != rho2.dim_local() {
        return Err(Error::DimensionMismatch(format!(
            "states have local dimensions {} and {}",
            rho.dim_local(),
            rho2.dim_local()
        )));
    }
    let (first, second) = match (spectral_decompose(rho, tol), spectral_decompose(rho2, tol)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return Ok(EquivalenceVerdict::Inconclusive(InconclusiveReason::Numerical)),
    };
    let n = rho.dim_local();

    let j1 = power_traces_from_spectrum(&first.eigenvalues, n);
    let j2 = power_traces_from_spectrum(&second.eigenvalues, n);
    for (s, (&a, &b)) in j1.iter().zip(&j2).enumerate() {
        let (a, b) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
        if !tol.invariants_agree(a, b) {
            return Ok(EquivalenceVerdict::NotEquivalent(Witness {
                kind: WitnessKind::PowerTrace,
                invariant: power_trace_key(s + 1),
                first: a,
                second: b,
            }));
        }
    }

    let sig1 = fingerprint_spectral(&first, tol, tol.tau_cap)?;
    let sig2 = fingerprint_spectral(&second, tol, tol.tau_cap)?;
    match sig1.compare(&sig2, tol) {
        SignatureComparison::Differ(witness) => return Ok(EquivalenceVerdict::NotEquivalent(witness)),
        SignatureComparison::Incomparable(_) => {
            return Ok(EquivalenceVerdict::Inconclusive(InconclusiveReason::BlockStructureMismatch))
        }
        SignatureComparison::Agree => {}
    }

    for scale in [1.0, 100.0, 0.01] {
        let attempt = Tolerances {
            eps_null: tol.eps_null * scale,
            ..tol.clone()
        };
        if let Some(cert) = construct_certificate(rho, rho2, &first, &second, &attempt) {
            return Ok(EquivalenceVerdict::Equivalent(cert));
        }
    }
    Ok(EquivalenceVerdict::Inconclusive(if first.is_nondegenerate() {
        InconclusiveReason::Numerical
    } else {
        InconclusiveReason::DegenerateNoCertificate
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE, ZERO};
    use crate::states::{apply_local_unitary, validate_density};
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c(x, 0.0)),
        ))
    }

    fn rotation(theta: f64, phase: f64) -> ComplexMatrix {
        let (s, co) = theta.sin_cos();
        let e = Complex64::from_polar(1.0, phase);
        ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.0), -e.conj() * s, e * s, c(co, 0.0)])
    }

    fn sample_state() -> DensityMatrix {
        let tol = Tolerances::default();
        let a = ComplexMatrix::from_row_slice(
            4,
            4,
            &[
                c(0.4, 0.0), c(0.05, 0.02), c(0.0, 0.03), c(0.01, 0.0),
                c(0.05, -0.02), c(0.3, 0.0), c(0.02, 0.01), c(0.0, -0.04),
                c(0.0, -0.03), c(0.02, -0.01), c(0.2, 0.0), c(0.03, 0.0),
                c(0.01, 0.0), c(0.0, 0.04), c(0.03, 0.0), c(0.1, 0.0),
            ],
        );
        validate_density(a, 2, &tol).unwrap()
    }

    #[test]
    fn reflexive_decision_uses_identity() {
        let tol = Tolerances::default();
        let rho = sample_state();
        match decide(&rho, &rho, &tol).unwrap() {
            EquivalenceVerdict::Equivalent(cert) => {
                assert_eq!(cert.route, CertificateRoute::Identity);
                assert!(cert.residual <= 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn orbit_pair_is_certified() {
        let tol = Tolerances::default();
        let rho = sample_state();
        let image = apply_local_unitary(&rho, &rotation(0.3, 1.1), &rotation(1.2, -0.4), &tol).unwrap();
        match decide(&rho, &image, &tol).unwrap() {
            EquivalenceVerdict::Equivalent(cert) => {
                assert!(cert.residual <= 1e-8);
                let again = certify(&rho, &image, &cert.u, &cert.w, &tol).unwrap();
                assert!(again <= 1e-8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagonal_pair_is_not_equivalent() {
        let tol = Tolerances::default();
        let a = validate_density(diag(&[0.5, 0.5, 0.0, 0.0]), 2, &tol).unwrap();
        let b = validate_density(diag(&[0.5, 0.0, 0.5, 0.0]), 2, &tol).unwrap();
        match decide(&a, &b, &tol).unwrap() {
            EquivalenceVerdict::NotEquivalent(w) => {
                assert_eq!(w.kind, WitnessKind::BlockInvariant);
                assert!((w.first - c(2.0, 0.0)).norm() < 1e-12);
                assert!((w.second - c(4.0, 0.0)).norm() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn different_spectra_give_power_trace_witness() {
        let tol = Tolerances::default();
        let a = validate_density(diag(&[0.5, 0.5, 0.0, 0.0]), 2, &tol).unwrap();
        let b = validate_density(diag(&[0.7, 0.3, 0.0, 0.0]), 2, &tol).unwrap();
        match decide(&a, &b, &tol).unwrap() {
            EquivalenceVerdict::NotEquivalent(w) => {
                assert_eq!(w.kind, WitnessKind::PowerTrace);
                assert_eq!(w.invariant, "J^2");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaled_unitary_intertwiner_polar_part() {
        let u = rotation(0.7, 0.2);
        let t = &u * c(2.0, 0.0);
        let p = polar_decompose(&t).unwrap();
        assert!(frobenius(&(p.unitary_part - u)) < 1e-12);
    }

    #[test]
    fn self_intertwiner_is_nonsingular() {
        let tol = Tolerances::default();
        let rho = sample_state();
        let spec = spectral_decompose(&rho, &tol).unwrap();
        let basis = build_algebra(&spec, Side::Left, &tol).unwrap();
        let t = find_intertwiner(&basis, &basis, &tol).unwrap();
        assert!(t.residual < 1e-12);
        assert!(smallest_singular(&t.t).unwrap() > 1e-6);
    }

    #[test]
    fn certify_rejects_non_unitary_and_mismatched_inputs() {
        let tol = Tolerances::default();
        let rho = sample_state();
        let bad = ComplexMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(
            certify(&rho, &rho, &bad, &identity(2), &tol),
            Err(Error::NotUnitary { .. })
        ));
        assert!(matches!(
            certify(&rho, &rho, &identity(3), &identity(3), &tol),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn certificate_maps_to_local_unitaries() {
        let tol = Tolerances::default();
        let rho = sample_state();
        let (u1, u2) = (rotation(0.9, 0.3), rotation(-0.5, 2.0));
        let image = apply_local_unitary(&rho, &u1, &u2, &tol).unwrap();
        let EquivalenceVerdict::Equivalent(cert) = decide(&rho, &image, &tol).unwrap() else {
            panic!("expected a certificate");
        };
        let (v1, v2) = cert.local_unitaries();
        let rebuilt = apply_local_unitary(&rho, &v1, &v2, &tol).unwrap();
        assert!(frobenius(&(rebuilt.matrix() - image.matrix())) < 1e-8);
    }

    #[test]
    fn random_unitaries_never_certify_inequivalent_pair() {
        let tol = Tolerances::default();
        let a = validate_density(diag(&[0.5, 0.5, 0.0, 0.0]), 2, &tol).unwrap();
        let b = validate_density(diag(&[0.5, 0.0, 0.5, 0.0]), 2, &tol).unwrap();
        let smallest = (0..1000u64)
            .map(|seed| {
                let u = crate::testkit::haar_unitary(2, 2 * seed);
                let w = crate::testkit::haar_unitary(2, 2 * seed + 1);
                certify(&a, &b, &u, &w, &tol).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(smallest > 1e-8, "{smallest}");
    }
}
