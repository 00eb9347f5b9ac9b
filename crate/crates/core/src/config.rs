use serde::{Deserialize, Serialize};

/// Every numerical threshold used by the library, threaded through callers as one record.
///
/// Defaults are tuned for local dimensions up to about 4, where double precision
/// leaves several orders of magnitude between rounding noise and genuine rank
/// deficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Hermiticity: `|M - M^dagger|_F <= eps_herm * max(1, |M|_F)`.
    pub eps_herm: f64,
    /// Unit trace, absolute.
    pub eps_trace: f64,
    /// Smallest admissible eigenvalue is `-eps_psd`.
    pub eps_psd: f64,
    /// Relative Frobenius reconstruction error of factorizations.
    pub eps_recon: f64,
    /// Eigenvalues at or below this are dropped from the spectral decomposition.
    pub eps_rank: f64,
    /// Relative eigenvalue gap below which two eigenvalues are treated as degenerate.
    pub eps_deg: f64,
    /// Invariant comparison: relative on magnitudes >= 1, absolute below.
    pub eps_inv: f64,
    /// Certificate acceptance threshold on the Frobenius residual.
    pub eps_cert: f64,
    /// Intertwiner residual threshold.
    pub eps_twine: f64,
    /// Relative singular-value cutoff for approximate null spaces.
    pub eps_null: f64,
    /// Linear-independence screening during algebra closure, relative to the candidate norm.
    pub eps_indep: f64,
    /// Smallest admissible `|det|` of a Gram matrix and smallest singular value of an intertwiner.
    pub eps_det: f64,
    /// Residual allowed when expanding a matrix in an algebra basis.
    pub eps_span: f64,
    /// Unitarity check on user-supplied unitaries.
    pub eps_unitary: f64,
    /// Hard limit on word-trace evaluations in one fingerprint.
    pub word_budget: u64,
    /// Explicit word-length cap; `None` picks the largest cap within the budget.
    pub tau_cap: Option<usize>,
    /// Random combinations tried when searching a null space for a nonsingular element.
    pub intertwiner_draws: usize,
    /// Seed for every randomized step of the decision pipeline.
    pub seed: u64,
    /// Iteration budget for the iterative eigen/SVD solvers.
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_herm: 1e-10,
            eps_trace: 1e-10,
            eps_psd: 1e-10,
            eps_recon: 1e-10,
            eps_rank: 1e-10,
            eps_deg: 1e-8,
            eps_inv: 1e-8,
            eps_cert: 1e-8,
            eps_twine: 1e-8,
            eps_null: 1e-8,
            eps_indep: 1e-8,
            eps_det: 1e-12,
            eps_span: 1e-8,
            eps_unitary: 1e-10,
            word_budget: 1_000_000,
            tau_cap: None,
            intertwiner_draws: 64,
            seed: 0x5eed,
            max_iterations: 10_000,
        }
    }
}

impl Tolerances {
    /// `|a - b| <= eps_inv * max(1, |a|, |b|)`.
    pub fn invariants_agree(&self, a: num_complex::Complex64, b: num_complex::Complex64) -> bool {
        let scale = 1.0f64.max(a.norm()).max(b.norm());
        (a - b).norm() <= self.eps_inv * scale
    }
}
