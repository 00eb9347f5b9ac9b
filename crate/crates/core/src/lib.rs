//! Local unitary equivalence of bipartite density matrices.
//!
//! Two states `rho` and `rho'` on `H (x) H` are locally unitary equivalent when
//! `rho' = (U1 (x) U2) rho (U1 (x) U2)^dagger` for unitaries `U1`, `U2`. This crate
//! computes trace invariants of the coefficient matrices of the eigenvectors of a
//! state, builds the matrix algebras those coefficient matrices generate, and uses
//! algebra intertwiners to reconstruct an explicit pair of local unitaries when two
//! states are equivalent.
//!
//! Module map:
//!
//! * [`linalg`] dense complex kernels (eigendecomposition, SVD, polar, partial traces, null spaces)
//! * [`states`] density-matrix validation, spectral decomposition, local unitary action
//! * [`invariants`] power traces, word traces, degenerate-block invariants, fingerprints
//! * [`algebra`] closure of the word algebras, Gram matrices, dual bases, structure constants
//! * [`decider`] the equivalence decision and certificate construction
//! * [`testkit`] seeded generators and a brute-force optimisation oracle

pub mod algebra;
pub mod config;
pub mod decider;
pub mod error;
pub mod invariants;
pub mod linalg;
pub mod states;
pub mod testkit;

pub use config::Tolerances;
pub use decider::{decide, Certificate, EquivalenceVerdict, InconclusiveReason, Witness, WitnessKind};
pub use error::{Error, Result};
pub use invariants::{fingerprint, InvariantSignature, Side, Word};
pub use linalg::ComplexMatrix;
pub use states::{DensityMatrix, SpectralDecomposition};
