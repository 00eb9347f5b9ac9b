//! Versioned JSON documents written by the commands.

use luequiv::decider::CertificateRoute;
use luequiv::testkit::OracleResult;
use luequiv::{EquivalenceVerdict, InvariantSignature, Tolerances, Witness};
use serde::{Deserialize, Serialize};

use crate::files::{matrix_to_doc, InputDigest, MatrixDoc, SCHEMA_VERSION};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub route: CertificateRoute,
    pub u: MatrixDoc,
    pub w: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `|rho2 - (u^dagger (x) w^T) rho (u (x) w*)|_F` for the reported certificate.
    pub certificate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconclusive_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDoc>,
    pub residuals: Residuals,
    pub tolerances: Tolerances,
    pub inputs: Vec<InputDigest>,
}

impl VerdictReport {
    pub fn new(verdict: &EquivalenceVerdict, tolerances: &Tolerances, inputs: Vec<InputDigest>) -> Self {
        let (reason, witness, certificate, residual) = match verdict {
            EquivalenceVerdict::Equivalent(c) => (
                None,
                None,
                Some(CertificateDoc {
                    route: c.route,
                    u: matrix_to_doc(&c.u),
                    w: matrix_to_doc(&c.w),
                }),
                Some(c.residual),
            ),
            EquivalenceVerdict::NotEquivalent(w) => (None, Some(w.clone()), None, None),
            EquivalenceVerdict::Inconclusive(r) => (Some(r.code().to_string()), None, None, None),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            outcome: verdict.outcome().to_string(),
            inconclusive_reason: reason,
            witness,
            certificate,
            residuals: Residuals { certificate: residual },
            tolerances: tolerances.clone(),
            inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub input: InputDigest,
    pub tolerances: Tolerances,
    pub signature: InvariantSignature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryPair {
    pub schema_version: u32,
    pub seed: u64,
    pub u1: MatrixDoc,
    pub u2: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub converged: bool,
    pub best_distance: f64,
    pub restarts_used: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub u1: MatrixDoc,
    pub u2: MatrixDoc,
    pub inputs: Vec<InputDigest>,
}

impl OracleReport {
    pub fn new(
        result: &OracleResult,
        restarts: usize,
        iterations: usize,
        seed: u64,
        tolerance: f64,
        inputs: Vec<InputDigest>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            converged: result.converged,
            best_distance: result.best_distance,
            restarts_used: result.restarts_used,
            restarts,
            iterations,
            seed,
            tolerance,
            u1: matrix_to_doc(&result.best_pair.0),
            u2: matrix_to_doc(&result.best_pair.1),
            inputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub residual: f64,
    pub eps_cert: f64,
    pub accepted: bool,
    pub inputs: Vec<InputDigest>,
}
