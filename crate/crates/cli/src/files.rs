//! State files and input digests.

use std::fs;
use std::path::Path;

use luequiv::states::validate_density;
use luequiv::{ComplexMatrix, DensityMatrix, Tolerances};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major nested `[re, im]` pairs.
pub type MatrixDoc = Vec<Vec<Complex64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: u32,
    pub local_dim: usize,
    pub matrix: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn matrix_to_doc(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_doc(doc: &[Vec<Complex64>]) -> Result<ComplexMatrix, CliError> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if let Some(bad) = doc.iter().position(|r| r.len() != cols) {
        return Err(CliError::Parse(format!(
            "matrix row {} has {} entries, expected {cols}",
            bad + 1,
            doc[bad].len()
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| doc[i][j]))
}

pub fn digest(path: &Path, bytes: &[u8]) -> InputDigest {
    InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_state_file(bytes: &[u8]) -> Result<StateFile, CliError> {
    let file: StateFile = serde_json::from_slice(bytes).map_err(|e| CliError::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Parse(format!(
            "unsupported schema_version {}, expected {SCHEMA_VERSION}",
            file.schema_version
        )));
    }
    Ok(file)
}

/// A parsed and (unless `validate` is false) validated state with its digest.
pub struct LoadedState {
    pub file: StateFile,
    pub state: DensityMatrix,
    pub digest: InputDigest,
}

pub fn load_state(path: &Path, validate: bool, tol: &Tolerances) -> Result<LoadedState, CliError> {
    let bytes = read_bytes(path)?;
    let file = parse_state_file(&bytes)?;
    let matrix = matrix_from_doc(&file.matrix)?;
    let state = if validate {
        validate_density(matrix, file.local_dim, tol)?
    } else {
        DensityMatrix::from_hermitian_unchecked(matrix, file.local_dim, tol)?
    };
    Ok(LoadedState {
        file,
        state,
        digest: digest(path, &bytes),
    })
}

pub fn state_to_json(state: &DensityMatrix, label: Option<String>) -> String {
    let file = StateFile {
        schema_version: SCHEMA_VERSION,
        local_dim: state.dim_local(),
        matrix: matrix_to_doc(state.matrix()),
        label,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("state files serialize");
    text.push('\n');
    text
}
