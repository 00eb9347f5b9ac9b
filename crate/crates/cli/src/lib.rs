//! Command-line front end for local unitary equivalence checks.

pub mod error;
pub mod files;
pub mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use luequiv::decider::{certify, decide};
use luequiv::invariants::fingerprint;
use luequiv::states::{apply_local_unitary, spectral_decompose};
use luequiv::testkit::{brute_force_oracle, haar_unitary, OracleConfig};
use luequiv::{ComplexMatrix, EquivalenceVerdict, Tolerances};
use num_complex::Complex64;
use serde::Serialize;

pub use error::CliError;
use files::{digest, load_state, matrix_from_doc, matrix_to_doc, read_bytes, state_to_json, write_text, SCHEMA_VERSION};
use report::{CertifyReport, FingerprintReport, OracleReport, UnitaryPair, VerdictReport, TOOL_VERSION};

pub const EXIT_CODES: &str = "\
Exit codes:
   0  success; compare: Equivalent; oracle: converged; certify: accepted
   1  compare: NotEquivalent; oracle: not converged; certify: residual above eps-cert
   2  compare: Inconclusive
   3  file could not be read or written
   4  malformed input file
   5  dimension mismatch
   6  matrix not Hermitian
   7  trace differs from 1
   8  matrix not positive semidefinite
   9  matrix not unitary
  10  word-evaluation budget exceeded (lower --tau-cap)
  11  other numerical failure
  64  invalid command line";

#[derive(Debug, Parser)]
#[command(name = "luequiv", version, about = "Local unitary equivalence of bipartite density matrices", after_help = EXIT_CODES)]
pub struct Cli {
    /// Emit JSON documents instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for orbit generation, oracle restarts and intertwiner draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Longest word evaluated in fingerprints (default: largest within budget, at most 6).
    #[arg(long, global = true)]
    pub tau_cap: Option<usize>,
    /// Relative tolerance for invariant agreement.
    #[arg(long, global = true)]
    pub eps_inv: Option<f64>,
    /// Largest accepted certificate residual.
    #[arg(long, global = true)]
    pub eps_cert: Option<f64>,
    /// Relative eigenvalue gap below which eigenvalues count as degenerate.
    #[arg(long, global = true)]
    pub eps_deg: Option<f64>,
    /// Accept inputs that are only Hermitian (skip trace and positivity checks).
    #[arg(long, global = true)]
    pub no_validate: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a state file holds a density matrix.
    Validate { path: PathBuf },
    /// Print the invariant signature of a state.
    Fingerprint { path: PathBuf },
    /// Decide local unitary equivalence of two states.
    Compare { first: PathBuf, second: PathBuf },
    /// Apply seeded Haar-random local unitaries to a state.
    Orbit {
        path: PathBuf,
        /// Where to write the transformed state.
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating unitaries to this file.
        #[arg(long)]
        unitaries_out: Option<PathBuf>,
    },
    /// Search for local unitaries numerically (intended for local dimension up to 3).
    Oracle {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
    },
    /// Recompute the residual of the certificate in a compare report.
    Certify {
        report: PathBuf,
        first: PathBuf,
        second: PathBuf,
    },
}

/// What a command prints and how the process should exit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

impl Cli {
    pub fn tolerances(&self) -> Tolerances {
        let mut tol = Tolerances {
            tau_cap: self.tau_cap,
            ..Tolerances::default()
        };
        if let Some(x) = self.eps_inv {
            tol.eps_inv = x;
        }
        if let Some(x) = self.eps_cert {
            tol.eps_cert = x;
        }
        if let Some(x) = self.eps_deg {
            tol.eps_deg = x;
        }
        if let Some(s) = self.seed {
            tol.seed = s;
        }
        tol
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

fn complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn matrix_text(name: &str, m: &ComplexMatrix) -> String {
    let mut out = format!("{name}:\n");
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&z| complex(z)).collect();
        let _ = writeln!(out, "  [{}]", row.join(", "));
    }
    out
}

pub fn run(cli: &Cli) -> Output {
    let result = match &cli.command {
        Command::Validate { path } => return validate(cli, path),
        Command::Fingerprint { path } => cmd_fingerprint(cli, path),
        Command::Compare { first, second } => compare(cli, first, second),
        Command::Orbit {
            path,
            out,
            unitaries_out,
        } => orbit(cli, path, out, unitaries_out.as_deref()),
        Command::Oracle {
            first,
            second,
            restarts,
            iters,
        } => oracle(cli, first, second, *restarts, *iters),
        Command::Certify { report, first, second } => cmd_certify(cli, report, first, second),
    };
    result.unwrap_or_else(|e| Output {
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
        code: e.exit_code(),
    })
}

fn validate(cli: &Cli, path: &Path) -> Output {
    let tol = cli.tolerances();
    let checked = load_state(path, !cli.no_validate, &tol).and_then(|loaded| {
        let spec = spectral_decompose(&loaded.state, &tol)?;
        Ok((loaded, spec))
    });
    match checked {
        Ok((loaded, spec)) => {
            let stdout = if cli.json {
                to_json(&serde_json::json!({
                    "valid": true,
                    "input": loaded.digest,
                    "local_dim": spec.dim_local,
                    "rank": spec.rank(),
                    "eigenvalues": spec.eigenvalues,
                }))
            } else {
                format!(
                    "valid: local_dim {}, rank {}, {} degeneracy block(s)\n",
                    spec.dim_local,
                    spec.rank(),
                    spec.blocks.len()
                )
            };
            Output {
                stdout,
                stderr: String::new(),
                code: 0,
            }
        }
        Err(e) => {
            let stdout = if cli.json {
                to_json(&serde_json::json!({
                    "valid": false,
                    "error": e.to_string(),
                    "exit_code": e.exit_code(),
                }))
            } else {
                String::new()
            };
            Output {
                stdout,
                stderr: format!("invalid: {e}\n"),
                code: e.exit_code(),
            }
        }
    }
}

fn cmd_fingerprint(cli: &Cli, path: &Path) -> Result<Output, CliError> {
    let tol = cli.tolerances();
    let loaded = load_state(path, !cli.no_validate, &tol)?;
    let signature = fingerprint(&loaded.state, &tol, tol.tau_cap)?;
    let stdout = if cli.json {
        to_json(&FingerprintReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            input: loaded.digest,
            tolerances: tol,
            signature,
        })
    } else {
        let mut out = format!(
            "local_dim {}\nrank {}\ntau_cap {}\n",
            signature.dim_local, signature.rank, signature.tau_cap
        );
        for (s, j) in signature.power_traces.iter().enumerate() {
            let _ = writeln!(out, "J^{} = {j}", s + 1);
        }
        for entry in signature.balanced_words.iter().chain(&signature.block_invariants) {
            let _ = writeln!(out, "{} = {}", entry.key, complex(entry.value));
        }
        out
    };
    Ok(Output {
        stdout,
        ..Output::default()
    })
}

fn compare(cli: &Cli, first: &Path, second: &Path) -> Result<Output, CliError> {
    let tol = cli.tolerances();
    let a = load_state(first, !cli.no_validate, &tol)?;
    let b = load_state(second, !cli.no_validate, &tol)?;
    let verdict = decide(&a.state, &b.state, &tol)?;
    let code = match verdict {
        EquivalenceVerdict::Equivalent(_) => 0,
        EquivalenceVerdict::NotEquivalent(_) => 1,
        EquivalenceVerdict::Inconclusive(_) => 2,
    };
    let stdout = if cli.json {
        to_json(&VerdictReport::new(&verdict, &tol, vec![a.digest, b.digest]))
    } else {
        let mut out = format!("outcome: {}\n", verdict.outcome());
        match &verdict {
            EquivalenceVerdict::Equivalent(c) => {
                let _ = writeln!(out, "certificate residual: {:e}", c.residual);
                out.push_str(&matrix_text("u", &c.u));
                out.push_str(&matrix_text("w", &c.w));
            }
            EquivalenceVerdict::NotEquivalent(w) => {
                let _ = writeln!(
                    out,
                    "witness: {} ({:?}): {} vs {}",
                    w.invariant,
                    w.kind,
                    complex(w.first),
                    complex(w.second)
                );
            }
            EquivalenceVerdict::Inconclusive(r) => {
                let _ = writeln!(out, "reason: {}", r.code());
            }
        }
        out
    };
    Ok(Output {
        stdout,
        stderr: String::new(),
        code,
    })
}

fn orbit(cli: &Cli, path: &Path, out: &Path, unitaries_out: Option<&Path>) -> Result<Output, CliError> {
    let tol = cli.tolerances();
    let loaded = load_state(path, !cli.no_validate, &tol)?;
    let seed = cli.seed.unwrap_or(0);
    let n = loaded.state.dim_local();
    let u1 = haar_unitary(n, seed.wrapping_mul(2));
    let u2 = haar_unitary(n, seed.wrapping_mul(2).wrapping_add(1));
    let image = apply_local_unitary(&loaded.state, &u1, &u2, &tol)?;
    let source = loaded.file.label.clone().unwrap_or_else(|| path.display().to_string());
    write_text(out, &state_to_json(&image, Some(format!("orbit of {source} (seed {seed})"))))?;
    let pair = UnitaryPair {
        schema_version: SCHEMA_VERSION,
        seed,
        u1: matrix_to_doc(&u1),
        u2: matrix_to_doc(&u2),
    };
    if let Some(p) = unitaries_out {
        write_text(p, &to_json(&pair))?;
    }
    let stdout = if cli.json {
        to_json(&pair)
    } else {
        let mut text = format!("wrote {}\n", out.display());
        text.push_str(&matrix_text("U1", &u1));
        text.push_str(&matrix_text("U2", &u2));
        text
    };
    Ok(Output {
        stdout,
        ..Output::default()
    })
}

fn oracle(cli: &Cli, first: &Path, second: &Path, restarts: usize, iters: usize) -> Result<Output, CliError> {
    let tol = cli.tolerances();
    let a = load_state(first, !cli.no_validate, &tol)?;
    let b = load_state(second, !cli.no_validate, &tol)?;
    let mut stderr = String::new();
    if a.state.dim_local() > 3 {
        stderr.push_str("warning: the oracle is intended for local dimension up to 3\n");
    }
    let config = OracleConfig {
        restarts,
        max_iterations: iters,
        seed: cli.seed.unwrap_or(OracleConfig::default().seed),
        ..OracleConfig::default()
    };
    let result = brute_force_oracle(&a.state, &b.state, &config)?;
    let report = OracleReport::new(
        &result,
        restarts,
        iters,
        config.seed,
        config.tolerance,
        vec![a.digest, b.digest],
    );
    let stdout = if cli.json {
        to_json(&report)
    } else {
        format!(
            "converged: {}\nbest distance: {:e}\nrestarts used: {}\n",
            report.converged, report.best_distance, report.restarts_used
        )
    };
    Ok(Output {
        stdout,
        stderr,
        code: if result.converged { 0 } else { 1 },
    })
}

fn cmd_certify(cli: &Cli, report: &Path, first: &Path, second: &Path) -> Result<Output, CliError> {
    let bytes = read_bytes(report)?;
    let verdict: VerdictReport = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse(e.to_string()))?;
    let Some(cert) = verdict.certificate.as_ref() else {
        return Err(CliError::Usage(format!(
            "report {} carries no certificate (outcome {})",
            report.display(),
            verdict.outcome
        )));
    };
    let tol = verdict.tolerances.clone();
    let a = load_state(first, !cli.no_validate, &tol)?;
    let b = load_state(second, !cli.no_validate, &tol)?;
    let mut stderr = String::new();
    let digests = [&a.digest, &b.digest];
    for (recorded, actual) in verdict.inputs.iter().zip(digests) {
        if recorded.sha256 != actual.sha256 {
            let _ = writeln!(
                stderr,
                "warning: {} differs from the input recorded as {}",
                actual.path, recorded.path
            );
        }
    }
    let u = matrix_from_doc(&cert.u)?;
    let w = matrix_from_doc(&cert.w)?;
    let residual = certify(&a.state, &b.state, &u, &w, &tol)?;
    let accepted = residual <= tol.eps_cert;
    let stdout = if cli.json {
        to_json(&CertifyReport {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            residual,
            eps_cert: tol.eps_cert,
            accepted,
            inputs: vec![digest(report, &bytes), a.digest, b.digest],
        })
    } else {
        format!("residual: {residual:e}\naccepted: {accepted}\n")
    };
    Ok(Output {
        stdout,
        stderr,
        code: if accepted { 0 } else { 1 },
    })
}
