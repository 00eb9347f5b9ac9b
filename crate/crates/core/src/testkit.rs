//! Random states, Haar unitaries and a brute-force equivalence oracle.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_eigendecompose, kron, ComplexMatrix};
use crate::states::{validate_density, DensityMatrix};

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Haar-distributed unitary drawn from `rng`.
pub fn haar_unitary_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Haar-distributed `n x n` unitary, reproducible from `seed`.
pub fn haar_unitary(n: usize, seed: u64) -> ComplexMatrix {
    haar_unitary_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random state on `C^n (x) C^n` of the given rank.
///
/// `profile` lists the sizes of groups of equal eigenvalues and must sum to `rank`;
/// `None` draws `rank` distinct eigenvalues. Eigenvectors are columns of a Haar unitary.
pub fn random_density(n: usize, rank: usize, profile: Option<&[usize]>, seed: u64) -> Result<DensityMatrix> {
    let d = n * n;
    if n == 0 || rank == 0 || rank > d {
        return Err(Error::InvalidProfile(format!(
            "rank {rank} outside 1..={d} for local dimension {n}"
        )));
    }
    let groups: Vec<usize> = match profile {
        Some(p) => p.to_vec(),
        None => vec![1; rank],
    };
    if groups.is_empty() || groups.contains(&0) {
        return Err(Error::InvalidProfile("group sizes must be positive".into()));
    }
    let total: usize = groups.iter().sum();
    if total != rank {
        return Err(Error::InvalidProfile(format!(
            "profile covers {total} eigenvalues but the rank is {rank}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Flat Dirichlet weights, shared evenly within a group.
    let weights: Vec<f64> = groups.iter().map(|_| Exp1.sample(&mut rng)).collect();
    let sum: f64 = weights.iter().sum();
    let mut eigenvalues = Vec::with_capacity(d);
    for (&size, w) in groups.iter().zip(&weights) {
        eigenvalues.extend(std::iter::repeat_n(w / sum / size as f64, size));
    }
    eigenvalues.resize(d, 0.0);
    let v = haar_unitary_with(d, &mut rng);
    let lambda = DVector::from_iterator(d, eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)));
    let m = &v * ComplexMatrix::from_diagonal(&lambda) * v.adjoint();
    let m = (&m + m.adjoint()).unscale(2.0);
    validate_density(m, n, &Tolerances::default())
}

/// `exp(iH)` for Hermitian `H`.
pub fn exp_i_hermitian(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigendecompose(h, 1e-8)?;
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| Complex64::from_polar(1.0, x)),
    );
    Ok(&eig.eigenvectors * ComplexMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint())
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_distance: f64,
    /// `(U1, U2)` attaining `best_distance`.
    pub best_pair: (ComplexMatrix, ComplexMatrix),
    pub restarts_used: usize,
    pub converged: bool,
}

/// Tuning knobs of [`brute_force_oracle`].
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 2000,
            tolerance: 1e-6,
            seed: 0x0_7ac1e,
        }
    }
}

/// Hermitian generator from `n^2` real coordinates.
fn hermitian_from(params: &[f64], n: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        h[(i, i)] = Complex64::new(params[k], 0.0);
        k += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex64::new(params[k], params[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

fn residual_vector(target: &ComplexMatrix, rho: &ComplexMatrix, u1: &ComplexMatrix, u2: &ComplexMatrix) -> Vec<f64> {
    let k = kron(u1, u2);
    let diff = &k * rho * k.adjoint() - target;
    diff.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct Point {
    u1: ComplexMatrix,
    u2: ComplexMatrix,
}

impl Point {
    fn moved(&self, step: &[f64], n: usize) -> Result<Self> {
        let m = n * n;
        let g1 = exp_i_hermitian(&hermitian_from(&step[..m], n))?;
        let g2 = exp_i_hermitian(&hermitian_from(&step[m..], n))?;
        Ok(Self {
            u1: g1 * &self.u1,
            u2: g2 * &self.u2,
        })
    }
}

/// Minimizes `|(U1 (x) U2) rho (U1 (x) U2)^dagger - rho2|_F` by Levenberg-Marquardt
/// over the unitary group, from the identity and from Haar-random starts.
///
/// Search-based and independent of the invariant machinery; meant for small `n`.
pub fn brute_force_oracle(rho: &DensityMatrix, rho2: &DensityMatrix, config: &OracleConfig) -> Result<OracleResult> {
    let n = rho.dim_local();
    if rho2.dim_local() != n {
        return Err(Error::DimensionMismatch(format!(
            "states have local dimensions {n} and {}",
            rho2.dim_local()
        )));
    }
    let (a, b) = (rho.matrix(), rho2.matrix());
    let params = 2 * n * n;
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<OracleResult> = None;

    for restart in 0..config.restarts.max(1) {
        let mut x = if restart == 0 {
            Point {
                u1: ComplexMatrix::identity(n, n),
                u2: ComplexMatrix::identity(n, n),
            }
        } else {
            Point {
                u1: haar_unitary_with(n, &mut rng),
                u2: haar_unitary_with(n, &mut rng),
            }
        };
        let mut r = residual_vector(b, a, &x.u1, &x.u2);
        let mut mu = 1e-3;
        for _ in 0..config.max_iterations {
            if norm(&r) <= config.tolerance * 1e-2 || mu > 1e12 {
                break;
            }
            // Central-difference Jacobian in the tangent coordinates.
            let mut jac = vec![vec![0.0; params]; r.len()];
            let mut step = vec![0.0; params];
            for p in 0..params {
                step[p] = h;
                let plus = x.moved(&step, n)?;
                step[p] = -h;
                let minus = x.moved(&step, n)?;
                step[p] = 0.0;
                let rp = residual_vector(b, a, &plus.u1, &plus.u2);
                let rm = residual_vector(b, a, &minus.u1, &minus.u2);
                for (row, (p1, m1)) in jac.iter_mut().zip(rp.iter().zip(&rm)) {
                    row[p] = (p1 - m1) / (2.0 * h);
                }
            }
            let mut jtj = nalgebra::DMatrix::<f64>::zeros(params, params);
            let mut jtr = nalgebra::DVector::<f64>::zeros(params);
            for (row, ri) in jac.iter().zip(&r) {
                for i in 0..params {
                    jtr[i] += row[i] * ri;
                    for j in 0..params {
                        jtj[(i, j)] += row[i] * row[j];
                    }
                }
            }
            let current = norm(&r);
            let mut improved = false;
            while mu <= 1e12 {
                let mut lhs = jtj.clone();
                for i in 0..params {
                    lhs[(i, i)] += mu * (1.0 + jtj[(i, i)]);
                }
                let Some(delta) = lhs.lu().solve(&(-&jtr)) else {
                    mu *= 10.0;
                    continue;
                };
                let candidate = x.moved(delta.as_slice(), n)?;
                let rc = residual_vector(b, a, &candidate.u1, &candidate.u2);
                if norm(&rc) < current {
                    x = candidate;
                    r = rc;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                mu *= 10.0;
            }
            if !improved {
                break;
            }
        }
        let distance = norm(&r);
        if best.as_ref().is_none_or(|b| distance < b.best_distance) {
            best = Some(OracleResult {
                best_distance: distance,
                best_pair: (x.u1, x.u2),
                restarts_used: restart + 1,
                converged: distance <= config.tolerance,
            });
        } else if let Some(b) = best.as_mut() {
            b.restarts_used = restart + 1;
        }
        if distance <= config.tolerance * 1e-2 {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `|rho2 - (U1 (x) U2) rho (U1 (x) U2)^dagger|_F`.
pub fn orbit_distance(rho: &DensityMatrix, rho2: &DensityMatrix, u1: &ComplexMatrix, u2: &ComplexMatrix) -> f64 {
    let k = kron(u1, u2);
    frobenius(&(&k * rho.matrix() * k.adjoint() - rho2.matrix()))
}
