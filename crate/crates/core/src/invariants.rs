//! Local unitary invariants of a density matrix.
//!
//! Three families are computed:
//!
//! * power traces `J^s = Tr(rho^s)` for `s = 1..N^2`, which fix the spectrum;
//! * word traces `Tr(A_i1 A_j1^dagger ... A_it A_jt^dagger)` (left side) and
//!   `Tr(A_i1^dagger A_j1 ...)` (right side) over the eigenvector coefficient matrices;
//! * degenerate-block sums, which add up word traces over every assignment of a
//!   block's indices and are therefore unchanged when the eigenvectors of a
//!   degenerate eigenvalue are remixed by a unitary.
//!
//! A word trace is insensitive to the phase of each eigenvector only when the word is
//! balanced (each index occurs equally often unconjugated and conjugated), so only
//! balanced words over nondegenerate indices enter a fingerprint.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::states::{spectral_decompose, DensityMatrix, SpectralDecomposition};

/// Which product a word letter `(i, j)` stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    /// `A_i A_j^dagger`, acting on the first subsystem.
    Left,
    /// `A_i^dagger A_j`, acting on the second subsystem.
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn tag(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }

    /// The factor a single letter denotes.
    pub fn factor(self, a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Side::Left => a * b.adjoint(),
            Side::Right => a.adjoint() * b,
        }
    }
}

/// An ordered product of letters, each letter a 0-based index pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub side: Side,
    pub letters: Vec<(usize, usize)>,
}

impl Word {
    pub fn new(side: Side, letters: Vec<(usize, usize)>) -> Self {
        Self { side, letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.letters.iter().map(|&(i, j)| i.max(j)).max()
    }

    pub fn rotated(&self, k: usize) -> Self {
        let mut letters = self.letters.clone();
        if !letters.is_empty() {
            let k = k % letters.len();
            letters.rotate_left(k);
        }
        Self { side: self.side, letters }
    }

    /// Lexicographically smallest cyclic rotation.
    pub fn canonical(&self) -> Self {
        (0..self.len().max(1))
            .map(|k| self.rotated(k))
            .min()
            .expect("at least one rotation")
    }

    pub fn is_balanced(&self) -> bool {
        let mut net: std::collections::BTreeMap<usize, i64> = Default::default();
        for &(i, j) in &self.letters {
            *net.entry(i).or_default() += 1;
            *net.entry(j).or_default() -= 1;
        }
        net.values().all(|&v| v == 0)
    }

    /// The word whose product is the adjoint of this one; its trace is the conjugate.
    pub fn adjoint(&self) -> Self {
        Self {
            side: self.side,
            letters: self.letters.iter().rev().map(|&(i, j)| (j, i)).collect(),
        }
    }

    /// Relabels index `k` as `map[k]`.
    pub fn relabel(&self, map: &[usize]) -> Self {
        Self {
            side: self.side,
            letters: self.letters.iter().map(|&(i, j)| (map[i], map[j])).collect(),
        }
    }
}

fn push_index(out: &mut String, k: usize) {
    let mut digits = [0u8; 20];
    let mut x = k + 1;
    let mut len = 0;
    while x > 0 || len == 0 {
        digits[len] = b'0' + (x % 10) as u8;
        x /= 10;
        len += 1;
    }
    out.extend(digits[..len].iter().rev().map(|&d| d as char));
}

/// Canonical text of `letters` on `side`, each index mapped through `map`.
fn word_key(side: Side, letters: &[(usize, usize)], map: &[usize]) -> String {
    let mut out = String::with_capacity(2 + 6 * letters.len());
    out.push(side.tag());
    out.push(':');
    for &(i, j) in letters {
        out.push('(');
        push_index(&mut out, map[i]);
        out.push(',');
        push_index(&mut out, map[j]);
        out.push(')');
    }
    out
}

/// Canonical text `L:(1,1)(2,2)`, indices 1-based.
impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let identity: Vec<usize> = (0..=self.max_index().unwrap_or(0)).collect();
        f.write_str(&word_key(self.side, &self.letters, &identity))
    }
}

fn check_indices(spec: &SpectralDecomposition, w: &Word) -> Result<()> {
    match w.max_index() {
        Some(m) if m >= spec.rank() => Err(Error::IndexOutOfRange {
            index: m + 1,
            rank: spec.rank(),
        }),
        _ => Ok(()),
    }
}

/// Trace of the ordered product a word denotes.
pub fn word_trace(spec: &SpectralDecomposition, w: &Word) -> Result<Complex64> {
    check_indices(spec, w)?;
    let n = spec.dim_local;
    let a = &spec.coeff_matrices;
    let mut product = linalg::identity(n);
    for &(i, j) in &w.letters {
        product *= w.side.factor(&a[i], &a[j]);
    }
    Ok(linalg::trace(&product))
}

/// All letter factors `G(i, j)` of one side, indexed `i * rank + j`.
pub(crate) fn factor_table(coeffs: &[ComplexMatrix], side: Side) -> Vec<ComplexMatrix> {
    coeffs
        .iter()
        .flat_map(|a| coeffs.iter().map(move |b| side.factor(a, b)))
        .collect()
}

/// Evaluates a stream of words, reusing the product of the prefix shared with the
/// previous word. Lexicographically sorted input shares long prefixes.
struct PrefixEvaluator<'a> {
    factors: &'a [ComplexMatrix],
    rank: usize,
    prefix_letters: Vec<usize>,
    /// `prefix_products[k]` is the product of the first `k + 1` prefix factors; entries
    /// past `prefix_letters.len()` are reusable scratch.
    prefix_products: Vec<ComplexMatrix>,
}

impl<'a> PrefixEvaluator<'a> {
    fn new(factors: &'a [ComplexMatrix], rank: usize) -> Self {
        Self {
            factors,
            rank,
            prefix_letters: Vec::new(),
            prefix_products: Vec::new(),
        }
    }

    fn trace(&mut self, letters: &[(usize, usize)]) -> Complex64 {
        let (&(li, lj), head) = letters.split_last().expect("nonempty word");
        let last = li * self.rank + lj;
        let shared = self
            .prefix_letters
            .iter()
            .zip(head)
            .take_while(|(&a, &(i, j))| a == i * self.rank + j)
            .count();
        self.prefix_letters.truncate(shared);
        for &(i, j) in &head[shared..] {
            let code = i * self.rank + j;
            let k = self.prefix_letters.len();
            if self.prefix_products.len() == k {
                let n = self.factors[code].nrows();
                self.prefix_products.push(ComplexMatrix::zeros(n, n));
            }
            if k == 0 {
                self.prefix_products[0].copy_from(&self.factors[code]);
            } else {
                let (done, rest) = self.prefix_products.split_at_mut(k);
                done[k - 1].mul_to(&self.factors[code], &mut rest[0]);
            }
            self.prefix_letters.push(code);
        }
        match self.prefix_letters.len() {
            0 => linalg::trace(&self.factors[last]),
            k => linalg::trace_of_product(&self.prefix_products[k - 1], &self.factors[last]),
        }
    }
}

/// Number of balanced letter sequences of length `len` over `n` indices, ignoring rotation:
/// `sum over multisets m of (len! / prod m_a!)^2`.
fn balanced_sequences(n: usize, len: usize) -> u128 {
    let binom = |t: usize, k: usize| -> u128 {
        let mut r: u128 = 1;
        for x in 0..k {
            r = r * (t - x) as u128 / (x as u128 + 1);
        }
        r
    };
    let mut f = vec![0u128; len + 1];
    f[0] = 1;
    for _ in 0..n {
        let mut g = vec![0u128; len + 1];
        for t in 0..=len {
            for m in 0..=t {
                let b = binom(t, m);
                g[t] = g[t].saturating_add(f[t - m].saturating_mul(b * b));
            }
        }
        f = g;
    }
    f[len]
}

fn euler_phi(mut x: usize) -> usize {
    let mut result = x;
    let mut p = 2;
    while p * p <= x {
        if x.is_multiple_of(p) {
            while x.is_multiple_of(p) {
                x /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if x > 1 {
        result -= result / x;
    }
    result
}

/// Exact number of balanced words of length `len` up to cyclic rotation (Burnside count).
pub fn balanced_word_count(n: usize, len: usize) -> u128 {
    if n == 0 || len == 0 {
        return 0;
    }
    let total: u128 = (1..=len)
        .filter(|d| len.is_multiple_of(*d))
        .map(|d| (euler_phi(len / d) as u128).saturating_mul(balanced_sequences(n, d)))
        .fold(0u128, |a, b| a.saturating_add(b));
    total / len as u128
}

/// Balanced words over `n` indices up to length `max_len`, one per rotation class.
///
/// Each word is the lexicographically minimal rotation of its class; output is ordered
/// by length and then lexicographically.
pub fn enumerate_balanced_words(
    n: usize,
    max_len: usize,
    side: Side,
    limit: u64,
) -> Result<Vec<Word>> {
    if n == 0 || max_len == 0 {
        return Ok(Vec::new());
    }
    let required: u128 = (1..=max_len).map(|l| balanced_word_count(n, l)).sum();
    if required > limit as u128 {
        return Err(Error::BudgetExceeded {
            required: u64::try_from(required).unwrap_or(u64::MAX),
            limit,
        });
    }
    let mut out = Vec::with_capacity(required as usize);
    for len in 1..=max_len {
        let mut walk = NecklaceWalk {
            n,
            len,
            codes: Vec::with_capacity(len),
            net: vec![0; n],
            excess: 0,
        };
        walk.extend(0, &mut |codes| {
            out.push(Word::new(side, codes.iter().map(|&c| (c / n, c % n)).collect()));
        });
    }
    Ok(out)
}

/// Lexicographic generation of necklaces (minimal rotations) over the `n^2` letters,
/// pruned to those that can still close up balanced.
struct NecklaceWalk {
    n: usize,
    len: usize,
    codes: Vec<usize>,
    /// Per index: occurrences as left letter minus occurrences as right letter.
    net: Vec<i64>,
    /// Sum of the positive entries of `net`.
    excess: i64,
}

impl NecklaceWalk {
    fn shift(&mut self, code: usize, sign: i64) {
        let (i, j) = (code / self.n, code % self.n);
        if i == j {
            return;
        }
        let before = self.net[i].max(0) + self.net[j].max(0);
        self.net[i] += sign;
        self.net[j] -= sign;
        self.excess += self.net[i].max(0) + self.net[j].max(0) - before;
    }

    /// Final position: only letters that balance the prefix can follow.
    fn close(&mut self, t: usize, period: usize, low: usize, emit: &mut dyn FnMut(&[usize])) {
        let n = self.n;
        let mut finish = |walk: &mut Self, code: usize| {
            let next = if t > 0 && code == walk.codes[t - period] { period } else { t + 1 };
            if walk.len.is_multiple_of(next) {
                walk.codes.push(code);
                emit(&walk.codes);
                walk.codes.pop();
            }
        };
        match self.excess {
            0 => {
                for i in 0..n {
                    let code = i * n + i;
                    if code >= low {
                        finish(self, code);
                    }
                }
            }
            1 => {
                let i = self.net.iter().position(|&v| v < 0).expect("negative entry balances excess");
                let j = self.net.iter().position(|&v| v > 0).expect("positive excess");
                let code = i * n + j;
                if code >= low {
                    finish(self, code);
                }
            }
            _ => {}
        }
    }

    /// `period` is the length of the shortest repeating unit of the current prefix.
    fn extend(&mut self, period: usize, emit: &mut dyn FnMut(&[usize])) {
        let t = self.codes.len();
        if t == self.len {
            if self.len.is_multiple_of(period) {
                emit(&self.codes);
            }
            return;
        }
        let remaining = (self.len - t) as i64;
        let low = if t == 0 { 0 } else { self.codes[t - period] };
        if remaining == 1 {
            self.close(t, period, low, emit);
            return;
        }
        for code in low..self.n * self.n {
            self.shift(code, 1);
            // Each later letter lowers the positive excess by at most one.
            if self.excess < remaining {
                let next = if t > 0 && code == self.codes[t - period] { period } else { t + 1 };
                self.codes.push(code);
                self.extend(next, emit);
                self.codes.pop();
            }
            self.shift(code, -1);
        }
    }
}

/// A permutation `p` of the slots `0..len` of a degenerate-block sum.
///
/// In slot `k` the conjugated factor carries the index of slot `(p[k] + 1) mod len`,
/// so the identity pattern is the chained sum `sum A_a A_b^dagger A_b A_c^dagger ... A_z A_a^dagger`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<usize>);

impl Pattern {
    pub fn identity(len: usize) -> Self {
        Self((0..len).collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &p in &images {
            if p >= images.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::PatternMismatch(format!(
                    "{images:?} is not a permutation of 0..{}",
                    images.len()
                )));
            }
        }
        if images.is_empty() {
            return Err(Error::PatternMismatch("empty pattern".into()));
        }
        Ok(Self(images))
    }

    /// Consecutive cycles with the given lengths, e.g. `[2, 1]` -> `(1 2)(3)`.
    pub fn with_cycle_type(parts: &[usize]) -> Self {
        let mut images = Vec::new();
        let mut start = 0;
        for &len in parts {
            for k in start..start + len {
                images.push(if k + 1 < start + len { k + 1 } else { start });
            }
            start += len;
        }
        Self(images)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// Slot whose index the conjugated factor of slot `k` carries.
    fn partner(&self, k: usize) -> usize {
        (self.0[k] + 1) % self.0.len()
    }
}

/// Cycle notation, 1-based: `(1)(2)`, `(1 2)(3)`.
impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut seen = vec![false; self.0.len()];
        for s in 0..self.0.len() {
            if seen[s] {
                continue;
            }
            write!(f, "(")?;
            let mut k = s;
            let mut first = true;
            while !seen[k] {
                seen[k] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}", k + 1)?;
                first = false;
                k = self.0[k];
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Integer partitions of `n` in lexicographic order of their descending part lists,
/// so the all-ones partition comes first.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, max_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in 1..=remaining.min(max_part) {
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// One representative pattern per cycle type of length `len`, identity first.
pub fn cycle_type_patterns(len: usize) -> Vec<Pattern> {
    partitions(len)
        .iter()
        .map(|parts| Pattern::with_cycle_type(parts))
        .collect()
}

/// Sum over all assignments of block indices to the slots of the pattern of the
/// corresponding word trace. Unchanged by any unitary remix of the block's eigenvectors.
pub fn block_invariant(
    spec: &SpectralDecomposition,
    block: &[usize],
    pattern: &Pattern,
    side: Side,
) -> Result<Complex64> {
    if block.is_empty() {
        return Err(Error::PatternMismatch("empty block".into()));
    }
    if let Some(&bad) = block.iter().find(|&&i| i >= spec.rank()) {
        return Err(Error::IndexOutOfRange {
            index: bad + 1,
            rank: spec.rank(),
        });
    }
    if pattern.is_empty() {
        return Err(Error::PatternMismatch("empty pattern".into()));
    }
    let coeffs: Vec<ComplexMatrix> = block.iter().map(|&i| spec.coeff_matrices[i].clone()).collect();
    let table = factor_table(&coeffs, side);
    Ok(block_sum(&table, block.len(), pattern, spec.dim_local))
}

fn block_sum(table: &[ComplexMatrix], r: usize, pattern: &Pattern, n: usize) -> Complex64 {
    let len = pattern.len();
    let mut assignment = vec![0usize; len];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let mut product = linalg::identity(n);
        for k in 0..len - 1 {
            product *= &table[assignment[k] * r + assignment[pattern.partner(k)]];
        }
        let k = len - 1;
        total += linalg::trace_of_product(
            &product,
            &table[assignment[k] * r + assignment[pattern.partner(k)]],
        );
        // Odometer over r^len assignments.
        let mut pos = 0;
        loop {
            if pos == len {
                return total;
            }
            assignment[pos] += 1;
            if assignment[pos] < r {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

/// `J^s = Tr(rho^s)` for `s = 1..N^2`, from the eigenvalues.
pub fn power_traces_from_spectrum(eigenvalues: &[f64], dim_local: usize) -> Vec<f64> {
    (1..=dim_local * dim_local)
        .map(|s| eigenvalues.iter().map(|&l| l.max(0.0).powi(s as i32)).sum())
        .collect()
}

pub fn power_traces(rho: &DensityMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    let eig = linalg::hermitian_eigendecompose_with(rho.matrix(), tol.eps_herm, tol.max_iterations)?;
    Ok(power_traces_from_spectrum(&eig.eigenvalues, rho.dim_local()))
}

/// A named invariant value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantEntry {
    pub key: String,
    pub value: Complex64,
}

/// Invariant values of one state, in a deterministic canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSignature {
    pub dim_local: usize,
    pub rank: usize,
    pub tau_cap: usize,
    pub eigenvalues: Vec<f64>,
    pub power_traces: Vec<f64>,
    pub balanced_words: Vec<InvariantEntry>,
    pub block_invariants: Vec<InvariantEntry>,
    /// Word-trace evaluations spent.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    PowerTrace,
    BalancedWord,
    BlockInvariant,
}

/// An invariant whose values on two states differ beyond tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub invariant: String,
    pub first: Complex64,
    pub second: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignatureComparison {
    Agree,
    Differ(Witness),
    /// The two signatures do not list the same invariants (different rank or block structure).
    Incomparable(String),
}

pub fn power_trace_key(s: usize) -> String {
    format!("J^{s}")
}

fn block_key(side: Side, block: &[usize], pattern: &Pattern) -> String {
    let members: Vec<String> = block.iter().map(|i| (i + 1).to_string()).collect();
    format!("{}:{{{}}}:{}", side.tag(), members.join(","), pattern)
}

impl InvariantSignature {
    /// First invariant, in canonical order, on which the signatures disagree.
    pub fn compare(&self, other: &Self, tol: &Tolerances) -> SignatureComparison {
        if self.power_traces.len() != other.power_traces.len() {
            return SignatureComparison::Incomparable("local dimensions differ".into());
        }
        for (s, (&a, &b)) in self.power_traces.iter().zip(&other.power_traces).enumerate() {
            let (a, b) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
            if !tol.invariants_agree(a, b) {
                return SignatureComparison::Differ(Witness {
                    kind: WitnessKind::PowerTrace,
                    invariant: power_trace_key(s + 1),
                    first: a,
                    second: b,
                });
            }
        }
        for (kind, mine, theirs) in [
            (WitnessKind::BalancedWord, &self.balanced_words, &other.balanced_words),
            (WitnessKind::BlockInvariant, &self.block_invariants, &other.block_invariants),
        ] {
            let same_keys = mine.len() == theirs.len() && mine.iter().zip(theirs).all(|(x, y)| x.key == y.key);
            if !same_keys {
                return SignatureComparison::Incomparable(format!(
                    "{kind:?} entries differ in rank, block structure or length cap"
                ));
            }
            for (x, y) in mine.iter().zip(theirs) {
                if !tol.invariants_agree(x.value, y.value) {
                    return SignatureComparison::Differ(Witness {
                        kind,
                        invariant: x.key.clone(),
                        first: x.value,
                        second: y.value,
                    });
                }
            }
        }
        SignatureComparison::Agree
    }
}

fn fingerprint_cost(singletons: usize, block_sizes: &[usize], tau: usize) -> u128 {
    let words: u128 = (1..=tau).map(|l| balanced_word_count(singletons, l)).sum();
    let blocks: u128 = block_sizes
        .iter()
        .flat_map(|&r| (1..=tau).map(move |l| (partitions(l).len() as u128) * (r as u128).pow(l as u32)))
        .sum();
    2 * (words + blocks)
}

/// Resolves the word-length cap: an explicit cap is clamped to `N^2` and must fit the
/// budget; otherwise the largest cap up to `min(N^2, 6)` that fits is chosen.
pub fn resolve_tau_cap(spec: &SpectralDecomposition, tol: &Tolerances, requested: Option<usize>) -> Result<usize> {
    let singletons = spec.singleton_indices().len();
    let block_sizes: Vec<usize> = spec.blocks.iter().map(|b| b.len()).filter(|&r| r > 1).collect();
    let n2 = spec.dim_local * spec.dim_local;
    let limit = tol.word_budget as u128;
    match requested {
        Some(cap) => {
            let cap = cap.clamp(1, n2);
            let cost = fingerprint_cost(singletons, &block_sizes, cap);
            if cost > limit {
                Err(Error::BudgetExceeded {
                    required: u64::try_from(cost).unwrap_or(u64::MAX),
                    limit: tol.word_budget,
                })
            } else {
                Ok(cap)
            }
        }
        None => {
            let top = n2.min(6);
            (1..=top)
                .rev()
                .find(|&cap| fingerprint_cost(singletons, &block_sizes, cap) <= limit)
                .ok_or_else(|| Error::BudgetExceeded {
                    required: u64::try_from(fingerprint_cost(singletons, &block_sizes, 1)).unwrap_or(u64::MAX),
                    limit: tol.word_budget,
                })
        }
    }
}

/// Signature of a decomposed state; see [`fingerprint`].
pub fn fingerprint_spectral(
    spec: &SpectralDecomposition,
    tol: &Tolerances,
    tau_cap: Option<usize>,
) -> Result<InvariantSignature> {
    let tau = resolve_tau_cap(spec, tol, tau_cap)?;
    let mut evaluations = 0u64;

    let singletons = spec.singleton_indices();
    let mut balanced_words = Vec::new();
    if !singletons.is_empty() {
        let coeffs: Vec<ComplexMatrix> = singletons.iter().map(|&i| spec.coeff_matrices[i].clone()).collect();
        let words = enumerate_balanced_words(singletons.len(), tau, Side::Left, tol.word_budget)?;
        balanced_words.reserve(2 * words.len());
        for side in Side::BOTH {
            let table = factor_table(&coeffs, side);
            let mut evaluator = PrefixEvaluator::new(&table, coeffs.len());
            for w in &words {
                let value = evaluator.trace(&w.letters);
                balanced_words.push(InvariantEntry {
                    key: word_key(side, &w.letters, &singletons),
                    value,
                });
            }
            evaluations += words.len() as u64;
        }
    }

    let mut block_invariants = Vec::new();
    for block in spec.blocks.iter().filter(|b| b.len() > 1) {
        let tables: Vec<Vec<ComplexMatrix>> = Side::BOTH
            .iter()
            .map(|&side| {
                let coeffs: Vec<ComplexMatrix> = block.iter().map(|&i| spec.coeff_matrices[i].clone()).collect();
                factor_table(&coeffs, side)
            })
            .collect();
        for len in 1..=tau {
            for pattern in cycle_type_patterns(len) {
                for (side, table) in Side::BOTH.iter().zip(&tables) {
                    block_invariants.push(InvariantEntry {
                        key: block_key(*side, block, &pattern),
                        value: block_sum(table, block.len(), &pattern, spec.dim_local),
                    });
                    evaluations += (block.len() as u64).pow(len as u32);
                }
            }
        }
    }

    Ok(InvariantSignature {
        dim_local: spec.dim_local,
        rank: spec.rank(),
        tau_cap: tau,
        eigenvalues: spec.eigenvalues.clone(),
        power_traces: power_traces_from_spectrum(&spec.eigenvalues, spec.dim_local),
        balanced_words,
        block_invariants,
        evaluations,
    })
}

/// Power traces, balanced word traces over nondegenerate indices, and degenerate-block
/// sums for every block of size > 1 and every cycle type up to the length cap.
pub fn fingerprint(rho: &DensityMatrix, tol: &Tolerances, tau_cap: Option<usize>) -> Result<InvariantSignature> {
    let spec = spectral_decompose(rho, tol)?;
    fingerprint_spectral(&spec, tol, tau_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use crate::states::validate_density;
    use nalgebra::DVector;
    use std::collections::BTreeSet;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| c(x, 0.0)),
        ))
    }

    fn unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    fn manual_spec(coeffs: Vec<ComplexMatrix>, eigenvalues: Vec<f64>, blocks: Vec<Vec<usize>>) -> SpectralDecomposition {
        SpectralDecomposition {
            dim_local: coeffs[0].nrows(),
            eigenvalues,
            coeff_matrices: coeffs,
            blocks,
        }
    }

    fn diagonal_pair() -> (SpectralDecomposition, SpectralDecomposition) {
        let rho = manual_spec(vec![unit(2, 0, 0), unit(2, 0, 1)], vec![0.5, 0.5], vec![vec![0, 1]]);
        let rho_prime = manual_spec(vec![unit(2, 0, 0), unit(2, 1, 0)], vec![0.5, 0.5], vec![vec![0, 1]]);
        (rho, rho_prime)
    }

    #[test]
    fn power_traces_of_simple_spectra() {
        let tol = Tolerances::default();
        let mixed = validate_density(diag(&[0.25; 4]), 2, &tol).unwrap();
        let j = power_traces(&mixed, &tol).unwrap();
        for (s, v) in j.iter().enumerate() {
            assert!((v - 4f64.powi(-(s as i32))).abs() < 1e-12);
        }
        let pure = validate_density(diag(&[0.0, 1.0, 0.0, 0.0]), 2, &tol).unwrap();
        assert!(power_traces(&pure, &tol).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let half = validate_density(diag(&[0.5, 0.5, 0.0, 0.0]), 2, &tol).unwrap();
        for (s, v) in power_traces(&half, &tol).unwrap().iter().enumerate() {
            assert!((v - 2f64.powi(-(s as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn word_traces_of_diagonal_example() {
        let (rho, _) = diagonal_pair();
        let t = |letters: Vec<(usize, usize)>| word_trace(&rho, &Word::new(Side::Left, letters)).unwrap();
        assert_eq!(t(vec![(0, 0)]), ONE);
        assert_eq!(t(vec![(0, 0), (0, 0)]), ONE);
        assert_eq!(t(vec![(0, 1), (1, 0)]), c(0.0, 0.0));
        assert_eq!(t(vec![(1, 0), (0, 1)]), c(0.0, 0.0));
        assert_eq!(t(vec![(1, 1), (1, 1)]), ONE);
        assert!(matches!(
            word_trace(&rho, &Word::new(Side::Left, vec![(0, 2)])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn bell_state_word_trace() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let spec = manual_spec(vec![diag(&[s, s])], vec![1.0], vec![vec![0]]);
        let v = word_trace(&spec, &Word::new(Side::Left, vec![(0, 0), (0, 0)])).unwrap();
        assert!((v - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn small_enumerations() {
        let w = enumerate_balanced_words(1, 3, Side::Left, 100).unwrap();
        let text: Vec<String> = w.iter().map(|w| w.to_string()).collect();
        assert_eq!(text, ["L:(1,1)", "L:(1,1)(1,1)", "L:(1,1)(1,1)(1,1)"]);
        let w = enumerate_balanced_words(2, 1, Side::Right, 100).unwrap();
        let text: Vec<String> = w.iter().map(|w| w.to_string()).collect();
        assert_eq!(text, ["R:(1,1)", "R:(2,2)"]);
    }

    /// Exhaustive listing of all letter sequences, filtered and deduplicated by rotation.
    fn brute_force_classes(n: usize, len: usize) -> BTreeSet<Vec<(usize, usize)>> {
        let letters: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let total = letters.len().pow(len as u32);
        let mut classes = BTreeSet::new();
        for mut code in 0..total {
            let mut seq = Vec::new();
            for _ in 0..len {
                seq.push(letters[code % letters.len()]);
                code /= letters.len();
            }
            let w = Word::new(Side::Left, seq);
            if w.is_balanced() {
                classes.insert(w.canonical().letters);
            }
        }
        classes
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for (n, cap) in [(2usize, 2usize), (2, 4), (3, 3)] {
            let listed = enumerate_balanced_words(n, cap, Side::Left, 1_000_000).unwrap();
            assert!(listed
                .windows(2)
                .all(|p| p[0].len() < p[1].len() || (p[0].len() == p[1].len() && p[0].letters < p[1].letters)));
            let fast: BTreeSet<Vec<(usize, usize)>> = listed.into_iter().map(|w| w.letters).collect();
            let slow: BTreeSet<Vec<(usize, usize)>> = (1..=cap).flat_map(|l| brute_force_classes(n, l)).collect();
            assert_eq!(fast, slow, "n={n} cap={cap}");
            let counted: u128 = (1..=cap).map(|l| balanced_word_count(n, l)).sum();
            assert_eq!(counted as usize, slow.len());
        }
    }

    #[test]
    fn enumeration_budget() {
        assert!(matches!(
            enumerate_balanced_words(9, 6, Side::Left, 1_000_000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn patterns_and_keys() {
        let p = cycle_type_patterns(3);
        let text: Vec<String> = p.iter().map(|p| p.to_string()).collect();
        assert_eq!(text, ["(1)(2)(3)", "(1 2)(3)", "(1 2 3)"]);
        assert_eq!(cycle_type_patterns(4).len(), 5);
        assert_eq!(cycle_type_patterns(6).len(), 11);
        assert!(Pattern::from_images(vec![0, 0]).is_err());
        assert_eq!(block_key(Side::Left, &[0, 1], &Pattern::identity(2)), "L:{1,2}:(1)(2)");
    }

    #[test]
    fn diagonal_block_invariants() {
        let (rho, rho_prime) = diagonal_pair();
        let id = Pattern::identity(2);
        let a = block_invariant(&rho, &[0, 1], &id, Side::Left).unwrap();
        let b = block_invariant(&rho_prime, &[0, 1], &id, Side::Left).unwrap();
        assert!((a - c(2.0, 0.0)).norm() < 1e-12);
        assert!((b - c(4.0, 0.0)).norm() < 1e-12);
        // The explicit four-term sum.
        let t = |letters: Vec<(usize, usize)>| word_trace(&rho, &Word::new(Side::Left, letters)).unwrap();
        let explicit = t(vec![(0, 0), (0, 0)]) + t(vec![(0, 1), (1, 0)]) + t(vec![(1, 0), (0, 1)]) + t(vec![(1, 1), (1, 1)]);
        assert!((explicit - a).norm() < 1e-15);
    }

    #[test]
    fn singleton_block_reduces_to_word_trace() {
        let (rho, _) = diagonal_pair();
        for pattern in cycle_type_patterns(3) {
            let v = block_invariant(&rho, &[1], &pattern, Side::Right).unwrap();
            let w = word_trace(&rho, &Word::new(Side::Right, vec![(1, 1); 3])).unwrap();
            assert!((v - w).norm() < 1e-15);
        }
        assert!(matches!(
            block_invariant(&rho, &[0, 5], &Pattern::identity(2), Side::Left),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn maximally_mixed_fingerprint() {
        let tol = Tolerances::default();
        let mixed = validate_density(diag(&[0.25; 4]), 2, &tol).unwrap();
        let sig = fingerprint(&mixed, &tol, None).unwrap();
        assert!(sig.balanced_words.is_empty());
        assert_eq!(sig.tau_cap, 4);
        for pair in sig.block_invariants.chunks(2) {
            assert!(pair[0].key.starts_with("L:") && pair[1].key.starts_with("R:"));
            assert!((pair[0].value - pair[1].value).norm() < 1e-12);
        }
    }

    #[test]
    fn fingerprints_separate_diagonal_pair() {
        let tol = Tolerances::default();
        let a = validate_density(diag(&[0.5, 0.5, 0.0, 0.0]), 2, &tol).unwrap();
        let b = validate_density(diag(&[0.5, 0.0, 0.5, 0.0]), 2, &tol).unwrap();
        let (sa, sb) = (fingerprint(&a, &tol, None).unwrap(), fingerprint(&b, &tol, None).unwrap());
        match sa.compare(&sb, &tol) {
            SignatureComparison::Differ(w) => {
                assert_eq!(w.kind, WitnessKind::BlockInvariant);
                assert_eq!(w.invariant, "L:{1,2}:(1)(2)");
                assert!((w.first - c(2.0, 0.0)).norm() < 1e-12);
                assert!((w.second - c(4.0, 0.0)).norm() < 1e-12);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }

    #[test]
    fn explicit_cap_over_budget_is_rejected() {
        let tol = Tolerances { word_budget: 10, ..Tolerances::default() };
        let mixed = validate_density(diag(&[0.25; 4]), 2, &tol).unwrap();
        assert!(matches!(fingerprint(&mixed, &tol, Some(4)), Err(Error::BudgetExceeded { .. })));
    }
}
