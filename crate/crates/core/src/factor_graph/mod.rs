//! Random `(l, r)`-regular factor-graph ensembles (configuration model).
//!
//! `N` variable nodes of degree `l` are matched uniformly at random with
//! `M = Nl/r` factor nodes of degree `r`; every factor applies the same
//! nonnegative `f: Xʳ → ℝ`. Words of `Xʳ` are indexed lexicographically with
//! position 1 as the most significant digit.

mod bethe;
mod exact;
mod lattice;
mod ldpc;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

pub use bethe::{
    assemble_fg_matrices, fg_asymptotic_estimate, fg_central_constant, solve_bethe, solve_bethe_with,
    BetheSolution, FgCentralResult, FgMatrices,
};
pub use exact::{
    brute_force_permutation_oracle, exact_expected_z, exact_expected_z_full, exact_expected_z_given_v,
    exact_expected_z_rational, exact_expected_z_with_limit, expected_type_count, expected_type_count_exact,
    is_consistent, PermutationOracle, EXACT_RATIONAL_MAX_EDGES, PERMUTATION_ORACLE_MAX_EDGES,
};
pub use lattice::{
    coefficient_matrix, lattice_density, lattice_step_report, lattice_step_s, lattice_step_with_reference,
    rank_mod_prime, smith_divisors, LatticeStep,
};
pub use ldpc::{ldpc_exact_codewords, ldpc_expected_codewords, weight_growth_rate, LdpcResult};

use crate::error::{invalid, Error, Result};
use crate::types::Alphabet;

/// Cap on `|X|ʳ`.
pub const MAX_WORDS: usize = 1 << 16;

/// How the factor function was specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FactorKind {
    /// 1 when an even number of letters differ from the first alphabet symbol
    /// (even Hamming weight on `{0, 1}`).
    Parity,
    /// 1 when all letters coincide.
    AllEqual,
    /// `f ≡ 1`.
    Uniform,
    /// Explicit value table.
    Table,
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorKind::Parity => "parity",
            FactorKind::AllEqual => "all-equal",
            FactorKind::Uniform => "uniform",
            FactorKind::Table => "table",
        };
        f.write_str(s)
    }
}

/// Words sharing one letter composition `(N_z(x))_z`. Consistency of a type
/// pair depends on `u` only through the class totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionClass {
    pub composition: Vec<u64>,
    /// Support words in this class.
    pub words: Vec<usize>,
    /// `Σ_{x in class} f(x)`, positive.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSpec {
    l: usize,
    r: usize,
    alphabet: Alphabet,
    kind: FactorKind,
    f: Vec<f64>,
    words: Vec<Vec<usize>>,
    /// `N_z(x)` per word.
    letter_counts: Vec<Vec<u64>>,
    support: Vec<usize>,
    classes: Vec<CompositionClass>,
}

impl EnsembleSpec {
    /// Builds an ensemble from the values of `f` on every word of `Xʳ`.
    pub fn new(l: usize, r: usize, alphabet: Alphabet, f: Vec<f64>) -> Result<Self> {
        Self::with_kind(l, r, alphabet, f, FactorKind::Table)
    }

    fn with_kind(l: usize, r: usize, alphabet: Alphabet, f: Vec<f64>, kind: FactorKind) -> Result<Self> {
        if l < 2 || r < 2 {
            return invalid(format!("degrees must be at least 2 (l = {l}, r = {r})"));
        }
        let k = alphabet.len();
        let size = (k as f64).powi(r as i32);
        if size > MAX_WORDS as f64 {
            return invalid(format!("|X|^r = {size} exceeds {MAX_WORDS}"));
        }
        let size = size as usize;
        if f.len() != size {
            return invalid(format!("factor table has {} entries, |X|^r = {size}", f.len()));
        }
        if let Some(v) = f.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return invalid(format!("factor values must be finite and nonnegative (got {v})"));
        }
        let words: Vec<Vec<usize>> = (0..size).map(|idx| word_digits(idx, k, r)).collect();
        let letter_counts: Vec<Vec<u64>> = words
            .iter()
            .map(|w| {
                let mut c = vec![0u64; k];
                w.iter().for_each(|&z| c[z] += 1);
                c
            })
            .collect();
        let support: Vec<usize> = (0..size).filter(|&x| f[x] > 0.0).collect();
        if support.is_empty() {
            return invalid("factor function vanishes everywhere (empty support)");
        }
        let mut grouped: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for &x in &support {
            grouped.entry(letter_counts[x].clone()).or_default().push(x);
        }
        let classes = grouped
            .into_iter()
            .map(|(composition, words)| {
                let weight = words.iter().map(|&x| f[x]).sum();
                CompositionClass { composition, words, weight }
            })
            .collect();
        Ok(EnsembleSpec { l, r, alphabet, kind, f, words, letter_counts, support, classes })
    }

    /// Binary parity check: `f(x) = 1` for even-weight words.
    pub fn parity(l: usize, r: usize) -> Result<Self> {
        Self::parity_on(l, r, Alphabet::binary())
    }

    pub fn parity_on(l: usize, r: usize, alphabet: Alphabet) -> Result<Self> {
        let k = alphabet.len();
        let f = table_from(k, r, |w| if w.iter().filter(|&&z| z != 0).count() % 2 == 0 { 1.0 } else { 0.0 })?;
        Self::with_kind(l, r, alphabet, f, FactorKind::Parity)
    }

    pub fn all_equal(l: usize, r: usize, alphabet: Alphabet) -> Result<Self> {
        let k = alphabet.len();
        let f = table_from(k, r, |w| if w.iter().all(|&z| z == w[0]) { 1.0 } else { 0.0 })?;
        Self::with_kind(l, r, alphabet, f, FactorKind::AllEqual)
    }

    pub fn uniform(l: usize, r: usize, alphabet: Alphabet) -> Result<Self> {
        let k = alphabet.len();
        let f = table_from(k, r, |_| 1.0)?;
        Self::with_kind(l, r, alphabet, f, FactorKind::Uniform)
    }

    /// Parses a value table: one word per line, `r` symbols then the value,
    /// whitespace separated. `#` starts a comment; words not listed get 0.
    pub fn from_table_str(l: usize, r: usize, alphabet: Alphabet, text: &str) -> Result<Self> {
        let k = alphabet.len();
        let size = (k as f64).powi(r as i32);
        if size > MAX_WORDS as f64 {
            return invalid(format!("|X|^r = {size} exceeds {MAX_WORDS}"));
        }
        let mut f = vec![0.0; size as usize];
        let mut seen = vec![false; size as usize];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != r + 1 {
                return invalid(format!("table line {}: expected {} fields, found {}", lineno + 1, r + 1, fields.len()));
            }
            let mut idx = 0usize;
            for sym in &fields[..r] {
                let value: f64 = sym
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("table line {}: bad symbol '{sym}'", lineno + 1)))?;
                let z = alphabet.index_of(value).ok_or_else(|| {
                    Error::InvalidInput(format!("table line {}: symbol {value} not in the alphabet", lineno + 1))
                })?;
                idx = idx * k + z;
            }
            let value: f64 = fields[r]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("table line {}: bad value '{}'", lineno + 1, fields[r])))?;
            if seen[idx] {
                return invalid(format!("table line {}: word listed twice", lineno + 1));
            }
            seen[idx] = true;
            f[idx] = value;
        }
        Self::with_kind(l, r, alphabet, f, FactorKind::Table)
    }

    pub fn from_table_file(l: usize, r: usize, alphabet: Alphabet, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read factor table {}: {e}", path.display())))?;
        Self::from_table_str(l, r, alphabet, &text)
    }

    /// `parity`, `all-equal`, `uniform` or `table:<path>`.
    pub fn from_name(l: usize, r: usize, alphabet: Alphabet, name: &str) -> Result<Self> {
        match name {
            "parity" => Self::parity_on(l, r, alphabet),
            "all-equal" => Self::all_equal(l, r, alphabet),
            "uniform" => Self::uniform(l, r, alphabet),
            _ => match name.strip_prefix("table:") {
                Some(path) => Self::from_table_file(l, r, alphabet, Path::new(path)),
                None => invalid(format!("unknown factor '{name}' (expected parity, all-equal, uniform or table:<path>)")),
            },
        }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn kind(&self) -> &FactorKind {
        &self.kind
    }

    pub fn num_symbols(&self) -> usize {
        self.alphabet.len()
    }

    pub fn num_words(&self) -> usize {
        self.f.len()
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    /// Symbol indices of word `x`.
    pub fn word(&self, x: usize) -> &[usize] {
        &self.words[x]
    }

    /// `N_z(x)` for every symbol `z`.
    pub fn letter_counts(&self, x: usize) -> &[u64] {
        &self.letter_counts[x]
    }

    /// Support words in lexicographic order.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn classes(&self) -> &[CompositionClass] {
        &self.classes
    }

    /// `M = Nl/r`, or an error when `r ∤ Nl`.
    pub fn factor_count(&self, n_sites: usize) -> Result<usize> {
        if n_sites == 0 || !(n_sites * self.l).is_multiple_of(self.r) {
            return Err(Error::Inadmissible { n: n_sites, l: self.l, r: self.r });
        }
        Ok(n_sites * self.l / self.r)
    }

    /// Human-readable label of word `x`, e.g. `(0,1,1)`.
    pub fn word_label(&self, x: usize) -> String {
        let parts: Vec<String> = self.words[x].iter().map(|&z| format_symbol(self.alphabet.value(z))).collect();
        format!("({})", parts.join(","))
    }
}

pub(crate) fn format_symbol(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn word_digits(mut idx: usize, k: usize, r: usize) -> Vec<usize> {
    let mut d = vec![0; r];
    for slot in d.iter_mut().rev() {
        *slot = idx % k;
        idx /= k;
    }
    d
}

fn table_from(k: usize, r: usize, f: impl Fn(&[usize]) -> f64) -> Result<Vec<f64>> {
    let size = (k as f64).powi(r as i32);
    if size > MAX_WORDS as f64 {
        return invalid(format!("|X|^r = {size} exceeds {MAX_WORDS}"));
    }
    Ok((0..size as usize).map(|idx| f(&word_digits(idx, k, r))).collect())
}
