use std::collections::HashMap;

use itertools::Itertools;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::EnsembleSpec;
use crate::error::{invalid, Error, Result};
use crate::types::{
    for_each_composition, ln_biguint, ln_factorial, log_multinomial_counts, log_sum_over_types, multinomial_big,
    DEFAULT_TYPE_LIMIT,
};

/// Largest `Nl` for the big-rational paths.
pub const EXACT_RATIONAL_MAX_EDGES: usize = 60;

/// Largest `Nl` for enumerating all `(Nl)!` edge permutations.
pub const PERMUTATION_ORACLE_MAX_EDGES: usize = 8;

/// `Σ_x N_z(x) u(x) = l v(z)` for every `z`, with `Σ u = Σ v · l / r`.
pub fn is_consistent(ens: &EnsembleSpec, v: &[u64], u: &[u64]) -> bool {
    if v.len() != ens.num_symbols() || u.len() != ens.num_words() {
        return false;
    }
    let n: u64 = v.iter().sum();
    let m: u64 = u.iter().sum();
    if m * ens.r() as u64 != n * ens.l() as u64 {
        return false;
    }
    (0..ens.num_symbols()).all(|z| {
        let lhs: u64 = u.iter().enumerate().map(|(x, &c)| c * ens.letter_counts(x)[z]).sum();
        lhs == ens.l() as u64 * v[z]
    })
}

fn check_pair(ens: &EnsembleSpec, v: &[u64], u: &[u64]) -> Result<()> {
    if v.len() != ens.num_symbols() || u.len() != ens.num_words() {
        return invalid("type vectors have the wrong number of cells");
    }
    if v.iter().sum::<u64>() == 0 {
        return invalid("N must be positive");
    }
    if !is_consistent(ens, v, u) {
        return invalid("inconsistent type pair: sum_x N_z(x) u(x) != l v(z)");
    }
    Ok(())
}

/// `log E[N(v, u)] = log [ multinomial(N; v) multinomial(M; u) ∏_z (l v(z))! / (Nl)! ]`.
pub fn expected_type_count(ens: &EnsembleSpec, v: &[u64], u: &[u64]) -> Result<f64> {
    check_pair(ens, v, u)?;
    let l = ens.l() as u64;
    let n: u64 = v.iter().sum();
    Ok(log_multinomial_counts(v) + log_multinomial_counts(u) + v.iter().map(|&c| ln_factorial(l * c)).sum::<f64>()
        - ln_factorial(n * l))
}

fn factorial_big(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn check_rational_size(edges: usize) -> Result<()> {
    if edges > EXACT_RATIONAL_MAX_EDGES {
        return Err(Error::Guard {
            what: "Nl for exact rational arithmetic",
            size: edges as f64,
            limit: EXACT_RATIONAL_MAX_EDGES as f64,
        });
    }
    Ok(())
}

/// `E[N(v, u)]` as an exact rational. Rejects `Nl > 60`.
pub fn expected_type_count_exact(ens: &EnsembleSpec, v: &[u64], u: &[u64]) -> Result<BigRational> {
    check_pair(ens, v, u)?;
    let l = ens.l() as u64;
    let n: u64 = v.iter().sum();
    check_rational_size((n * l) as usize)?;
    let num = multinomial_big(v) * multinomial_big(u) * v.iter().map(|&c| factorial_big(l * c)).product::<BigUint>();
    Ok(BigRational::new(num.into(), factorial_big(n * l).into()))
}

/// Variable type implied by class totals `w`: `l v(z) = Σ_c w_c N_z(c)`.
fn implied_v(ens: &EnsembleSpec, w: &[u64]) -> Option<Vec<u64>> {
    let l = ens.l() as u64;
    (0..ens.num_symbols())
        .map(|z| {
            let t: u64 = ens.classes().iter().zip(w).map(|(c, &wc)| wc * c.composition[z]).sum();
            t.is_multiple_of(l).then_some(t / l)
        })
        .collect()
}

fn class_term(ens: &EnsembleSpec, w: &[u64], log_weights: &[f64], filter: Option<&[u64]>) -> f64 {
    let Some(v) = implied_v(ens, w) else {
        return f64::NEG_INFINITY;
    };
    if filter.is_some_and(|target| target != v.as_slice()) {
        return f64::NEG_INFINITY;
    }
    let l = ens.l() as u64;
    let n: u64 = v.iter().sum();
    log_multinomial_counts(&v)
        + log_multinomial_counts(w)
        + w.iter().zip(log_weights).map(|(&c, lw)| if c == 0 { 0.0 } else { c as f64 * lw }).sum::<f64>()
        + v.iter().map(|&c| ln_factorial(l * c)).sum::<f64>()
        - ln_factorial(n * l)
}

/// `log E[Z] = log Σ_{v,u} E[N(v,u)] ∏ f(x)^{u(x)}`.
///
/// Consistency depends on `u` only through the totals `w_c` per letter
/// composition class, and `Σ_{u ↦ w} multinomial(M; u) ∏ f^u =
/// multinomial(M; w) ∏_c F_c^{w_c}` with `F_c = Σ_{x ∈ c} f(x)`, so the sum
/// runs over class totals only.
pub fn exact_expected_z(ens: &EnsembleSpec, n_sites: usize) -> Result<f64> {
    exact_expected_z_with_limit(ens, n_sites, DEFAULT_TYPE_LIMIT)
}

pub fn exact_expected_z_with_limit(ens: &EnsembleSpec, n_sites: usize, type_limit: f64) -> Result<f64> {
    let m = ens.factor_count(n_sites)?;
    let lw: Vec<f64> = ens.classes().iter().map(|c| c.weight.ln()).collect();
    log_sum_over_types(m as u64, lw.len(), type_limit, |w| class_term(ens, w, &lw, None))
}

/// The part of `log E[Z]` with variable type exactly `v`.
pub fn exact_expected_z_given_v(ens: &EnsembleSpec, n_sites: usize, v: &[u64]) -> Result<f64> {
    let m = ens.factor_count(n_sites)?;
    if v.len() != ens.num_symbols() || v.iter().sum::<u64>() != n_sites as u64 {
        return invalid(format!("variable type must have {} cells summing to N", ens.num_symbols()));
    }
    let lw: Vec<f64> = ens.classes().iter().map(|c| c.weight.ln()).collect();
    log_sum_over_types(m as u64, lw.len(), DEFAULT_TYPE_LIMIT, |w| class_term(ens, w, &lw, Some(v)))
}

/// `log E[Z]` summing every factor type `u` on the support directly (no
/// class reduction). Small instances only.
pub fn exact_expected_z_full(ens: &EnsembleSpec, n_sites: usize) -> Result<f64> {
    let m = ens.factor_count(n_sites)?;
    let support = ens.support();
    let lf: Vec<f64> = support.iter().map(|&x| ens.f_values()[x].ln()).collect();
    let k = ens.num_symbols();
    let l = ens.l() as u64;
    let nl = (n_sites * ens.l()) as u64;
    log_sum_over_types(m as u64, support.len(), DEFAULT_TYPE_LIMIT, |u| {
        let mut v = vec![0u64; k];
        for (&x, &c) in support.iter().zip(u) {
            for (vz, nz) in v.iter_mut().zip(ens.letter_counts(x)) {
                *vz += c * nz;
            }
        }
        if v.iter().any(|t| t % l != 0) {
            return f64::NEG_INFINITY;
        }
        v.iter_mut().for_each(|t| *t /= l);
        log_multinomial_counts(&v)
            + log_multinomial_counts(u)
            + u.iter().zip(&lf).map(|(&c, f)| if c == 0 { 0.0 } else { c as f64 * f }).sum::<f64>()
            + v.iter().map(|&c| ln_factorial(l * c)).sum::<f64>()
            - ln_factorial(nl)
    })
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite factor value")
}

/// `E[Z]` as an exact rational (factor values are read as exact binary
/// fractions). Rejects `Nl > 60`.
pub fn exact_expected_z_rational(ens: &EnsembleSpec, n_sites: usize) -> Result<BigRational> {
    let m = ens.factor_count(n_sites)?;
    let l = ens.l() as u64;
    let nl = (n_sites * ens.l()) as u64;
    check_rational_size(nl as usize)?;
    let weights: Vec<BigRational> = ens.classes().iter().map(|c| c.words.iter().map(|&x| rational(ens.f_values()[x])).sum()).collect();
    let mut total = BigRational::zero();
    for_each_composition(m as u64, weights.len(), |w| {
        let Some(v) = implied_v(ens, w) else {
            return;
        };
        let mut term = BigRational::from_integer(
            (multinomial_big(&v) * multinomial_big(w) * v.iter().map(|&c| factorial_big(l * c)).product::<BigUint>()).into(),
        );
        for (f, &c) in weights.iter().zip(w) {
            term *= num_traits::pow(f.clone(), c as usize);
        }
        total += term;
    });
    Ok(total / BigRational::from_integer(factorial_big(nl).into()))
}

/// Result of averaging over every edge permutation.
#[derive(Debug, Clone)]
pub struct PermutationOracle {
    pub expected_z: BigRational,
    pub log_expected_z: f64,
    /// `((v, u), E[N(v, u)])` with `u` over all of `Xʳ`, sorted by key.
    pub counts: Vec<((Vec<u64>, Vec<u64>), BigRational)>,
}

/// Enumerates all `(Nl)!` matchings of variable sockets to factor sockets and
/// all `|X|^N` assignments. Rejects `Nl > 8` or more than 10⁸ evaluations.
pub fn brute_force_permutation_oracle(ens: &EnsembleSpec, n_sites: usize) -> Result<PermutationOracle> {
    let m = ens.factor_count(n_sites)?;
    let (l, r, k) = (ens.l(), ens.r(), ens.num_symbols());
    let edges = n_sites * l;
    if edges > PERMUTATION_ORACLE_MAX_EDGES {
        return Err(Error::Guard {
            what: "Nl for the permutation oracle",
            size: edges as f64,
            limit: PERMUTATION_ORACLE_MAX_EDGES as f64,
        });
    }
    let perms: u64 = (1..=edges as u64).product();
    let assignments = (k as f64).powi(n_sites as i32);
    if perms as f64 * assignments > 1e8 {
        return Err(Error::Guard { what: "(Nl)! |X|^N", size: perms as f64 * assignments, limit: 1e8 });
    }
    let assignments = assignments as usize;

    // Variable types and symbol digits of every assignment.
    let digits: Vec<Vec<usize>> = (0..assignments)
        .map(|mut a| {
            let mut d = vec![0; n_sites];
            for slot in d.iter_mut().rev() {
                *slot = a % k;
                a /= k;
            }
            d
        })
        .collect();

    // (assignment, sorted factor words) -> number of permutations.
    let mut tally: HashMap<(usize, Vec<usize>), u64> = HashMap::new();
    let mut socket_var = vec![0usize; edges];
    let mut words = vec![0usize; m];
    for perm in (0..edges).permutations(edges) {
        // Variable socket s sits on factor socket perm[s].
        for (s, &fs) in perm.iter().enumerate() {
            socket_var[fs] = s / l;
        }
        for (a, x) in digits.iter().enumerate() {
            for (j, w) in words.iter_mut().enumerate() {
                *w = socket_var[j * r..(j + 1) * r].iter().fold(0, |acc, &i| acc * k + x[i]);
            }
            let mut key = words.clone();
            key.sort_unstable();
            *tally.entry((a, key)).or_default() += 1;
        }
    }

    let denom = BigRational::from_integer(BigUint::from(perms).into());
    let f: Vec<BigRational> = ens.f_values().iter().map(|&x| rational(x)).collect();
    let mut grouped: HashMap<(Vec<u64>, Vec<u64>), BigUint> = HashMap::new();
    let mut total = BigRational::zero();
    for ((a, key), count) in tally {
        let mut v = vec![0u64; k];
        digits[a].iter().for_each(|&z| v[z] += 1);
        let mut u = vec![0u64; ens.num_words()];
        key.iter().for_each(|&x| u[x] += 1);
        let weight: BigRational = key.iter().fold(BigRational::one(), |acc, &x| acc * &f[x]);
        total += weight * BigRational::from_integer(BigUint::from(count).into());
        *grouped.entry((v, u)).or_default() += count;
    }
    let expected_z = total / &denom;
    let mut counts: Vec<((Vec<u64>, Vec<u64>), BigRational)> = grouped
        .into_iter()
        .map(|(key, c)| (key, BigRational::from_integer(c.into()) / &denom))
        .collect();
    counts.sort_by(|a, b| a.0.cmp(&b.0));
    let log_expected_z = log_rational(&expected_z);
    Ok(PermutationOracle { expected_z, log_expected_z, counts })
}

pub(crate) fn log_rational(x: &BigRational) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let num = x.numer().magnitude();
    let den = x.denom().magnitude();
    let direct = x.to_f64().unwrap_or(f64::NAN);
    if direct.is_finite() && direct > 1e-300 && direct < 1e300 {
        direct.ln()
    } else {
        ln_biguint(num) - ln_biguint(den)
    }
}
