//! Combinatorics over types: alphabets, probability measures, type vectors,
//! multinomial coefficients (log-domain and exact big-integer), entropy, the
//! local (Gaussian) approximation of a multinomial, and type enumeration.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest total accepted by the exact big-integer multinomial.
pub const EXACT_MULTINOMIAL_MAX_N: u64 = 2000;

/// Default cap on the number of types an enumeration may visit.
pub const DEFAULT_TYPE_LIMIT: f64 = 1e8;

/// Tolerance on `Σ ν = 1` for a [`ProbMeasure`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Finite, ordered set of distinct real symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    values: Vec<f64>,
}

impl Alphabet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("alphabet must be nonempty");
        }
        for (i, a) in values.iter().enumerate() {
            if !a.is_finite() {
                return invalid(format!("alphabet symbol {a} is not finite"));
            }
            if values[..i].contains(a) {
                return invalid(format!("alphabet symbol {a} repeated"));
            }
        }
        Ok(Alphabet { values })
    }

    /// `{+1, -1}` in that order.
    pub fn spins() -> Self {
        Alphabet { values: vec![1.0, -1.0] }
    }

    /// `{0, 1}` in that order.
    pub fn binary() -> Self {
        Alphabet { values: vec![0.0, 1.0] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == value)
    }
}

/// Normalized nonnegative weights over an indexed set of symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMeasure {
    weights: Vec<f64>,
}

impl ProbMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("probability measure over an empty set");
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return invalid(format!("probability weight {w} is negative or non-finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return invalid(format!("probability weights sum to {total}, not 1"));
        }
        Ok(ProbMeasure { weights })
    }

    /// Normalizes nonnegative weights.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() || weights.iter().any(|w| *w < 0.0) {
            return invalid("cannot normalize weights: need nonnegative entries with positive finite sum");
        }
        Ok(ProbMeasure { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    /// Normalizes log-weights with max subtraction; `-inf` entries get zero mass.
    pub fn from_log_weights(log_w: &[f64]) -> Result<Self> {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return invalid("all log-weights are -inf or non-finite");
        }
        Self::from_unnormalized(log_w.iter().map(|l| (l - max).exp()).collect())
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0);
        ProbMeasure { weights: vec![1.0 / len as f64; len] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// Sup-norm distance to another measure on the same set.
    pub fn distance_inf(&self, other: &ProbMeasure) -> f64 {
        self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ProbMeasure {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// Nonnegative integer counts over an indexed set of cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeVector {
    counts: Vec<u64>,
    total: u64,
}

impl TypeVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        TypeVector { counts, total }
    }

    /// Checks the counts against an expected total.
    pub fn with_total(counts: Vec<u64>, total: u64) -> Result<Self> {
        let t = Self::new(counts);
        if t.total != total {
            return invalid(format!("type counts sum to {}, expected {total}", t.total));
        }
        Ok(t)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    /// Empirical measure `counts / total`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

const LOG_FACTORIAL_TABLE: usize = 256;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LOG_FACTORIAL_TABLE);
        let mut acc = 0.0_f64;
        t.push(0.0);
        for k in 1..LOG_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `log n!`: a table for small `n`, the Stirling series beyond (accurate to
/// double precision for `n >= 256`).
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LOG_FACTORIAL_TABLE {
        return log_factorial_table()[n as usize];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    x * x.ln() - x + 0.5 * (2.0 * PI * x).ln() + series
}

/// `log N!/∏ counts_i!` by log-factorials.
pub fn log_multinomial(counts: &TypeVector) -> f64 {
    log_multinomial_counts(counts.counts())
}

pub(crate) fn log_multinomial_counts(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    ln_factorial(n) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// Exact `N!/∏ counts_i!` as a big integer. Rejects `N > 2000`.
pub fn multinomial_exact(counts: &TypeVector) -> Result<BigUint> {
    if counts.total() > EXACT_MULTINOMIAL_MAX_N {
        return Err(Error::Guard {
            what: "N for exact multinomial",
            size: counts.total() as f64,
            limit: EXACT_MULTINOMIAL_MAX_N as f64,
        });
    }
    Ok(multinomial_big(counts.counts()))
}

/// Unguarded exact multinomial; each step `prev * C(a + j, j)` stays integral.
pub(crate) fn multinomial_big(counts: &[u64]) -> BigUint {
    let mut result = BigUint::one();
    let mut running: u64 = 0;
    for &c in counts {
        for j in 1..=c {
            running += 1;
            result *= running;
            result /= j;
        }
    }
    result
}

/// `log x` for an arbitrarily large positive integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * LN_2
}

/// `log` of the exact multinomial coefficient (big-integer path).
pub fn log_multinomial_exact(counts: &TypeVector) -> Result<f64> {
    Ok(ln_biguint(&multinomial_exact(counts)?))
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(nu: &ProbMeasure) -> f64 {
    entropy_of(nu.as_slice())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Log of the local approximation of `multinomial(N; Nν + √N v)`:
///
/// `log[√(2πN) / ∏ √(2πNν(x))] + N H(ν) − √N Σ v(x) log ν(x) − ½ Σ v(x)²/ν(x)`.
///
/// Requires `ν > 0` everywhere and `Σ v = 0`.
pub fn local_approx_log_multinomial(nu: &ProbMeasure, v: &[f64], n: u64) -> Result<f64> {
    if v.len() != nu.len() {
        return invalid("perturbation and measure have different lengths");
    }
    if let Some(p) = nu.as_slice().iter().find(|p| **p <= 0.0) {
        return invalid(format!("local approximation needs a strictly positive measure (found {p})"));
    }
    let s: f64 = v.iter().sum();
    if s.abs() > 1e-12 {
        return invalid(format!("perturbation must sum to zero (sums to {s})"));
    }
    if n == 0 {
        return invalid("N must be positive");
    }
    let nf = n as f64;
    let two_pi_n = 2.0 * PI * nf;
    let mut out = 0.5 * two_pi_n.ln() + nf * entropy(nu);
    for (&p, &vx) in nu.as_slice().iter().zip(v) {
        out -= 0.5 * (two_pi_n * p).ln();
        out -= nf.sqrt() * vx * p.ln();
        out -= 0.5 * vx * vx / p;
    }
    Ok(out)
}

/// Number of types of total `n` over `cells` cells, `C(n + cells − 1, cells − 1)`,
/// as a float (may exceed `u64`).
pub fn count_types(n: u64, cells: usize) -> f64 {
    if cells == 0 {
        return 0.0;
    }
    let k = (cells - 1) as u64;
    (ln_factorial(n + k) - ln_factorial(n) - ln_factorial(k)).exp().round()
}

fn check_type_limit(n: u64, cells: usize, limit: f64) -> Result<()> {
    if cells == 0 {
        return invalid("type enumeration needs at least one cell");
    }
    let count = count_types(n, cells);
    if count > limit {
        return Err(Error::Guard { what: "number of types", size: count, limit });
    }
    Ok(())
}

/// Every type of total `n` over `cells` cells, in lexicographic order.
/// Rejects enumerations with more than 10⁸ types.
pub fn enumerate_types(n: u64, cells: usize) -> Result<TypeIter> {
    enumerate_types_with_limit(n, cells, DEFAULT_TYPE_LIMIT)
}

pub fn enumerate_types_with_limit(n: u64, cells: usize, limit: f64) -> Result<TypeIter> {
    check_type_limit(n, cells, limit)?;
    Ok(TypeIter::new(n, cells))
}

/// Lexicographic stream of compositions; see [`enumerate_types`].
#[derive(Debug, Clone)]
pub struct TypeIter {
    current: Option<Vec<u64>>,
}

impl TypeIter {
    fn new(n: u64, cells: usize) -> Self {
        let mut first = vec![0; cells];
        first[cells - 1] = n;
        TypeIter { current: Some(first) }
    }
}

/// Advances a composition to its lexicographic successor; false at the end.
pub(crate) fn next_composition(c: &mut [u64]) -> bool {
    let k = c.len();
    let Some(p) = (1..k).rev().find(|&j| c[j] > 0) else {
        return false;
    };
    let t = c[p] - 1;
    c[p] = 0;
    c[p - 1] += 1;
    c[k - 1] = t;
    true
}

impl Iterator for TypeIter {
    type Item = TypeVector;

    fn next(&mut self) -> Option<TypeVector> {
        let cur = self.current.as_mut()?;
        let out = TypeVector::new(cur.clone());
        if !next_composition(cur) {
            self.current = None;
        }
        Some(out)
    }
}

/// Calls `visit` with every composition of `n` into `cells` parts, in
/// lexicographic order, reusing one buffer.
pub(crate) fn for_each_composition(n: u64, cells: usize, mut visit: impl FnMut(&[u64])) {
    let mut c = vec![0; cells];
    c[cells - 1] = n;
    loop {
        visit(&c);
        if !next_composition(&mut c) {
            break;
        }
    }
}

/// Folds `visit` over all compositions of `n` into `cells` parts (after the
/// limit check). Work is split over the first coordinate and the partial
/// accumulators are merged in a fixed order, so the result does not depend
/// on the thread count.
pub(crate) fn fold_over_types<A, I, V, M>(n: u64, cells: usize, limit: f64, init: I, visit: V, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &[u64]) + Sync,
    M: Fn(&mut A, A),
{
    check_type_limit(n, cells, limit)?;
    let chunk = |first: u64| -> A {
        let mut acc = init();
        if cells == 1 {
            visit(&mut acc, &[n]);
            return acc;
        }
        let mut buf = vec![0u64; cells];
        buf[0] = first;
        for_each_composition(n - first, cells - 1, |rest| {
            buf[1..].copy_from_slice(rest);
            visit(&mut acc, &buf);
        });
        acc
    };
    let firsts: Vec<u64> = if cells == 1 { vec![n] } else { (0..=n).collect() };
    #[cfg(feature = "parallel")]
    let parts: Vec<A> = {
        use rayon::prelude::*;
        firsts.par_iter().map(|&f| chunk(f)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<A> = firsts.iter().map(|&f| chunk(f)).collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    Ok(total)
}

/// `log Σ exp(term(v))` over all compositions of `n` into `cells` parts.
pub(crate) fn log_sum_over_types<F>(n: u64, cells: usize, limit: f64, term: F) -> Result<f64>
where
    F: Fn(&[u64]) -> f64 + Sync,
{
    let acc = fold_over_types(n, cells, limit, LogSumExp::new, |acc, v| acc.push(term(v)), |a, b| a.merge(&b))?;
    Ok(acc.value())
}

/// Streaming `log Σ exp(x_i)` with a running maximum.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    /// `-inf` when nothing was pushed.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

impl FromIterator<f64> for LogSumExp {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = LogSumExp::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_multinomial_small_cases() {
        let t = TypeVector::new(vec![2, 2]);
        assert!((log_multinomial(&t) - 6f64.ln()).abs() < 1e-14);
        assert_eq!(log_multinomial(&TypeVector::new(vec![7, 0, 0])), 0.0);
        assert_eq!(log_multinomial_exact(&TypeVector::new(vec![7, 0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn central_binomial_100() {
        let t = TypeVector::new(vec![50, 50]);
        let exact = multinomial_exact(&t).unwrap();
        assert_eq!(exact.to_string(), "100891344545564193334812497256");
        assert!((log_multinomial(&t) - 66.783842).abs() < 1e-6);
        assert!((ln_biguint(&exact) - log_multinomial(&t)).abs() < 1e-12);
    }

    #[test]
    fn exact_path_guard() {
        let t = TypeVector::new(vec![1001, 1000]);
        assert!(matches!(multinomial_exact(&t), Err(Error::Guard { .. })));
        assert!(multinomial_exact(&TypeVector::new(vec![1000, 1000])).is_ok());
    }

    #[test]
    fn ln_factorial_crosses_table_boundary_smoothly() {
        let direct: f64 = (1..=300u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(300) - direct).abs() < 1e-10);
        let d255: f64 = (1..=255u64).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(255) - d255).abs() < 1e-11);
        assert!((ln_factorial(256) - ln_factorial(255) - 256f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ln_biguint_large() {
        let big = multinomial_exact(&TypeVector::new(vec![1000, 1000])).unwrap();
        let lg = log_multinomial(&TypeVector::new(vec![1000, 1000]));
        assert!(((ln_biguint(&big) - lg) / lg).abs() < 1e-13);
    }

    #[test]
    fn entropy_examples() {
        assert!((ProbMeasure::uniform(2).entropy() - LN_2).abs() < 1e-15);
        assert_eq!(ProbMeasure::new(vec![1.0, 0.0]).unwrap().entropy(), 0.0);
        let p = ProbMeasure::new(vec![0.25, 0.75]).unwrap();
        let direct = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((p.entropy() - direct).abs() < 1e-15);
        assert!((p.entropy() - 0.5623351).abs() < 1e-7);
    }

    #[test]
    fn measure_validation() {
        assert!(ProbMeasure::new(vec![0.5, 0.6]).is_err());
        assert!(ProbMeasure::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbMeasure::new(vec![]).is_err());
        assert!(ProbMeasure::from_log_weights(&[0.0, f64::NEG_INFINITY]).unwrap()[1] == 0.0);
    }

    #[test]
    fn alphabet_validation() {
        assert!(Alphabet::new(vec![1.0, 1.0]).is_err());
        assert!(Alphabet::new(vec![f64::NAN]).is_err());
        assert!(Alphabet::new(vec![]).is_err());
        assert_eq!(Alphabet::spins().index_of(-1.0), Some(1));
    }

    #[test]
    fn local_approx_central_binomial() {
        let nu = ProbMeasure::uniform(2);
        let approx = local_approx_log_multinomial(&nu, &[0.0, 0.0], 100).unwrap();
        let closed = 100.0 * LN_2 + 0.5 * (2.0 / (100.0 * PI)).ln();
        assert!((approx - closed).abs() < 1e-12);
        assert!((approx - 66.786342).abs() < 1e-6);
    }

    #[test]
    fn local_approx_rejects_bad_inputs() {
        let nu = ProbMeasure::new(vec![1.0, 0.0]).unwrap();
        assert!(local_approx_log_multinomial(&nu, &[0.0, 0.0], 10).is_err());
        let nu = ProbMeasure::uniform(2);
        assert!(local_approx_log_multinomial(&nu, &[0.1, 0.0], 10).is_err());
    }

    /// The quadratic coefficient ½ is what matches exact binomials off-center.
    #[test]
    fn local_approx_quadratic_coefficient_is_half() {
        let n = 10_000u64;
        let nu = ProbMeasure::uniform(2);
        // k = N/2 + √N v with √N = 100 and v = 0.5 → k = 5050.
        let v = [-0.5, 0.5];
        let exact = log_multinomial(&TypeVector::new(vec![4950, 5050]));
        let approx = local_approx_log_multinomial(&nu, &v, n).unwrap();
        assert!((exact - approx).abs() < 1e-3, "exact {exact} approx {approx}");
        // Without the ½ the Gaussian width is off by √2: error ~ 0.5 nats.
        let wrong = approx - 0.5 * v.iter().map(|x| x * x / 0.5).sum::<f64>();
        assert!((exact - wrong).abs() > 0.4);
    }

    #[test]
    fn enumeration_small() {
        let all: Vec<Vec<u64>> = enumerate_types(2, 2).unwrap().map(|t| t.counts().to_vec()).collect();
        assert_eq!(all, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        let zero: Vec<_> = enumerate_types(0, 3).unwrap().collect();
        assert_eq!(zero, vec![TypeVector::new(vec![0, 0, 0])]);
        assert_eq!(enumerate_types(4, 3).unwrap().count(), 15);
    }

    #[test]
    fn enumeration_is_complete_and_sorted() {
        for n in 0..=8u64 {
            for cells in 1..=4usize {
                let all: Vec<TypeVector> = enumerate_types(n, cells).unwrap().collect();
                assert_eq!(all.len() as f64, count_types(n, cells));
                assert!(all.iter().all(|t| t.total() == n && t.cells() == cells));
                assert!(all.windows(2).all(|w| w[0].counts() < w[1].counts()));
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(enumerate_types(1000, 10), Err(Error::Guard { .. })));
        assert!(enumerate_types_with_limit(1000, 10, 1e30).is_ok());
    }

    #[test]
    fn log_sum_over_types_is_multinomial_theorem() {
        // Σ_v multinomial(v) = cells^N.
        let v = log_sum_over_types(12, 3, 1e8, log_multinomial_counts).unwrap();
        assert!((v - 12.0 * 3f64.ln()).abs() < 1e-12);
        let one = log_sum_over_types(5, 1, 1e8, log_multinomial_counts).unwrap();
        assert_eq!(one, 0.0);
    }

    #[test]
    fn logsumexp_merge_order_independent() {
        let xs = [-3.0, 10.0, 2.5, f64::NEG_INFINITY, 7.0];
        let direct: LogSumExp = xs.iter().copied().collect();
        let mut a: LogSumExp = xs[..2].iter().copied().collect();
        let b: LogSumExp = xs[2..].iter().copied().collect();
        a.merge(&b);
        assert!((a.value() - direct.value()).abs() < 1e-14);
        assert_eq!(LogSumExp::new().value(), f64::NEG_INFINITY);
    }
}
