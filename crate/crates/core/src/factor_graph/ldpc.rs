//! Expected number of codewords of regular LDPC ensembles: the parity-check
//! ensemble on `{0, 1}`, optionally resolved by weight fraction `ω`.
//!
//! At fixed `ν = (1 − ω, ω)` the best factor measure is the tilt
//! `μ_t(x) ∝ f(x) e^{t·wt(x)}` with mean word weight `rω`, which gives the
//! growth rate `G(ω)`. The constant factor combines the ensemble constant at
//! that point with a local limit for the weight: its variance `σ²` comes from
//! the variable-type covariance and its lattice step from the parity of the
//! support weights.

use num_integer::Integer;
use serde::Serialize;

use super::bethe::{assemble_fg_matrices, fg_central_constant, solve_bethe};
use super::exact::{exact_expected_z, exact_expected_z_given_v};
use super::lattice::lattice_step_s;
use super::EnsembleSpec;
use crate::error::{invalid, Error, Result};
use crate::types::{entropy_of, LogSumExp, ProbMeasure};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpcResult {
    pub n_sites: usize,
    /// Codeword weight `round(ωN)` when a weight fraction was given.
    pub weight: Option<u64>,
    /// `log E[number of codewords]` (of weight `weight`, if set).
    pub log_count: f64,
    /// `F` (total) or `G(w/N)` (fixed weight).
    pub growth_rate: f64,
    /// `log_count − N · growth_rate`.
    pub log_constant: f64,
}

fn word_weight(ens: &EnsembleSpec, x: usize) -> u64 {
    ens.letter_counts(x)[1]
}

/// Tilted factor measure with mean weight `target`, or `None` when the
/// target is not strictly inside the range of support weights.
fn tilted_measure(ens: &EnsembleSpec, target: f64) -> Option<Vec<f64>> {
    let support = ens.support();
    let weights: Vec<f64> = support.iter().map(|&x| word_weight(ens, x) as f64).collect();
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(target > lo && target < hi) {
        return None;
    }
    let lf: Vec<f64> = support.iter().map(|&x| ens.f_values()[x].ln()).collect();
    let measure = |t: f64| -> Vec<f64> {
        let logs: Vec<f64> = lf.iter().zip(&weights).map(|(f, w)| f + t * (w - target)).collect();
        let z: LogSumExp = logs.iter().copied().collect();
        let z = z.value();
        logs.iter().map(|x| (x - z).exp()).collect()
    };
    let mean = |t: f64| measure(t).iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>();
    let (mut a, mut b) = (-1.0, 1.0);
    while mean(a) > target && a > -1e4 {
        a *= 2.0;
    }
    while mean(b) < target && b < 1e4 {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if mean(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    let p = measure(0.5 * (a + b));
    let mut mu = vec![0.0; ens.num_words()];
    for (&x, q) in support.iter().zip(p) {
        mu[x] = q;
    }
    Some(mu)
}

fn growth_at(ens: &EnsembleSpec, omega: f64, mu: &[f64]) -> f64 {
    let (l, r) = (ens.l() as f64, ens.r() as f64);
    let energy: f64 = ens.support().iter().filter(|&&x| mu[x] > 0.0).map(|&x| mu[x] * ens.f_values()[x].ln()).sum();
    (l / r) * (entropy_of(mu) + energy) - (l - 1.0) * entropy_of(&[1.0 - omega, omega])
}

fn check_omega(omega: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&omega) {
        return invalid(format!("weight fraction must lie in [0, 1] (got {omega})"));
    }
    Ok(())
}

/// `G(ω)`, the growth rate of the expected number of weight-`ωN` codewords;
/// `−∞` outside the feasible range.
pub fn weight_growth_rate(l: usize, r: usize, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let ens = EnsembleSpec::parity(l, r)?;
    if omega == 0.0 {
        return Ok(0.0);
    }
    if omega == 1.0 {
        return Ok(if r.is_multiple_of(2) { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(match tilted_measure(&ens, r as f64 * omega) {
        Some(mu) => growth_at(&ens, omega, &mu),
        None => f64::NEG_INFINITY,
    })
}

/// Weights `w` that can occur: `l·w ≡ M·wt(x₀) (mod d)` with `d` the gcd of
/// the support weight differences. Returns `(d, step)` with `step = d/gcd(d, l)`.
fn weight_lattice(ens: &EnsembleSpec) -> (u64, u64) {
    let support = ens.support();
    let w0 = word_weight(ens, support[0]) as i64;
    let d = support.iter().fold(0i64, |g, &x| g.gcd(&(word_weight(ens, x) as i64 - w0))) as u64;
    if d == 0 {
        return (0, 1);
    }
    (d, d / d.gcd(&(ens.l() as u64)))
}

fn weight_allowed(ens: &EnsembleSpec, m: usize, w: u64) -> bool {
    let (d, _) = weight_lattice(ens);
    let w0 = word_weight(ens, ens.support()[0]);
    let lhs = ens.l() as u64 * w;
    let rhs = m as u64 * w0;
    if d == 0 {
        return lhs == rhs;
    }
    (lhs as i64 - rhs as i64).rem_euclid(d as i64) == 0
}

/// Asymptotic expected number of codewords, total or of weight `round(ωN)`.
pub fn ldpc_expected_codewords(l: usize, r: usize, n_sites: usize, omega: Option<f64>) -> Result<LdpcResult> {
    let ens = EnsembleSpec::parity(l, r)?;
    let m = ens.factor_count(n_sites)?;
    let nf = n_sites as f64;
    let Some(omega) = omega else {
        let sol = solve_bethe(&ens)?;
        let central = fg_central_constant(&ens, &sol)?;
        return Ok(LdpcResult {
            n_sites,
            weight: None,
            log_count: central.log_estimate(n_sites),
            growth_rate: central.exponent,
            log_constant: central.log_constant,
        });
    };
    check_omega(omega)?;
    let w = (omega * nf).round() as u64;
    let exact_one = |log_count: f64| LdpcResult {
        n_sites,
        weight: Some(w),
        log_count,
        growth_rate: if log_count == 0.0 { 0.0 } else { f64::NEG_INFINITY },
        log_constant: log_count,
    };
    if w == 0 {
        return Ok(exact_one(0.0));
    }
    if w == n_sites as u64 {
        return Ok(exact_one(if r.is_multiple_of(2) { 0.0 } else { f64::NEG_INFINITY }));
    }
    let om = w as f64 / nf;
    let Some(mu) = tilted_measure(&ens, r as f64 * om) else {
        return Ok(LdpcResult {
            n_sites,
            weight: Some(w),
            log_count: f64::NEG_INFINITY,
            growth_rate: f64::NEG_INFINITY,
            log_constant: f64::NEG_INFINITY,
        });
    };
    let growth = growth_at(&ens, om, &mu);
    if !weight_allowed(&ens, m, w) {
        return Ok(LdpcResult {
            n_sites,
            weight: Some(w),
            log_count: f64::NEG_INFINITY,
            growth_rate: growth,
            log_constant: f64::NEG_INFINITY,
        });
    }
    let nu = ProbMeasure::new(vec![1.0 - om, om])?;
    let mats = assemble_fg_matrices(&ens, &nu, &ProbMeasure::from_unnormalized(mu)?)?;
    // det(A) σ² = (r/l) [(V' − V) adj(A)]₁₁ with A = I − C(V' − V).
    let a = mats.stability_matrix();
    let d = &mats.v_prime - &mats.v;
    let adj_col1 = [-a[(0, 1)], a[(0, 0)]];
    let product = (ens.r() as f64 / ens.l() as f64) * (d[(1, 0)] * adj_col1[0] + d[(1, 1)] * adj_col1[1]);
    if !(product > 0.0) {
        return Err(Error::BetheInstability { det: product });
    }
    let (_, step) = weight_lattice(&ens);
    let s = lattice_step_s(&ens) as f64;
    let log_constant = 0.5 * (ens.l() as f64).ln() - s.ln() - 0.5 * product.ln() + (step as f64).ln()
        - 0.5 * (2.0 * std::f64::consts::PI * nf).ln();
    Ok(LdpcResult { n_sites, weight: Some(w), log_count: nf * growth + log_constant, growth_rate: growth, log_constant })
}

/// Exact `log E[number of codewords]`, total or of weight `round(ωN)`.
pub fn ldpc_exact_codewords(l: usize, r: usize, n_sites: usize, omega: Option<f64>) -> Result<f64> {
    let ens = EnsembleSpec::parity(l, r)?;
    match omega {
        None => exact_expected_z(&ens, n_sites),
        Some(omega) => {
            check_omega(omega)?;
            let w = (omega * n_sites as f64).round() as u64;
            exact_expected_z_given_v(&ens, n_sites, &[n_sites as u64 - w, w])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn h2(p: f64) -> f64 {
        -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    /// Dual form: `(l/r) min_t [log(((1+e^t)^r + (1−e^t)^r)/2) − t r ω] − (l−1) h(ω)`,
    /// minimized by a coarse grid then golden-section refinement.
    fn dual_growth(l: usize, r: usize, omega: f64) -> f64 {
        let r_f = r as f64;
        let phi = |t: f64| {
            let x = t.exp();
            (((1.0 + x).powi(r as i32) + (1.0 - x).powi(r as i32)) / 2.0).ln() - t * r_f * omega
        };
        let grid: Vec<f64> = (0..=4000).map(|i| -20.0 + i as f64 * 0.01).collect();
        let best = grid.iter().copied().min_by(|a, b| phi(*a).total_cmp(&phi(*b))).unwrap();
        let (mut a, mut b) = (best - 0.01, best + 0.01);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if phi(c) < phi(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (l as f64 / r_f) * phi(0.5 * (a + b)) - (l as f64 - 1.0) * h2(omega)
    }

    #[test]
    fn growth_rate_matches_dual_oracle() {
        for (l, r) in [(3, 6), (2, 4), (4, 6)] {
            for omega in [0.05, 0.1, 0.3, 0.5, 0.7] {
                let g = weight_growth_rate(l, r, omega).unwrap();
                let d = dual_growth(l, r, omega);
                assert!((g - d).abs() < 1e-9, "(l,r)=({l},{r}) ω={omega}: {g} vs {d}");
            }
        }
        assert!((weight_growth_rate(3, 6, 0.5).unwrap() - 0.5 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn growth_rate_maximum_is_the_bethe_exponent() {
        // Grid over ω for (3,6): the maximum of G is F = ln2 / 2, attained at ½.
        let best = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .map(|w| (weight_growth_rate(3, 6, w).unwrap(), w))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        assert!((best.1 - 0.5).abs() < 1e-12);
        assert!((best.0 - 0.5 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn trivial_weights() {
        let r0 = ldpc_expected_codewords(3, 6, 40, Some(0.0)).unwrap();
        assert_eq!((r0.log_count, r0.growth_rate, r0.log_constant), (0.0, 0.0, 0.0));
        assert_eq!(ldpc_exact_codewords(3, 6, 40, Some(0.0)).unwrap(), 0.0);
        assert_eq!(ldpc_expected_codewords(3, 6, 40, Some(1.0)).unwrap().log_count, 0.0);
        assert_eq!(ldpc_exact_codewords(3, 6, 40, Some(1.0)).unwrap().exp(), 1.0);
        assert_eq!(ldpc_expected_codewords(2, 3, 30, Some(1.0)).unwrap().log_count, f64::NEG_INFINITY);
        assert_eq!(ldpc_exact_codewords(2, 3, 30, Some(1.0)).unwrap(), f64::NEG_INFINITY);
        assert!(ldpc_expected_codewords(3, 6, 40, Some(1.5)).is_err());
    }

    #[test]
    fn odd_weights_vanish_for_odd_l() {
        // l = 3: l·w must be even, so odd weights never occur.
        let res = ldpc_expected_codewords(3, 6, 40, Some(0.325)).unwrap();
        assert_eq!(res.weight, Some(13));
        assert_eq!(res.log_count, f64::NEG_INFINITY);
        assert_eq!(ldpc_exact_codewords(3, 6, 40, Some(0.325)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn fixed_weight_ratio_tends_to_one() {
        for (l, r) in [(3, 6), (2, 4)] {
            for omega in [0.1, 0.3, 0.5] {
                let err = |n: usize| {
                    let est = ldpc_expected_codewords(l, r, n, Some(omega)).unwrap().log_count;
                    let exact = ldpc_exact_codewords(l, r, n, Some(omega)).unwrap();
                    ((exact - est).exp() - 1.0).abs()
                };
                let (e1, e2) = (err(40), err(160));
                assert!(e2 < e1 && e2 < 0.01, "(l,r)=({l},{r}) ω={omega}: {e1} {e2}");
            }
        }
    }

    #[test]
    fn total_ratio_tends_to_one() {
        let err = |n: usize| {
            let est = ldpc_expected_codewords(2, 4, n, None).unwrap().log_count;
            ((ldpc_exact_codewords(2, 4, n, None).unwrap() - est).exp() - 1.0).abs()
        };
        let errs: Vec<f64> = [16, 32, 64, 128].into_iter().map(err).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(errs[3] < 0.05);
    }
}
