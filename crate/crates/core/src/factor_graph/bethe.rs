use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::lattice::{lattice_step_report, LatticeStep};
use super::EnsembleSpec;
use crate::dense::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::{entropy_of, LogSumExp, ProbMeasure};

/// Maximizer of `(l/r)H(μ) − (l−1)H(ν) + (l/r)Σ μ(x) log f(x)` subject to
/// `(1/r) Σ_i Σ_{x: x_i = z} μ(x) = ν(z)`.
#[derive(Debug, Clone, Serialize)]
pub struct BetheSolution {
    pub nu_star: ProbMeasure,
    pub mu_star: ProbMeasure,
    pub exponent: f64,
    /// `‖marginal(μ(ν*)) − ν*‖∞`.
    pub residual: f64,
    /// Distinct co-maximizers as `(ν, μ)` pairs, best first.
    pub maximizers: Vec<(ProbMeasure, ProbMeasure)>,
    pub converged_restarts: usize,
    pub total_restarts: usize,
    /// Some maximizer has `ν(z) < 1e-10`.
    pub boundary: bool,
}

impl BetheSolution {
    pub fn is_unique(&self) -> bool {
        self.maximizers.len() == 1
    }
}

/// `μ(x) ∝ f(x) ∏_i ν(x_i)^{(l−1)/l}`, the maximizing factor measure for
/// given variable marginals (Lagrange stationarity).
pub(crate) fn factor_measure(ens: &EnsembleSpec, nu: &[f64]) -> Vec<f64> {
    let a = (ens.l() as f64 - 1.0) / ens.l() as f64;
    let log_nu: Vec<f64> = nu.iter().map(|p| p.ln()).collect();
    let mut log_w = vec![f64::NEG_INFINITY; ens.num_words()];
    for &x in ens.support() {
        let mut s = ens.f_values()[x].ln();
        for (&c, ln) in ens.letter_counts(x).iter().zip(&log_nu) {
            if c > 0 {
                s += a * c as f64 * ln;
            }
        }
        log_w[x] = s;
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; ens.num_words()];
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `(1/r) Σ_x μ(x) N_z(x)`.
pub(crate) fn variable_marginal(ens: &EnsembleSpec, mu: &[f64]) -> Vec<f64> {
    let mut nu = vec![0.0; ens.num_symbols()];
    for &x in ens.support() {
        if mu[x] == 0.0 {
            continue;
        }
        for (nz, &c) in nu.iter_mut().zip(ens.letter_counts(x)) {
            *nz += mu[x] * c as f64;
        }
    }
    let r = ens.r() as f64;
    nu.iter_mut().for_each(|p| *p /= r);
    nu
}

/// The objective at `(ν, μ)`.
pub(crate) fn bethe_objective(ens: &EnsembleSpec, nu: &[f64], mu: &[f64]) -> f64 {
    let (l, r) = (ens.l() as f64, ens.r() as f64);
    let energy: f64 = ens.support().iter().filter(|&&x| mu[x] > 0.0).map(|&x| mu[x] * ens.f_values()[x].ln()).sum();
    (l / r) * entropy_of(mu) - (l - 1.0) * entropy_of(nu) + (l / r) * energy
}

struct Run {
    nu: Vec<f64>,
    converged: bool,
    residual: f64,
}

fn run_from(ens: &EnsembleSpec, start: Vec<f64>, opts: &SolverOptions) -> Run {
    let mut nu = start;
    let residual = |nu: &[f64]| {
        let next = variable_marginal(ens, &factor_measure(ens, nu));
        next.iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    for _ in 0..opts.max_iter {
        let t = variable_marginal(ens, &factor_measure(ens, &nu));
        let mut change = 0.0_f64;
        for (p, tp) in nu.iter_mut().zip(&t) {
            let next = (1.0 - opts.damping) * *p + opts.damping * tp;
            change = change.max((next - *p).abs());
            *p = next;
        }
        if !change.is_finite() {
            break;
        }
        if change < opts.tol {
            let res = residual(&nu);
            return Run { nu, converged: true, residual: res };
        }
    }
    let res = residual(&nu);
    Run { nu, converged: false, residual: res }
}

fn start_point(size: usize, restart: usize, seed: u64) -> Vec<f64> {
    if restart == 0 {
        return vec![1.0 / size as f64; size];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(restart as u64));
    let e: Vec<f64> = (0..size).map(|_| Exp1.sample(&mut rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn solve_bethe(ens: &EnsembleSpec) -> Result<BetheSolution> {
    solve_bethe_with(ens, &SolverOptions::default())
}

/// Damped fixed-point iteration on `ν` from the uniform start and
/// `opts.restarts` Dirichlet starts.
pub fn solve_bethe_with(ens: &EnsembleSpec, opts: &SolverOptions) -> Result<BetheSolution> {
    let k = ens.num_symbols();
    let total = opts.restarts + 1;
    let go = |i: usize| run_from(ens, start_point(k, i, opts.seed), opts);
    #[cfg(feature = "parallel")]
    let runs: Vec<Run> = {
        use rayon::prelude::*;
        (0..total).into_par_iter().map(go).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Run> = (0..total).map(go).collect();

    // Re-derive ν from μ so the marginal constraint holds to rounding.
    let mut candidates: Vec<(Vec<f64>, Vec<f64>, f64)> = runs
        .iter()
        .filter(|r| r.converged)
        .map(|r| {
            let mu = factor_measure(ens, &r.nu);
            let nu = variable_marginal(ens, &mu);
            let obj = bethe_objective(ens, &nu, &mu);
            (nu, mu, obj)
        })
        .collect();
    if candidates.is_empty() {
        let residual = runs.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence { iterations: opts.max_iter, residual });
    }
    let converged_restarts = candidates.len();
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    candidates.retain(|c| c.2 >= best - opts.tie_tol);
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut maximizers: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (nu, mu, _) in candidates {
        let dup = maximizers
            .iter()
            .any(|(m, _)| m.iter().zip(&nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < opts.dedup_tol);
        if !dup {
            maximizers.push((nu, mu));
        }
    }
    let residual = maximizers
        .iter()
        .map(|(nu, _)| {
            let next = variable_marginal(ens, &factor_measure(ens, nu));
            next.iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let boundary = maximizers.iter().any(|(nu, _)| nu.iter().any(|&p| p < crate::dense::BOUNDARY_TOL));
    let maximizers: Vec<(ProbMeasure, ProbMeasure)> = maximizers
        .into_iter()
        .map(|(nu, mu)| Ok((ProbMeasure::from_unnormalized(nu)?, ProbMeasure::from_unnormalized(mu)?)))
        .collect::<Result<_>>()?;
    let (nu_star, mu_star) = maximizers[0].clone();
    Ok(BetheSolution {
        exponent: bethe_objective(ens, nu_star.as_slice(), mu_star.as_slice()),
        nu_star,
        mu_star,
        residual,
        maximizers,
        converged_restarts,
        total_restarts: total,
        boundary,
    })
}

/// Matrices of the central approximation and the central limit theorems.
#[derive(Debug, Clone, Serialize)]
pub struct FgMatrices {
    /// `diag(r(l−1)/(l ν(x)))`.
    pub c: Matrix,
    /// `(1/r²) Σ_{k,k'} Σ_{x: x_k = z, x_k' = z'} μ(x)`.
    pub v_prime: Matrix,
    /// `ν νᵗ`.
    pub v: Matrix,
    /// `diag(μ)`.
    pub t_prime: Matrix,
    /// `μ μᵗ`.
    pub t: Matrix,
    /// `K(x, z) = N_z(x)/r`.
    pub k: Matrix,
}

impl FgMatrices {
    /// `I − C(V' − V)`.
    pub fn stability_matrix(&self) -> Matrix {
        let d = &self.v_prime - &self.v;
        &Matrix::identity(d.rows()) - &(&self.c * &d)
    }

    pub fn stability_determinant(&self) -> Result<f64> {
        self.stability_matrix().det()
    }
}

/// Assembles the matrices at `(ν, μ)`. Requires `ν > 0`.
pub fn assemble_fg_matrices(ens: &EnsembleSpec, nu: &ProbMeasure, mu: &ProbMeasure) -> Result<FgMatrices> {
    let k = ens.num_symbols();
    if nu.len() != k || mu.len() != ens.num_words() {
        return crate::error::invalid("measures do not match the ensemble");
    }
    if nu.min() < crate::dense::BOUNDARY_TOL {
        return Err(Error::BoundaryMaximizer { min: nu.min() });
    }
    let (l, r) = (ens.l() as f64, ens.r() as f64);
    let c = Matrix::diag(&nu.as_slice().iter().map(|p| r * (l - 1.0) / (l * p)).collect::<Vec<_>>());
    let mut v_prime = Matrix::zeros(k, k);
    for x in 0..ens.num_words() {
        let m = mu[x];
        if m == 0.0 {
            continue;
        }
        let counts = ens.letter_counts(x);
        for a in 0..k {
            for b in 0..k {
                v_prime[(a, b)] += m * (counts[a] * counts[b]) as f64;
            }
        }
    }
    let v_prime = v_prime.scale(1.0 / (r * r));
    let v = Matrix::outer(nu.as_slice(), nu.as_slice());
    let t_prime = Matrix::diag(mu.as_slice());
    let t = Matrix::outer(mu.as_slice(), mu.as_slice());
    let km = Matrix::from_fn(ens.num_words(), k, |x, z| ens.letter_counts(x)[z] as f64 / r);
    Ok(FgMatrices { c, v_prime, v, t_prime, t, k: km })
}

/// Exponent, constant factor and their ingredients.
#[derive(Debug, Clone, Serialize)]
pub struct FgCentralResult {
    pub exponent: f64,
    /// `log[l^{(|X|−1)/2} s⁻¹ Σ det(I − C(V'−V))^{−1/2}]`, summed over co-maximizers.
    pub log_constant: f64,
    /// `det(I − C(V'−V))` at each maximizer.
    pub dets: Vec<f64>,
    pub lattice: LatticeStep,
}

impl FgCentralResult {
    pub fn log_estimate(&self, n_sites: usize) -> f64 {
        n_sites as f64 * self.exponent + self.log_constant
    }
}

pub fn fg_central_constant(ens: &EnsembleSpec, solution: &BetheSolution) -> Result<FgCentralResult> {
    if solution.boundary {
        let min = solution.maximizers.iter().map(|(nu, _)| nu.min()).fold(f64::INFINITY, f64::min);
        return Err(Error::BoundaryMaximizer { min });
    }
    let lattice = lattice_step_report(ens);
    debug_assert!(lattice.special_cases_agree(), "special-case step sizes disagree with SNF: {lattice:?}");
    let mut dets = Vec::with_capacity(solution.maximizers.len());
    let mut sum = LogSumExp::new();
    for (nu, mu) in &solution.maximizers {
        let det = assemble_fg_matrices(ens, nu, mu)?.stability_determinant()?;
        if !(det > 0.0) {
            return Err(Error::BetheInstability { det });
        }
        dets.push(det);
        sum.push(-0.5 * det.ln());
    }
    let log_constant =
        0.5 * (ens.num_symbols() as f64 - 1.0) * (ens.l() as f64).ln() - (lattice.s as f64).ln() + sum.value();
    Ok(FgCentralResult { exponent: solution.exponent, log_constant, dets, lattice })
}

/// `N F + ((|X|−1)/2) log l − log s − ½ log det(I − C(V'−V))`.
pub fn fg_asymptotic_estimate(ens: &EnsembleSpec, n_sites: usize) -> Result<f64> {
    ens.factor_count(n_sites)?;
    let sol = solve_bethe(ens)?;
    Ok(fg_central_constant(ens, &sol)?.log_estimate(n_sites))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::exact_expected_z;
    use crate::types::Alphabet;
    use std::f64::consts::LN_2;

    #[test]
    fn uniform_factor_is_trivial() {
        for k in [2usize, 3] {
            let alphabet = Alphabet::new((0..k).map(|i| i as f64).collect()).unwrap();
            let e = EnsembleSpec::uniform(2, 3, alphabet).unwrap();
            let sol = solve_bethe(&e).unwrap();
            assert!((sol.exponent - (k as f64).ln()).abs() < 1e-12);
            assert!(sol.nu_star.as_slice().iter().all(|p| (p - 1.0 / k as f64).abs() < 1e-10));
            let w = (k as f64).powi(3);
            assert!(sol.mu_star.as_slice().iter().all(|p| (p - 1.0 / w).abs() < 1e-10));
        }
    }

    #[test]
    fn single_symbol_exponent() {
        let e = EnsembleSpec::new(3, 2, Alphabet::new(vec![1.0]).unwrap(), vec![2.5]).unwrap();
        let sol = solve_bethe(&e).unwrap();
        assert!((sol.exponent - 1.5 * 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn regular_ldpc_exponent() {
        for (l, r) in [(3, 6), (2, 4), (3, 4), (4, 8)] {
            let e = EnsembleSpec::parity(l, r).unwrap();
            let sol = solve_bethe(&e).unwrap();
            let design = (1.0 - l as f64 / r as f64) * LN_2;
            assert!((sol.exponent - design).abs() < 1e-10, "(l,r)=({l},{r}): {}", sol.exponent);
            assert!(sol.residual <= 1e-10);
            let marg = variable_marginal(&e, sol.mu_star.as_slice());
            assert!(marg.iter().zip(sol.nu_star.as_slice()).all(|(a, b)| (a - b).abs() <= 1e-10));
        }
    }

    #[test]
    fn all_equal_maximizers_are_on_the_boundary() {
        let e = EnsembleSpec::all_equal(3, 3, Alphabet::binary()).unwrap();
        let sol = solve_bethe(&e).unwrap();
        assert!(sol.boundary);
        assert_eq!(sol.maximizers.len(), 2);
        assert!(matches!(fg_central_constant(&e, &sol), Err(Error::BoundaryMaximizer { .. })));
    }

    #[test]
    fn matrices_definitions() {
        let e = EnsembleSpec::new(2, 3, Alphabet::binary(), (0..8).map(|i| 1.0 + 0.1 * i as f64).collect()).unwrap();
        let sol = solve_bethe(&e).unwrap();
        let m = assemble_fg_matrices(&e, &sol.nu_star, &sol.mu_star).unwrap();
        for x in 0..e.num_words() {
            assert!((m.k.row(x).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!(m.v_prime.asymmetry() < 1e-15);
        // V' by direct summation over positions.
        let mut direct = Matrix::zeros(2, 2);
        for x in 0..8 {
            for &a in e.word(x) {
                for &b in e.word(x) {
                    direct[(a, b)] += sol.mu_star[x] / 9.0;
                }
            }
        }
        assert!((&direct - &m.v_prime).max_abs() < 1e-15);
        // Row sums of V' are ν.
        for z in 0..2 {
            assert!((m.v_prime.row(z).iter().sum::<f64>() - sol.nu_star[z]).abs() < 1e-12);
        }
    }

    #[test]
    fn product_measure_closed_form() {
        // f ≡ 1: μ is a product, V' = diag(ν)/r + (1 − 1/r) ν νᵗ.
        let e = EnsembleSpec::uniform(3, 4, Alphabet::binary()).unwrap();
        let sol = solve_bethe(&e).unwrap();
        let m = assemble_fg_matrices(&e, &sol.nu_star, &sol.mu_star).unwrap();
        let nu = sol.nu_star.as_slice();
        let expected = &Matrix::diag(nu).scale(0.25) + &Matrix::outer(nu, nu).scale(0.75);
        assert!((&expected - &m.v_prime).max_abs() < 1e-14);
        let det = m.stability_determinant().unwrap();
        assert!((det - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_estimate_is_exact() {
        for (l, r) in [(2, 2), (3, 6), (2, 3)] {
            let e = EnsembleSpec::uniform(l, r, Alphabet::binary()).unwrap();
            let n = 6 * r;
            let est = fg_asymptotic_estimate(&e, n).unwrap();
            let exact = exact_expected_z(&e, n).unwrap();
            assert!((est - exact).abs() < 1e-10, "(l,r)=({l},{r}): {est} vs {exact}");
        }
    }

    #[test]
    fn determinant_invariant_under_relabeling() {
        let alphabet = Alphabet::new(vec![0.0, 1.0, 2.0]).unwrap();
        let f: Vec<f64> = (0..9).map(|i| 0.5 + ((i * 7 % 9) as f64) / 5.0).collect();
        let e = EnsembleSpec::new(3, 2, alphabet.clone(), f.clone()).unwrap();
        // Swap symbols 0 and 2.
        let swap = |z: usize| 2 - z;
        let g: Vec<f64> = (0..9).map(|x| f[swap(x / 3) * 3 + swap(x % 3)]).collect();
        let e2 = EnsembleSpec::new(3, 2, alphabet, g).unwrap();
        let d = |e: &EnsembleSpec| {
            let s = solve_bethe(e).unwrap();
            assemble_fg_matrices(e, &s.nu_star, &s.mu_star).unwrap().stability_determinant().unwrap()
        };
        assert!((d(&e) - d(&e2)).abs() < 1e-10);
    }
}
