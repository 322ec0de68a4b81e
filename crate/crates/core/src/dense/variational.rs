use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::DenseModelSpec;
use crate::error::{Error, Result};
use crate::types::ProbMeasure;

/// Probability below which a maximizer counts as a boundary point.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Settings of the multi-start damped fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Random restarts in addition to the uniform start.
    pub restarts: usize,
    pub seed: u64,
    /// Objective gap within which solutions count as co-maximizers.
    pub tie_tol: f64,
    /// Sup-norm distance under which two maximizers are the same.
    pub dedup_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            tol: 1e-12,
            max_iter: 100_000,
            restarts: 32,
            seed: 0,
            tie_tol: 1e-9,
            dedup_tol: 1e-8,
        }
    }
}

/// Maximizer(s) of `H(ν) + ⟨f⟩_ν + g(⟨x^(a)x^(b)⟩_ν)` over measures on `Xⁿ`.
#[derive(Debug, Clone, Serialize)]
pub struct VariationalSolution {
    pub nu_star: ProbMeasure,
    /// The exponent `F`, the objective at `nu_star`.
    pub exponent: f64,
    /// All distinct co-maximizers (includes `nu_star` first).
    pub maximizers: Vec<ProbMeasure>,
    /// `‖T(ν*) − ν*‖∞` of the stationarity map `T`.
    pub residual: f64,
    pub converged_restarts: usize,
    pub total_restarts: usize,
    /// Objective spread among the converged restarts (best minus worst).
    pub objective_gap: f64,
    /// Some maximizer has a probability below 1e-10.
    pub boundary: bool,
}

impl VariationalSolution {
    pub fn is_unique(&self) -> bool {
        self.maximizers.len() == 1
    }
}

/// Boltzmann reweighting `T(ν)(x) ∝ exp{f(x) + Σ_{a≤b} x^(a)x^(b) ∂g/∂q_ab(q(ν))}`,
/// whose fixed points are the stationary points of the objective.
pub(crate) fn stationarity_map(spec: &DenseModelSpec, nu: &[f64]) -> Vec<f64> {
    let grad = spec.dg(&spec.overlaps(nu));
    let j = spec.pair_products();
    let log_w: Vec<f64> = (0..spec.num_configs())
        .map(|x| spec.f_values()[x] + j.row(x).iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `‖T(ν) − ν‖∞`.
pub fn stationarity_residual(spec: &DenseModelSpec, nu: &[f64]) -> f64 {
    stationarity_map(spec, nu).iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

struct Run {
    nu: Vec<f64>,
    converged: bool,
    residual: f64,
}

fn run_from(spec: &DenseModelSpec, start: Vec<f64>, opts: &SolverOptions) -> Run {
    let mut nu = start;
    for _ in 0..opts.max_iter {
        let t = stationarity_map(spec, &nu);
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
            let residual = stationarity_residual(spec, &nu);
            return Run { nu, converged: true, residual };
        }
    }
    let residual = stationarity_residual(spec, &nu);
    Run { nu, converged: false, residual }
}

fn start_point(size: usize, restart: usize, seed: u64) -> Vec<f64> {
    if restart == 0 {
        return vec![1.0 / size as f64; size];
    }
    // Dirichlet(1, ..., 1) as normalized exponentials, one stream per restart.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(restart as u64));
    let e: Vec<f64> = (0..size).map(|_| Exp1.sample(&mut rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn solve_variational(spec: &DenseModelSpec) -> Result<VariationalSolution> {
    solve_variational_with(spec, &SolverOptions::default())
}

pub fn solve_variational_with(spec: &DenseModelSpec, opts: &SolverOptions) -> Result<VariationalSolution> {
    let size = spec.num_configs();
    let total = opts.restarts + 1;
    let go = |i: usize| run_from(spec, start_point(size, i, opts.seed), opts);
    #[cfg(feature = "parallel")]
    let runs: Vec<Run> = {
        use rayon::prelude::*;
        (0..total).into_par_iter().map(go).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Run> = (0..total).map(go).collect();

    let converged: Vec<(&Run, f64)> =
        runs.iter().filter(|r| r.converged).map(|r| (r, spec.objective(&r.nu))).collect();
    if converged.is_empty() {
        let residual = runs.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence { iterations: opts.max_iter, residual });
    }
    let best = converged.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let worst = converged.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);

    // Ties in restart order, best first.
    let mut tied: Vec<&(&Run, f64)> = converged.iter().filter(|c| c.1 >= best - opts.tie_tol).collect();
    tied.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut maximizers: Vec<Vec<f64>> = Vec::new();
    for (run, _) in tied {
        let dup = maximizers.iter().any(|m| {
            m.iter().zip(&run.nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < opts.dedup_tol
        });
        if !dup {
            maximizers.push(run.nu.clone());
        }
    }
    let residual = maximizers.iter().map(|m| stationarity_residual(spec, m)).fold(0.0, f64::max);
    let maximizers: Vec<ProbMeasure> =
        maximizers.into_iter().map(ProbMeasure::from_unnormalized).collect::<Result<_>>()?;
    let nu_star = maximizers[0].clone();
    let boundary = maximizers.iter().any(|m| m.min() < BOUNDARY_TOL);
    Ok(VariationalSolution {
        exponent: spec.objective(nu_star.as_slice()),
        nu_star,
        maximizers,
        residual,
        converged_restarts: converged.len(),
        total_restarts: total,
        objective_gap: best - worst,
        boundary,
    })
}
