//! The invariant battery behind the `selftest` command: each check returns
//! a pass/fail outcome with the measured quantity and wall time.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clt::{dense_type_covariance, empirical_type_covariance_oracle, overlap_covariance};
use crate::dense::terms::{QuadraticOverlap, ZeroLocal};
use crate::dense::{assemble_matrices, asymptotic_estimate, exact_type_sum, solve_variational, DenseModelSpec};
use crate::error::Result;
use crate::factor_graph::{
    brute_force_permutation_oracle, exact_expected_z, exact_expected_z_rational, fg_asymptotic_estimate,
    lattice_step_report, EnsembleSpec, PERMUTATION_ORACLE_MAX_EDGES,
};
use crate::linalg::Matrix;
use crate::replica::{build_pqr_matrix, rs_correction_n0, rs_determinant, sk_paramagnetic_correction, RsParams};
use crate::types::{local_approx_log_multinomial, log_multinomial, Alphabet, ProbMeasure, TypeVector};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(u8, &str, f64, Check); 10] = [
    (1, "sk paramagnetic correction", 1.0, sk_correction),
    (2, "rs determinant closed form", 10.0, rs_closed_form),
    (3, "dense constant convergence", 30.0, dense_convergence),
    (4, "dense matrix identities", 5.0, matrix_identities),
    (5, "sylvester determinant identity", 5.0, sylvester),
    (6, "local approximation decay", 1.0, local_approx_decay),
    (7, "configuration model exactness", 60.0, configuration_model),
    (8, "factor graph constant convergence", 120.0, fg_convergence),
    (9, "step size agreement", 30.0, step_size),
    (10, "overlap and type covariance", 60.0, covariance),
];

pub fn check_ids() -> Vec<u8> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs one check; `None` for an unknown id. Errors count as failures.
pub fn run_check(id: u8) -> Option<CheckOutcome> {
    let &(id, name, budget_seconds, check) = CHECKS.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let (ok, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    Some(CheckOutcome { id, name, passed: ok && seconds < budget_seconds, detail, seconds, budget_seconds })
}

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS.iter().filter_map(|c| run_check(c.0)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sk_correction() -> Result<(bool, String)> {
    let n = 1000;
    let mut worst: f64 = 0.0;
    let mut worst_cross: f64 = 0.0;
    for beta in [0.2f64, 0.5, 0.9] {
        let c = sk_paramagnetic_correction(beta, n)?;
        worst = worst.max(rel(c, (1.0 - beta * beta).ln() / (4.0 * n as f64)));
        let general = rs_correction_n0(n, &RsParams::new(0.0, 0.0, beta * beta, 0.0, 0.0)?)?;
        worst_cross = worst_cross.max((c - general).abs() / c.abs());
    }
    Ok((worst <= 1e-12 && worst_cross <= 4.0 * f64::EPSILON, format!("rel {worst:.2e}, cross {worst_cross:.2e}")))
}

fn rs_closed_form() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for n in 4..=7 {
        for _ in 0..100 {
            let mut draw = || rng.gen_range(-0.3..=0.3);
            let p = RsParams::new(draw(), draw(), draw(), draw(), draw())?;
            let (a, b, c) = p.fluctuation_pattern();
            let ag = build_pqr_matrix(n, p.p_coef, p.q_coef, p.r_coef)?;
            let au = build_pqr_matrix(n, a, b, c)?;
            let direct = (&Matrix::identity(ag.rows()) - &(&ag * &au)).det()?;
            worst = worst.max(rel(rs_determinant(n, &p)?, direct));
        }
    }
    Ok((worst <= 1e-9, format!("max rel {worst:.2e}")))
}

fn binary_instance() -> Result<DenseModelSpec> {
    DenseModelSpec::new(1, Alphabet::binary(), Arc::new(ZeroLocal), Arc::new(QuadraticOverlap::new(1, 1.0, 0.0)))
}

fn dense_convergence() -> Result<(bool, String)> {
    let spec = binary_instance()?;
    let dev = |n: usize| -> Result<f64> { Ok((exact_type_sum(&spec, n)? - asymptotic_estimate(&spec, n)?).exp() - 1.0) };
    let (d100, d400, d1600) = (dev(100)?, dev(400)?, dev(1600)?);
    Ok((
        d400.abs() < d100.abs() && d1600.abs() < 0.02,
        format!("ratio-1: {d100:.3e} {d400:.3e} {d1600:.3e}"),
    ))
}

fn matrix_identities() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shapes: [(usize, Alphabet); 4] = [
        (1, Alphabet::binary()),
        (2, Alphabet::spins()),
        (4, Alphabet::spins()),
        (2, Alphabet::new(vec![-1.0, 0.0, 2.0, 3.0])?),
    ];
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (n, alphabet) = &shapes[i % shapes.len()];
        let spec = DenseModelSpec::new(
            *n,
            alphabet.clone(),
            Arc::new(ZeroLocal),
            Arc::new(QuadraticOverlap::new(*n, 0.3, 0.2)),
        )?;
        let w: Vec<f64> = (0..spec.num_configs()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let nu = ProbMeasure::from_unnormalized(w)?;
        let m = assemble_matrices(&spec, &nu)?;
        let ds = &m.s_prime - &m.s;
        let ht = m.h.transpose();
        let lhs = &(&m.h * &(&(&ht * &m.b) * &m.h).inverse()?) * &ht;
        let proj = &(&m.j.transpose() * &ds) * &m.j;
        worst = worst.max((&lhs - &ds).max_abs()).max((&proj - &(&m.u_prime - &m.u)).max_abs());
    }
    Ok((worst <= 1e-10, format!("max defect {worst:.2e}")))
}

fn sylvester() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let a = Matrix::from_fn(n, m, |_, _| rng.gen_range(-0.5..0.5));
        let b = Matrix::from_fn(m, n, |_, _| rng.gen_range(-0.5..0.5));
        let lhs = (&Matrix::identity(n) + &(&a * &b)).det()?;
        let rhs = (&Matrix::identity(m) + &(&b * &a)).det()?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Ok((worst <= 1e-9, format!("max rel defect {worst:.2e}")))
}

fn local_approx_decay() -> Result<(bool, String)> {
    let half = ProbMeasure::uniform(2);
    let err = |n: u64| -> Result<f64> {
        let exact = log_multinomial(&TypeVector::new(vec![n / 2, n / 2]));
        Ok((local_approx_log_multinomial(&half, &[0.0, 0.0], n)? - exact).exp_m1().abs())
    };
    let e: Vec<f64> = [50, 100, 200, 400].into_iter().map(err).collect::<Result<_>>()?;
    let decreasing = e.windows(2).all(|w| w[1] < w[0]);
    let fast = e[2] / e[0] <= 0.3 && e[3] / e[1] <= 0.3;
    Ok((decreasing && fast, format!("errors {:.3e} {:.3e} {:.3e} {:.3e}", e[0], e[1], e[2], e[3])))
}

fn configuration_model() -> Result<(bool, String)> {
    let mut instances = 0;
    let mut failures = Vec::new();
    for l in 2..=4 {
        for r in 2..=PERMUTATION_ORACLE_MAX_EDGES {
            let ensembles = [EnsembleSpec::parity(l, r)?, EnsembleSpec::uniform(l, r, Alphabet::binary())?];
            for n in 1..=PERMUTATION_ORACLE_MAX_EDGES / l {
                if (n * l) % r != 0 {
                    continue;
                }
                for ens in &ensembles {
                    instances += 1;
                    let oracle = brute_force_permutation_oracle(ens, n)?;
                    if exact_expected_z_rational(ens, n)? != oracle.expected_z {
                        failures.push(format!("(l={l},r={r},N={n})"));
                    }
                }
            }
        }
    }
    let ok = failures.is_empty() && instances > 0;
    Ok((ok, format!("{instances} instances, {} mismatches {}", failures.len(), failures.join(" "))))
}

fn fg_convergence() -> Result<(bool, String)> {
    let ens = EnsembleSpec::parity(3, 6)?;
    let dev = |n: usize| -> Result<f64> { Ok((exact_expected_z(&ens, n)? - fg_asymptotic_estimate(&ens, n)?).exp_m1()) };
    let d: Vec<f64> = [20, 40, 60].into_iter().map(dev).collect::<Result<_>>()?;
    let ok = d[1].abs() < d[0].abs() && d[2].abs() < d[1].abs() && d[2].abs() < 0.1;
    Ok((ok, format!("ratio-1: {:.3e} {:.3e} {:.3e}", d[0], d[1], d[2])))
}

pub(crate) fn step_size_suite() -> Result<Vec<(String, EnsembleSpec)>> {
    let ternary = Alphabet::new(vec![0.0, 1.0, 2.0])?;
    let mut out = vec![
        ("parity l=2 r=4".to_string(), EnsembleSpec::parity(2, 4)?),
        ("parity l=3 r=6".to_string(), EnsembleSpec::parity(3, 6)?),
        ("parity l=3 r=3".to_string(), EnsembleSpec::parity(3, 3)?),
        ("parity l=4 r=4".to_string(), EnsembleSpec::parity(4, 4)?),
        ("all-equal l=3 r=3".to_string(), EnsembleSpec::all_equal(3, 3, Alphabet::binary())?),
        ("all-equal l=4 r=2 ternary".to_string(), EnsembleSpec::all_equal(4, 2, ternary.clone())?),
        ("parity l=2 r=3 ternary".to_string(), EnsembleSpec::parity_on(2, 3, ternary.clone())?),
    ];
    for l in [2, 3] {
        out.push((format!("uniform l={l} r=3 binary"), EnsembleSpec::uniform(l, 3, Alphabet::binary())?));
        out.push((format!("uniform l={l} r=3 ternary"), EnsembleSpec::uniform(l, 3, ternary.clone())?));
    }
    Ok(out)
}

fn step_size() -> Result<(bool, String)> {
    let mut bad = Vec::new();
    let mut summary = Vec::new();
    for (name, ens) in step_size_suite()? {
        let rep = lattice_step_report(&ens);
        if !(rep.special_cases_agree() && rep.density_agrees()) {
            bad.push(name.clone());
        }
        summary.push(rep.s.to_string());
    }
    let expected_special = ["1", "3"];
    let ok = bad.is_empty() && summary[..2] == expected_special;
    Ok((ok, format!("s = [{}]; disagreements: {}", summary.join(","), bad.len())))
}

fn covariance() -> Result<(bool, String)> {
    let beta: f64 = 0.5;
    let sk = DenseModelSpec::new(
        3,
        Alphabet::spins(),
        Arc::new(ZeroLocal),
        Arc::new(QuadraticOverlap::new(3, 0.0, beta * beta)),
    )?;
    let cov = overlap_covariance(&sk, &ProbMeasure::uniform(sk.num_configs()), 3)?;
    let mut sk_err: f64 = 0.0;
    for (i, &(a, b)) in sk.pairs().pairs().iter().enumerate() {
        if a != b {
            sk_err = sk_err.max((cov.matrix[(i, i)] - 4.0 / 3.0).abs());
        }
    }
    let spec = binary_instance()?;
    let nu = solve_variational(&spec)?.nu_star;
    let e = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
    let limit = dense_type_covariance(&spec, &nu)?.variance_along(&e);
    let exact = empirical_type_covariance_oracle(&spec, 2000)?.variance_along(&e);
    let type_err = rel(exact, limit);
    Ok((sk_err <= 1e-10 && type_err < 0.01, format!("sk {sk_err:.2e}, type rel {type_err:.3e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        for id in 1..=10 {
            let o = run_check(id).unwrap();
            assert!(o.passed, "{o:?}");
        }
        assert!(run_check(0).is_none());
    }
}
