//! Acceptance gate: one line per criterion, each at its stated tolerance and
//! time budget. Oracles are computed here from first principles where the
//! criterion allows it.

use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use central_approx::clt::{dense_type_covariance, overlap_covariance};
use central_approx::dense::terms::{QuadraticOverlap, ZeroLocal};
use central_approx::dense::{assemble_matrices, asymptotic_estimate, exact_type_sum, solve_variational, DenseModelSpec};
use central_approx::factor_graph::{
    brute_force_permutation_oracle, exact_expected_z, exact_expected_z_rational, fg_asymptotic_estimate,
    lattice_step_report, EnsembleSpec,
};
use central_approx::replica::{rs_correction_n0, rs_determinant, sk_paramagnetic_correction, RsParams};
use central_approx::types::{local_approx_log_multinomial, log_multinomial};
use central_approx::{Alphabet, Matrix, ProbMeasure, TypeVector};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failures: Vec<u8>,
}

impl Gate {
    fn check(&mut self, id: u8, name: &str, budget: f64, f: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (ok, detail) = f();
        let secs = start.elapsed().as_secs_f64();
        let pass = ok && secs < budget;
        println!(
            "criterion {id:>2} {} {name}: {detail} [{secs:.3}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failures.push(id);
        }
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for i in 1..=n {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Gaussian elimination with partial pivoting.
fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            for j in c..n {
                a[i][j] -= f * a[c][j];
            }
        }
    }
    d
}

fn c1_sk() -> (bool, String) {
    let n = 1000;
    let mut worst: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for beta in [0.2f64, 0.5, 0.9] {
        let expected = (1.0 - beta * beta).ln() / (4.0 * n as f64);
        let got = sk_paramagnetic_correction(beta, n).unwrap();
        worst = worst.max(((got - expected) / expected).abs());
        let general = rs_correction_n0(n, &RsParams::new(0.0, 0.0, beta * beta, 0.0, 0.0).unwrap()).unwrap();
        cross = cross.max(((got - general) / got).abs());
    }
    (worst <= 1e-12 && cross <= 4.0 * f64::EPSILON, format!("rel err {worst:.1e}, vs general {cross:.1e}"))
}

fn c2_rs_det() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for n in 4..=7usize {
        let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
        let pattern = |a: (usize, usize), b: (usize, usize), v: [f64; 3]| {
            let shared = [a.0, a.1].iter().filter(|x| **x == b.0 || **x == b.1).count();
            v[2 - shared]
        };
        for _ in 0..100 {
            let d: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.3..=0.3)).collect();
            let (q, r) = (d[0], d[1]);
            let g = [d[2], d[3], d[4]];
            let u = [1.0 - q * q, q - q * q, r - q * q];
            let m = pairs.len();
            let prod: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let s: f64 = (0..m).map(|k| pattern(pairs[i], pairs[k], g) * pattern(pairs[k], pairs[j], u)).sum();
                            if i == j { 1.0 - s } else { -s }
                        })
                        .collect()
                })
                .collect();
            let direct = det(prod);
            let closed = rs_determinant(n, &RsParams::new(q, r, g[0], g[1], g[2]).unwrap()).unwrap();
            worst = worst.max(((closed - direct) / direct).abs());
        }
    }
    (worst <= 1e-9, format!("max rel err {worst:.1e} over 400 draws"))
}

fn binary_instance() -> DenseModelSpec {
    DenseModelSpec::new(1, Alphabet::binary(), Arc::new(ZeroLocal), Arc::new(QuadraticOverlap::new(1, 1.0, 0.0))).unwrap()
}

/// `log Σ_k C(N,k) exp(N (k/N)²/2)`: the binary instance summed directly.
fn binary_exact(n: usize, lf: &[f64]) -> f64 {
    let nf = n as f64;
    let terms: Vec<f64> = (0..=n).map(|k| lf[n] - lf[k] - lf[n - k] + nf * (k as f64 / nf).powi(2) / 2.0).collect();
    log_sum_exp(&terms)
}

fn c3_dense() -> (bool, String) {
    let spec = binary_instance();
    let lf = ln_factorials(2000);
    let mut agree: f64 = 0.0;
    let mut dev = Vec::new();
    for n in [100, 400, 1600] {
        let own = binary_exact(n, &lf);
        agree = agree.max((exact_type_sum(&spec, n).unwrap() - own).abs());
        dev.push(((own - asymptotic_estimate(&spec, n).unwrap()).exp() - 1.0).abs());
    }
    let ok = dev[1] < dev[0] && dev[2] < 0.02 && agree < 1e-9;
    (ok, format!("|ratio-1| = {:.2e}, {:.2e}, {:.2e}; library sum vs direct {agree:.1e}", dev[0], dev[1], dev[2]))
}

fn c4_identities() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let shapes = [(1, vec![0.0, 1.0]), (2, vec![-1.0, 1.0]), (3, vec![-1.0, 1.0]), (4, vec![-1.0, 1.0]), (2, vec![0.0, 1.0, 2.0, 5.0]), (1, vec![-2.0, 0.5, 1.0])];
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (n, ref values) = shapes[i % shapes.len()];
        let spec = DenseModelSpec::new(
            n,
            Alphabet::new(values.clone()).unwrap(),
            Arc::new(ZeroLocal),
            Arc::new(QuadraticOverlap::new(n, 0.1, 0.3)),
        )
        .unwrap();
        let k = spec.num_configs();
        assert!(k <= 16);
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.02..1.0)).collect();
        let total: f64 = w.iter().sum();
        let nu: Vec<f64> = w.iter().map(|x| x / total).collect();
        let m = assemble_matrices(&spec, &ProbMeasure::new(nu.clone()).unwrap()).unwrap();
        let ds = Matrix::from_fn(k, k, |a, b| if a == b { nu[a] - nu[a] * nu[b] } else { -nu[a] * nu[b] });
        let ht = m.h.transpose();
        let lhs = &(&m.h * &(&(&ht * &m.b) * &m.h).inverse().unwrap()) * &ht;
        worst = worst.max((&lhs - &ds).max_abs());
        // U' − U from the moments of ν directly.
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        let mom = |ps: &[(usize, usize)]| -> f64 {
            (0..k).map(|x| nu[x] * ps.iter().map(|&(a, b)| spec.config(x)[a] * spec.config(x)[b]).product::<f64>()).sum()
        };
        let du = Matrix::from_fn(pairs.len(), pairs.len(), |i, j| mom(&[pairs[i], pairs[j]]) - mom(&[pairs[i]]) * mom(&[pairs[j]]));
        let proj = &(&m.j.transpose() * &ds) * &m.j;
        worst = worst.max((&proj - &du).max_abs());
    }
    (worst <= 1e-10, format!("max sup-norm defect {worst:.1e}"))
}

fn c5_sylvester() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (n, m) = (rng.gen_range(1..=7), rng.gen_range(1..=7));
        let a = Matrix::from_fn(n, m, |_, _| rng.gen_range(-0.5..0.5));
        let b = Matrix::from_fn(m, n, |_, _| rng.gen_range(-0.5..0.5));
        let lhs = (&Matrix::identity(n) + &(&a * &b)).det().unwrap();
        let rhs = (&Matrix::identity(m) + &(&b * &a)).det().unwrap();
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    (worst <= 1e-9, format!("max rel defect {worst:.1e} over 1000 pairs"))
}

fn c6_local() -> (bool, String) {
    let lf = ln_factorials(400);
    let half = ProbMeasure::uniform(2);
    let err: Vec<f64> = [50usize, 100, 200, 400]
        .iter()
        .map(|&n| {
            let exact = lf[n] - 2.0 * lf[n / 2];
            assert!((log_multinomial(&TypeVector::new(vec![n as u64 / 2; 2])) - exact).abs() < 1e-9);
            (local_approx_log_multinomial(&half, &[0.0, 0.0], n as u64).unwrap() - exact).exp_m1().abs()
        })
        .collect();
    let ok = err.windows(2).all(|w| w[1] < w[0]) && err[2] / err[0] <= 0.3 && err[3] / err[1] <= 0.3;
    (ok, format!("rel err {:.2e} {:.2e} {:.2e} {:.2e}", err[0], err[1], err[2], err[3]))
}

/// `(Σ over matchings and assignments of ∏ f, (Nl)!)` for 0/1 factors.
fn own_matching_count(ens: &EnsembleSpec, n: usize) -> (u128, u128) {
    let (l, r) = (ens.l(), ens.r());
    let edges = n * l;
    let m = edges / r;
    let mut total: u128 = 0;
    for perm in (0..edges).permutations(edges) {
        for assign in 0..(1u32 << n) {
            let ok = (0..m).all(|a| {
                let word = (0..r).fold(0usize, |w, j| (w << 1) | ((assign >> (perm[a * r + j] / l)) & 1) as usize);
                ens.f_values()[word] != 0.0
            });
            total += ok as u128;
        }
    }
    (total, (1..=edges as u128).product())
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn c7_configuration() -> (bool, String) {
    let mut instances = Vec::new();
    for (l, r) in [(2, 2), (2, 4), (2, 3), (3, 3), (3, 2), (4, 4), (2, 8)] {
        for n in 1..=8 / l {
            if (n * l) % r == 0 {
                instances.push((l, r, n));
            }
        }
    }
    let mut bad = 0;
    let mut count = 0;
    for &(l, r, n) in &instances {
        for ens in [EnsembleSpec::parity(l, r).unwrap(), EnsembleSpec::uniform(l, r, Alphabet::binary()).unwrap()] {
            let exact = exact_expected_z_rational(&ens, n).unwrap();
            let oracle = brute_force_permutation_oracle(&ens, n).unwrap();
            let (num, den) = own_matching_count(&ens, n);
            let g = gcd(num, den);
            let own = if den / g == 1 { format!("{}", num / g) } else { format!("{}/{}", num / g, den / g) };
            count += 1;
            if exact != oracle.expected_z || exact.to_string() != own {
                bad += 1;
            }
        }
    }
    let covers = instances.iter().any(|i| (i.0, i.1) == (2, 2)) && instances.iter().any(|i| (i.0, i.1) == (2, 4));
    (bad == 0 && covers, format!("{count} instances, {bad} mismatches (library, permutation oracle, direct count)"))
}

/// `log E[Z]` for binary parity factors: Σ_w C(N,w) [x^{wl}] P(x)^M / C(Nl, wl) with
/// `P(x) = ((1+x)^r + (1−x)^r)/2`.
fn ldpc_total(l: usize, r: usize, n: usize) -> f64 {
    let m = n * l / r;
    let lf = ln_factorials(n * l);
    let binom = |a: usize, b: usize| lf[a] - lf[b] - lf[a - b];
    let base: Vec<f64> = (0..=r).map(|j| if j % 2 == 0 { binom(r, j).exp() } else { 0.0 }).collect();
    let mut poly = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; poly.len() + r];
        for (i, &p) in poly.iter().enumerate() {
            for (j, &b) in base.iter().enumerate() {
                next[i + j] += p * b;
            }
        }
        poly = next;
    }
    let terms: Vec<f64> = (0..=n)
        .filter(|&w| poly[w * l] > 0.0)
        .map(|w| binom(n, w) + poly[w * l].ln() - binom(n * l, w * l))
        .collect();
    log_sum_exp(&terms)
}

fn c8_fg() -> (bool, String) {
    let ens = EnsembleSpec::parity(3, 6).unwrap();
    let mut agree: f64 = 0.0;
    let mut dev = Vec::new();
    for n in [20, 40, 60] {
        let own = ldpc_total(3, 6, n);
        agree = agree.max((exact_expected_z(&ens, n).unwrap() - own).abs());
        dev.push((own - fg_asymptotic_estimate(&ens, n).unwrap()).exp_m1().abs());
    }
    let ok = dev[1] < dev[0] && dev[2] < dev[1] && dev[2] < 0.1 && agree < 1e-9;
    (ok, format!("|ratio-1| = {:.2e}, {:.2e}, {:.2e}; library sum vs direct {agree:.1e}", dev[0], dev[1], dev[2]))
}

/// Fraction of uniform draws from `[−L, L)^{|S|−1}` meeting the congruences.
fn sampled_density(ens: &EnsembleSpec, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let l = ens.l() as i64;
    let half = 6 * l;
    let support = ens.support();
    let x0 = ens.letter_counts(support[0]);
    let diffs: Vec<Vec<i64>> = support[1..]
        .iter()
        .map(|&x| (1..ens.num_symbols()).map(|z| ens.letter_counts(x)[z] as i64 - x0[z] as i64).collect())
        .collect();
    let hits = (0..samples)
        .filter(|_| {
            let mut acc = vec![0i64; ens.num_symbols() - 1];
            for d in &diffs {
                let e = rng.gen_range(-half..half);
                acc.iter_mut().zip(d).for_each(|(a, x)| *a += e * x);
            }
            acc.iter().all(|a| a.rem_euclid(l) == 0)
        })
        .count();
    hits as f64 / samples as f64
}

fn c9_step() -> (bool, String) {
    let ternary = Alphabet::new(vec![0.0, 1.0, 2.0]).unwrap();
    let binary = Alphabet::binary();
    // (ensemble, expected s from the special-case formula)
    let mut cases: Vec<(String, EnsembleSpec, u64)> = vec![
        ("parity 2,4".into(), EnsembleSpec::parity(2, 4).unwrap(), 1),
        ("parity 3,6".into(), EnsembleSpec::parity(3, 6).unwrap(), 3),
        ("parity 3,4".into(), EnsembleSpec::parity(3, 4).unwrap(), 3),
        ("parity 4,6".into(), EnsembleSpec::parity(4, 6).unwrap(), 2),
        ("all-equal 3,3".into(), EnsembleSpec::all_equal(3, 3, binary.clone()).unwrap(), 1),
        ("all-equal 2,4".into(), EnsembleSpec::all_equal(2, 4, binary.clone()).unwrap(), 1),
    ];
    for l in [2u64, 3] {
        for (alpha, k) in [(&binary, 2u32), (&ternary, 3)] {
            for r in [2, 3] {
                let ens = EnsembleSpec::uniform(l as usize, r, alpha.clone()).unwrap();
                cases.push((format!("full l={l} |X|={k} r={r}"), ens, l.pow(k - 1)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let samples = 200_000;
    let mut bad = Vec::new();
    for (name, ens, expected) in &cases {
        let rep = lattice_step_report(ens);
        let p = 1.0 / *expected as f64;
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        let sampled = sampled_density(ens, &mut rng, samples);
        let ok = rep.s == *expected && rep.special_cases_agree() && rep.density_agrees() && (sampled - p).abs() <= 5.0 * sigma;
        if !ok {
            bad.push(name.clone());
        }
    }
    (bad.is_empty() && cases.len() >= 10, format!("{} configurations, disagreements {:?}", cases.len(), bad))
}

fn c10_covariance() -> (bool, String) {
    let beta: f64 = 0.5;
    let mut sk_err: f64 = 0.0;
    for n in [2, 3, 4] {
        let spec = DenseModelSpec::new(n, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(QuadraticOverlap::new(n, 0.0, beta * beta))).unwrap();
        let cov = overlap_covariance(&spec, &ProbMeasure::uniform(spec.num_configs()), n).unwrap();
        for (i, &(a, b)) in spec.pairs().pairs().iter().enumerate() {
            if a != b {
                sk_err = sk_err.max((cov.matrix[(i, i)] - 1.0 / (1.0 - beta * beta)).abs());
            }
        }
    }
    // Var of (v₀ − v₁)/√(2N) = 2 Var(k)/N under the weights C(N,k) exp(N (k/N)²/2).
    let n = 2000;
    let lf = ln_factorials(n);
    let nf = n as f64;
    let lw: Vec<f64> = (0..=n).map(|k| lf[n] - lf[k] - lf[n - k] + nf * (k as f64 / nf).powi(2) / 2.0).collect();
    let lz = log_sum_exp(&lw);
    let p: Vec<f64> = lw.iter().map(|w| (w - lz).exp()).collect();
    let mean: f64 = p.iter().enumerate().map(|(k, q)| q * k as f64).sum();
    let var: f64 = p.iter().enumerate().map(|(k, q)| q * (k as f64 - mean).powi(2)).sum();
    let exact = 2.0 * var / nf;
    let spec = binary_instance();
    let nu = solve_variational(&spec).unwrap().nu_star;
    let c = dense_type_covariance(&spec, &nu).unwrap();
    let e = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];
    let rel = (exact / c.variance_along(&e) - 1.0).abs();
    (sk_err <= 1e-10 && rel < 0.01, format!("overlap diag err {sk_err:.1e}; type variance rel err {rel:.2e}"))
}

fn c11_selftest() -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_central-approx")).args(["selftest", "--format", "csv"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let passed = text.lines().skip(1).filter(|l| l.contains(",true,")).count();
    (out.status.code() == Some(0) && passed == 10, format!("exit {:?}, {passed}/10 checks passed", out.status.code()))
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };
    gate.check(1, "SK paramagnetic correction", 1.0, c1_sk);
    gate.check(2, "RS determinant closed form", 10.0, c2_rs_det);
    gate.check(3, "dense central approximation convergence", 30.0, c3_dense);
    gate.check(4, "matrix identities", 5.0, c4_identities);
    gate.check(5, "Sylvester determinant identity", 5.0, c5_sylvester);
    gate.check(6, "local approximation decay", 1.0, c6_local);
    gate.check(7, "configuration model exactness", 60.0, c7_configuration);
    gate.check(8, "factor graph central approximation convergence", 120.0, c8_fg);
    gate.check(9, "step size triple agreement", 30.0, c9_step);
    gate.check(10, "overlap and type covariance", 60.0, c10_covariance);
    gate.check(11, "selftest command", 360.0, c11_selftest);
    assert!(gate.failures.is_empty(), "failed criteria: {:?}", gate.failures);
}
