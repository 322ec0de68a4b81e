use super::DenseModelSpec;
use crate::error::{invalid, Error, Result};
use crate::types::{log_multinomial_counts, log_sum_over_types, LogSumExp, ProbMeasure, DEFAULT_TYPE_LIMIT};

/// Cap on `|X|^(nN)` for direct summation.
pub const BRUTE_FORCE_LIMIT: f64 = 1e8;

/// `log E[Zⁿ]` by direct summation over all `(Xⁿ)^N` configurations.
pub fn brute_force_expectation(spec: &DenseModelSpec, n_sites: usize) -> Result<f64> {
    if n_sites == 0 {
        return invalid("N must be positive");
    }
    let k = spec.num_configs();
    let size = (k as f64).powi(n_sites as i32);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::Guard { what: "|X|^(nN) for brute force", size, limit: BRUTE_FORCE_LIMIT });
    }
    let nf = n_sites as f64;
    let j = spec.pair_products();
    let pairs = spec.pairs().len();
    let mut sites = vec![0usize; n_sites];
    let mut acc = LogSumExp::new();
    let mut q = vec![0.0; pairs];
    loop {
        q.iter_mut().for_each(|x| *x = 0.0);
        let mut local = 0.0;
        for &x in &sites {
            local += spec.f_values()[x];
            for (qp, jp) in q.iter_mut().zip(j.row(x)) {
                *qp += jp;
            }
        }
        q.iter_mut().for_each(|x| *x /= nf);
        acc.push(local + nf * spec.g(&q));

        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == n_sites {
                return Ok(acc.value());
            }
            sites[pos] += 1;
            if sites[pos] < k {
                break;
            }
            sites[pos] = 0;
            pos += 1;
        }
    }
}

fn type_term(spec: &DenseModelSpec, v: &[u64], nf: f64) -> f64 {
    let mut q = vec![0.0; spec.pairs().len()];
    let mut local = 0.0;
    for (x, &c) in v.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let c = c as f64;
        local += c * spec.f_values()[x];
        for (qp, jp) in q.iter_mut().zip(spec.pair_products().row(x)) {
            *qp += c * jp;
        }
    }
    q.iter_mut().for_each(|x| *x /= nf);
    log_multinomial_counts(v) + local + nf * spec.g(&q)
}

/// `log E[Zⁿ]` as a sum over types `v` of length `N` on `Xⁿ`:
/// `Σ_v multinomial(v) exp{Σ_x v(x) f(x) + N g(q(v/N))}`.
pub fn exact_type_sum(spec: &DenseModelSpec, n_sites: usize) -> Result<f64> {
    exact_type_sum_with_limit(spec, n_sites, DEFAULT_TYPE_LIMIT)
}

pub fn exact_type_sum_with_limit(spec: &DenseModelSpec, n_sites: usize, type_limit: f64) -> Result<f64> {
    if n_sites == 0 {
        return invalid("N must be positive");
    }
    let nf = n_sites as f64;
    log_sum_over_types(n_sites as u64, spec.num_configs(), type_limit, |v| type_term(spec, v, nf))
}

/// The type sum restricted to `‖v − Nν*‖₂ ≤ N^α`.
pub fn windowed_type_sum(spec: &DenseModelSpec, n_sites: usize, alpha: f64, nu_star: &ProbMeasure) -> Result<f64> {
    if !(alpha > 0.5 && alpha.is_finite()) {
        return invalid(format!("window exponent {alpha} must exceed 1/2"));
    }
    if nu_star.len() != spec.num_configs() {
        return invalid("centre measure has the wrong number of configurations");
    }
    if nu_star.min() <= 0.0 {
        return invalid("window centre must be strictly positive");
    }
    if n_sites == 0 {
        return invalid("N must be positive");
    }
    let nf = n_sites as f64;
    let radius_sq = nf.powf(2.0 * alpha);
    let centre: Vec<f64> = nu_star.as_slice().iter().map(|p| nf * p).collect();
    log_sum_over_types(n_sites as u64, spec.num_configs(), DEFAULT_TYPE_LIMIT, |v| {
        let d2: f64 = v.iter().zip(&centre).map(|(&c, m)| (c as f64 - m).powi(2)).sum();
        if d2 > radius_sq {
            f64::NEG_INFINITY
        } else {
            type_term(spec, v, nf)
        }
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::terms::*;
    use super::*;
    use crate::types::Alphabet;

    fn spec(n: usize, alphabet: Alphabet, f: Arc<dyn LocalTerm>, g: Arc<dyn GlobalTerm>) -> DenseModelSpec {
        DenseModelSpec::new(n, alphabet, f, g).unwrap()
    }

    #[test]
    fn trivial_model_counts_configurations() {
        let s = spec(2, Alphabet::new(vec![0.0, 1.0, 2.0]).unwrap(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal));
        for n in 1..=4 {
            let expected = (n * 2) as f64 * 3f64.ln();
            assert!((brute_force_expectation(&s, n).unwrap() - expected).abs() < 1e-12);
            assert!((exact_type_sum(&s, n).unwrap() - expected).abs() < 1e-12);
        }
        let s1 = spec(1, Alphabet::new(vec![0.0, 1.0, 2.0]).unwrap(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal));
        let big = exact_type_sum(&s1, 300).unwrap();
        assert!((big - 300.0 * 3f64.ln()).abs() < 1e-9 * big);
    }

    #[test]
    fn independent_spins_closed_form() {
        let h = 0.37;
        let s = spec(1, Alphabet::spins(), Arc::new(FieldTerm { h }), Arc::new(ZeroGlobal));
        for n in [1, 5, 12] {
            let expected = n as f64 * (2.0 * h.cosh()).ln();
            assert!((brute_force_expectation(&s, n).unwrap() - expected).abs() < 1e-12);
            assert!((exact_type_sum(&s, n).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_matches_type_sum() {
        let cases: Vec<DenseModelSpec> = vec![
            spec(1, Alphabet::binary(), Arc::new(ZeroLocal), Arc::new(QuadraticOverlap::new(1, 1.0, 0.0))),
            spec(2, Alphabet::spins(), Arc::new(FieldTerm { h: 0.2 }), Arc::new(PSpin::new(2, 0.8, 2))),
            spec(2, Alphabet::binary(), Arc::new(FieldTerm { h: -0.4 }), Arc::new(QuadraticOverlap::new(2, 0.3, 1.1))),
            spec(3, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(PSpin::new(3, 0.6, 3))),
        ];
        for s in &cases {
            let n_max = 16 / s.replicas();
            for n in 1..=n_max {
                let a = brute_force_expectation(s, n).unwrap();
                let b = exact_type_sum(s, n).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "n={} N={n}: {a} vs {b}", s.replicas());
            }
        }
    }

    #[test]
    fn brute_force_guard() {
        let s = spec(2, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal));
        assert!(matches!(brute_force_expectation(&s, 20), Err(Error::Guard { .. })));
    }

    #[test]
    fn window_covering_simplex_equals_full_sum() {
        let s = spec(1, Alphabet::binary(), Arc::new(ZeroLocal), Arc::new(QuadraticOverlap::new(1, 1.0, 0.0)));
        let nu = ProbMeasure::uniform(2);
        let full = exact_type_sum(&s, 40).unwrap();
        let win = windowed_type_sum(&s, 40, 5.0, &nu).unwrap();
        assert!((full - win).abs() < 1e-12);
        assert!(windowed_type_sum(&s, 40, 0.4, &nu).is_err());
    }
}
