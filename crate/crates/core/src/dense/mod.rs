//! The dense replica model
//!
//! `E[Zⁿ] = Σ_{x ∈ (Xⁿ)^N} exp{ Σ_i f(x_i) + N g({(1/N) Σ_i x_i^(a) x_i^(b)}_{a≤b}) }`
//!
//! with exact evaluation (brute force and type sums), the variational
//! exponent, and the central-approximation constant factor.

mod central;
mod exact;
pub mod terms;
mod variational;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use central::{
    asymptotic_estimate, assemble_matrices, central_approx_constant, CentralApproxResult, DenseMatrices,
};
pub use exact::{brute_force_expectation, exact_type_sum, exact_type_sum_with_limit, windowed_type_sum};
pub use terms::{GlobalTerm, LocalTerm, PairIndex};
pub use variational::{solve_variational, solve_variational_with, SolverOptions, VariationalSolution, BOUNDARY_TOL};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::types::{entropy_of, Alphabet};

/// Cap on `|X|ⁿ`, the number of replica configurations per site.
pub const MAX_REPLICA_CONFIGS: usize = 4096;

/// A dense model: replica count, alphabet, local term `f` and global term `g`,
/// with the per-configuration tables every analysis needs.
#[derive(Debug, Clone)]
pub struct DenseModelSpec {
    n: usize,
    alphabet: Alphabet,
    local: Arc<dyn LocalTerm>,
    global: Arc<dyn GlobalTerm>,
    pairs: PairIndex,
    configs: Vec<Vec<f64>>,
    f_values: Vec<f64>,
    /// `J(x, (a,b)) = x^(a) x^(b)`.
    j: Matrix,
}

impl DenseModelSpec {
    pub fn new(
        n: usize,
        alphabet: Alphabet,
        local: Arc<dyn LocalTerm>,
        global: Arc<dyn GlobalTerm>,
    ) -> Result<Self> {
        if n == 0 {
            return invalid("replica count n must be at least 1");
        }
        let k = alphabet.len();
        let size = (k as f64).powi(n as i32);
        if size > MAX_REPLICA_CONFIGS as f64 {
            return invalid(format!("|X|^n = {size} exceeds {MAX_REPLICA_CONFIGS}"));
        }
        let size = size as usize;
        let configs: Vec<Vec<f64>> = (0..size)
            .map(|mut idx| {
                let mut digits = vec![0.0; n];
                for a in (0..n).rev() {
                    digits[a] = alphabet.value(idx % k);
                    idx /= k;
                }
                digits
            })
            .collect();
        let f_values: Vec<f64> = configs.iter().map(|x| local.value(x)).collect();
        if let Some(v) = f_values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("local term is not finite on the alphabet ({v})"));
        }
        let pairs = PairIndex::new(n);
        let j = Matrix::from_fn(size, pairs.len(), |x, p| {
            let (a, b) = pairs.pairs()[p];
            configs[x][a] * configs[x][b]
        });
        Ok(DenseModelSpec { n, alphabet, local, global, pairs, configs, f_values, j })
    }

    pub fn replicas(&self) -> usize {
        self.n
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn pairs(&self) -> &PairIndex {
        &self.pairs
    }

    /// Number of replica configurations `|X|ⁿ`.
    pub fn num_configs(&self) -> usize {
        self.configs.len()
    }

    /// Replica values of configuration `x` (replica 1 is the most significant digit).
    pub fn config(&self, x: usize) -> &[f64] {
        &self.configs[x]
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn pair_products(&self) -> &Matrix {
        &self.j
    }

    pub fn local_term(&self) -> &dyn LocalTerm {
        self.local.as_ref()
    }

    pub fn global_term(&self) -> &dyn GlobalTerm {
        self.global.as_ref()
    }

    pub fn g(&self, q: &[f64]) -> f64 {
        self.global.value(q)
    }

    /// Analytic gradient of `g`, or central finite differences.
    pub fn dg(&self, q: &[f64]) -> Vec<f64> {
        self.global.gradient(q).unwrap_or_else(|| terms::fd_gradient(self.global.as_ref(), q))
    }

    /// Analytic Hessian of `g`, or central finite differences.
    pub fn d2g(&self, q: &[f64]) -> Matrix {
        self.global.hessian(q).unwrap_or_else(|| terms::fd_hessian(self.global.as_ref(), q))
    }

    /// Overlaps `⟨x^(a) x^(b)⟩_ν` for a weight vector over configurations.
    pub fn overlaps(&self, nu: &[f64]) -> Vec<f64> {
        let p = self.pairs.len();
        let mut q = vec![0.0; p];
        for (x, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (qp, jp) in q.iter_mut().zip(self.j.row(x)) {
                *qp += w * jp;
            }
        }
        q
    }

    /// `H(ν) + ⟨f⟩_ν + g(⟨x^(a)x^(b)⟩_ν)`.
    pub fn objective(&self, nu: &[f64]) -> f64 {
        let mean_f: f64 = nu.iter().zip(&self.f_values).map(|(w, f)| w * f).sum();
        entropy_of(nu) + mean_f + self.g(&self.overlaps(nu))
    }

    /// Configuration index after relabeling replicas: replica `a` of the
    /// result holds replica `perm[a]` of `x`.
    pub fn permute_config(&self, x: usize, perm: &[usize]) -> usize {
        let k = self.alphabet.len();
        let src = &self.configs[x];
        perm.iter().fold(0, |idx, &a| {
            idx * k + self.alphabet.index_of(src[a]).expect("symbol from alphabet")
        })
    }

    /// Largest change of `g` under a consistent relabeling of replica indices,
    /// over `samples` random overlap vectors and random permutations.
    pub fn permutation_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..self.n).collect();
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            perm.shuffle(&mut rng);
            let map = self.pairs.permuted(&perm);
            let q: Vec<f64> = (0..self.pairs.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut qp = vec![0.0; q.len()];
            for (i, &m) in map.iter().enumerate() {
                qp[m] = q[i];
            }
            worst = worst.max((self.g(&q) - self.g(&qp)).abs());
        }
        worst
    }

    /// Checks replica-permutation invariance of `g` to 1e-10 over 100 samples.
    pub fn validate_symmetry(&self) -> Result<()> {
        let d = self.permutation_defect(100, 0x5eed);
        if d > 1e-10 {
            return invalid(format!("global term is not replica-permutation invariant (defect {d:.3e})"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::terms::*;
    use super::*;

    #[test]
    fn config_layout_and_j() {
        let spec =
            DenseModelSpec::new(2, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal)).unwrap();
        assert_eq!(spec.num_configs(), 4);
        assert_eq!(spec.config(1), &[1.0, -1.0]);
        assert_eq!(spec.config(2), &[-1.0, 1.0]);
        // pairs (0,0),(0,1),(1,1)
        assert_eq!(spec.pair_products().row(1), &[1.0, -1.0, 1.0]);
        assert_eq!(spec.permute_config(1, &[1, 0]), 2);
    }

    #[test]
    fn symmetric_terms_pass_validation() {
        let spec = DenseModelSpec::new(
            3,
            Alphabet::spins(),
            Arc::new(FieldTerm { h: 0.2 }),
            Arc::new(PSpin::new(3, 0.7, 3)),
        )
        .unwrap();
        spec.validate_symmetry().unwrap();
    }

    #[test]
    fn asymmetric_global_term_rejected() {
        let g = OverlapPolynomial { terms: vec![Monomial { coef: 1.0, powers: vec![(1, 2)] }] };
        let spec = DenseModelSpec::new(3, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(g)).unwrap();
        assert!(spec.validate_symmetry().is_err());
    }

    #[test]
    fn objective_permutation_symmetry() {
        let spec = DenseModelSpec::new(
            3,
            Alphabet::binary(),
            Arc::new(FieldTerm { h: 0.3 }),
            Arc::new(QuadraticOverlap::new(3, 0.4, 0.9)),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let w: Vec<f64> = (0..spec.num_configs()).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = w.iter().sum();
            let nu: Vec<f64> = w.iter().map(|x| x / s).collect();
            let mut perm: Vec<usize> = (0..3).collect();
            perm.shuffle(&mut rng);
            let mut relabeled = vec![0.0; nu.len()];
            for (x, &p) in nu.iter().enumerate() {
                relabeled[spec.permute_config(x, &perm)] = p;
            }
            assert!((spec.objective(&nu) - spec.objective(&relabeled)).abs() <= 1e-10);
        }
    }

    #[test]
    fn finite_difference_fallback() {
        let g = FnGlobal(Arc::new(|q: &[f64]| 0.5 * q[0] * q[0]));
        let spec = DenseModelSpec::new(1, Alphabet::binary(), Arc::new(ZeroLocal), Arc::new(g)).unwrap();
        assert!((spec.dg(&[0.3])[0] - 0.3).abs() < 1e-9);
        assert!((spec.d2g(&[0.3])[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_oversized_models() {
        assert!(DenseModelSpec::new(13, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal)).is_err());
        assert!(DenseModelSpec::new(0, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(ZeroGlobal)).is_err());
    }
}
