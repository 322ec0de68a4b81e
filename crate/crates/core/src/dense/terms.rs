//! Built-in local terms `f(x^(1..n))` and global overlap terms `g(q)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Per-site term of the dense model, a function of the replica values at one site.
pub trait LocalTerm: Send + Sync + fmt::Debug {
    fn value(&self, replicas: &[f64]) -> f64;
}

/// Global term of the dense model, a function of the overlaps `q_ab`, `a <= b`,
/// in [`PairIndex`] order.
///
/// Derivatives are optional; when absent, central finite differences are used.
pub trait GlobalTerm: Send + Sync + fmt::Debug {
    fn value(&self, q: &[f64]) -> f64;

    fn gradient(&self, _q: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn hessian(&self, _q: &[f64]) -> Option<Matrix> {
        None
    }
}

/// Lexicographic enumeration of replica pairs `(a, b)` with `a <= b`
/// (0-based), or `a < b` when built with [`PairIndex::distinct`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairIndex {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        let pairs = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        PairIndex { n, pairs }
    }

    pub fn distinct(n: usize) -> Self {
        let pairs = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        PairIndex { n, pairs }
    }

    pub fn replicas(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.pairs.iter().position(|&p| p == (a, b))
    }

    /// Index map of the pairs after relabeling replicas by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Vec<usize> {
        self.pairs
            .iter()
            .map(|&(a, b)| self.position(perm[a], perm[b]).expect("permutation keeps pair set"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroLocal;

impl LocalTerm for ZeroLocal {
    fn value(&self, _: &[f64]) -> f64 {
        0.0
    }
}

/// `f = h Σ_a x^(a)`.
#[derive(Debug, Clone, Copy)]
pub struct FieldTerm {
    pub h: f64,
}

impl LocalTerm for FieldTerm {
    fn value(&self, x: &[f64]) -> f64 {
        self.h * x.iter().sum::<f64>()
    }
}

/// Wraps a closure as a local term.
#[derive(Clone)]
pub struct FnLocal(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl fmt::Debug for FnLocal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnLocal(..)")
    }
}

impl LocalTerm for FnLocal {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGlobal;

impl GlobalTerm for ZeroGlobal {
    fn value(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; q.len()])
    }
    fn hessian(&self, q: &[f64]) -> Option<Matrix> {
        Some(Matrix::zeros(q.len(), q.len()))
    }
}

/// `g = (diag/2) Σ_a q_aa² + (offdiag/2) Σ_{a<b} q_ab²`.
#[derive(Debug, Clone)]
pub struct QuadraticOverlap {
    pub diag: f64,
    pub offdiag: f64,
    pairs: PairIndex,
}

impl QuadraticOverlap {
    pub fn new(n: usize, diag: f64, offdiag: f64) -> Self {
        QuadraticOverlap { diag, offdiag, pairs: PairIndex::new(n) }
    }

    fn coef(&self, p: usize) -> f64 {
        let (a, b) = self.pairs.pairs()[p];
        if a == b {
            self.diag
        } else {
            self.offdiag
        }
    }
}

impl GlobalTerm for QuadraticOverlap {
    fn value(&self, q: &[f64]) -> f64 {
        q.iter().enumerate().map(|(p, x)| 0.5 * self.coef(p) * x * x).sum()
    }
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        Some(q.iter().enumerate().map(|(p, x)| self.coef(p) * x).collect())
    }
    fn hessian(&self, q: &[f64]) -> Option<Matrix> {
        Some(Matrix::diag(&(0..q.len()).map(|p| self.coef(p)).collect::<Vec<_>>()))
    }
}

/// Replica-averaged `p`-spin interaction:
/// `g = (β²/2) Σ_{a<b} q_ab^p + (β²/4) Σ_a q_aa^p`.
///
/// Its Hessian on distinct pairs is `β² C(p,2) q_ab^(p−2)`; `p = 2` is the
/// Sherrington–Kirkpatrick model.
#[derive(Debug, Clone)]
pub struct PSpin {
    pub beta: f64,
    pub p: u32,
    pairs: PairIndex,
}

impl PSpin {
    pub fn new(n: usize, beta: f64, p: u32) -> Self {
        PSpin { beta, p, pairs: PairIndex::new(n) }
    }

    fn weight(&self, idx: usize) -> f64 {
        let (a, b) = self.pairs.pairs()[idx];
        let b2 = self.beta * self.beta;
        if a == b {
            b2 / 4.0
        } else {
            b2 / 2.0
        }
    }
}

impl GlobalTerm for PSpin {
    fn value(&self, q: &[f64]) -> f64 {
        q.iter().enumerate().map(|(i, x)| self.weight(i) * x.powi(self.p as i32)).sum()
    }
    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        let p = self.p as i32;
        Some(q.iter().enumerate().map(|(i, x)| self.weight(i) * p as f64 * x.powi(p - 1)).collect())
    }
    fn hessian(&self, q: &[f64]) -> Option<Matrix> {
        let p = self.p as i32;
        let d: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let c = (p * (p - 1)) as f64;
                if p >= 2 {
                    self.weight(i) * c * x.powi(p - 2)
                } else {
                    0.0
                }
            })
            .collect();
        Some(Matrix::diag(&d))
    }
}

/// One monomial `coef · ∏ q_pair^power` of an [`OverlapPolynomial`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    /// `(pair position, power)`.
    pub powers: Vec<(usize, u32)>,
}

impl Monomial {
    fn eval_without(&self, q: &[f64], skip: Option<usize>, skip2: Option<usize>) -> f64 {
        let mut out = self.coef;
        for (k, &(p, e)) in self.powers.iter().enumerate() {
            let mut e = e as i32;
            if Some(k) == skip {
                e -= 1;
            }
            if Some(k) == skip2 {
                e -= 1;
            }
            if e < 0 {
                return 0.0;
            }
            out *= q[p].powi(e);
        }
        out
    }
}

/// User polynomial in the overlaps with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapPolynomial {
    pub terms: Vec<Monomial>,
}

impl GlobalTerm for OverlapPolynomial {
    fn value(&self, q: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval_without(q, None, None)).sum()
    }

    fn gradient(&self, q: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; q.len()];
        for m in &self.terms {
            for (k, &(p, e)) in m.powers.iter().enumerate() {
                g[p] += e as f64 * m.eval_without(q, Some(k), None);
            }
        }
        Some(g)
    }

    fn hessian(&self, q: &[f64]) -> Option<Matrix> {
        let mut h = Matrix::zeros(q.len(), q.len());
        for m in &self.terms {
            for (k, &(p, e)) in m.powers.iter().enumerate() {
                for (k2, &(p2, e2)) in m.powers.iter().enumerate() {
                    let v = if k == k2 {
                        (e as f64) * (e as f64 - 1.0) * m.eval_without(q, Some(k), Some(k))
                    } else {
                        (e as f64) * (e2 as f64) * m.eval_without(q, Some(k), Some(k2))
                    };
                    h[(p, p2)] += v;
                }
            }
        }
        Some(h)
    }
}

/// Closure-backed global term without analytic derivatives.
#[derive(Clone)]
pub struct FnGlobal(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl fmt::Debug for FnGlobal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnGlobal(..)")
    }
}

impl GlobalTerm for FnGlobal {
    fn value(&self, q: &[f64]) -> f64 {
        (self.0)(q)
    }
}

/// Relative step of the finite-difference gradient.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
/// Relative step of the value-based finite-difference Hessian.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

pub(crate) fn fd_gradient(g: &dyn GlobalTerm, q: &[f64]) -> Vec<f64> {
    let mut x = q.to_vec();
    (0..q.len())
        .map(|i| {
            let h = FD_GRADIENT_STEP * (1.0 + q[i].abs());
            x[i] = q[i] + h;
            let up = g.value(&x);
            x[i] = q[i] - h;
            let down = g.value(&x);
            x[i] = q[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn fd_hessian(g: &dyn GlobalTerm, q: &[f64]) -> Matrix {
    let n = q.len();
    let steps: Vec<f64> = q.iter().map(|x| FD_HESSIAN_STEP * (1.0 + x.abs())).collect();
    let mut x = q.to_vec();
    let mut eval = |di: (usize, f64), dj: (usize, f64)| {
        x[di.0] += di.1;
        x[dj.0] += dj.1;
        let v = g.value(&x);
        x[di.0] -= di.1;
        x[dj.0] -= dj.1;
        v
    };
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (hi, hj) = (steps[i], steps[j]);
            let v = (eval((i, hi), (j, hj)) - eval((i, hi), (j, -hj)) - eval((i, -hi), (j, hj))
                + eval((i, -hi), (j, -hj)))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_derivatives(g: &dyn GlobalTerm, dim: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ga = g.gradient(&q).unwrap();
            let gf = fd_gradient(g, &q);
            for (a, f) in ga.iter().zip(&gf) {
                assert!((a - f).abs() <= 1e-6 * (1.0 + a.abs()), "gradient {a} vs {f}");
            }
            let ha = g.hessian(&q).unwrap();
            let hf = fd_hessian(g, &q);
            assert!((&ha - &hf).max_abs() <= 1e-6 * (1.0 + ha.max_abs()), "{ha:?} vs {hf:?}");
        }
    }

    #[test]
    fn pair_index_order() {
        let p = PairIndex::new(3);
        assert_eq!(p.pairs(), &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        assert_eq!(p.position(2, 1), Some(4));
        assert_eq!(PairIndex::distinct(4).len(), 6);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        check_derivatives(&QuadraticOverlap::new(3, 0.7, -1.3), 6, 1);
        check_derivatives(&PSpin::new(3, 0.8, 3), 6, 2);
        check_derivatives(&PSpin::new(2, 0.5, 2), 3, 3);
        let poly = OverlapPolynomial {
            terms: vec![
                Monomial { coef: 0.5, powers: vec![(1, 2)] },
                Monomial { coef: -0.25, powers: vec![(0, 1), (1, 3), (2, 2)] },
                Monomial { coef: 1.5, powers: vec![] },
            ],
        };
        check_derivatives(&poly, 3, 4);
    }

    #[test]
    fn pspin_hessian_on_distinct_pairs() {
        let g = PSpin::new(3, 0.6, 3);
        let q = [1.0, 0.3, 0.3, 1.0, 0.3, 1.0];
        let h = g.hessian(&q).unwrap();
        let expected = 0.36 * 3.0 * 0.3; // β² C(3,2) q^(p−2)
        assert!((h[(1, 1)] - expected).abs() < 1e-14);
    }
}
