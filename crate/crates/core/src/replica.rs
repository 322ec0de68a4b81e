//! Replica-symmetric closed forms on `X = {+1, −1}`.
//!
//! Under replica symmetry both `D²g` and `U' − U`, restricted to distinct
//! pairs `a < b`, are "PQR" matrices whose entries depend only on
//! `|{a,b} ∩ {c,d}|`. Such matrices share eigenvectors, with eigenvalues
//!
//! | multiplicity   | eigenvalue                              |
//! |----------------|-----------------------------------------|
//! | 1              | `P + 2(n−2)Q + (n−2)(n−3)/2 · R`        |
//! | n − 1          | `P + (n−4)Q − (n−3)R`                   |
//! | n(n−3)/2       | `P − 2Q + R`                            |
//!
//! so `det(I − D²g(U'−U))` factors into three powers.

use serde::{Deserialize, Serialize};

use crate::dense::PairIndex;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

/// Replica-symmetric parameters: overlaps `q`, `r` of `ν*` and the `D²g`
/// entries `P`, `Q`, `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsParams {
    pub q: f64,
    pub r: f64,
    pub p_coef: f64,
    pub q_coef: f64,
    pub r_coef: f64,
}

impl RsParams {
    pub fn new(q: f64, r: f64, p_coef: f64, q_coef: f64, r_coef: f64) -> Result<Self> {
        if !(q.abs() <= 1.0 && r.abs() <= 1.0) {
            return invalid(format!("moments of ±1 variables need |q|, |r| <= 1 (q = {q}, r = {r})"));
        }
        Ok(RsParams { q, r, p_coef, q_coef, r_coef })
    }

    /// `(P, Q, R)` of `U' − U`: `(1 − q², q(1 − q), r − q²)`.
    pub fn fluctuation_pattern(&self) -> (f64, f64, f64) {
        (1.0 - self.q * self.q, self.q * (1.0 - self.q), self.r - self.q * self.q)
    }
}

/// `n(n−1)/2`-square matrix on distinct pairs (lexicographic) with entry
/// `P`, `Q` or `R` when the pairs share 2, 1 or 0 indices.
///
/// For `n = 2` the result is the 1×1 matrix `[P]`; for `n = 3` the `R`
/// pattern does not occur.
pub fn build_pqr_matrix(n: usize, p: f64, q: f64, r: f64) -> Result<Matrix> {
    if n < 2 {
        return invalid(format!("PQR matrix needs n >= 2 replicas (got {n})"));
    }
    let pairs = PairIndex::distinct(n);
    let ps = pairs.pairs();
    Ok(Matrix::from_fn(ps.len(), ps.len(), |i, j| {
        let (a, b) = ps[i];
        let (c, d) = ps[j];
        let shared = [a == c || a == d, b == c || b == d].iter().filter(|&&s| s).count();
        match shared {
            2 => p,
            1 => q,
            _ => r,
        }
    }))
}

/// The three distinct eigenvalues `(λ₁, λ₂, λ₃)` of a PQR matrix, with
/// multiplicities `1`, `n − 1`, `n(n−3)/2`. `n` may be non-integer.
pub fn pqr_eigenvalues(n: f64, p: f64, q: f64, r: f64) -> (f64, f64, f64) {
    (
        p + 2.0 * (n - 2.0) * q + 0.5 * (n - 2.0) * (n - 3.0) * r,
        p + (n - 4.0) * q - (n - 3.0) * r,
        p - 2.0 * q + r,
    )
}

/// The three factors `1 − λᵍ λᵘ` of the replica-symmetric determinant.
fn rs_factors(n: f64, params: &RsParams) -> [f64; 3] {
    let (pu, qu, ru) = params.fluctuation_pattern();
    let g = pqr_eigenvalues(n, params.p_coef, params.q_coef, params.r_coef);
    let u = pqr_eigenvalues(n, pu, qu, ru);
    [1.0 - g.0 * u.0, 1.0 - g.1 * u.1, 1.0 - g.2 * u.2]
}

/// `det(I_{n(n−1)/2} − D²g(U'−U))` in the three-factor closed form.
///
/// For `n = 2` there is a single pair and the determinant is `1 − P(1 − q²)`.
pub fn rs_determinant(n: usize, params: &RsParams) -> Result<f64> {
    match n {
        0 | 1 => invalid(format!("RS determinant needs n >= 2 (got {n})")),
        2 => Ok(1.0 - params.p_coef * (1.0 - params.q * params.q)),
        _ => Ok(rs_determinant_continued(n as f64, params)),
    }
}

/// The closed form as an analytic function of `n` (for the `n → 0` continuation).
pub fn rs_determinant_continued(n: f64, params: &RsParams) -> f64 {
    let [f1, f2, f3] = rs_factors(n, params);
    f1 * f2.powf(n - 1.0) * f3.powf(0.5 * n * (n - 3.0))
}

/// `−(1/2N)[log(1 − (1−4q+3r)(P−4Q+3R)) − (3/2) log(1 − (1−2q+r)(P−2Q+R))]`,
/// the `n → 0` finite-size correction of the RS free energy `E[log Z]/N`.
pub fn rs_correction_n0(n_sites: usize, params: &RsParams) -> Result<f64> {
    if n_sites == 0 {
        return invalid("N must be positive");
    }
    let RsParams { q, r, p_coef: p, q_coef: qq, r_coef: rr } = *params;
    let a = 1.0 - (1.0 - 4.0 * q + 3.0 * r) * (p - 4.0 * qq + 3.0 * rr);
    let b = 1.0 - (1.0 - 2.0 * q + r) * (p - 2.0 * qq + rr);
    for argument in [a, b] {
        if !(argument > 0.0) {
            return Err(Error::RsUndefined { argument });
        }
    }
    Ok(-(a.ln() - 1.5 * b.ln()) / (2.0 * n_sites as f64))
}

/// SK model in the paramagnetic phase (`q = r = 0`, `P = β²`, `Q = R = 0`):
/// `(1/(4N)) log(1 − β²)`.
pub fn sk_paramagnetic_correction(beta: f64, n_sites: usize) -> Result<f64> {
    if !beta.is_finite() || beta < 0.0 {
        return invalid(format!("inverse temperature must be finite and nonnegative (got {beta})"));
    }
    if beta >= 1.0 {
        return Err(Error::OutOfScope { beta });
    }
    rs_correction_n0(n_sites, &RsParams { q: 0.0, r: 0.0, p_coef: beta * beta, q_coef: 0.0, r_coef: 0.0 })
}
