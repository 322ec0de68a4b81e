use serde::Serialize;

use super::variational::{solve_variational, VariationalSolution, BOUNDARY_TOL};
use super::DenseModelSpec;
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::types::{LogSumExp, ProbMeasure};

/// Matrices of the central approximation at a maximizer `ν*`.
#[derive(Debug, Clone)]
pub struct DenseMatrices {
    /// Overlaps `⟨x^(a)x^(b)⟩_ν*` in pair order.
    pub overlaps: Vec<f64>,
    /// `U'((a,b),(c,d)) = ⟨x^(a)x^(b)x^(c)x^(d)⟩`.
    pub u_prime: Matrix,
    /// `U((a,b),(c,d)) = ⟨x^(a)x^(b)⟩⟨x^(c)x^(d)⟩`.
    pub u: Matrix,
    /// `J(x,(a,b)) = x^(a)x^(b)`, `|Xⁿ| × n(n+1)/2`.
    pub j: Matrix,
    /// `diag(1/ν*)`.
    pub b: Matrix,
    /// Difference embedding `|Xⁿ| × (|Xⁿ|−1)` relative to the first configuration.
    pub h: Matrix,
    /// `diag(ν*)`.
    pub s_prime: Matrix,
    /// `ν* ν*ᵗ`.
    pub s: Matrix,
    /// `D²g` at the overlaps of `ν*`.
    pub d2g: Matrix,
}

impl DenseMatrices {
    /// `I − D²g (U' − U)`.
    pub fn stability_matrix(&self) -> Matrix {
        let du = &self.u_prime - &self.u;
        &Matrix::identity(du.rows()) - &(&self.d2g * &du)
    }

    /// `det(I − D²g(U'−U))`.
    pub fn stability_determinant(&self) -> f64 {
        self.stability_matrix().det().expect("square, finite")
    }

    /// The same determinant along the Gaussian-integral route:
    /// `det(I_{|Xⁿ|−1} − Hᵗ J D²g Jᵗ H (HᵗBH)⁻¹)`.
    pub fn lattice_route_determinant(&self) -> Result<f64> {
        let ht = self.h.transpose();
        let htbh = &(&ht * &self.b) * &self.h;
        let inner = &(&(&(&ht * &self.j) * &self.d2g) * &self.j.transpose()) * &self.h;
        let m = &Matrix::identity(ht.rows()) - &(&inner * &htbh.inverse()?);
        m.det()
    }
}

/// Output of the central approximation for the dense model.
#[derive(Debug, Clone, Serialize)]
pub struct CentralApproxResult {
    /// The exponent `F`.
    pub exponent: f64,
    /// `log Σ_{ν*} det(I − D²g(U'−U))^{−1/2}`.
    pub log_constant: f64,
    /// Determinant at the first maximizer.
    pub det_value: f64,
    /// Determinant at every maximizer.
    pub dets: Vec<f64>,
    #[serde(skip)]
    pub matrices: DenseMatrices,
    pub maximizers: Vec<ProbMeasure>,
}

impl CentralApproxResult {
    /// `N F + log C`.
    pub fn log_estimate(&self, n_sites: usize) -> f64 {
        n_sites as f64 * self.exponent + self.log_constant
    }
}

/// Builds `U', U, J, B, H, S', S` and `D²g` at a strictly positive `ν*`.
pub fn assemble_matrices(spec: &DenseModelSpec, nu_star: &ProbMeasure) -> Result<DenseMatrices> {
    let k = spec.num_configs();
    if nu_star.len() != k {
        return invalid(format!("measure has {} entries, model has {k} configurations", nu_star.len()));
    }
    let min = nu_star.min();
    if min < BOUNDARY_TOL {
        return Err(Error::BoundaryMaximizer { min });
    }
    let nu = nu_star.as_slice();
    let j = spec.pair_products().clone();
    let overlaps = spec.overlaps(nu);
    let s_prime = Matrix::diag(nu);
    let u_prime = &(&j.transpose() * &s_prime) * &j;
    let u = Matrix::outer(&overlaps, &overlaps);
    let b = Matrix::diag(&nu.iter().map(|p| 1.0 / p).collect::<Vec<_>>());
    let h = Matrix::from_fn(k, k - 1, |x, c| {
        if x == 0 {
            -1.0
        } else if x == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    let s = Matrix::outer(nu, nu);
    let d2g = spec.d2g(&overlaps);
    Ok(DenseMatrices { overlaps, u_prime, u, j, b, h, s_prime, s, d2g })
}

/// Constant factor `Σ_{ν*} det(I − D²g(U'−U))^{−1/2}` over all maximizers.
pub fn central_approx_constant(spec: &DenseModelSpec, solution: &VariationalSolution) -> Result<CentralApproxResult> {
    let mut acc = LogSumExp::new();
    let mut dets = Vec::with_capacity(solution.maximizers.len());
    let mut first = None;
    for m in &solution.maximizers {
        let mats = assemble_matrices(spec, m)?;
        let det = mats.stability_determinant();
        if !(det > 0.0) {
            return Err(Error::AtInstability { det });
        }
        acc.push(-0.5 * det.ln());
        dets.push(det);
        first.get_or_insert(mats);
    }
    let matrices = first.ok_or_else(|| Error::InvalidInput("solution has no maximizer".into()))?;
    Ok(CentralApproxResult {
        exponent: solution.exponent,
        log_constant: acc.value(),
        det_value: dets[0],
        dets,
        matrices,
        maximizers: solution.maximizers.clone(),
    })
}

/// `log E[Zⁿ] ≈ N F + log C`.
pub fn asymptotic_estimate(spec: &DenseModelSpec, n_sites: usize) -> Result<f64> {
    let sol = solve_variational(spec)?;
    Ok(central_approx_constant(spec, &sol)?.log_estimate(n_sites))
}
