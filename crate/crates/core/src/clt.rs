//! Covariances of the central limit theorems for types and overlaps, with
//! exact finite-`N` oracles.
//!
//! Covariance matrices are returned in full, singular directions included
//! (a normalized type has `Σ_x v(x) = N`, so the all-ones direction carries
//! no variance).

use serde::Serialize;

use crate::dense::{assemble_matrices, DenseModelSpec};
use crate::error::{invalid, Error, Result};
use crate::factor_graph::{assemble_fg_matrices, format_symbol, BetheSolution, EnsembleSpec};
use crate::linalg::Matrix;
use crate::types::{log_multinomial_counts, log_sum_over_types, fold_over_types, ln_factorial, ProbMeasure, DEFAULT_TYPE_LIMIT};

/// Largest dimension for which eigenvalue diagnostics are computed.
pub const DIAGNOSTICS_MAX_DIM: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceResult {
    pub matrix: Matrix,
    pub labels: Vec<String>,
    /// Eigenvalues above `1e-9 · max(1, λ_max)`.
    pub rank: Option<usize>,
    pub min_eigenvalue: Option<f64>,
    pub max_eigenvalue: Option<f64>,
    pub asymmetry: f64,
}

impl CovarianceResult {
    pub fn new(matrix: Matrix, labels: Vec<String>) -> Result<Self> {
        if matrix.rows() != labels.len() || !matrix.is_square() {
            return invalid("covariance matrix and labels disagree in size");
        }
        if !matrix.is_finite() {
            return invalid("covariance matrix is not finite");
        }
        let asymmetry = matrix.asymmetry();
        let (rank, min_eigenvalue, max_eigenvalue) = if matrix.rows() <= DIAGNOSTICS_MAX_DIM {
            let ev = matrix.symmetric_eigenvalues()?;
            let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = 1e-9 * max.abs().max(1.0);
            (Some(ev.iter().filter(|&&e| e > tol).count()), Some(min), Some(max))
        } else {
            (None, None, None)
        };
        Ok(CovarianceResult { matrix, labels, rank, min_eigenvalue, max_eigenvalue, asymmetry })
    }

    /// `eᵗ Σ e`.
    pub fn variance_along(&self, e: &[f64]) -> f64 {
        let se = self.matrix.mul_vec(e);
        se.iter().zip(e).map(|(a, b)| a * b).sum()
    }

    /// Symmetric and PSD up to `1e-10` asymmetry and eigenvalues `≥ −1e-9`.
    pub fn is_valid(&self) -> bool {
        self.asymmetry <= 1e-10 && self.min_eigenvalue.is_none_or(|m| m >= -1e-9)
    }
}

fn symmetrize(m: &Matrix) -> Matrix {
    (m + &m.transpose()).scale(0.5)
}

pub(crate) fn config_label(spec: &DenseModelSpec, x: usize) -> String {
    let parts: Vec<String> = spec.config(x).iter().map(|&v| format_symbol(v)).collect();
    format!("({})", parts.join(","))
}

fn pair_labels(pairs: &[(usize, usize)]) -> Vec<String> {
    pairs.iter().map(|(a, b)| format!("q{},{}", a + 1, b + 1)).collect()
}

/// `(S' − S)(I − J D²g Jᵗ (S' − S))⁻¹` on the `Xⁿ` basis: the limiting
/// covariance of `√N(v/N − ν*)`.
pub fn dense_type_covariance(spec: &DenseModelSpec, nu_star: &ProbMeasure) -> Result<CovarianceResult> {
    let mats = assemble_matrices(spec, nu_star)?;
    let det = mats.stability_determinant();
    if !(det > 0.0) {
        return Err(Error::AtInstability { det });
    }
    let ds = &mats.s_prime - &mats.s;
    let jd = &(&mats.j * &mats.d2g) * &mats.j.transpose();
    let a = &Matrix::identity(ds.rows()) - &(&jd * &ds);
    let cov = &ds * &a.inverse()?;
    let labels = (0..spec.num_configs()).map(|x| config_label(spec, x)).collect();
    CovarianceResult::new(symmetrize(&cov), labels)
}

/// `(U' − U)(I − D²g(U' − U))⁻¹` on the pairs `a ≤ b` of replicas `1..=m`:
/// the limiting covariance of the overlaps `√N(q_ab − q*_ab)`. For `m < n`
/// this is the marginal (sub-block) of the `n`-replica covariance.
pub fn overlap_covariance(spec: &DenseModelSpec, nu_star: &ProbMeasure, m: usize) -> Result<CovarianceResult> {
    let n = spec.replicas();
    if m == 0 || m > n {
        return invalid(format!("m must satisfy 1 <= m <= n = {n} (got {m})"));
    }
    let mats = assemble_matrices(spec, nu_star)?;
    let det = mats.stability_determinant();
    if !(det > 0.0) {
        return Err(Error::AtInstability { det });
    }
    let du = &mats.u_prime - &mats.u;
    let cov = symmetrize(&(&du * &mats.stability_matrix().inverse()?));
    let keep: Vec<usize> =
        spec.pairs().pairs().iter().enumerate().filter(|(_, &(a, b))| a < m && b < m).map(|(i, _)| i).collect();
    let kept_pairs: Vec<(usize, usize)> = keep.iter().map(|&i| spec.pairs().pairs()[i]).collect();
    CovarianceResult::new(cov.select(&keep, &keep), pair_labels(&kept_pairs))
}

fn dense_type_term(spec: &DenseModelSpec, v: &[u64], nf: f64) -> f64 {
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

/// Weighted first and second moments of a linear image of compositions.
struct Moments {
    mean: Vec<f64>,
    second: Matrix,
}

/// Mean and covariance of `feature(c)` for compositions `c` of `total` into
/// `cells` parts under weights `exp(log_weight(c))`: three passes (log
/// normalizer, mean, centred second moment) so no large cancellation occurs.
fn composition_moments(
    total: u64,
    cells: usize,
    dim: usize,
    log_weight: impl Fn(&[u64]) -> f64 + Sync,
    feature: impl Fn(&[u64]) -> Vec<f64> + Sync,
) -> Result<Moments> {
    let log_z = log_sum_over_types(total, cells, DEFAULT_TYPE_LIMIT, &log_weight)?;
    if !log_z.is_finite() {
        return invalid("no configuration carries positive weight");
    }
    let add = |a: &mut Vec<f64>, b: Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    let mean = fold_over_types(
        total,
        cells,
        DEFAULT_TYPE_LIMIT,
        || vec![0.0; dim],
        |acc, c| {
            let p = (log_weight(c) - log_z).exp();
            if p > 0.0 {
                acc.iter_mut().zip(feature(c)).for_each(|(a, f)| *a += p * f);
            }
        },
        add,
    )?;
    let second = fold_over_types(
        total,
        cells,
        DEFAULT_TYPE_LIMIT,
        || vec![0.0; dim * dim],
        |acc, c| {
            let p = (log_weight(c) - log_z).exp();
            if p > 0.0 {
                let d: Vec<f64> = feature(c).iter().zip(&mean).map(|(f, m)| f - m).collect();
                for i in 0..dim {
                    for j in 0..dim {
                        acc[i * dim + j] += p * d[i] * d[j];
                    }
                }
            }
        },
        add,
    )?;
    Ok(Moments { mean, second: Matrix::from_fn(dim, dim, |i, j| second[i * dim + j]) })
}

/// Exact covariance of `√N(v/N − E[v/N])` under the weights
/// `multinomial(v) exp{Σ_x v(x) f(x) + N g(q(v/N))}`, by summation over all
/// types. The limit theorem centres at `ν*`; the two centrings differ by
/// `O(1/N)` in the covariance.
pub fn empirical_type_covariance_oracle(spec: &DenseModelSpec, n_sites: usize) -> Result<CovarianceResult> {
    if n_sites == 0 {
        return invalid("N must be positive");
    }
    let nf = n_sites as f64;
    let k = spec.num_configs();
    let m = composition_moments(
        n_sites as u64,
        k,
        k,
        |v| dense_type_term(spec, v, nf),
        |v| v.iter().map(|&c| c as f64).collect(),
    )?;
    let labels = (0..k).map(|x| config_label(spec, x)).collect();
    CovarianceResult::new(m.second.scale(1.0 / nf), labels)
}

/// Limiting covariances of the variable type and the factor type.
#[derive(Debug, Clone, Serialize)]
pub struct FgCovariances {
    /// Covariance of `√N(v/N − ν*)`: `(r/l)(V' − V)(I − C(V' − V))⁻¹`.
    pub variable: CovarianceResult,
    /// Covariance of `√M(u/M − μ*)` on the support:
    /// `(T' − T)(I − K C Kᵗ (T' − T))⁻¹`.
    pub factor: CovarianceResult,
}

fn symbol_labels(ens: &EnsembleSpec) -> Vec<String> {
    ens.alphabet().values().iter().map(|&v| format_symbol(v)).collect()
}

pub fn fg_type_covariances(ens: &EnsembleSpec, solution: &BetheSolution) -> Result<FgCovariances> {
    let mats = assemble_fg_matrices(ens, &solution.nu_star, &solution.mu_star)?;
    let a = mats.stability_matrix();
    let det = a.det()?;
    if !(det > 0.0) {
        return Err(Error::BetheInstability { det });
    }
    let a_inv = a.inverse()?;
    let dv = &mats.v_prime - &mats.v;
    let ratio = ens.r() as f64 / ens.l() as f64;
    let variable = CovarianceResult::new(symmetrize(&(&dv * &a_inv).scale(ratio)), symbol_labels(ens))?;

    // On the support, X(I − K C Kᵗ X)⁻¹ = X + X K (I − C Kᵗ X K)⁻¹ C Kᵗ X with
    // X = T' − T and Kᵗ X K = V' − V.
    let support = ens.support();
    let mu = solution.mu_star.as_slice();
    let x = Matrix::from_fn(support.len(), support.len(), |i, j| {
        let (p, q) = (mu[support[i]], mu[support[j]]);
        if i == j {
            p - p * q
        } else {
            -p * q
        }
    });
    let k = mats.k.select(support, &(0..ens.num_symbols()).collect::<Vec<_>>());
    let xk = &x * &k;
    let middle = &a_inv * &mats.c;
    let factor = &x + &(&(&xk * &middle) * &xk.transpose());
    let labels = support.iter().map(|&w| ens.word_label(w)).collect();
    let factor = CovarianceResult::new(symmetrize(&factor), labels)?;
    Ok(FgCovariances { variable, factor })
}

/// Exact finite-`N` covariances of `v/√N` and `u/√M` (factor type on the
/// support) under the weights `E[N(v, u)] ∏ f^u`.
///
/// Sums over class totals `w`; within a class the words are multinomial with
/// probabilities `f(x)/F_c`, which gives `E[u | w]` and `Cov(u | w)` in closed
/// form.
pub fn fg_exact_covariances(ens: &EnsembleSpec, n_sites: usize) -> Result<FgCovariances> {
    let m = ens.factor_count(n_sites)?;
    let classes = ens.classes();
    let nc = classes.len();
    let k = ens.num_symbols();
    let l = ens.l() as u64;
    let nl = (n_sites as u64) * l;
    let lw: Vec<f64> = classes.iter().map(|c| c.weight.ln()).collect();
    let implied_v = |w: &[u64]| -> Option<Vec<u64>> {
        (0..k)
            .map(|z| {
                let t: u64 = classes.iter().zip(w).map(|(c, &wc)| wc * c.composition[z]).sum();
                t.is_multiple_of(l).then_some(t / l)
            })
            .collect()
    };
    let log_weight = |w: &[u64]| -> f64 {
        let Some(v) = implied_v(w) else { return f64::NEG_INFINITY };
        log_multinomial_counts(&v)
            + log_multinomial_counts(w)
            + w.iter().zip(&lw).map(|(&c, x)| if c == 0 { 0.0 } else { c as f64 * x }).sum::<f64>()
            + v.iter().map(|&c| ln_factorial(l * c)).sum::<f64>()
            - ln_factorial(nl)
    };
    let mw = composition_moments(m as u64, nc, nc, log_weight, |w| w.iter().map(|&c| c as f64).collect())?;

    // v = G w with G(z, c) = N_z(c)/l.
    let g = Matrix::from_fn(k, nc, |z, c| classes[c].composition[z] as f64 / l as f64);
    let cov_v = &(&g * &mw.second) * &g.transpose();
    let variable = CovarianceResult::new(symmetrize(&cov_v.scale(1.0 / n_sites as f64)), symbol_labels(ens))?;

    let support = ens.support();
    let class_of: Vec<usize> = support
        .iter()
        .map(|&x| classes.iter().position(|c| c.words.contains(&x)).expect("support word has a class"))
        .collect();
    let p: Vec<f64> = support.iter().zip(&class_of).map(|(&x, &c)| ens.f_values()[x] / classes[c].weight).collect();
    let s = support.len();
    let mut cov_u = Matrix::from_fn(s, s, |i, j| p[i] * p[j] * mw.second[(class_of[i], class_of[j])]);
    for i in 0..s {
        for j in 0..s {
            if class_of[i] == class_of[j] {
                let within = if i == j { p[i] - p[i] * p[j] } else { -p[i] * p[j] };
                cov_u[(i, j)] += mw.mean[class_of[i]] * within;
            }
        }
    }
    let labels = support.iter().map(|&w| ens.word_label(w)).collect();
    let factor = CovarianceResult::new(symmetrize(&cov_u.scale(1.0 / m as f64)), labels)?;
    Ok(FgCovariances { variable, factor })
}
