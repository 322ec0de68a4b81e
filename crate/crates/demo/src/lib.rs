//! Browser bindings for a few interactive computations.
//!
//! Every exported function returns a flat `Float64Array`; the page in `www/`
//! reshapes it. The plain-Rust versions are public so they can be tested natively.

use std::sync::Arc;

use central_approx::clt::overlap_covariance;
use central_approx::dense::terms::{FieldTerm, PSpin, QuadraticOverlap, ZeroLocal};
use central_approx::dense::{central_approx_constant, exact_type_sum, solve_variational, DenseModelSpec};
use central_approx::factor_graph::{lattice_step_s, weight_growth_rate, EnsembleSpec};
use central_approx::replica::sk_paramagnetic_correction;
use central_approx::Alphabet;
use wasm_bindgen::prelude::*;

fn msg(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let k = points.max(2);
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Rows `(β, N·correction, Var q₁₂)` for `β` on a grid in `[0, beta_max]`.
///
/// The correction is scaled by `N` so the curve does not vanish as `N` grows.
pub fn sk_curve(n_sites: usize, beta_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(beta_max > 0.0 && beta_max < 1.0) {
        return Err(format!("beta_max must lie in (0, 1), got {beta_max}"));
    }
    let mut out = Vec::with_capacity(3 * points);
    for beta in grid(0.0, beta_max, points) {
        let corr = sk_paramagnetic_correction(beta, n_sites).map_err(msg)?;
        let spec = DenseModelSpec::new(2, Alphabet::spins(), Arc::new(ZeroLocal), Arc::new(PSpin::new(2, beta, 2)))
            .map_err(msg)?;
        let sol = solve_variational(&spec).map_err(msg)?;
        let cov = overlap_covariance(&spec, &sol.nu_star, 2).map_err(msg)?;
        let q12 = cov.labels.iter().position(|l| l == "q1,2").ok_or("missing q1,2")?;
        out.extend([beta, corr * n_sites as f64, cov.matrix[(q12, q12)]]);
    }
    Ok(out)
}

/// Rows `(N, exact/estimate)` for a two-replica spin model with field `h` and
/// coupling `q_aa·diag + q_12·offdiag`.
pub fn dense_ratio(h: f64, diag: f64, offdiag: f64, sites: &[u32]) -> Result<Vec<f64>, String> {
    let spec = DenseModelSpec::new(2, Alphabet::spins(), Arc::new(FieldTerm { h }), Arc::new(QuadraticOverlap::new(2, diag, offdiag)))
        .map_err(msg)?;
    let sol = solve_variational(&spec).map_err(msg)?;
    let approx = central_approx_constant(&spec, &sol).map_err(msg)?;
    let mut out = Vec::with_capacity(2 * sites.len());
    for &n in sites {
        let n = n as usize;
        let exact = exact_type_sum(&spec, n).map_err(msg)?;
        out.extend([n as f64, (exact - approx.log_estimate(n)).exp()]);
    }
    Ok(out)
}

/// `[s, ω₁, γ(ω₁), ω₂, γ(ω₂), ...]` for the regular (l, r) parity-check ensemble,
/// where `γ` is the weight-ω growth rate of the expected codeword count.
pub fn ldpc_curve(l: usize, r: usize, points: usize) -> Result<Vec<f64>, String> {
    let ens = EnsembleSpec::parity(l, r).map_err(msg)?;
    let mut out = vec![lattice_step_s(&ens) as f64];
    // The endpoints are degenerate; stay strictly inside.
    for omega in grid(0.005, 0.995, points) {
        out.extend([omega, weight_growth_rate(l, r, omega).map_err(msg)?]);
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = skCurve)]
pub fn sk_curve_js(n_sites: u32, beta_max: f64, points: u32) -> Result<Vec<f64>, JsValue> {
    js(sk_curve(n_sites as usize, beta_max, points as usize))
}

#[wasm_bindgen(js_name = denseRatio)]
pub fn dense_ratio_js(h: f64, diag: f64, offdiag: f64, sites: Vec<u32>) -> Result<Vec<f64>, JsValue> {
    js(dense_ratio(h, diag, offdiag, &sites))
}

#[wasm_bindgen(js_name = ldpcCurve)]
pub fn ldpc_curve_js(l: u32, r: u32, points: u32) -> Result<Vec<f64>, JsValue> {
    js(ldpc_curve(l as usize, r as usize, points as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sk_variance_is_one_over_one_minus_beta_squared() {
        let rows = sk_curve(1000, 0.6, 4).unwrap();
        for row in rows.chunks(3) {
            let beta = row[0];
            assert!((row[2] - 1.0 / (1.0 - beta * beta)).abs() < 1e-6, "{row:?}");
            assert!(row[1] <= 0.0);
        }
        assert!(sk_curve(10, 1.0, 3).is_err());
    }

    #[test]
    fn ratio_moves_toward_one() {
        let rows = dense_ratio(0.2, 0.0, 0.5, &[20, 80]).unwrap();
        assert!((rows[3] - 1.0).abs() < (rows[1] - 1.0).abs());
    }

    #[test]
    fn ldpc_curve_has_step_and_symmetric_rate() {
        let out = ldpc_curve(3, 6, 5).unwrap();
        assert_eq!(out[0], 3.0);
        assert_eq!(out.len(), 11);
        // The rate peaks at (1 - l/r) ln 2 for ω = 1/2.
        assert!((out[6] - 0.5 * 2f64.ln()).abs() < 1e-9, "{out:?}");
    }
}
