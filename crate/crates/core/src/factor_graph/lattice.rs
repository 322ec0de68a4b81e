//! The step size `s`: index of the sublattice of `ε ∈ ℤ^{|S|−1}` with
//! `Σ_{x ∈ S∖x₀} (N_z(x) − N_z(x₀)) ε(x) ≡ 0 (mod l)` for every `z ≠ 0`.
//!
//! Writing the congruences as `Aε ≡ 0` and `A = U diag(d) W` (Smith normal
//! form), the image of `ε ↦ Aε mod l` is `⊕_i d_i ℤ_l`, so
//! `s = ∏_i l / gcd(d_i, l)`.

use num_integer::Integer;
use serde::Serialize;

use super::EnsembleSpec;
use crate::error::{invalid, Error, Result};

/// The step size with every route that applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeStep {
    /// From the Smith normal form.
    pub s: u64,
    /// Elementary divisors of the coefficient matrix (zeros included).
    pub divisors: Vec<i64>,
    /// `l^rank` over `F_l`, when `l` is prime.
    pub prime_rank_s: Option<u64>,
    /// `l / gcd(N_0(x) − N_0(x₀), l)`, when `|X| = 2`.
    pub binary_gcd_s: Option<u64>,
    /// Fraction of the box `[−L, L)^{|S|−1}` satisfying the congruences.
    pub density: f64,
    pub density_half_width: i64,
}

impl LatticeStep {
    pub fn special_cases_agree(&self) -> bool {
        self.prime_rank_s.is_none_or(|p| p == self.s) && self.binary_gcd_s.is_none_or(|b| b == self.s)
    }

    /// The box side is a multiple of `l`, so the density is exactly `1/s`.
    pub fn density_agrees(&self) -> bool {
        (self.density * self.s as f64 - 1.0).abs() < 1e-9
    }
}

/// Rows `z ≠ zero_symbol`, columns `x ∈ S ∖ {x₀}` in support order, where
/// `x₀ = support()[x0_pos]`.
pub fn coefficient_matrix(ens: &EnsembleSpec, x0_pos: usize, zero_symbol: usize) -> Result<Vec<Vec<i64>>> {
    let support = ens.support();
    if x0_pos >= support.len() || zero_symbol >= ens.num_symbols() {
        return invalid("reference word or symbol out of range");
    }
    let x0 = ens.letter_counts(support[x0_pos]);
    Ok((0..ens.num_symbols())
        .filter(|&z| z != zero_symbol)
        .map(|z| {
            support
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != x0_pos)
                .map(|(_, &x)| ens.letter_counts(x)[z] as i64 - x0[z] as i64)
                .collect()
        })
        .collect())
}

/// Elementary divisors `d_1 | d_2 | …` of an integer matrix, `min(rows, cols)`
/// of them (trailing zeros for rank deficiency).
pub fn smith_divisors(a: &[Vec<i64>]) -> Vec<i64> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<i64>> = a.to_vec();
    let n = rows.min(cols);
    for t in 0..n {
        loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let pivot = (t..rows)
                .flat_map(|i| (t..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| m[i][j] != 0)
                .min_by_key(|&(i, j)| m[i][j].abs());
            let Some((pi, pj)) = pivot else {
                return finish(&m, n);
            };
            m.swap(t, pi);
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..rows {
                let q = Integer::div_floor(&m[i][t], &p);
                if q != 0 {
                    for j in t..cols {
                        m[i][j] -= q * m[t][j];
                    }
                }
                clean &= m[i][t] == 0;
            }
            for j in t + 1..cols {
                let q = Integer::div_floor(&m[t][j], &p);
                if q != 0 {
                    for row in m.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                clean &= m[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // Divisibility: fold an offending row into the pivot row.
            if let Some(i) = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| m[i][j] % p != 0)) {
                for j in t..cols {
                    m[t][j] += m[i][j];
                }
                continue;
            }
            break;
        }
    }
    finish(&m, n)
}

fn finish(m: &[Vec<i64>], n: usize) -> Vec<i64> {
    (0..n).map(|i| m[i][i].abs()).collect()
}

/// Rank over the prime field `F_p`.
pub fn rank_mod_prime(a: &[Vec<i64>], p: i64) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<i64>> = a.iter().map(|r| r.iter().map(|x| x.rem_euclid(p)).collect()).collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, pr);
        let inv = mod_inverse(m[rank][c], p);
        for j in c..cols {
            m[rank][j] = m[rank][j] * inv % p;
        }
        for i in 0..rows {
            if i != rank && m[i][c] != 0 {
                let f = m[i][c];
                for j in c..cols {
                    m[i][j] = (m[i][j] - f * m[rank][j]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    let g = a.extended_gcd(&p);
    g.x.rem_euclid(p)
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

/// `s` from the Smith normal form with the given reference word and symbol.
pub fn lattice_step_with_reference(ens: &EnsembleSpec, x0_pos: usize, zero_symbol: usize) -> Result<u64> {
    let a = coefficient_matrix(ens, x0_pos, zero_symbol)?;
    let l = ens.l() as i64;
    let divisors = smith_divisors(&a);
    Ok(divisors.iter().map(|&d| (l / d.gcd(&l)) as u64).product())
}

/// `s` with reference word the first support word and reference symbol the
/// first alphabet symbol.
pub fn lattice_step_s(ens: &EnsembleSpec) -> u64 {
    lattice_step_with_reference(ens, 0, 0).expect("default reference is always valid")
}

/// Fraction of `ε ∈ [−L, L)^{|S|−1}` satisfying the congruences, by dynamic
/// programming over residue vectors mod `l`.
pub fn lattice_density(ens: &EnsembleSpec, half_width: i64) -> Result<f64> {
    if half_width < 1 {
        return invalid("half width must be positive");
    }
    let a = coefficient_matrix(ens, 0, 0)?;
    let l = ens.l() as i64;
    let dims = a.len();
    let states = (l as f64).powi(dims as i32);
    if states > 1e6 {
        return Err(Error::Guard { what: "residue states l^(|X|-1)", size: states, limit: 1e6 });
    }
    let states = states as usize;
    let encode = |res: &[i64]| res.iter().fold(0usize, |acc, &x| acc * l as usize + x as usize);
    let decode = |mut idx: usize| {
        let mut res = vec![0i64; dims];
        for slot in res.iter_mut().rev() {
            *slot = (idx % l as usize) as i64;
            idx /= l as usize;
        }
        res
    };
    let mut dist = vec![0.0; states];
    dist[0] = 1.0;
    let side = 2 * half_width;
    let cols = a.first().map_or(0, |r| r.len());
    for j in 0..cols {
        // Distribution of ε·a_j mod l over the box, one ε at a time.
        let mut step: Vec<(usize, f64)> = Vec::new();
        for e in -half_width..half_width {
            let res: Vec<i64> = (0..dims).map(|z| (e * a[z][j]).rem_euclid(l)).collect();
            step.push((encode(&res), 1.0 / side as f64));
        }
        let mut next = vec![0.0; states];
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let base = decode(s);
            for &(d, q) in &step {
                let inc = decode(d);
                let sum: Vec<i64> = base.iter().zip(&inc).map(|(x, y)| (x + y) % l).collect();
                next[encode(&sum)] += p * q;
            }
        }
        dist = next;
    }
    Ok(dist[0])
}

/// All routes to `s`. The density uses the smallest `L ≥ 6` with `l | 2L`.
pub fn lattice_step_report(ens: &EnsembleSpec) -> LatticeStep {
    let a = coefficient_matrix(ens, 0, 0).expect("default reference is always valid");
    let l = ens.l() as i64;
    let divisors = smith_divisors(&a);
    let s: u64 = divisors.iter().map(|&d| (l / d.gcd(&l)) as u64).product();
    let prime_rank_s = is_prime(l as u64).then(|| (l as u64).pow(rank_mod_prime(&a, l) as u32));
    let binary_gcd_s = (ens.num_symbols() == 2).then(|| {
        // Differences of N_0 are the negatives of the N_1 row.
        let g = a.first().map_or(l, |row| row.iter().fold(l, |g, &d| g.gcd(&d)));
        (l / g) as u64
    });
    let half_width = (6..).find(|h| (2 * h) % l == 0).expect("some multiple exists");
    let density = lattice_density(ens, half_width).unwrap_or(f64::NAN);
    LatticeStep { s, divisors, prime_rank_s, binary_gcd_s, density, density_half_width: half_width }
}
