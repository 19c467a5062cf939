//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the routines it is meant to check: stationary
//! vectors come from a direct linear solve, spectra from nalgebra, Kendall
//! counts from pair enumeration.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regrank::{BtlScores, SamplingDistribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scores `exp(U[0, log_b])`, so the ratio bound is at most `e^log_b`.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, log_b: f64) -> BtlScores {
    BtlScores::new((0..n).map(|_| rng.random_range(0.0..=log_b).exp()).collect()).unwrap()
}

/// Pair weights drawn from `U[lo, 1]` then normalized.
pub fn random_mu(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> SamplingDistribution {
    let mut w = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(lo..=1.0);
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    SamplingDistribution::from_pair_weights(n, |i, j| w[[i, j]]).unwrap()
}

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solves `πQ = π`, `Σπ = 1` by Gaussian elimination with partial pivoting.
pub fn stationary_exact(q: &Array2<f64>) -> Vec<f64> {
    let n = q.nrows();
    // rows of (Qᵀ − I), last row replaced by the normalization
    let mut a = vec![vec![0.0; n + 1]; n];
    for r in 0..n {
        for c in 0..n {
            a[r][c] = q[[c, r]] - if r == c { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let pivot_row = a[col].clone();
        let p = pivot_row[col];
        assert!(p.abs() > 1e-300, "singular system");
        for (r, row) in a.iter_mut().enumerate() {
            let f = row[col] / p;
            if r != col && f != 0.0 {
                for (x, y) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * y;
                }
            }
        }
    }
    (0..n).map(|r| a[r][n] / a[r][r]).collect()
}

/// Eigenvalues of a chain reversible w.r.t. `pi`, via the symmetrization
/// `diag(√π) Q diag(1/√π)`, sorted descending.
pub fn reversible_spectrum(q: &Array2<f64>, pi: &[f64]) -> Vec<f64> {
    let n = q.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| pi[i].sqrt() * q[[i, j]] / pi[j].sqrt());
    let sym = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `1 − max(λ₂, |λ_n|)`.
pub fn absolute_spectral_gap(spectrum: &[f64]) -> f64 {
    let second = spectrum[1];
    let last = spectrum[spectrum.len() - 1].abs();
    1.0 - second.max(last)
}

pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    to_dmatrix(a).singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_l2(estimate: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    l2(&diff) / l2(truth)
}

/// `(P − Q, P + Q + T, P + Q + U)` by enumerating all pairs.
pub fn kendall_counts(a: &[f64], b: &[f64]) -> (i64, u64, u64) {
    let (mut conc, mut disc, mut only_a, mut only_b) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let da = a[i].partial_cmp(&a[j]).unwrap();
            let db = b[i].partial_cmp(&b[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (da, db) {
                (Equal, Equal) => {}
                (Equal, _) => only_a += 1,
                (_, Equal) => only_b += 1,
                (x, y) if x == y => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let pq = (conc + disc) as u64;
    (conc - disc, pq + only_a, pq + only_b)
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let mut r = Array2::from_shape_fn((n, n), |_| rng.random_range(0.05..1.0));
    for mut row in r.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    r
}
