//! Helpers and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use compreg_core::{clr, inv_ilr, Dataset, IlrVector, RngStream, SimplexPoint};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn point(coords: &[f64]) -> SimplexPoint {
    inv_ilr(&IlrVector::new(coords.to_vec()).unwrap()).unwrap()
}

pub fn normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` covariates with ilr coordinates uniform on `[-spread, spread]^(d-1)`, responses from `f` plus N(0, noise^2).
pub fn random_dataset(
    rng: &mut RngStream,
    n: usize,
    d: usize,
    spread: f64,
    noise: f64,
    f: impl Fn(&[f64]) -> f64,
) -> Dataset {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let c: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-spread..spread)).collect();
        ys.push(f(&c) + noise * normal(rng));
        xs.push(point(&c));
    }
    Dataset::new(xs, ys).unwrap()
}

/// Orthonormal basis of the zero-sum hyperplane of R^d, from random vectors by Gram-Schmidt.
pub fn random_basis(rng: &mut RngStream, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d - 1 {
        let mut v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let mean = v.iter().sum::<f64>() / d as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Coordinates of `x` in `basis` via its clr vector.
pub fn coords_in(basis: &[Vec<f64>], x: &SimplexPoint) -> Vec<f64> {
    let c = clr(x);
    basis.iter().map(|b| b.iter().zip(&c).map(|(u, v)| u * v).sum()).collect()
}

/// Gaussian weights `exp(-|u - x|^2 / (2 h^2))`, normalized to sum 1.
pub fn gaussian_weights(coords: &[Vec<f64>], x: &[f64], h: f64) -> Vec<f64> {
    let raw: Vec<f64> = coords
        .iter()
        .map(|u| {
            let d2: f64 = u.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            (-d2 / (2.0 * h * h)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Weighted least squares with rows `(1, u_i - x)`: returns the coefficient vector.
pub fn weighted_linear_oracle(coords: &[Vec<f64>], y: &[f64], w: &[f64], x: &[f64]) -> Vec<f64> {
    let p = x.len() + 1;
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((u, yi), wi) in coords.iter().zip(y).zip(w) {
        let mut row = vec![1.0];
        row.extend(u.iter().zip(x).map(|(a, b)| a - b));
        for r in 0..p {
            b[r] += wi * row[r] * yi;
            for c in 0..p {
                a[r][c] += wi * row[r] * row[c];
            }
        }
    }
    solve(a, b)
}

/// Minimizer of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}
