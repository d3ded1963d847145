#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use qbrown::weyl::{canonicalize, Factor, WeylWord};
use qbrown::{ProcessParams, C64};
use rand::Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn rand_c<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// Canonical word with `n` factors at distinct random times in `(0, tmax)`.
pub fn random_word<R: Rng>(rng: &mut R, n: usize, tmax: f64, scale: f64, system: bool, p: &ProcessParams) -> WeylWord {
    let factors = (0..n)
        .map(|_| Factor::new(rng.gen_range(0.01..tmax), rand_c(rng, scale), rand_c(rng, scale)))
        .collect();
    let sys = if system { (rand_c(rng, scale), rand_c(rng, scale)) } else { (zero(), zero()) };
    canonicalize(factors, sys, rand_c(rng, 0.1), p)
}

/// Annihilation operator on the first `dim` Fock levels.
pub fn lowering(dim: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    m
}

/// `e^{X}` for nilpotent `X` by its terminating series.
pub fn exp_nilpotent(x: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = x.nrows();
    let mut out = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..=dim {
        term = &term * x / c(k as f64, 0.0);
        out += &term;
    }
    out
}

/// Normalized truncated thermal state `∝ (n₀/(n₀+1))^n`.
pub fn thermal_diag(dim: usize, n0: f64) -> Vec<f64> {
    let x = n0 / (n0 + 1.0);
    let w: Vec<f64> = (0..dim).map(|n| if n == 0 { 1.0 } else { x.powi(n as i32) }).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// `𝔼[w]` (noise part, times the word's scalar) by explicit modes carrying the
/// Gram matrix `G(t_i, t_j)`, each in a truncated thermal state of dimension `dim`.
pub fn fock_expectation(w: &WeylWord, p: &ProcessParams, dim: usize) -> C64 {
    let f = &w.factors;
    let n = f.len();
    if n == 0 {
        return w.log_scalar.exp();
    }
    let gram = DMatrix::from_fn(n, n, |i, j| p.g(f[i].t, f[j].t));
    let eig = SymmetricEigen::new(gram);
    let a = lowering(dim);
    let ad = a.adjoint();
    let rho = thermal_diag(dim, p.n0);
    let mut total = w.log_scalar.exp();
    for k in 0..n {
        let lam = eig.eigenvalues[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        let mut m = DMatrix::<C64>::identity(dim, dim);
        for i in 0..n {
            let l_ik = eig.eigenvectors[(i, k)] * lam.sqrt();
            let up = &ad * (f[i].a * l_ik.conj());
            let down = &a * (f[i].b * l_ik);
            m = m * exp_nilpotent(&up) * exp_nilpotent(&down);
        }
        let tr: C64 = (0..dim).map(|j| m[(j, j)] * rho[j]).sum();
        total *= tr;
    }
    total
}

/// Random bounded bath of size `l`: frequencies in `(0.1, 3)`, couplings scaled so
/// that `λ² Σ c/ω` is half of `ε`.
pub fn random_bath<R: Rng>(rng: &mut R, l: usize, lambda: f64) -> qbrown::finite_bath::BathSpec {
    let mut omegas: Vec<f64> = (0..l).map(|_| rng.gen_range(0.1..3.0)).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let mut couplings: Vec<f64> = omegas.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let eps = rng.gen_range(0.3..2.5);
    let sum: f64 = lambda * lambda * omegas.iter().zip(&couplings).map(|(w, c)| c / w).sum::<f64>();
    for c in &mut couplings {
        *c *= 0.5 * eps / sum;
    }
    let occupations = omegas.iter().map(|_| rng.gen_range(0.0..2.0)).collect();
    qbrown::finite_bath::BathSpec { eps, lambda, omegas, couplings, occupations }
}

/// Eigen-decomposition of the one-excitation Hamiltonian
/// `[[ε, λφ], [λφ, diag ω]]`: eigenvalues and eigenvectors.
pub fn dense_bath(spec: &qbrown::finite_bath::BathSpec) -> (Vec<f64>, DMatrix<f64>) {
    let n = spec.len() + 1;
    let mut h = DMatrix::zeros(n, n);
    h[(0, 0)] = spec.eps;
    for (a, (w, c)) in spec.omegas.iter().zip(&spec.couplings).enumerate() {
        h[(a + 1, a + 1)] = *w;
        let v = spec.lambda * c.sqrt();
        h[(0, a + 1)] = v;
        h[(a + 1, 0)] = v;
    }
    let e = SymmetricEigen::new(h);
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// `e^{iεt/λ²} ⟨α|e^{-iHt/λ²}|0⟩` for `α = 0` (the system) and every oscillator.
pub fn dense_amplitudes(spec: &qbrown::finite_bath::BathSpec, t: f64) -> Vec<C64> {
    let (vals, vecs) = dense_bath(spec);
    let l2 = spec.lambda * spec.lambda;
    (0..vals.len())
        .map(|a| {
            (0..vals.len())
                .map(|k| C64::from_polar(vecs[(a, k)] * vecs[(0, k)], -(vals[k] - spec.eps) * t / l2))
                .sum()
        })
        .collect()
}
