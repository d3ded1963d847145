//! Master equation on a truncated Fock space, its diagonal-sector spectrum,
//! quantum-regression correlators and coherent / cat-state decoherence.
//!
//! `L*ρ = iν[z̄z, ρ] + g₂(2zρz̄ - ρz̄z - z̄zρ) + g₁(2z̄ρz - ρzz̄ - zz̄ρ)` with
//! `g₁ = κn₀`, `g₂ = κ(n₀+1)`. Ladder operators are truncated to the first
//! `N` levels, so the truncated `zz̄` has a zero in its last diagonal entry and
//! the truncated generator is exactly trace preserving.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_time, Error, Result};
use crate::kernel::ProcessParams;
use crate::weyl::SystemElement;

fn cz(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense operator in the number basis `|0⟩ … |N-1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub matrix: DMatrix<C64>,
}

impl TruncatedOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(Error::Domain(format!("need a square operator of size >= 2, got {}x{}", matrix.nrows(), matrix.ncols())));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `|⟨N-1|ρ|N-1⟩|`
    pub fn leakage(&self) -> f64 {
        let n = self.dim();
        self.matrix[(n - 1, n - 1)].norm()
    }

    pub fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.matrix + self.matrix.adjoint()) * cz(0.5)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let e = SymmetricEigen::new(self.hermitian_part());
        let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Checks hermiticity, unit trace and the eigenvalue floor.
    pub fn check_density(&self, tol: f64, floor: f64) -> Result<()> {
        let herm = (&self.matrix - self.matrix.adjoint()).camax();
        if herm > tol {
            return Err(Error::Numeric(format!("density matrix not hermitian: max |ρ - ρ†| = {herm:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > tol {
            return Err(Error::Numeric(format!("density matrix trace {tr} differs from one")));
        }
        let min = self.eigenvalues()[0];
        if min < floor {
            return Err(Error::Numeric(format!("density matrix has eigenvalue {min:e} below {floor:e}")));
        }
        Ok(())
    }

    /// `½ Σ |eig(ρ - σ)|`
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let d = (&self.matrix - &other.matrix) * cz(1.0);
        let h = (&d + d.adjoint()) * cz(0.5);
        0.5 * SymmetricEigen::new(h).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// `Tr(ρ X)`
    pub fn expect(&self, x: &DMatrix<C64>) -> C64 {
        (&self.matrix * x).trace()
    }

    /// Writes `i,j,re,im` rows for nonzero entries.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "j", "re", "im"])?;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                let v = self.matrix[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    out.write_record([i.to_string(), j.to_string(), format!("{:e}", v.re), format!("{:e}", v.im)])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Truncated annihilation operator.
pub fn lowering(dim: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = cz((n as f64).sqrt());
    }
    m
}

/// Truncated creation operator.
pub fn raising(dim: usize) -> DMatrix<C64> {
    lowering(dim).adjoint()
}

/// `e^{X}` for a nilpotent `X` (truncated ladder multiples) by its finite series.
fn exp_nilpotent(x: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = x.nrows();
    let mut out = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..dim {
        term = &term * x * cz(1.0 / k as f64);
        if term.camax() == 0.0 {
            break;
        }
        out += &term;
    }
    out
}

/// Truncated `e^{ℓ} e^{μz̄} e^{μ̄z}`.
pub fn weyl_matrix(e: &SystemElement, dim: usize) -> DMatrix<C64> {
    let up = exp_nilpotent(&(raising(dim) * e.mu));
    let down = exp_nilpotent(&(lowering(dim) * e.mubar));
    up * down * e.log_scalar.exp()
}

/// Normalized truncated coherent state and the norm deficit `1 - Σ|c_n|²` before normalization.
pub fn coherent_state(alpha: C64, dim: usize) -> (DVector<C64>, f64) {
    let mut v = DVector::zeros(dim);
    let mut c = C64::from_polar((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        v[n] = c;
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (v.clone() / cz(norm2.sqrt()), (1.0 - norm2).max(0.0))
}

/// `|ψ⟩⟨φ|`
pub fn outer(psi: &DVector<C64>, phi: &DVector<C64>) -> DMatrix<C64> {
    psi * phi.adjoint()
}

/// Truncation `N = max(60, ⌈ln(10¹²)/σ⌉, |α|² + 8|α| + 20)`.
pub fn choose_truncation(p: &ProcessParams, max_amplitude: f64) -> usize {
    let gibbs = if p.n0 > 0.0 { (1e12f64.ln() / p.sigma()).ceil() as usize } else { 0 };
    let a = max_amplitude.abs();
    let coherent = (a * a + 8.0 * a + 20.0).ceil() as usize;
    60.max(gibbs).max(coherent)
}

/// The generator `L*` acting on truncated matrices.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub dim: usize,
    pub params: ProcessParams,
    g1: f64,
    g2: f64,
    sq: Vec<f64>,
    /// Diagonal of the truncated `zz̄`.
    aad: Vec<f64>,
}

impl Superoperator {
    pub fn new(dim: usize, p: &ProcessParams) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("truncation N must be at least 2, got {dim}")));
        }
        Ok(Self::from_params(dim, *p))
    }

    /// Generator with arbitrary rates, including the purely unitary `κ = 0` case.
    pub fn with_rates(dim: usize, kappa: f64, nu: f64, n0: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("truncation N must be at least 2, got {dim}")));
        }
        if !(kappa >= 0.0 && n0 >= 0.0) {
            return Err(Error::Domain(format!("rates must be nonnegative, got kappa = {kappa}, n0 = {n0}")));
        }
        Ok(Self::from_params(dim, ProcessParams { kappa, nu, n0 }))
    }

    fn from_params(dim: usize, params: ProcessParams) -> Self {
        let sq = (0..=dim).map(|n| (n as f64).sqrt()).collect();
        let aad = (0..dim).map(|m| if m + 1 < dim { (m + 1) as f64 } else { 0.0 }).collect();
        let (g1, g2) = (params.kappa * params.n0, params.kappa * (params.n0 + 1.0));
        Self { dim, params, g1, g2, sq, aad }
    }

    /// `L*ρ`
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim;
        let nu = self.params.nu;
        DMatrix::from_fn(n, n, |i, j| {
            let r = rho[(i, j)];
            let mut v = C64::new(0.0, nu * (i as f64 - j as f64)) * r;
            v -= r * (self.g2 * (i + j) as f64 + self.g1 * (self.aad[i] + self.aad[j]));
            if i + 1 < n && j + 1 < n {
                v += rho[(i + 1, j + 1)] * (2.0 * self.g2 * self.sq[i + 1] * self.sq[j + 1]);
            }
            if i > 0 && j > 0 {
                v += rho[(i - 1, j - 1)] * (2.0 * self.g1 * self.sq[i] * self.sq[j]);
            }
            v
        })
    }

    /// The Heisenberg-picture dual `L`, with `Tr((L*ρ) X) = Tr(ρ L X)`.
    pub fn apply_dual(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim;
        let nu = self.params.nu;
        DMatrix::from_fn(n, n, |i, j| {
            let r = x[(i, j)];
            let mut v = C64::new(0.0, -nu * (i as f64 - j as f64)) * r;
            v -= r * (self.g2 * (i + j) as f64 + self.g1 * (self.aad[i] + self.aad[j]));
            if i > 0 && j > 0 {
                v += x[(i - 1, j - 1)] * (2.0 * self.g2 * self.sq[i] * self.sq[j]);
            }
            if i + 1 < n && j + 1 < n {
                v += x[(i + 1, j + 1)] * (2.0 * self.g1 * self.sq[i + 1] * self.sq[j + 1]);
            }
            v
        })
    }

    /// Matrix of `L*` on column-stacked `vec(ρ)`, index `i + N j`.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n * n, n * n);
        let mut e = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                e[(i, j)] = cz(1.0);
                let col = self.apply(&e);
                for jj in 0..n {
                    for ii in 0..n {
                        m[(ii + n * jj, i + n * j)] = col[(ii, jj)];
                    }
                }
                e[(i, j)] = cz(0.0);
            }
        }
        m
    }

    /// `L*` on the diagonal (zero-charge) sector, as a real `N×N` matrix.
    pub fn diagonal_sector(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = -2.0 * self.g2 * k as f64 - 2.0 * self.g1 * self.aad[k];
            if k + 1 < n {
                m[(k, k + 1)] = 2.0 * self.g2 * (k + 1) as f64;
            }
            if k > 0 {
                m[(k, k - 1)] = 2.0 * self.g1 * k as f64;
            }
        }
        m
    }
}

/// Propagation controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    /// Local error per adaptive step (max-abs entry norm).
    pub tol: f64,
    /// Bound on `|⟨N-1|ρ_t|N-1⟩|`.
    pub leakage: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, leakage: 1e-10, max_steps: 2_000_000 }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn dopri<F: Fn(&DMatrix<C64>) -> DMatrix<C64>>(f: F, y0: &DMatrix<C64>, t: f64, opts: &EvolveOptions) -> Result<DMatrix<C64>> {
    let mut y = y0.clone();
    if t == 0.0 {
        return Ok(y);
    }
    let scale = y0.camax().max(1e-300);
    let mut h = (0.01 * t).min(1e-3);
    let mut now = 0.0;
    let mut k: Vec<DMatrix<C64>> = Vec::with_capacity(7);
    let mut steps = 0;
    while now < t {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Numeric(format!("propagation did not reach t = {t} within {} steps (at {now})", opts.max_steps)));
        }
        let last = now + h >= t;
        if last {
            h = t - now;
        }
        k.clear();
        k.push(f(&y));
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys += kj * cz(h * A[s][j]);
                }
            }
            k.push(f(&ys));
        }
        let mut err = DMatrix::zeros(y.nrows(), y.ncols());
        for s in 0..7 {
            let d = B5[s] - B4[s];
            if d != 0.0 {
                err += &k[s] * cz(h * d);
            }
        }
        let e = err.camax() / scale;
        if !e.is_finite() {
            return Err(Error::Numeric(format!("non-finite error estimate at t = {now}")));
        }
        if e <= opts.tol {
            for s in 0..6 {
                if B5[s] != 0.0 {
                    y += &k[s] * cz(h * B5[s]);
                }
            }
            now = if last { t } else { now + h };
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * (opts.tol / e).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * t {
            return Err(Error::Numeric(format!("step size underflow at t = {now}, error {e:e}")));
        }
    }
    Ok(y)
}

/// `e^{tL*} X` for any matrix `X` (not only states), by adaptive Dormand–Prince.
pub fn propagate(m: &DMatrix<C64>, t: f64, l: &Superoperator, opts: &EvolveOptions) -> Result<DMatrix<C64>> {
    ensure_time("t", t)?;
    dopri(|x| l.apply(x), m, t, opts)
}

/// `e^{tL} X` in the Heisenberg picture.
pub fn propagate_dual(x: &DMatrix<C64>, t: f64, l: &Superoperator, opts: &EvolveOptions) -> Result<DMatrix<C64>> {
    ensure_time("t", t)?;
    dopri(|y| l.apply_dual(y), x, t, opts)
}

/// `e^{tL*} X` through the dense matrix exponential; for small `N` only.
pub fn propagate_expm(m: &DMatrix<C64>, t: f64, l: &Superoperator) -> Result<DMatrix<C64>> {
    ensure_time("t", t)?;
    let n = l.dim;
    if n > 24 {
        return Err(Error::Domain(format!("dense exponential limited to N <= 24, got {n}")));
    }
    let gen = l.to_dense() * cz(t);
    let e = gen.exp();
    let v = DVector::from_iterator(n * n, m.iter().copied());
    let out = e * v;
    Ok(DMatrix::from_iterator(n, n, out.iter().copied()))
}

/// `ρ_t = e^{tL*}ρ₀`, re-hermitized, with trace and leakage checks.
pub fn evolve(rho0: &TruncatedOperator, t: f64, p: &ProcessParams, opts: &EvolveOptions) -> Result<TruncatedOperator> {
    let l = Superoperator::new(rho0.dim(), p)?;
    let m = propagate(&rho0.matrix, t, &l, opts)?;
    let rho = TruncatedOperator { matrix: (&m + m.adjoint()) * cz(0.5) };
    let drift = (rho.trace() - rho0.trace()).norm();
    if drift > 1e3 * opts.tol.max(1e-13) {
        return Err(Error::Numeric(format!("trace drifted by {drift:e} during propagation")));
    }
    if rho.leakage() > opts.leakage {
        return Err(Error::Numeric(format!(
            "truncation leakage |rho[N-1,N-1]| = {:e} exceeds {:e}; increase N",
            rho.leakage(),
            opts.leakage
        )));
    }
    Ok(rho)
}

/// `ρ_inv ∝ e^{-σ z̄z}`; the vacuum projector when `n₀ = 0`.
pub fn invariant_state(dim: usize, p: &ProcessParams) -> Result<TruncatedOperator> {
    if dim < 2 {
        return Err(Error::Domain(format!("truncation N must be at least 2, got {dim}")));
    }
    let x = if p.n0 == 0.0 { 0.0 } else { p.n0 / (p.n0 + 1.0) };
    let w: Vec<f64> = (0..dim).map(|n| if n == 0 { 1.0 } else { x.powi(n as i32) }).collect();
    let z: f64 = w.iter().sum();
    let mut m = DMatrix::zeros(dim, dim);
    for (n, v) in w.iter().enumerate() {
        m[(n, n)] = cz(v / z);
    }
    Ok(TruncatedOperator { matrix: m })
}

/// Coefficients `v` of the eigenpolynomial `P_p(n) = Σ_k v_k n^k` with
/// `L*(x^n P_p(n)) = -2pκ x^n P_p(n)`, `x = n₀/(n₀+1)`, normalized to `v_p = 1`.
pub fn eigenpolynomial(p_order: usize, p: &ProcessParams) -> Vec<f64> {
    let q = p_order + 1;
    let g1 = p.kappa * p.n0;
    let g2 = p.kappa * (p.n0 + 1.0);
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    // On x^n q(n): q ↦ 2g₁(n+1)[q(n+1) - q(n)] - 2g₂ n [q(n) - q(n-1)].
    let mut m = vec![vec![0.0; q]; q];
    for k in 0..q {
        let mut fwd = vec![0.0; q + 1];
        let mut bwd = vec![0.0; q + 1];
        for j in 0..k {
            fwd[j] = binom(k, j);
            bwd[j] = -binom(k, j) * if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
        }
        // (n+1)·fwd and n·bwd
        for j in 0..=k {
            let shifted_n = if j > 0 { fwd[j - 1] } else { 0.0 };
            let val = 2.0 * g1 * (shifted_n + fwd[j]) - 2.0 * g2 * if j > 0 { bwd[j - 1] } else { 0.0 };
            if j < q {
                m[j][k] = val;
            }
        }
    }
    let lam = -2.0 * p_order as f64 * p.kappa;
    let mut v = vec![0.0; q];
    v[p_order] = 1.0;
    for j in (0..p_order).rev() {
        let s: f64 = (j + 1..q).map(|k| m[j][k] * v[k]).sum();
        v[j] = -s / (m[j][j] - lam);
    }
    v
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dim: usize,
    /// `(p, -2pκ, relative residual of L*ρ_p + 2pκρ_p, distance to nearest diagonal-sector eigenvalue)`
    pub modes: Vec<(usize, f64, f64, f64)>,
    /// Residual of the first mode with the polynomial `n - 2n₀`.
    pub alt_first_mode_residual: f64,
    pub invariant_leakage: f64,
}

impl SpectrumReport {
    pub fn max_residual(&self) -> f64 {
        self.modes.iter().map(|m| m.2).fold(0.0, f64::max)
    }
}

fn diag_residual(l: &Superoperator, diag: &[f64], lam: f64) -> f64 {
    let n = l.dim;
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { cz(diag[i]) } else { cz(0.0) });
    let r = l.apply(&m) - &m * cz(lam);
    r.norm() / m.norm()
}

/// Checks `L*ρ_p = -2pκρ_p` for `p = 0..=pmax` with `ρ_p = e^{-σz̄z} P_p(z̄z)`.
pub fn spectrum_check(dim: usize, p: &ProcessParams, pmax: usize) -> Result<SpectrumReport> {
    if p.n0 == 0.0 {
        return Err(Error::Domain("spectrum check needs n0 > 0".into()));
    }
    if pmax + 2 >= dim {
        return Err(Error::Domain(format!("pmax = {pmax} too large for N = {dim}")));
    }
    let l = Superoperator::new(dim, p)?;
    let inv = invariant_state(dim, p)?;
    let leak = inv.leakage();
    if leak > 1e-12 {
        return Err(Error::Numeric(format!("invariant state leaks {leak:e} into level N-1; increase N above {dim}")));
    }
    let x = p.n0 / (p.n0 + 1.0);
    let sector = l.diagonal_sector();
    let eig = sector.complex_eigenvalues();
    let mut modes = Vec::new();
    for order in 0..=pmax {
        let v = eigenpolynomial(order, p);
        let diag: Vec<f64> = (0..dim)
            .map(|n| {
                let nf = n as f64;
                x.powi(n as i32) * v.iter().enumerate().map(|(k, c)| c * nf.powi(k as i32)).sum::<f64>()
            })
            .collect();
        let lam = -2.0 * order as f64 * p.kappa;
        let res = diag_residual(&l, &diag, lam);
        let nearest = eig.iter().map(|z| (z - cz(lam)).norm()).fold(f64::INFINITY, f64::min);
        modes.push((order, lam, res, nearest));
    }
    let alt: Vec<f64> = (0..dim).map(|n| x.powi(n as i32) * (n as f64 - 2.0 * p.n0)).collect();
    Ok(SpectrumReport {
        dim,
        modes,
        alt_first_mode_residual: diag_residual(&l, &alt, -2.0 * p.kappa),
        invariant_leakage: leak,
    })
}

/// `Tr(ρ₀ Φ_{t₁}(A₁ Φ_{t₂-t₁}(A₂ ⋯)))`, evaluated in the Schrödinger picture by
/// alternating propagation and right multiplication.
pub fn regression_correlator(
    ops: &[(DMatrix<C64>, f64)],
    rho0: &TruncatedOperator,
    p: &ProcessParams,
    opts: &EvolveOptions,
) -> Result<C64> {
    let l = Superoperator::new(rho0.dim(), p)?;
    let mut m = rho0.matrix.clone();
    let mut prev = 0.0;
    for (a, t) in ops {
        ensure_time("t", *t)?;
        if *t < prev || (*t == prev && prev > 0.0) {
            return Err(Error::Domain(format!("correlator times must increase strictly, got {t} after {prev}")));
        }
        m = propagate(&m, t - prev, &l, opts)?;
        let n = m.nrows();
        if m[(n - 1, n - 1)].norm() > opts.leakage * m.camax().max(1.0) {
            return Err(Error::Numeric(format!("truncation leakage at t = {t}; increase N")));
        }
        m = m * a;
        prev = *t;
    }
    Ok(m.trace())
}

/// [`regression_correlator`] with Weyl observables.
pub fn regression_correlator_weyl(
    elems: &[(SystemElement, f64)],
    rho0: &TruncatedOperator,
    p: &ProcessParams,
    opts: &EvolveOptions,
) -> Result<C64> {
    let ops: Vec<(DMatrix<C64>, f64)> = elems.iter().map(|(e, t)| (weyl_matrix(e, rho0.dim()), *t)).collect();
    regression_correlator(&ops, rho0, p, opts)
}

/// Superposition `u|α⟩ + v|β⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatStateSpec {
    pub alpha: C64,
    pub beta: C64,
    pub u: C64,
    pub v: C64,
}

/// `⟨x|y⟩` for coherent states.
pub fn coherent_overlap(x: C64, y: C64) -> C64 {
    (-0.5 * x.norm_sqr() - 0.5 * y.norm_sqr() + x.conj() * y).exp()
}

impl CatStateSpec {
    /// `|u|² + |v|² + 2 Re(u v̄ ⟨β|α⟩)`
    pub fn norm(&self) -> f64 {
        self.u.norm_sqr() + self.v.norm_sqr() + 2.0 * (self.u * self.v.conj() * coherent_overlap(self.beta, self.alpha)).re
    }

    /// Rescales `u`, `v` to unit norm.
    pub fn normalized(&self) -> Self {
        let s = self.norm().sqrt();
        Self { u: self.u / s, v: self.v / s, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("cat state norm {n} differs from one")));
        }
        Ok(())
    }

    pub fn state_vector(&self, dim: usize) -> (DVector<C64>, f64) {
        let (a, la) = coherent_state(self.alpha, dim);
        let (b, lb) = coherent_state(self.beta, dim);
        (a * self.u + b * self.v, la.max(lb))
    }

    pub fn density(&self, dim: usize) -> (TruncatedOperator, f64) {
        let (psi, leak) = self.state_vector(dim);
        (TruncatedOperator { matrix: outer(&psi, &psi) }, leak)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatBlock {
    AlphaAlpha,
    AlphaBeta,
    BetaAlpha,
    BetaBeta,
}

impl CatBlock {
    pub const ALL: [CatBlock; 4] = [CatBlock::AlphaAlpha, CatBlock::AlphaBeta, CatBlock::BetaAlpha, CatBlock::BetaBeta];
}

/// Closed-form evolution of the four blocks `ρ^{xy}_t = e^{tL*}|x⟩⟨y|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CatEvolution {
    pub spec: CatStateSpec,
    pub t: f64,
    pub sigma_t: f64,
    pub alpha_t: C64,
    pub beta_t: C64,
}

pub fn cat_evolution_closed_form(spec: &CatStateSpec, t: f64, p: &ProcessParams) -> Result<CatEvolution> {
    ensure_time("t", t)?;
    let decay = (-p.gamma_bar() * t).exp();
    Ok(CatEvolution {
        spec: *spec,
        t,
        sigma_t: -p.n0 * (-2.0 * p.kappa * t).exp_m1(),
        alpha_t: spec.alpha * decay,
        beta_t: spec.beta * decay,
    })
}

impl CatEvolution {
    fn pair(&self, block: CatBlock) -> ((C64, C64), (C64, C64)) {
        let (a, b) = (self.spec.alpha, self.spec.beta);
        let (at, bt) = (self.alpha_t, self.beta_t);
        match block {
            CatBlock::AlphaAlpha => ((a, at), (a, at)),
            CatBlock::AlphaBeta => ((a, at), (b, bt)),
            CatBlock::BetaAlpha => ((b, bt), (a, at)),
            CatBlock::BetaBeta => ((b, bt), (b, bt)),
        }
    }

    /// `⟨b|ρ^{xy}_t|c⟩ = ⟨y|x⟩ (σ_t+1)⁻¹ e^{-|b|²/2-|c|²/2} e^{[σ_t b̄c + c ȳ(t) + x(t) b̄ - x(t) ȳ(t)]/(σ_t+1)}`
    pub fn element(&self, block: CatBlock, b: C64, c: C64) -> C64 {
        let ((x, xt), (y, yt)) = self.pair(block);
        let s1 = self.sigma_t + 1.0;
        let expo = (b.conj() * c * self.sigma_t + c * yt.conj() + xt * b.conj() - xt * yt.conj()) / s1;
        coherent_overlap(y, x) / s1 * (expo - 0.5 * b.norm_sqr() - 0.5 * c.norm_sqr()).exp()
    }

    /// Matrix element of the full state `ρ_t`.
    pub fn state_element(&self, b: C64, c: C64) -> C64 {
        let (u, v) = (self.spec.u, self.spec.v);
        u * u.conj() * self.element(CatBlock::AlphaAlpha, b, c)
            + u * v.conj() * self.element(CatBlock::AlphaBeta, b, c)
            + v * u.conj() * self.element(CatBlock::BetaAlpha, b, c)
            + v * v.conj() * self.element(CatBlock::BetaBeta, b, c)
    }

    /// `⟨b|ρ^{βα}|c⟩⟨b|ρ^{αβ}|c⟩ / (⟨b|ρ^{αα}|c⟩⟨b|ρ^{ββ}|c⟩)` at the given probes.
    pub fn ratio_at(&self, b: C64, c: C64) -> C64 {
        self.element(CatBlock::BetaAlpha, b, c) * self.element(CatBlock::AlphaBeta, b, c)
            / (self.element(CatBlock::AlphaAlpha, b, c) * self.element(CatBlock::BetaBeta, b, c))
    }
}

/// `𝔑_t = |⟨α|β⟩|² |⟨α(t)|β(t)⟩|^{-2/(σ_t+1)}`.
pub fn decoherence_ratio(spec: &CatStateSpec, t: f64, p: &ProcessParams) -> Result<f64> {
    if spec.alpha == spec.beta {
        return Err(Error::DegenerateInput("decoherence ratio needs alpha != beta".into()));
    }
    let ev = cat_evolution_closed_form(spec, t, p)?;
    let d2 = (spec.alpha - spec.beta).norm_sqr();
    Ok((-d2 + (-2.0 * p.kappa * t).exp() * d2 / (ev.sigma_t + 1.0)).exp())
}

/// `(τ_coher, τ_therm) = (1/(κ(n₀+1)|α-β|²), 1/κ)`.
pub fn decoherence_timescales(spec: &CatStateSpec, p: &ProcessParams) -> (f64, f64) {
    let d2 = (spec.alpha - spec.beta).norm_sqr();
    (1.0 / (p.kappa * (p.n0 + 1.0) * d2), 1.0 / p.kappa)
}

/// `⟨b|X|c⟩` with truncated coherent probes.
pub fn coherent_element(x: &DMatrix<C64>, b: C64, c: C64) -> C64 {
    let dim = x.nrows();
    let (vb, _) = coherent_state(b, dim);
    let (vc, _) = coherent_state(c, dim);
    (vb.adjoint() * x * vc)[(0, 0)]
}
