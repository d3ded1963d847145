//! Markov-limit kernels of the noise `ξ(t)`.
//!
//! `G(t,s) = [ξ(t), ξ̄(s)]`, the thermal two-point function, the full
//! commutator of the system mode, `γ̄` from a spectral density, and the
//! weak-damping / classical limit kernels.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::SpectralDensity;
use crate::error::{ensure_time, Error, Result};
use crate::quad::{integrate, integrate_real, QuadConfig};

/// Damping rate `κ`, frequency shift `ν` and mean occupation `n₀` of the limit process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub kappa: f64,
    pub nu: f64,
    pub n0: f64,
}

impl ProcessParams {
    pub fn new(kappa: f64, nu: f64, n0: f64) -> Result<Self> {
        let p = Self { kappa, nu, n0 };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameters from `γ̄ = κ - iν`.
    pub fn from_gamma_bar(gamma_bar: C64, n0: f64) -> Result<Self> {
        Self::new(gamma_bar.re, -gamma_bar.im, n0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!(
                "kappa must be positive and finite, got {} (use the limit kernels for kappa = 0)",
                self.kappa
            )));
        }
        if !self.nu.is_finite() {
            return Err(Error::Config(format!("nu must be finite, got {}", self.nu)));
        }
        if !(self.n0 >= 0.0 && self.n0.is_finite()) {
            return Err(Error::Config(format!("n0 must be finite and nonnegative, got {}", self.n0)));
        }
        Ok(())
    }

    /// `γ = κ + iν`
    pub fn gamma(&self) -> C64 {
        C64::new(self.kappa, self.nu)
    }

    /// `γ̄ = κ - iν`
    pub fn gamma_bar(&self) -> C64 {
        C64::new(self.kappa, -self.nu)
    }

    /// `σ = ln((n₀+1)/n₀)`, infinite for the vacuum.
    pub fn sigma(&self) -> f64 {
        if self.n0 == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / self.n0).ln_1p()
        }
    }

    /// `G(t,s)` without argument checks; evaluated branchwise so it neither
    /// overflows at large times nor cancels at small ones.
    pub fn g(&self, t: f64, s: f64) -> C64 {
        if t <= s {
            (-self.gamma() * (s - t)).exp() * -(-2.0 * self.kappa * t).exp_m1()
        } else {
            (-self.gamma_bar() * (t - s)).exp() * -(-2.0 * self.kappa * s).exp_m1()
        }
    }
}

/// `G(t,s) = [ξ(t), ξ̄(s)]`.
pub fn kernel_g(t: f64, s: f64, p: &ProcessParams) -> Result<C64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    Ok(p.g(t, s))
}

/// `G(t,s)` through `e^{-γ̄t-γs}(e^{2κ min(t,s)} - 1)`.
pub fn kernel_g_min_form(t: f64, s: f64, p: &ProcessParams) -> Result<C64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    let m = t.min(s);
    let k2m = 2.0 * p.kappa * m;
    let e = (-p.gamma_bar() * t - p.gamma() * s + k2m).exp();
    Ok(e * -(-k2m).exp_m1())
}

/// `E[ξ̄(t) ξ(s)] = n₀ G(s,t)`.
pub fn two_point(t: f64, s: f64, p: &ProcessParams) -> Result<C64> {
    Ok(kernel_g(s, t, p)? * p.n0)
}

/// `[z(t), z̄(s)] = e^{-γ̄t-γs} + G(t,s)` for `t ≥ s`.
pub fn full_commutator_zz(t: f64, s: f64, p: &ProcessParams) -> Result<C64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    if t < s {
        return Err(Error::Domain(format!("full commutator needs t >= s, got t = {t}, s = {s}")));
    }
    Ok((-p.gamma_bar() * t - p.gamma() * s).exp() + p.g(t, s))
}

/// `γ̄ = π r(ε) + i PV∫₀^∞ r(ω)/(ε-ω) dω`.
///
/// The singular part is handled on a window `|ω-ε| < Δ` by subtracting
/// `r(ε)`, whose contribution vanishes by symmetry.
pub fn gamma_from_density(r: &SpectralDensity, eps: f64, quad: &QuadConfig) -> Result<C64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be a positive frequency, got {eps}")));
    }
    r.validate()?;
    let r_eps = r.eval(eps);
    if !r_eps.is_finite() {
        return Err(Error::Domain(format!("r(eps) is not finite at eps = {eps}")));
    }
    Ok(C64::new(PI * r_eps, principal_value(r, eps, quad)?))
}

/// `PV∫₀^∞ r(ω)/(ε-ω) dω`.
pub fn principal_value(r: &SpectralDensity, eps: f64, quad: &QuadConfig) -> Result<f64> {
    let delta = quad.pv_window.clamp(1e-6, 1.0) * eps;
    let r_eps = r.eval(eps);
    let bps = r.breakpoints();
    let wrap = |e: Error, part: &str| match e {
        Error::Numeric(m) => Error::Numeric(format!("principal value at eps = {eps}, {part}: {m}")),
        other => other,
    };

    let mut inner_bps: Vec<f64> = bps.clone();
    inner_bps.push(eps);
    let (inner, _) = integrate_real(
        |w| {
            if w == eps {
                0.0
            } else {
                (r.eval(w) - r_eps) / (eps - w)
            }
        },
        eps - delta,
        eps + delta,
        &inner_bps,
        quad,
    )
    .map_err(|e| wrap(e, "singular window"))?;

    let f = |w: f64| C64::new(r.eval(w) / (eps - w), 0.0);
    let lower = integrate(f, 0.0, eps - delta, &bps, quad).map_err(|e| wrap(e, "below window"))?;

    let a = eps + delta;
    let upper = match r.support_max() {
        Some(top) if top <= a => 0.0,
        Some(top) => integrate(f, a, top, &bps, quad).map_err(|e| wrap(e, "above window"))?.value.re,
        None => {
            let mut x = a.max(2.0 * r.scale());
            let mut sum = integrate(f, a, x, &bps, quad).map_err(|e| wrap(e, "above window"))?.value.re;
            let mut converged = false;
            for _ in 0..200 {
                let chunk = integrate(f, x, 2.0 * x, &[], quad).map_err(|e| wrap(e, "tail"))?.value.re;
                sum += chunk;
                x *= 2.0;
                if chunk.abs() < 1e-12 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numeric(format!(
                    "principal value tail at eps = {eps} still above 1e-12 at omega = {x:.3e}"
                )));
            }
            sum
        }
    };
    Ok(inner + lower.value.re + upper)
}

/// `2 min(t,s)`, the weak-damping limit of `G(t,s) e^{-iν(t-s)}/κ`.
pub fn limit_kernel_tbrownian(t: f64, s: f64) -> Result<f64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    Ok(2.0 * t.min(s))
}

/// Classical limit `n₀ → ∞`, `κ → 0` with `D = κ n₀` fixed of the two-point
/// function `n₀ G(s,t)`: `2D e^{-iν(t-s)} min(t,s)`.
pub fn limit_kernel_classical(t: f64, s: f64, d: f64, nu: f64) -> Result<C64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("D must be finite and nonnegative, got {d}")));
    }
    Ok(C64::from_polar(2.0 * d * t.min(s), -nu * (t - s)))
}

/// `(T/2ω₀) e^{-κ(t+s)} (e^{2κ min(t,s)} - 1)`.
pub fn ou_covariance(t: f64, s: f64, temperature: f64, omega0: f64, kappa: f64) -> Result<f64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    for (name, v) in [("temperature", temperature), ("omega0", omega0), ("kappa", kappa)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let m = t.min(s);
    Ok(temperature / (2.0 * omega0) * (-kappa * (t + s - 2.0 * m)).exp() * -(-2.0 * kappa * m).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(kappa: f64, nu: f64, n0: f64) -> ProcessParams {
        ProcessParams::new(kappa, nu, n0).unwrap()
    }

    #[test]
    fn zero_time_kernel_vanishes() {
        assert_eq!(kernel_g(0.0, 0.0, &p(0.7, 0.2, 1.0)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn equal_time_value() {
        let g = kernel_g(1.0, 1.0, &p(0.5, 0.0, 0.0)).unwrap();
        assert!((g - C64::new(1.0 - (-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert!((g.re - 0.6321206).abs() < 1e-7);
    }

    #[test]
    fn hermiticity_example() {
        let q = p(0.3, 0.7, 1.0);
        let a = kernel_g(2.0, 1.0, &q).unwrap();
        let b = kernel_g(1.0, 2.0, &q).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        let tp = two_point(2.0, 1.0, &q).unwrap();
        assert!((tp - two_point(1.0, 2.0, &q).unwrap().conj()).norm() < 1e-15);
    }

    #[test]
    fn two_point_examples() {
        assert_eq!(two_point(1.3, 0.4, &p(1.0, 1.0, 0.0)).unwrap().norm(), 0.0);
        let v = two_point(1.0, 1.0, &p(0.5, 0.0, 2.0)).unwrap();
        assert!((v.re - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn negative_time_is_rejected() {
        assert!(matches!(kernel_g(-1.0, 0.0, &p(1.0, 0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(full_commutator_zz(1.0, 2.0, &p(1.0, 0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn kappa_zero_is_rejected() {
        assert!(matches!(ProcessParams::new(0.0, 1.0, 1.0), Err(Error::Config(_))));
        assert!(ProcessParams::new(1.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn sigma_matches_occupation() {
        for n0 in [1e-3, 0.5, 1.0, 7.0, 1e4] {
            let s = p(1.0, 0.0, n0).sigma();
            assert!((1.0 / s.exp_m1() - n0).abs() <= 1e-12 * n0.max(1.0));
        }
        assert!((p(1.0, 0.0, 1.0).sigma() - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn full_commutator_examples() {
        let q = p(0.4, 0.2, 0.0);
        assert!((full_commutator_zz(2.5, 2.5, &q).unwrap() - 1.0).norm() < 1e-14);
        let v = full_commutator_zz(3.0, 1.0, &q).unwrap();
        let direct = (-q.gamma_bar() * 3.0 - q.gamma() * 1.0).exp() + kernel_g_min_form(3.0, 1.0, &q).unwrap();
        let exact = (-C64::new(0.4, -0.2) * 2.0).exp();
        assert!((v - exact).norm() < 1e-14);
        assert!((direct - exact).norm() < 1e-14);
        assert!(full_commutator_zz(400.0, 1.0, &q).unwrap().norm() < 1e-60);
    }

    #[test]
    fn t_brownian_limit() {
        assert_eq!(limit_kernel_tbrownian(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(limit_kernel_tbrownian(1.0, 3.0).unwrap(), 2.0);
        let nu = 0.8;
        let mut prev = f64::INFINITY;
        for kappa in [1e-2, 1e-3, 1e-4] {
            let q = p(kappa, nu, 0.0);
            let v = kernel_g(1.0, 3.0, &q).unwrap() * C64::from_polar(1.0, -nu * (1.0 - 3.0)) / kappa;
            let dev = (v - 2.0).norm();
            assert!(dev < 10.0 * kappa, "kappa {kappa}: {v}");
            assert!(dev < prev);
            prev = dev;
        }
    }

    #[test]
    fn classical_limit() {
        assert_eq!(limit_kernel_classical(1.0, 2.0, 0.0, 0.3).unwrap().norm(), 0.0);
        assert!((limit_kernel_classical(2.0, 5.0, 1.0, 0.0).unwrap() - 4.0).norm() < 1e-15);
        assert!(limit_kernel_classical(1.0, 1.0, -1.0, 0.0).is_err());
        let (kappa, n0, nu) = (1e-4, 1e4, 0.6);
        let q = p(kappa, nu, n0);
        for (t, s) in [(1.0, 3.0), (2.5, 0.5), (1.0, 1.0)] {
            let exact = two_point(t, s, &q).unwrap();
            let lim = limit_kernel_classical(t, s, kappa * n0, nu).unwrap();
            assert!((exact - lim).norm() < 1e-3, "({t},{s}): {exact} vs {lim}");
        }
    }

    #[test]
    fn ou_examples() {
        assert_eq!(ou_covariance(0.0, 2.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        let (t, temp, w0, k) = (0.7, 2.0, 1.5, 0.3);
        let v = ou_covariance(t, t, temp, w0, k).unwrap();
        assert!((v - temp / (2.0 * w0) * (1.0 - (-2.0 * k * t).exp())).abs() < 1e-15);
        assert!((ou_covariance(500.0, 500.0, temp, w0, k).unwrap() - temp / (2.0 * w0)).abs() < 1e-15);
        assert!(ou_covariance(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ou_is_the_real_quadrature_of_the_rotated_two_point_function() {
        // X(t) = Re(z e^{iνt}) with ħ n₀ = T/ω₀ and ħ → 0.
        let (temp, w0) = (1.3, 0.9);
        let n0 = 1e6;
        let hbar = temp / w0 / n0;
        let q = p(0.4, 0.25, n0);
        for (t, s) in [(0.3, 1.1), (2.0, 0.7), (1.5, 1.5)] {
            let c = two_point(t, s, &q).unwrap() * C64::from_polar(1.0, q.nu * (t - s));
            let x = 0.5 * hbar * c.re;
            assert!((x - ou_covariance(t, s, temp, w0, q.kappa).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_window_has_real_gamma() {
        let r = SpectralDensity::Window { level: 0.2, lo: 0.5, hi: 1.5 };
        let g = gamma_from_density(&r, 1.0, &QuadConfig::default()).unwrap();
        assert_eq!(g.re, PI * 0.2);
        assert!(g.im.abs() < 1e-12, "{g}");
    }

    #[test]
    fn window_outside_support_is_a_logarithm() {
        let (c, a, b) = (0.3, 0.4, 0.9);
        let r = SpectralDensity::Window { level: c, lo: a, hi: b };
        for eps in [1.5, 0.2] {
            let g = gamma_from_density(&r, eps, &QuadConfig::default()).unwrap();
            let exact = c * ((eps - a) / (eps - b)).abs().ln();
            assert_eq!(g.re, 0.0);
            assert!((g.im - exact).abs() < 1e-11, "eps {eps}: {} vs {exact}", g.im);
        }
    }

    #[test]
    fn asymmetric_window_inside_support() {
        let (c, a, b, eps) = (0.3, 0.4, 1.8, 1.0);
        let r = SpectralDensity::Window { level: c, lo: a, hi: b };
        let g = gamma_from_density(&r, eps, &QuadConfig::default()).unwrap();
        let exact = c * ((eps - a) / (b - eps)).ln();
        assert!((g.im - exact).abs() < 1e-11);
        assert_eq!(g.re, PI * c);
    }

    #[test]
    fn nonpositive_eps_is_rejected() {
        let r = SpectralDensity::OhmicCutoff { strength: 0.1, cutoff: 1.0 };
        assert!(matches!(gamma_from_density(&r, 0.0, &QuadConfig::default()), Err(Error::Domain(_))));
    }
}
