//! Exact finite-oscillator bath coupled linearly to one system mode.
//!
//! The coupled eigenfrequencies are the zeros of
//! `S(Ω) = Ω - ε - λ² Σ_α c_α/(Ω - ω_α)` with `c_α = |φ_α|²`, and the
//! residues of `1/S` are `R_k = 1/S'(Ω_k)`. Roots are stored as an offset
//! from the nearest pole so that `Ω_k - ω_α` keeps full relative precision.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SpectralDensity;
use crate::error::{ensure_time, Error, Result};
use crate::kernel::{gamma_from_density, ProcessParams};
use crate::quad::{integrate, integrate_real_line, QuadConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub eps: f64,
    pub lambda: f64,
    pub omegas: Vec<f64>,
    /// `|φ_α|²`
    pub couplings: Vec<f64>,
    pub occupations: Vec<f64>,
}

/// Occupation of bath oscillator at frequency `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ThermalRule {
    Constant { n0: f64 },
    /// `1/(e^{ω/T} - 1)`
    Bose { temperature: f64 },
}

impl ThermalRule {
    pub fn occupation(&self, w: f64) -> f64 {
        match *self {
            Self::Constant { n0 } => n0,
            Self::Bose { temperature } => 1.0 / (w / temperature).exp_m1(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { n0 } if !(n0 >= 0.0 && n0.is_finite()) => {
                Err(Error::Config(format!("constant occupation must be nonnegative, got {n0}")))
            }
            Self::Bose { temperature } if !(temperature > 0.0 && temperature.is_finite()) => {
                Err(Error::Config(format!("Bose temperature must be positive, got {temperature}")))
            }
            _ => Ok(()),
        }
    }
}

impl BathSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.omegas.len();
        if self.couplings.len() != n || self.occupations.len() != n {
            return Err(Error::Config(format!(
                "bath lists differ in length: {} omegas, {} couplings, {} occupations",
                n,
                self.couplings.len(),
                self.occupations.len()
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.omegas.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config("bath frequencies must be positive and finite".into()));
        }
        if let Some(i) = self.omegas.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "bath frequencies must be strictly increasing: omega[{}] = {} >= omega[{}] = {}",
                i,
                self.omegas[i],
                i + 1,
                self.omegas[i + 1]
            )));
        }
        if self.couplings.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Config("couplings |phi|^2 must be finite and nonnegative".into()));
        }
        if self.occupations.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("occupations must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// `λ² Σ c_α/ω_α`; the coupled Hamiltonian is bounded below iff this is below `ε`.
    pub fn boundedness_sum(&self) -> f64 {
        self.lambda * self.lambda * self.omegas.iter().zip(&self.couplings).map(|(w, c)| c / w).sum::<f64>()
    }

    pub fn is_bounded_below(&self) -> bool {
        self.eps > self.boundedness_sum()
    }

    fn coupled(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.couplings[i] > 0.0 && self.lambda > 0.0).collect()
    }
}

/// `S(Ω)` evaluated directly as the rational expression.
pub fn secular_eval(spec: &BathSpec, omega: f64) -> Result<f64> {
    let l2 = spec.lambda * spec.lambda;
    let mut sum = 0.0;
    for (i, (&w, &c)) in spec.omegas.iter().zip(&spec.couplings).enumerate() {
        if c == 0.0 || l2 == 0.0 {
            continue;
        }
        if omega == w {
            return Err(Error::Pole { index: i, omega: w });
        }
        sum += c / (omega - w);
    }
    Ok(omega - spec.eps - l2 * sum)
}

/// A root `Ω = ω[anchor] + offset`, or `Ω = offset` without anchor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub anchor: Option<usize>,
    pub offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecularSpectrum {
    pub bath: BathSpec,
    pub roots: Vec<Root>,
    /// `Ω_k`, sorted.
    pub omegas: Vec<f64>,
    pub residues: Vec<f64>,
}

impl SecularSpectrum {
    /// `Ω_k - ω_α` without cancellation.
    pub fn gap(&self, k: usize, alpha: usize) -> f64 {
        let r = self.roots[k];
        match r.anchor {
            Some(a) if a == alpha => r.offset,
            Some(a) => (self.bath.omegas[a] - self.bath.omegas[alpha]) + r.offset,
            None => r.offset - self.bath.omegas[alpha],
        }
    }

    /// `Ω_k - ε`
    pub fn shift(&self, k: usize) -> f64 {
        let r = self.roots[k];
        match r.anchor {
            Some(a) => (self.bath.omegas[a] - self.bath.eps) + r.offset,
            None => r.offset - self.bath.eps,
        }
    }

    /// Checks `Ω₀ < ω₁ < Ω₁ < … < ω_L < Ω_L` over the coupled oscillators.
    pub fn check_interlacing(&self) -> Result<()> {
        let coupled = self.bath.coupled();
        let active: Vec<usize> = (0..self.roots.len()).filter(|&k| self.residues[k] > 0.0).collect();
        if active.len() != coupled.len() + 1 {
            return Err(Error::Numeric(format!(
                "expected {} coupled roots, found {}",
                coupled.len() + 1,
                active.len()
            )));
        }
        for (j, &k) in active.iter().enumerate() {
            if j > 0 && !(self.gap(k, coupled[j - 1]) > 0.0) {
                return Err(Error::Numeric(format!(
                    "interlacing violated: root {k} = {} not above omega[{}] = {}",
                    self.omegas[k],
                    coupled[j - 1],
                    self.bath.omegas[coupled[j - 1]]
                )));
            }
            if j < coupled.len() && !(self.gap(k, coupled[j]) < 0.0) {
                return Err(Error::Numeric(format!(
                    "interlacing violated: root {k} = {} not below omega[{}] = {}",
                    self.omegas[k],
                    coupled[j],
                    self.bath.omegas[coupled[j]]
                )));
            }
        }
        Ok(())
    }
}

/// `S` at `ω[anchor] + x`, with every pole difference formed as `(ω_a - ω_β) + x`.
fn secular_at(spec: &BathSpec, coupled: &[usize], anchor: usize, x: f64) -> f64 {
    let wa = spec.omegas[anchor];
    let mut sum = 0.0;
    for &b in coupled {
        let d = if b == anchor { x } else { (wa - spec.omegas[b]) + x };
        sum += spec.couplings[b] / d;
    }
    (wa - spec.eps) + x - spec.lambda * spec.lambda * sum
}

fn secular_derivative(spec: &BathSpec, coupled: &[usize], root: Root) -> f64 {
    let mut sum = 0.0;
    for &b in coupled {
        let d = match root.anchor {
            Some(a) if a == b => root.offset,
            Some(a) => (spec.omegas[a] - spec.omegas[b]) + root.offset,
            None => root.offset - spec.omegas[b],
        };
        sum += spec.couplings[b] / (d * d);
    }
    1.0 + spec.lambda * spec.lambda * sum
}

/// Bisection for the increasing function `f` on `(lo, hi)` with `f(lo+) < 0 < f(hi-)`.
/// The endpoints may be poles and are never evaluated before the loop.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (a, b) = (lo, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v.is_nan() {
            return Err(Error::Numeric(format!("S is NaN at offset {mid:e}")));
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo), f(hi));
    if (lo != a && flo > 0.0) || (hi != b && fhi < 0.0) {
        return Err(Error::Numeric(format!("no sign change on [{a:e}, {b:e}]: S = {flo:e}, {fhi:e}")));
    }
    Ok(if flo.abs() <= fhi.abs() { lo } else { hi })
}

/// Coupled eigenfrequencies and residues, one root per gap between coupled poles
/// plus one on either side. Decoupled oscillators (`c_α = 0`) are kept as roots
/// at `ω_α` with zero residue.
pub fn eigenfrequencies(spec: &BathSpec) -> Result<SecularSpectrum> {
    spec.validate()?;
    let coupled = spec.coupled();
    let m = coupled.len();
    let mut roots: Vec<Root> = Vec::with_capacity(spec.len() + 1);

    if m == 0 {
        roots.push(Root { anchor: None, offset: spec.eps });
    } else {
        let l2c: f64 = spec.lambda * spec.lambda * coupled.iter().map(|&b| spec.couplings[b]).sum::<f64>();
        let first = coupled[0];
        let last = coupled[m - 1];
        let diag = |e: Error, what: String| match e {
            Error::Numeric(msg) => Error::Numeric(format!("bracket failure {what}: {msg}")),
            other => other,
        };

        // Below the lowest pole.
        let f = |x: f64| secular_at(spec, &coupled, first, x);
        let mut lo = -spec.omegas[first];
        let mut tries = 0;
        while !(f(lo) < 0.0) {
            lo *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numeric(format!("could not bracket the lowest root below omega[{first}]")));
            }
        }
        let x = bisect(f, lo, 0.0).map_err(|e| diag(e, format!("below omega[{first}] = {}", spec.omegas[first])))?;
        roots.push(Root { anchor: Some(first), offset: x });

        // Between consecutive poles.
        let inner: Vec<Result<Root>> = coupled
            .par_windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let h = spec.omegas[b] - spec.omegas[a];
                let half = 0.5 * h;
                let fa = |x: f64| secular_at(spec, &coupled, a, x);
                let what = || format!("in (omega[{a}], omega[{b}]) = ({}, {})", spec.omegas[a], spec.omegas[b]);
                if fa(half) > 0.0 {
                    let x = bisect(fa, 0.0, half).map_err(|e| diag(e, what()))?;
                    Ok(Root { anchor: Some(a), offset: x })
                } else {
                    let fb = |x: f64| secular_at(spec, &coupled, b, x);
                    let x = bisect(fb, -half, 0.0).map_err(|e| diag(e, what()))?;
                    Ok(Root { anchor: Some(b), offset: x })
                }
            })
            .collect();
        for r in inner {
            roots.push(r?);
        }

        // Above the highest pole: S(ω_L + d) > 0 once d > sqrt(λ² Σ c) and ω_L + d > ε.
        let g = |x: f64| secular_at(spec, &coupled, last, x);
        let mut hi = (spec.eps - spec.omegas[last]).max(0.0) + 1.01 * l2c.sqrt() + f64::EPSILON * spec.omegas[last];
        let mut tries = 0;
        while !(g(hi) > 0.0) {
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numeric(format!("could not bracket the highest root above omega[{last}]")));
            }
        }
        let x = bisect(g, 0.0, hi).map_err(|e| diag(e, format!("above omega[{last}] = {}", spec.omegas[last])))?;
        roots.push(Root { anchor: Some(last), offset: x });
    }

    let mut residues: Vec<f64> = roots.iter().map(|&r| 1.0 / secular_derivative(spec, &coupled, r)).collect();
    for i in 0..spec.len() {
        if !(spec.couplings[i] > 0.0 && spec.lambda > 0.0) {
            roots.push(Root { anchor: Some(i), offset: 0.0 });
            residues.push(0.0);
        }
    }
    let value = |r: &Root| match r.anchor {
        Some(a) => spec.omegas[a] + r.offset,
        None => r.offset,
    };
    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&i, &j| value(&roots[i]).total_cmp(&value(&roots[j])));
    let roots: Vec<Root> = order.iter().map(|&i| roots[i]).collect();
    let residues: Vec<f64> = order.iter().map(|&i| residues[i]).collect();
    let omegas = roots.iter().map(value).collect();
    let sp = SecularSpectrum { bath: spec.clone(), roots, omegas, residues };
    sp.check_interlacing()?;
    Ok(sp)
}

/// Maximal absolute deviations of the three residue identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumRuleReport {
    pub residue_sum: f64,
    pub first_moment: f64,
    pub second_moment: f64,
}

impl SumRuleReport {
    pub fn max(&self) -> f64 {
        self.residue_sum.max(self.first_moment).max(self.second_moment)
    }
}

/// Deviations of `Σ R_k = 1`, `Σ R_k/(Ω_k-ω_α) = 0` and
/// `Σ R_k/((Ω_k-ω_α)(Ω_k-ω_β)) = δ_αβ/(λ² c_α)` over coupled oscillators.
pub fn sum_rule_check(sp: &SecularSpectrum) -> SumRuleReport {
    sum_rule_check_sampled(sp, usize::MAX)
}

/// [`sum_rule_check`] restricted to at most `max_oscillators` evenly spaced
/// coupled oscillators, for large baths where the full check is cubic.
pub fn sum_rule_check_sampled(sp: &SecularSpectrum, max_oscillators: usize) -> SumRuleReport {
    let all = sp.bath.coupled();
    let stride = all.len().div_ceil(max_oscillators.max(1)).max(1);
    let coupled: Vec<usize> = all.iter().copied().step_by(stride).collect();
    let active: Vec<usize> = (0..sp.roots.len()).filter(|&k| sp.residues[k] > 0.0).collect();
    let residue_sum = (active.iter().map(|&k| sp.residues[k]).sum::<f64>() - 1.0).abs();
    let l2 = sp.bath.lambda * sp.bath.lambda;
    let (first_moment, second_moment) = coupled
        .par_iter()
        .map(|&a| {
            let w: Vec<f64> = active.iter().map(|&k| sp.residues[k] / sp.gap(k, a)).collect();
            let first = w.iter().sum::<f64>().abs();
            let mut second: f64 = 0.0;
            for &b in &coupled {
                let mut s = 0.0;
                for (j, &k) in active.iter().enumerate() {
                    s += w[j] / sp.gap(k, b);
                }
                if a == b {
                    s -= 1.0 / (l2 * sp.bath.couplings[a]);
                }
                second = second.max(s.abs());
            }
            (first, second)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    SumRuleReport { residue_sum, first_moment, second_moment }
}

/// Riemann discretization `ω_l = ηl`, `c_l = η r(ηl)`, `l = 1..=L`.
pub fn bath_from_density(
    r: &SpectralDensity,
    eps: f64,
    lambda: f64,
    eta: f64,
    l: usize,
    thermal: ThermalRule,
) -> Result<BathSpec> {
    r.validate()?;
    thermal.validate()?;
    if !(eta > 0.0 && eta.is_finite()) || l == 0 {
        return Err(Error::Config(format!("need eta > 0 and L >= 1, got eta = {eta}, L = {l}")));
    }
    let omegas: Vec<f64> = (1..=l).map(|i| eta * i as f64).collect();
    let couplings: Vec<f64> = omegas.iter().map(|&w| eta * r.eval(w)).collect();
    let occupations: Vec<f64> = omegas.iter().map(|&w| thermal.occupation(w)).collect();
    let sum: f64 = omegas.iter().zip(&couplings).map(|(w, c)| c / w).sum();
    if !(eps > sum) {
        return Err(Error::Config(format!(
            "boundedness violated: sum_l eta r(eta l)/(eta l) = {sum} is not below eps = {eps}"
        )));
    }
    let spec = BathSpec { eps, lambda, omegas, couplings, occupations };
    spec.validate()?;
    Ok(spec)
}

fn phases(sp: &SecularSpectrum, t: f64) -> Vec<C64> {
    let l2 = sp.bath.lambda * sp.bath.lambda;
    (0..sp.roots.len())
        .map(|k| if sp.residues[k] > 0.0 { C64::from_polar(sp.residues[k], -sp.shift(k) * t / l2) } else { C64::new(0.0, 0.0) })
        .collect()
}

fn require_coupling(sp: &SecularSpectrum) -> Result<()> {
    if !(sp.bath.lambda > 0.0) {
        return Err(Error::Domain("rescaled time needs lambda > 0".into()));
    }
    Ok(())
}

/// `f̄(t) = Σ_k R_k e^{-i(Ω_k-ε)t/λ²}`, the coefficient of the initial system mode.
pub fn rescaled_drift(sp: &SecularSpectrum, t: f64) -> Result<C64> {
    ensure_time("t", t)?;
    require_coupling(sp)?;
    Ok(phases(sp, t).iter().sum())
}

/// `F̄_α(t) = λ φ_α Σ_k R_k e^{-i(Ω_k-ε)t/λ²}/(Ω_k-ω_α)` for every oscillator.
pub fn noise_coefficients(sp: &SecularSpectrum, t: f64) -> Result<Vec<C64>> {
    ensure_time("t", t)?;
    require_coupling(sp)?;
    let ph = phases(sp, t);
    let active: Vec<usize> = (0..sp.roots.len()).filter(|&k| sp.residues[k] > 0.0).collect();
    Ok((0..sp.bath.len())
        .into_par_iter()
        .map(|a| {
            let c = sp.bath.couplings[a];
            if c == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let s: C64 = active.iter().map(|&k| ph[k] / sp.gap(k, a)).sum();
            s * (sp.bath.lambda * c.sqrt())
        })
        .collect())
}

/// `Σ_α F̄_α(t) conj(F̄_α(s))`, or with `weighted` the thermal `Σ_α n_α F̄_α(t) conj(F̄_α(s))`.
pub fn rescaled_noise_kernel(sp: &SecularSpectrum, t: f64, s: f64, weighted: bool) -> Result<C64> {
    let ft = noise_coefficients(sp, t)?;
    let fs = noise_coefficients(sp, s)?;
    Ok(pair_kernel(sp, &ft, &fs, weighted))
}

fn pair_kernel(sp: &SecularSpectrum, ft: &[C64], fs: &[C64], weighted: bool) -> C64 {
    ft.iter()
        .zip(fs)
        .zip(&sp.bath.occupations)
        .map(|((a, b), n)| if weighted { a * b.conj() * n } else { a * b.conj() })
        .sum()
}

/// `|f̄(t)|² + Σ_α |F̄_α(t)|²`, equal to one by unitarity.
pub fn unitarity(sp: &SecularSpectrum, t: f64) -> Result<f64> {
    let d = rescaled_drift(sp, t)?;
    let f = noise_coefficients(sp, t)?;
    Ok(d.norm_sqr() + f.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Mesh schedule `η = λ² η̂`, `L = ceil(cover·ε/η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub eta_hat: f64,
    pub cover: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { eta_hat: 0.05, cover: 4.0 }
    }
}

impl Schedule {
    pub fn mesh(&self, eps: f64, lambda: f64) -> (f64, usize) {
        let eta = lambda * lambda * self.eta_hat;
        (eta, (self.cover * eps / eta).ceil() as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub lambda: f64,
    pub t: f64,
    pub s: f64,
    pub re_dev: f64,
    pub im_dev: f64,
}

/// Finite-bath deviation from the Markov limit at one coupling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitDeviation {
    pub lambda: f64,
    pub eta: f64,
    pub size: usize,
    pub gamma_bar: C64,
    pub n0: f64,
    /// `max_t |f̄(t) - e^{-γ̄t}|`
    pub drift: f64,
    /// `max_{t,s} |Σ F̄_α(t) conj(F̄_α(s)) - G(t,s)|`
    pub kernel: f64,
    /// `max_{t,s} |Σ n_α F̄_α(t) conj(F̄_α(s)) - n₀ G(t,s)|`
    pub thermal: f64,
    pub unitarity: f64,
    pub sum_rules: SumRuleReport,
    pub rows: Vec<DeviationRow>,
}

/// Builds the discretized bath for `λ` and compares it with the limit on `times × times`.
pub fn markov_limit_deviation(
    r: &SpectralDensity,
    eps: f64,
    lambda: f64,
    schedule: Schedule,
    thermal: ThermalRule,
    times: &[f64],
    quad: &QuadConfig,
) -> Result<LimitDeviation> {
    let gamma_bar = gamma_from_density(r, eps, quad)?;
    let n0 = thermal.occupation(eps);
    let p = ProcessParams::from_gamma_bar(gamma_bar, n0)?;
    let (eta, l) = schedule.mesh(eps, lambda);
    let spec = bath_from_density(r, eps, lambda, eta, l, thermal)?;
    let sp = eigenfrequencies(&spec)?;
    let sum_rules = sum_rule_check_sampled(&sp, 64);

    let coeffs: Vec<Vec<C64>> = times.iter().map(|&t| noise_coefficients(&sp, t)).collect::<Result<_>>()?;
    let mut drift: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let d = rescaled_drift(&sp, t)?;
        drift = drift.max((d - (-gamma_bar * t).exp()).norm());
        let u = d.norm_sqr() + coeffs[i].iter().map(|z| z.norm_sqr()).sum::<f64>();
        unit = unit.max((u - 1.0).abs());
    }
    let mut kernel: f64 = 0.0;
    let mut thermal_dev: f64 = 0.0;
    let mut rows = Vec::with_capacity(times.len() * times.len());
    for (i, &t) in times.iter().enumerate() {
        for (j, &s) in times.iter().enumerate() {
            let g = p.g(t, s);
            let dev = pair_kernel(&sp, &coeffs[i], &coeffs[j], false) - g;
            let wdev = pair_kernel(&sp, &coeffs[i], &coeffs[j], true) - g * n0;
            kernel = kernel.max(dev.norm());
            thermal_dev = thermal_dev.max(wdev.norm());
            rows.push(DeviationRow { lambda, t, s, re_dev: dev.re, im_dev: dev.im });
        }
    }
    Ok(LimitDeviation {
        lambda,
        eta,
        size: l,
        gamma_bar,
        n0,
        drift,
        kernel,
        thermal: thermal_dev,
        unitarity: unit,
        sum_rules,
        rows,
    })
}

/// `R_Ω = r/(π²r² + (Ω - r̂)²)` with `r = κ/π`, `r̂ = -ν`.
pub fn lorentzian_weight(p: &ProcessParams, omega: f64) -> f64 {
    let r = p.kappa / PI;
    let d = omega + p.nu;
    r / (p.kappa * p.kappa + d * d)
}

/// `∫ R_Ω Σ_j c_j e^{iΩτ_j} dΩ` by adaptive quadrature on `|Ω + ν| < W` plus the
/// exact tail of the non-oscillating terms. The oscillating tails are of order
/// `κ/(|τ| W²)` and are dropped.
fn lorentz_integral(p: &ProcessParams, terms: &[(C64, f64)], quad: &QuadConfig) -> Result<C64> {
    let min_tau = terms.iter().map(|t| t.1.abs()).filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
    let mut w = 1e4 * p.kappa;
    if min_tau.is_finite() {
        w = w.max(1e4 / min_tau.max(1e-3)).min(1e7 * p.kappa.max(1.0));
    }
    let center = -p.nu;
    let mut bps = Vec::new();
    let mut x = p.kappa;
    while x < w {
        bps.push(center - x);
        bps.push(center + x);
        x *= 4.0;
    }
    let cfg = QuadConfig { max_subdivisions: quad.max_subdivisions.max(200_000), ..*quad };
    let est = integrate(
        |om| {
            let s: C64 = terms.iter().map(|&(c, tau)| c * C64::from_polar(1.0, om * tau)).sum();
            s * lorentzian_weight(p, om)
        },
        center - w,
        center + w,
        &bps,
        &cfg,
    )?;
    let tail = 1.0 - 2.0 / PI * (w / p.kappa).atan();
    let flat: C64 = terms.iter().filter(|t| t.1 == 0.0).map(|t| t.0).sum();
    Ok(est.value + flat * tail)
}

/// `[ξ(t), ξ̄(s)]` from the spectral representation
/// `∫ R_Ω (e^{-iΩt} - e^{-γ̄t})(e^{iΩs} - e^{-γs}) dΩ`.
pub fn spectral_kernel_quadrature(p: &ProcessParams, t: f64, s: f64, quad: &QuadConfig) -> Result<C64> {
    ensure_time("t", t)?;
    ensure_time("s", s)?;
    let a = (-p.gamma_bar() * t).exp();
    let b = (-p.gamma() * s).exp();
    // (e^{-iΩt} - a)(e^{iΩs} - b) = e^{-iΩ(t-s)} - b e^{-iΩt} - a e^{iΩs} + ab
    let terms = [(C64::new(1.0, 0.0), s - t), (-b, -t), (-a, s), (a * b, 0.0)];
    lorentz_integral(p, &terms, quad)
}

/// `∫ R_Ω dΩ`, expected to be one.
pub fn lorentzian_normalization(p: &ProcessParams, quad: &QuadConfig) -> Result<f64> {
    let est = integrate_real_line(|om| C64::new(lorentzian_weight(p, om), 0.0), -p.nu, p.kappa, quad)?;
    Ok(est.value.re)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalModeReport {
    /// `(τ, ∫ e^{-iΩτ} R_Ω dΩ, e^{-γ̄τ})`
    pub samples: Vec<(f64, C64, C64)>,
    pub max_deviation: f64,
    pub normalization: f64,
}

/// Checks `∫ e^{-iΩτ} R_Ω dΩ = e^{-γ̄τ}` for each lag `τ ≥ 0`.
pub fn diagonal_mode_check(p: &ProcessParams, lags: &[f64], quad: &QuadConfig) -> Result<DiagonalModeReport> {
    let mut samples = Vec::with_capacity(lags.len());
    let mut max_deviation: f64 = 0.0;
    for &tau in lags {
        ensure_time("lag", tau)?;
        let v = lorentz_integral(p, &[(C64::new(1.0, 0.0), -tau)], quad)?;
        let exact = (-p.gamma_bar() * tau).exp();
        max_deviation = max_deviation.max((v - exact).norm());
        samples.push((tau, v, exact));
    }
    let normalization = lorentzian_normalization(p, quad)?;
    Ok(DiagonalModeReport { samples, max_deviation, normalization })
}
