//! Normal-ordered Weyl words in the noise `ξ(t)` and the system mode `z`.
//!
//! A word is `e^{ℓ} · e^{μ z̄} e^{μ̄ z} · Π_j e^{a_j ξ̄(t_j)} e^{b_j ξ(t_j)}`
//! with strictly increasing `t_j`. Every commutator is a c-number, so
//! reordering and merging only ever add to the scalar exponent `ℓ`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_time, Error, Result};
use crate::kernel::ProcessParams;

const PRUNE: f64 = 1e-14;
const SAME_TIME: f64 = 1e-12;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn same_time(t: f64, s: f64) -> bool {
    (t - s).abs() <= SAME_TIME * t.abs().max(s.abs()).max(1.0)
}

/// `e^{ℓ} e^{μ z̄} e^{μ̄ z}`; `μ` and `μ̄` are independent formal parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemElement {
    pub mu: C64,
    pub mubar: C64,
    pub log_scalar: C64,
}

impl SystemElement {
    pub fn new(mu: C64, mubar: C64) -> Self {
        Self { mu, mubar, log_scalar: zero() }
    }

    pub fn identity() -> Self {
        Self::new(zero(), zero())
    }

    pub fn scalar(log_scalar: C64) -> Self {
        Self { mu: zero(), mubar: zero(), log_scalar }
    }

    /// Weyl composition, `e^{μ̄ z} e^{μ' z̄} = e^{μ' z̄} e^{μ̄ z} e^{μ̄ μ'}`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            mu: self.mu + other.mu,
            mubar: self.mubar + other.mubar,
            log_scalar: self.log_scalar + other.log_scalar + self.mubar * other.mu,
        }
    }

    /// `(μ e^{-γt}, μ̄ e^{-γ̄t})`
    pub fn evolve(&self, t: f64, p: &ProcessParams) -> Self {
        Self {
            mu: self.mu * (-p.gamma() * t).exp(),
            mubar: self.mubar * (-p.gamma_bar() * t).exp(),
            log_scalar: self.log_scalar,
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.mu - other.mu).norm() <= tol
            && (self.mubar - other.mubar).norm() <= tol
            && (self.log_scalar - other.log_scalar).norm() <= tol
    }
}

/// `e^{a ξ̄(t)} e^{b ξ(t)}`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub t: f64,
    pub a: C64,
    pub b: C64,
}

impl Factor {
    pub fn new(t: f64, a: C64, b: C64) -> Self {
        Self { t, a, b }
    }
}

/// Canonical Weyl word. Construct through [`canonicalize`] or the operations below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "WordJson", into = "WordJson")]
pub struct WeylWord {
    pub system: (C64, C64),
    pub factors: Vec<Factor>,
    pub log_scalar: C64,
}

#[derive(Serialize, Deserialize)]
struct WordJson {
    system: [f64; 4],
    factors: Vec<Factor>,
    log_scalar: C64,
}

impl From<WordJson> for WeylWord {
    fn from(w: WordJson) -> Self {
        let s = w.system;
        Self { system: (C64::new(s[0], s[1]), C64::new(s[2], s[3])), factors: w.factors, log_scalar: w.log_scalar }
    }
}

impl From<WeylWord> for WordJson {
    fn from(w: WeylWord) -> Self {
        let (m, mb) = w.system;
        Self { system: [m.re, m.im, mb.re, mb.im], factors: w.factors, log_scalar: w.log_scalar }
    }
}

impl WeylWord {
    pub fn identity() -> Self {
        Self { system: (zero(), zero()), factors: Vec::new(), log_scalar: zero() }
    }

    /// A system element seen as a word without noise factors.
    pub fn from_system(e: &SystemElement) -> Self {
        Self { system: (e.mu, e.mubar), factors: Vec::new(), log_scalar: e.log_scalar }
    }

    pub fn system_element(&self) -> SystemElement {
        SystemElement { mu: self.system.0, mubar: self.system.1, log_scalar: self.log_scalar }
    }

    /// `self · other`, re-canonicalized.
    pub fn mul(&self, other: &Self, p: &ProcessParams) -> Self {
        let s = self.system_element().compose(&other.system_element());
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        canonicalize(factors, (s.mu, s.mubar), s.log_scalar, p)
    }

    /// Latest time carried by a factor, or zero.
    pub fn max_time(&self) -> f64 {
        self.factors.last().map_or(0.0, |f| f.t)
    }

    /// Equality of canonical forms; factors at `t = 0` are ignored since `ξ(0) = 0`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let live = |w: &Self| -> Vec<Factor> { w.factors.iter().copied().filter(|f| f.t > 0.0).collect() };
        let (fa, fb) = (live(self), live(other));
        (self.system.0 - other.system.0).norm() <= tol
            && (self.system.1 - other.system.1).norm() <= tol
            && (self.log_scalar - other.log_scalar).norm() <= tol
            && fa.len() == fb.len()
            && fa.iter().zip(&fb).all(|(x, y)| {
                (x.t - y.t).abs() <= tol * x.t.max(1.0) && (x.a - y.a).norm() <= tol && (x.b - y.b).norm() <= tol
            })
    }

    /// Largest discrepancy between two words with matching structure, or infinity.
    pub fn distance(&self, other: &Self) -> f64 {
        let live = |w: &Self| -> Vec<Factor> { w.factors.iter().copied().filter(|f| f.t > 0.0).collect() };
        let (fa, fb) = (live(self), live(other));
        if fa.len() != fb.len() {
            return f64::INFINITY;
        }
        let mut d = (self.system.0 - other.system.0)
            .norm()
            .max((self.system.1 - other.system.1).norm())
            .max((self.log_scalar - other.log_scalar).norm());
        for (x, y) in fa.iter().zip(&fb) {
            if !same_time(x.t, y.t) {
                return f64::INFINITY;
            }
            d = d.max((x.a - y.a).norm()).max((x.b - y.b).norm());
        }
        d
    }
}

/// Scalar from `F(t)F(t') = F(t')F(t) e^{c}`: `c = b a' G(t,t') - a b' G(t',t)`.
fn swap_scalar(x: &Factor, y: &Factor, p: &ProcessParams) -> C64 {
    x.b * y.a * p.g(x.t, y.t) - x.a * y.b * p.g(y.t, x.t)
}

fn prune(z: C64) -> C64 {
    C64::new(if z.re.abs() < PRUNE { 0.0 } else { z.re }, if z.im.abs() < PRUNE { 0.0 } else { z.im })
}

/// Brings a product of factors (in the given order) to time-ordered normal form.
pub fn canonicalize(factors: Vec<Factor>, system: (C64, C64), log_scalar: C64, p: &ProcessParams) -> WeylWord {
    let mut log = log_scalar;
    let n = factors.len();
    // Snap nearly equal times onto the first representative seen.
    let mut reps: Vec<f64> = Vec::new();
    let mut factors = factors;
    for f in factors.iter_mut() {
        match reps.iter().find(|&&r| same_time(r, f.t)) {
            Some(&r) => f.t = r,
            None => reps.push(f.t),
        }
    }
    // Every inverted pair is swapped exactly once by a stable sort.
    for i in 0..n {
        for j in i + 1..n {
            if factors[i].t > factors[j].t {
                log += swap_scalar(&factors[i], &factors[j], p);
            }
        }
    }
    let mut sorted = factors;
    sorted.sort_by(|x, y| x.t.total_cmp(&y.t));

    let mut out: Vec<Factor> = Vec::with_capacity(n);
    for f in sorted {
        match out.last_mut() {
            Some(last) if last.t == f.t => {
                // e^{bξ} e^{a'ξ̄} = e^{a'ξ̄} e^{bξ} e^{b a' G(t,t)}
                log += last.b * f.a * p.g(last.t, last.t);
                last.a += f.a;
                last.b += f.b;
            }
            _ => out.push(f),
        }
    }
    let factors = out
        .into_iter()
        .map(|f| Factor { t: f.t, a: prune(f.a), b: prune(f.b) })
        .filter(|f| f.a != zero() || f.b != zero())
        .collect();
    WeylWord { system: (prune(system.0), prune(system.1)), factors, log_scalar: log }
}

/// `𝔼[w]`, an element of the system algebra.
pub fn expectation_e(w: &WeylWord, p: &ProcessParams) -> SystemElement {
    let mut log = w.log_scalar;
    let f = &w.factors;
    for i in 0..f.len() {
        for j in 0..f.len() {
            let weight = p.n0 + if i < j { 1.0 } else { 0.0 };
            if weight != 0.0 {
                log += f[i].b * f[j].a * p.g(f[i].t, f[j].t) * weight;
            }
        }
    }
    SystemElement { mu: w.system.0, mubar: w.system.1, log_scalar: log }
}

/// `J_t(e^{μz̄}e^{μ̄z}) = e^{μ(t)z̄}e^{μ̄(t)z} e^{μξ̄(t)}e^{μ̄ξ(t)}`.
pub fn flow_j(e: &SystemElement, t: f64, p: &ProcessParams) -> Result<WeylWord> {
    ensure_time("t", t)?;
    let ev = e.evolve(t, p);
    Ok(canonicalize(vec![Factor::new(t, e.mu, e.mubar)], (ev.mu, ev.mubar), e.log_scalar, p))
}

/// `Φ_t = 𝔼 ∘ J_t`: `(μ(t), μ̄(t))` and `ℓ += n₀(μμ̄ - μ(t)μ̄(t))`.
pub fn dynamical_map_phi(e: &SystemElement, t: f64, p: &ProcessParams) -> Result<SystemElement> {
    ensure_time("t", t)?;
    Ok(phi(e, t, p))
}

fn phi(e: &SystemElement, t: f64, p: &ProcessParams) -> SystemElement {
    let ev = e.evolve(t, p);
    SystemElement { log_scalar: e.log_scalar + p.n0 * (e.mu * e.mubar - ev.mu * ev.mubar), ..ev }
}

/// `𝔼_s[w]`: past factors are kept, future factors are transported back to `s`.
pub fn conditional_e(w: &WeylWord, s: f64, p: &ProcessParams) -> Result<WeylWord> {
    ensure_time("s", s)?;
    let (past, future): (Vec<Factor>, Vec<Factor>) =
        w.factors.iter().partition(|f| f.t <= s || same_time(f.t, s));
    if future.is_empty() {
        return Ok(w.clone());
    }
    let n = future.len();
    let mu_s: Vec<C64> = future.iter().map(|f| f.a * (-p.gamma() * (f.t - s)).exp()).collect();
    let mubar_s: Vec<C64> = future.iter().map(|f| f.b * (-p.gamma_bar() * (f.t - s)).exp()).collect();

    let mut x = zero();
    let mut y = zero();
    for i in 0..n {
        y += future[i].b * future[i].a;
        for j in i + 1..n {
            let dt = future[j].t - future[i].t;
            x += future[i].b * future[j].a * (-p.gamma() * dt).exp() - mubar_s[i] * mu_s[j];
            y += future[i].b * future[j].a * (-p.gamma() * dt).exp()
                + future[i].a * future[j].b * (-p.gamma_bar() * dt).exp();
        }
    }
    let sb: C64 = mubar_s.iter().sum();
    let sm: C64 = mu_s.iter().sum();
    y -= sb * sm;

    let mut factors = past;
    factors.extend((0..n).map(|j| Factor::new(s, mu_s[j], mubar_s[j])));
    Ok(canonicalize(factors, w.system, w.log_scalar + x + y * p.n0, p))
}

/// `σ_s`: `ξ(t) ↦ ξ(t+s) - e^{-γ̄t}ξ(s)`, `ξ̄(t) ↦ ξ̄(t+s) - e^{-γt}ξ̄(s)`, and `J_s` on the system.
pub fn extended_flow_sigma(w: &WeylWord, s: f64, p: &ProcessParams) -> Result<WeylWord> {
    ensure_time("s", s)?;
    let sys = flow_j(&w.system_element(), s, p)?;
    let mut factors = sys.factors.clone();
    for f in &w.factors {
        let ea = (-p.gamma() * f.t).exp();
        let eb = (-p.gamma_bar() * f.t).exp();
        factors.push(Factor::new(f.t + s, f.a, zero()));
        factors.push(Factor::new(s, -f.a * ea, zero()));
        factors.push(Factor::new(f.t + s, zero(), f.b));
        factors.push(Factor::new(s, zero(), -f.b * eb));
    }
    Ok(canonicalize(factors, sys.system, sys.log_scalar, p))
}

/// `M_t = e^{μe^{γt}ξ̄(t)} e^{μ̄e^{γ̄t}ξ(t)} e^{-n₀μμ̄e^{2κt}}`, a martingale.
pub fn martingale_m(t: f64, mu: C64, mubar: C64, p: &ProcessParams) -> Result<WeylWord> {
    ensure_time("t", t)?;
    let f = Factor::new(t, mu * (p.gamma() * t).exp(), mubar * (p.gamma_bar() * t).exp());
    let log = -mu * mubar * p.n0 * (2.0 * p.kappa * t).exp();
    Ok(canonicalize(vec![f], (zero(), zero()), log, p))
}

/// `J_s[Φ_{t₁-s}(a₁ Φ_{t₂-t₁}(a₂ ⋯ Φ_{t_N-t_{N-1}}(a_N)))]`.
pub fn nested_evaluate(elems: &[(SystemElement, f64)], s: f64, p: &ProcessParams) -> Result<WeylWord> {
    ensure_time("s", s)?;
    let Some(&(last, t_last)) = elems.last() else {
        return flow_j(&SystemElement::identity(), s, p);
    };
    let mut prev = s;
    for &(_, t) in elems {
        ensure_time("t", t)?;
        if !(t > prev) {
            return Err(Error::Domain(format!("nested times must increase strictly from s = {s}, got {t} after {prev}")));
        }
        prev = t;
    }
    let mut inner = last;
    let mut t_next = t_last;
    for &(a, t) in elems.iter().rev().skip(1) {
        inner = a.compose(&phi(&inner, t_next - t, p));
        t_next = t;
    }
    flow_j(&phi(&inner, t_next - s, p), s, p)
}

/// Canonical product `J_{t₁}(a₁) ⋯ J_{t_N}(a_N)`.
pub fn flowed_product(elems: &[(SystemElement, f64)], p: &ProcessParams) -> Result<WeylWord> {
    let mut w = WeylWord::identity();
    for (a, t) in elems {
        w = w.mul(&flow_j(a, *t, p)?, p);
    }
    Ok(w)
}

/// `[σ_s(ξ(t)), ξ̄(t₀)] = G(t+s, t₀) - e^{-γ̄t} G(s, t₀)`; vanishes for `t₀ ≤ s`.
pub fn increment_commutator(t: f64, s: f64, t0: f64, p: &ProcessParams) -> Result<C64> {
    for (n, v) in [("t", t), ("s", s), ("t0", t0)] {
        ensure_time(n, v)?;
    }
    Ok(p.g(t + s, t0) - (-p.gamma_bar() * t).exp() * p.g(s, t0))
}

/// `𝔼[σ_s(ξ̄(t)) ξ(t₀)] = n₀ (G(t₀, t+s) - e^{-γt} G(t₀, s))`; vanishes for `t₀ ≤ s`.
pub fn increment_two_point(t: f64, s: f64, t0: f64, p: &ProcessParams) -> Result<C64> {
    for (n, v) in [("t", t), ("s", s), ("t0", t0)] {
        ensure_time(n, v)?;
    }
    Ok((p.g(t0, t + s) - (-p.gamma() * t).exp() * p.g(t0, s)) * p.n0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ProcessParams {
        ProcessParams::new(0.6, 0.35, 0.4).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_ordered_factor_is_unchanged() {
        let p = params();
        let f = Factor::new(1.2, c(0.3, 0.1), c(-0.2, 0.4));
        let w = canonicalize(vec![f], (zero(), zero()), zero(), &p);
        assert_eq!(w.factors, vec![f]);
        assert_eq!(w.log_scalar, zero());
    }

    #[test]
    fn equal_time_merge_picks_up_commutator() {
        let p = params();
        let (a, b, a2, b2) = (c(0.3, 0.1), c(-0.2, 0.4), c(0.5, -0.3), c(0.1, 0.2));
        let w = canonicalize(vec![Factor::new(0.8, a, b), Factor::new(0.8, a2, b2)], (zero(), zero()), zero(), &p);
        assert_eq!(w.factors.len(), 1);
        assert!((w.factors[0].a - (a + a2)).norm() < 1e-15);
        assert!((w.log_scalar - b * a2 * p.g(0.8, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn reversed_word_recanonicalizes_to_itself() {
        let p = params();
        let f1 = Factor::new(0.5, c(0.3, 0.1), c(-0.2, 0.4));
        let f2 = Factor::new(1.7, c(0.5, -0.3), c(0.1, 0.2));
        let w = canonicalize(vec![f1, f2], (zero(), zero()), zero(), &p);
        let rev = canonicalize(vec![f2, f1], (zero(), zero()), swap_scalar(&f1, &f2, &p), &p);
        assert!(w.approx_eq(&rev, 1e-14), "{w:?} vs {rev:?}");
    }

    #[test]
    fn empty_word_has_unit_expectation() {
        let e = expectation_e(&WeylWord::identity(), &params());
        assert!(e.approx_eq(&SystemElement::identity(), 0.0));
    }

    #[test]
    fn one_point_expectation() {
        let p = params();
        let (mu, mubar, t) = (c(0.4, 0.2), c(-0.3, 0.5), 1.3);
        let e = expectation_e(&canonicalize(vec![Factor::new(t, mu, mubar)], (zero(), zero()), zero(), &p), &p);
        assert!((e.log_scalar - mubar * mu * p.g(t, t) * p.n0).norm() < 1e-15);
    }

    #[test]
    fn flow_at_zero_is_identity() {
        let p = params();
        let e = SystemElement::new(c(0.4, 0.2), c(-0.3, 0.5));
        let w = flow_j(&e, 0.0, &p).unwrap();
        assert!(w.approx_eq(&WeylWord::from_system(&e), 0.0));
        assert!(expectation_e(&w, &p).approx_eq(&e, 0.0));
    }

    #[test]
    fn phi_at_infinity_is_a_scalar() {
        let p = params();
        let e = SystemElement::new(c(0.4, 0.2), c(-0.3, 0.5));
        let v = dynamical_map_phi(&e, 200.0, &p).unwrap();
        assert!(v.mu.norm() < 1e-40 && v.mubar.norm() < 1e-40);
        assert!((v.log_scalar - e.mu * e.mubar * p.n0).norm() < 1e-15);
    }

    #[test]
    fn single_future_factor_conditioning() {
        let p = params();
        let (mu, mubar, t, s) = (c(0.4, 0.2), c(-0.3, 0.5), 2.0, 0.7);
        let w = canonicalize(vec![Factor::new(t, mu, mubar)], (zero(), zero()), zero(), &p);
        let got = conditional_e(&w, s, &p).unwrap();
        let (m, mb) = (mu * (-p.gamma() * (t - s)).exp(), mubar * (-p.gamma_bar() * (t - s)).exp());
        assert_eq!(got.factors.len(), 1);
        assert!((got.factors[0].a - m).norm() < 1e-15 && (got.factors[0].b - mb).norm() < 1e-15);
        assert!((got.log_scalar - p.n0 * (mu * mubar - m * mb)).norm() < 1e-15);
    }

    #[test]
    fn nested_rejects_unordered_times() {
        let p = params();
        let e = SystemElement::identity();
        assert!(nested_evaluate(&[(e, 1.0), (e, 0.5)], 0.0, &p).is_err());
        assert!(nested_evaluate(&[(e, 1.0)], 1.0, &p).is_err());
    }

    #[test]
    fn json_layout() {
        let p = params();
        let w = flow_j(&SystemElement::new(c(0.4, 0.2), c(-0.3, 0.5)), 1.0, &p).unwrap();
        let v: serde_json::Value = serde_json::to_value(&w).unwrap();
        assert_eq!(v["system"].as_array().unwrap().len(), 4);
        assert_eq!(v["factors"][0]["a"].as_array().unwrap().len(), 2);
        let back: WeylWord = serde_json::from_value(v).unwrap();
        assert_eq!(back, w);
    }
}
