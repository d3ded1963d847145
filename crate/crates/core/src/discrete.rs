//! Discrete chain `z_n = λ z_{n-1} + (1-|λ|²)^{1/2} a_n` with a fresh thermal
//! mode `a_n` per step, and the first step at which a projective ground-state
//! check fails.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub lam: C64,
    /// Occupation of each fresh mode.
    pub n0: f64,
    pub nmax: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        let l = self.lam.norm();
        if !(l < 1.0) {
            return Err(Error::Config(format!("|lam| must be below 1, got {l}")));
        }
        if !(self.n0 >= 0.0 && self.n0.is_finite()) {
            return Err(Error::Config(format!("n0 must be finite and nonnegative, got {}", self.n0)));
        }
        if self.nmax == 0 {
            return Err(Error::Config("nmax must be positive".into()));
        }
        Ok(())
    }

    /// `1/(1 + n₀(1-|λ|²))`, the ground-state population after one step from the vacuum.
    pub fn expected_step_survival(&self) -> f64 {
        1.0 / (1.0 + self.n0 * (1.0 - self.lam.norm_sqr()))
    }
}

/// Fock truncation keeping the thermal tail `x^D` below `1e-12`.
pub fn default_truncation(n0: f64) -> usize {
    if n0 == 0.0 {
        return 4;
    }
    let x = n0 / (n0 + 1.0);
    ((1e-12f64.ln() / x.ln()).ceil() as usize + 2).max(8)
}

/// Beam splitter restricted to total-number sectors `0..dim`.
struct BeamSplitter {
    phase: C64,
    /// `blocks[N][(j, k)] = ⟨j, N-j| U |k, N-k⟩`, first label the system.
    blocks: Vec<DMatrix<f64>>,
}

impl BeamSplitter {
    fn new(lam: C64, dim: usize) -> Self {
        let theta = lam.norm().acos();
        let phase = if lam.norm() > 0.0 { lam / lam.norm() } else { C64::new(1.0, 0.0) };
        // Generator θ(z̄a - āz) in the basis |k, N-k⟩.
        let blocks = (0..dim)
            .map(|n| {
                let mut h = DMatrix::zeros(n + 1, n + 1);
                for k in 0..n {
                    let v = theta * (((k + 1) * (n - k)) as f64).sqrt();
                    h[(k + 1, k)] = v;
                    h[(k, k + 1)] = -v;
                }
                h.exp()
            })
            .collect();
        Self { phase, blocks }
    }
}

/// Per-step record of the dense oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRun {
    /// `survival[n]` for `n = 0..=steps`.
    pub survival: Vec<f64>,
    /// Per-step conditional success probabilities.
    pub step_success: Vec<f64>,
    pub leakage: f64,
}

/// Dense simulation: couple the system state to a fresh thermal mode, trace the
/// mode out, project onto `|0⟩`, and multiply the success probabilities.
pub fn survival_oracle_run(spec: &ChainSpec, steps: usize, trunc: usize) -> Result<OracleRun> {
    spec.validate()?;
    if steps > spec.nmax {
        return Err(Error::Domain(format!("steps = {steps} exceeds nmax = {}", spec.nmax)));
    }
    if trunc < 2 {
        return Err(Error::Domain(format!("truncation must be at least 2, got {trunc}")));
    }
    let x = if spec.n0 == 0.0 { 0.0 } else { spec.n0 / (spec.n0 + 1.0) };
    let thermal: Vec<f64> = (0..trunc).map(|m| (1.0 - x) * if m == 0 { 1.0 } else { x.powi(m as i32) }).collect();
    let tail = 1.0 - thermal.iter().sum::<f64>();
    if tail > 1e-10 {
        return Err(Error::Numeric(format!("thermal tail {tail:e} beyond truncation {trunc}; increase it")));
    }
    let bs = BeamSplitter::new(spec.lam, trunc);
    let mut rho = DMatrix::<C64>::zeros(trunc, trunc);
    rho[(0, 0)] = C64::new(1.0, 0.0);
    let mut survival = vec![1.0];
    let mut step_success = Vec::with_capacity(steps);
    let mut leakage: f64 = 0.0;
    for _ in 0..steps {
        let eig = SymmetricEigen::new(rho.clone());
        let mut out = DMatrix::<C64>::zeros(trunc, trunc);
        let mut lost = 0.0;
        for (r, w) in eig.eigenvalues.iter().enumerate() {
            if w.abs() < 1e-300 {
                continue;
            }
            let psi = eig.eigenvectors.column(r);
            for (m, pm) in thermal.iter().enumerate() {
                if *pm == 0.0 {
                    continue;
                }
                // Amplitudes A[j, bath] after the unitary, for input ψ ⊗ |m⟩.
                let mut amp = DMatrix::<C64>::zeros(trunc, trunc);
                for k in 0..trunc {
                    let c = psi[k] * bs.phase.powu(k as u32);
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let n = k + m;
                    if n >= trunc {
                        lost += w * pm * c.norm_sqr();
                        continue;
                    }
                    let block = &bs.blocks[n];
                    for j in 0..=n {
                        amp[(j, n - j)] += c * block[(j, k)];
                    }
                }
                out += (&amp * amp.adjoint()) * C64::new(w * pm, 0.0);
            }
        }
        leakage = leakage.max(lost);
        if lost > 1e-10 {
            return Err(Error::Numeric(format!("two-mode truncation leakage {lost:e}; increase trunc above {trunc}")));
        }
        let success = out[(0, 0)].re;
        step_success.push(success);
        survival.push(survival.last().unwrap() * success);
        rho.fill(C64::new(0.0, 0.0));
        rho[(0, 0)] = C64::new(1.0, 0.0);
    }
    Ok(OracleRun { survival, step_success, leakage })
}

/// Probability that the first `n` ground-state checks all succeed.
pub fn survival_probability_oracle(spec: &ChainSpec, n: usize, trunc: usize) -> Result<f64> {
    Ok(*survival_oracle_run(spec, n, trunc)?.survival.last().unwrap())
}

/// Least-squares `log s_n = n log q` through the origin; returns `q` and the max log residual.
pub fn geometric_fit(survival: &[f64]) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (n, s) in survival.iter().enumerate() {
        num += n as f64 * s.ln();
        den += (n * n) as f64;
    }
    let lq = if den > 0.0 { num / den } else { 0.0 };
    let res = survival.iter().enumerate().map(|(n, s)| (s.ln() - n as f64 * lq).abs()).fold(0.0, f64::max);
    (lq.exp(), res)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitTimeSample {
    pub samples: usize,
    pub nmax: usize,
    /// `histogram[n-1]` counts exits at step `n`.
    pub histogram: Vec<u64>,
    pub censored: u64,
    /// Per-step survival used for the draws.
    pub q_true: f64,
    /// Censored-geometric MLE of the per-step survival.
    pub q_fit: f64,
    pub q_stderr: f64,
    pub mean_exit: f64,
    pub chi2: f64,
    pub dof: usize,
}

impl ExitTimeSample {
    pub fn fitted_pmf(&self, step: usize) -> f64 {
        self.q_fit.powi(step as i32 - 1) * (1.0 - self.q_fit)
    }

    /// `|q̂ - q| ≤ k·SE`
    pub fn agrees_with(&self, q: f64, k: f64) -> bool {
        (self.q_fit - q).abs() <= k * self.q_stderr + 1e-15
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["exit_step", "count", "fitted_geometric_pmf"])?;
        let last = self.histogram.iter().rposition(|&c| c > 0).map_or(0, |i| i + 1);
        for step in 1..=last {
            out.write_record([step.to_string(), self.histogram[step - 1].to_string(), format!("{:e}", self.fitted_pmf(step))])?;
        }
        if self.censored > 0 {
            let tail = self.q_fit.powi(self.nmax as i32);
            out.write_record(["censored".to_string(), self.censored.to_string(), format!("{tail:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

const SHARDS: usize = 64;

/// Samples exit times by per-step Bernoulli draws. The post-projection state is
/// always `|0⟩`, so each step uses the one-step survival from the dense oracle.
/// Shards use independent ChaCha streams, so output depends only on the seed.
pub fn exit_time_montecarlo(spec: &ChainSpec, samples: usize, trunc: usize) -> Result<ExitTimeSample> {
    spec.validate()?;
    if samples < 10_000 {
        return Err(Error::Config(format!("need at least 10^4 samples, got {samples}")));
    }
    let q = survival_oracle_run(spec, 1, trunc)?.step_success[0];
    let nmax = spec.nmax;
    let per = samples / SHARDS;
    let extra = samples % SHARDS;
    let shards: Vec<(Vec<u64>, u64)> = (0..SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(s as u64);
            let mut hist = vec![0u64; nmax];
            let mut cens = 0u64;
            for _ in 0..per + usize::from(s < extra) {
                match (1..=nmax).find(|_| rng.gen::<f64>() >= q) {
                    Some(step) => hist[step - 1] += 1,
                    None => cens += 1,
                }
            }
            (hist, cens)
        })
        .collect();
    let mut histogram = vec![0u64; nmax];
    let mut censored = 0;
    for (h, c) in shards {
        for (a, b) in histogram.iter_mut().zip(h) {
            *a += b;
        }
        censored += c;
    }
    let exits: u64 = histogram.iter().sum();
    let steps: u64 = histogram.iter().enumerate().map(|(i, c)| (i as u64 + 1) * c).sum::<u64>() + censored * nmax as u64;
    let p = exits as f64 / steps as f64;
    let q_fit = 1.0 - p;
    let q_stderr = (p * (1.0 - p) / steps as f64).sqrt();
    let mean_exit = if exits > 0 {
        histogram.iter().enumerate().map(|(i, c)| (i as f64 + 1.0) * *c as f64).sum::<f64>() / exits as f64
    } else {
        f64::INFINITY
    };
    let (chi2, dof) = chi_square(&histogram, censored, q_fit, samples);
    Ok(ExitTimeSample { samples, nmax, histogram, censored, q_true: q, q_fit, q_stderr, mean_exit, chi2, dof })
}

/// Pearson statistic against the fitted geometric law, pooling bins with expected count below 5.
fn chi_square(hist: &[u64], censored: u64, q: f64, samples: usize) -> (f64, usize) {
    let n = samples as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (i, c) in hist.iter().enumerate() {
        obs += *c as f64;
        exp += n * q.powi(i as i32) * (1.0 - q);
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    obs += censored as f64;
    exp += n * q.powi(hist.len() as i32);
    match bins.last_mut() {
        Some(last) if exp < 5.0 => {
            last.0 += obs;
            last.1 += exp;
        }
        _ => bins.push((obs, exp)),
    }
    let chi2 = bins.iter().filter(|b| b.1 > 0.0).map(|(o, e)| (o - e) * (o - e) / e).sum();
    (chi2, bins.len().saturating_sub(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lam: f64, n0: f64) -> ChainSpec {
        ChainSpec { lam: C64::new(lam, 0.0), n0, nmax: 200, seed: 7 }
    }

    #[test]
    fn beam_splitter_blocks_are_orthogonal() {
        let bs = BeamSplitter::new(C64::new(0.3, 0.4), 12);
        for b in &bs.blocks {
            let id = b.transpose() * b;
            assert!((id - DMatrix::identity(b.nrows(), b.nrows())).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_coupling_replaces_the_system() {
        let s = spec(0.0, 0.5);
        let run = survival_oracle_run(&s, 4, default_truncation(0.5)).unwrap();
        for (n, v) in run.survival.iter().enumerate() {
            assert!((v - 1.5f64.powi(-(n as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_bath_never_exits() {
        let s = spec(0.6, 0.0);
        assert_eq!(survival_probability_oracle(&s, 10, 6).unwrap(), 1.0);
        let mc = exit_time_montecarlo(&s, 10_000, 6).unwrap();
        assert_eq!(mc.censored, 10_000);
    }

    #[test]
    fn rejects_unit_coupling() {
        assert!(spec(1.0, 0.5).validate().is_err());
    }
}
