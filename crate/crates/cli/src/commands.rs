use qbrown::discrete::{self, ChainSpec};
use qbrown::finite_bath::{self as fb, LimitDeviation, ThermalRule};
use qbrown::kernel;
use qbrown::lindblad::{self as lb, CatBlock, CatStateSpec, EvolveOptions, Superoperator};
use qbrown::weyl::{self, canonicalize, Factor, WeylWord};
use qbrown::{ProcessParams, QuadConfig, SpectralDensity, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{increasing, steps, RunConfig};
use crate::CliError;

pub struct Output {
    pub csv: Vec<u8>,
    pub summary: serde_json::Value,
    /// Invariant violations, collected only under `--check`.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(qbrown::Error::from)?;
        Ok(Self { w })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), CliError> {
        self.w.write_record(fields).map_err(qbrown::Error::from)?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>, CliError> {
        self.w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Shortest round-trip form, scientific at extreme exponents.
fn f(x: f64) -> String {
    format!("{x:?}")
}

struct Gate {
    on: bool,
    failures: Vec<String>,
}

impl Gate {
    fn new(on: bool) -> Self {
        Self { on, failures: Vec::new() }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if self.on && !ok {
            self.failures.push(msg());
        }
    }
}

fn default_process(kappa: f64, nu: f64, n0: f64) -> ProcessParams {
    ProcessParams { kappa, nu, n0 }
}

pub fn kernel(cfg: &RunConfig, check: bool) -> Result<Output, CliError> {
    let p = cfg.process_or(default_process(1.0, 0.5, 0.5))?;
    let times = increasing("times", &cfg.grid.times, &steps(0.0, 3.0, 6))?;
    if times[0] < 0.0 {
        return Err(CliError::Config("times must be nonnegative".into()));
    }
    let mut table = Table::new(&["t", "s", "g_re", "g_im", "two_point_re", "two_point_im", "tbrownian", "classical_re", "classical_im"])?;
    let (mut min_form, mut herm, mut comm): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &t in &times {
        for &s in &times {
            let g = kernel::kernel_g(t, s, &p)?;
            let tp = kernel::two_point(t, s, &p)?;
            let tb = kernel::limit_kernel_tbrownian(t, s)?;
            let cl = kernel::limit_kernel_classical(t, s, p.kappa * p.n0, p.nu)?;
            table.row(vec![f(t), f(s), f(g.re), f(g.im), f(tp.re), f(tp.im), f(tb), f(cl.re), f(cl.im)])?;
            let m = kernel::kernel_g_min_form(t, s, &p)?;
            if g.norm() > 0.0 {
                min_form = min_form.max((g - m).norm() / g.norm());
            }
            herm = herm.max((kernel::kernel_g(s, t, &p)? - g.conj()).norm());
            if t >= s {
                comm = comm.max((kernel::full_commutator_zz(t, s, &p)? - (-p.gamma_bar() * (t - s)).exp()).norm());
            }
        }
    }
    let mut gate = Gate::new(check);
    gate.require(min_form < 1e-13, || format!("piecewise and min-form kernels differ by {min_form:e}"));
    gate.require(herm < 1e-13, || format!("hermiticity violated by {herm:e}"));
    gate.require(comm < 1e-13, || format!("commutator identity violated by {comm:e}"));
    Ok(Output {
        csv: table.finish()?,
        summary: json!({"command": "kernel", "rows": times.len() * times.len(), "min_form_dev": min_form, "hermiticity_dev": herm, "commutator_dev": comm}),
        failures: gate.failures,
        warnings: Vec::new(),
    })
}

pub fn bath_converge(cfg: &RunConfig, check: bool) -> Result<Output, CliError> {
    let r = cfg.density.clone().unwrap_or(SpectralDensity::Window { level: 0.3, lo: 0.4, hi: 1.8 });
    let eps = cfg.eps.unwrap_or(1.0);
    let thermal = cfg.thermal.unwrap_or(ThermalRule::Bose { temperature: 0.8 });
    let schedule = cfg.schedule.unwrap_or_default();
    let lambdas = cfg.grid.lambdas.clone().unwrap_or_else(|| vec![0.3, 0.2, 0.1]);
    if lambdas.len() < 2 {
        return Err(CliError::Config(format!("bath-converge needs at least two couplings, got {}", lambdas.len())));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(CliError::Config("couplings must be positive".into()));
    }
    let times = increasing("times", &cfg.grid.times, &steps(0.0, 3.0, 12))?;
    let quad = QuadConfig::default();
    let runs: Vec<LimitDeviation> = lambdas
        .par_iter()
        .map(|&l| fb::markov_limit_deviation(&r, eps, l, schedule, thermal, &times, &quad))
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[b].lambda.total_cmp(&runs[a].lambda));
    let monotone = order.windows(2).all(|w| runs[w[1]].drift < runs[w[0]].drift && runs[w[1]].kernel < runs[w[0]].kernel);

    let mut table = Table::new(&["lambda", "t", "s", "re_dev", "im_dev"])?;
    for run in &runs {
        for row in &run.rows {
            table.row(vec![f(row.lambda), f(row.t), f(row.s), f(row.re_dev), f(row.im_dev)])?;
        }
    }
    let convergence: Vec<_> = runs
        .iter()
        .map(|run| {
            json!({
                "lambda": run.lambda,
                "eta": run.eta,
                "size": run.size,
                "drift": run.drift,
                "kernel": run.kernel,
                "thermal": run.thermal,
                "unitarity": run.unitarity,
                "sum_rules": run.sum_rules.max(),
            })
        })
        .collect();

    let mut gate = Gate::new(check);
    gate.require(monotone, || "deviations do not decrease with the coupling".into());
    for run in &runs {
        gate.require(run.sum_rules.max() < 1e-8, || format!("sum rules at lambda = {} off by {:e}", run.lambda, run.sum_rules.max()));
        gate.require(run.unitarity < 1e-10, || format!("unitarity at lambda = {} off by {:e}", run.lambda, run.unitarity));
    }
    let gamma_bar = runs[0].gamma_bar;
    Ok(Output {
        csv: table.finish()?,
        summary: json!({
            "command": "bath-converge",
            "kappa": gamma_bar.re,
            "nu": gamma_bar.im,
            "n0": runs[0].n0,
            "monotone": monotone,
            "convergence": convergence,
        }),
        failures: gate.failures,
        warnings: Vec::new(),
    })
}

fn default_cat() -> CatStateSpec {
    CatStateSpec { alpha: C64::new(1.5, 0.3), beta: C64::new(-1.0, 0.5), u: C64::new(1.0, 0.0), v: C64::new(0.6, 0.2) }
}

fn cat_from(cfg: &RunConfig) -> Result<CatStateSpec, CliError> {
    let spec = cfg.cat.unwrap_or_else(default_cat);
    if !(spec.norm() > 0.0) {
        return Err(CliError::Config("cat state has zero norm".into()));
    }
    Ok(spec.normalized())
}

fn truncation(cfg: &RunConfig, p: &ProcessParams, amplitude: f64, warnings: &mut Vec<String>) -> usize {
    let recommended = lb::choose_truncation(p, amplitude);
    match cfg.grid.dim {
        Some(n) => {
            if n < recommended {
                warnings.push(format!("truncation N = {n} is below the recommended {recommended}; expect leakage"));
            }
            n
        }
        None => recommended,
    }
}

/// Least-squares slope through the origin of `ln 𝔑` on a short time grid.
fn fitted_slope(spec: &CatStateSpec, p: &ProcessParams) -> Result<f64, CliError> {
    let (tau, _) = lb::decoherence_timescales(spec, p);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=5 {
        let t = k as f64 * 1e-4 * tau;
        num += t * lb::decoherence_ratio(spec, t, p)?.ln();
        den += t * t;
    }
    Ok(num / den)
}

pub fn lindblad(cfg: &RunConfig, check: bool) -> Result<Output, CliError> {
    let p = cfg.process_or(default_process(1.0, 0.3, 0.5))?;
    let cat = cat_from(cfg)?;
    let distances = increasing("distances", &cfg.grid.distances, &[1.0, 2.0, 4.0])?;
    if distances[0] <= 0.0 {
        return Err(CliError::Config("cat distances must be positive".into()));
    }
    let amp = cat.alpha.norm().max(cat.beta.norm()).max(distances.last().unwrap() / 2.0);
    let mut warnings = Vec::new();
    let dim = truncation(cfg, &p, amp, &mut warnings);
    let times = increasing("times", &cfg.grid.times, &steps(0.0, 8.0 / p.kappa, 16))?;
    if times[0] < 0.0 {
        return Err(CliError::Config("times must be nonnegative".into()));
    }
    let mut gate = Gate::new(check);
    let mut table = Table::new(&["section", "key", "t", "re", "im"])?;

    let mut max_residual = None;
    if p.n0 > 0.0 && dim >= 6 {
        let rep = lb::spectrum_check(dim, &p, 3)?;
        for (order, lam, res, nearest) in &rep.modes {
            table.row(vec!["spectrum".into(), format!("p={order}"), f(*lam), f(*res), f(*nearest)])?;
        }
        gate.require(rep.max_residual() < 1e-6, || format!("eigenmode residual {:e}", rep.max_residual()));
        max_residual = Some(rep.max_residual());
    } else {
        warnings.push("spectrum check skipped: needs n0 > 0 and N >= 6".into());
    }

    let inv = lb::invariant_state(dim, &p)?;
    let (mut rho, leak) = cat.density(dim);
    if leak > 1e-12 {
        warnings.push(format!("initial state loses {leak:e} of its norm to truncation"));
    }
    let a = lb::lowering(dim);
    let z0 = rho.expect(&a);
    let opts = EvolveOptions::default();
    let mut prev = 0.0;
    let l = Superoperator::new(dim, &p)?;
    let mut tr_dev: f64 = 0.0;
    for &t in &times {
        rho = lb::evolve(&rho, t - prev, &p, &opts)?;
        prev = t;
        let z = rho.expect(&a);
        let exact = z0 * (-p.gamma_bar() * t).exp();
        table.row(vec!["relaxation".into(), "trace_distance".into(), f(t), f(rho.trace_distance(&inv)), "0".into()])?;
        table.row(vec!["relaxation".into(), "mean_z".into(), f(t), f(z.re), f(z.im)])?;
        table.row(vec!["relaxation".into(), "mean_z_exact".into(), f(t), f(exact.re), f(exact.im)])?;
        tr_dev = tr_dev.max(l.apply(&rho.matrix).trace().norm());
    }
    gate.require(tr_dev < 1e-12, || format!("trace not preserved: {tr_dev:e}"));

    let mut slopes = Vec::new();
    for &d in &distances {
        let spec = CatStateSpec { alpha: C64::new(d / 2.0, 0.0), beta: C64::new(-d / 2.0, 0.0), u: C64::new(1.0, 0.0), v: C64::new(1.0, 0.0) }
            .normalized();
        let (tau, _) = lb::decoherence_timescales(&spec, &p);
        for k in 0..=10 {
            let t = 0.05 * tau * k as f64;
            let ratio = lb::decoherence_ratio(&spec, t, &p)?;
            if k == 0 {
                gate.require(ratio == 1.0, || format!("ratio at t = 0 is {ratio}"));
            }
            table.row(vec!["decoherence".into(), format!("ratio|d={d}"), f(t), f(ratio), "0".into()])?;
        }
        let fit = fitted_slope(&spec, &p)?;
        let pred = -2.0 * (p.n0 + 1.0) * p.kappa * d * d;
        gate.require((fit / pred - 1.0).abs() < 1e-2, || format!("slope at d = {d}: fit {fit} vs {pred}"));
        table.row(vec!["slope".into(), format!("d={d}"), "0".into(), f(fit), f(pred)])?;
        slopes.push(fit);
    }
    for (d, s) in distances.iter().zip(&slopes) {
        table.row(vec!["slope_ratio".into(), format!("d={d}"), "0".into(), f(s / slopes[0]), f((d / distances[0]).powi(2))])?;
    }
    Ok(Output {
        csv: table.finish()?,
        summary: json!({"command": "lindblad", "dim": dim, "max_eigen_residual": max_residual, "slopes": slopes, "final_trace_distance": rho.trace_distance(&inv)}),
        failures: gate.failures,
        warnings,
    })
}

fn seeded_word(seed: u64, p: &ProcessParams) -> WeylWord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = |rng: &mut ChaCha8Rng| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    let factors = (0..3)
        .map(|_| {
            let t = rng.gen_range(0.1..3.0);
            Factor::new(t, c(&mut rng), c(&mut rng))
        })
        .collect();
    let sys = (c(&mut rng), c(&mut rng));
    canonicalize(factors, sys, C64::new(0.0, 0.0), p)
}

pub fn conditional(cfg: &RunConfig, seed: u64, check: bool) -> Result<Output, CliError> {
    let p = cfg.process_or(default_process(0.7, 0.4, 0.5))?;
    let word = match &cfg.word {
        Some(w) => {
            if w.factors.iter().any(|f| !(f.t >= 0.0 && f.t.is_finite())) {
                return Err(CliError::Config("word factor times must be finite and nonnegative".into()));
            }
            canonicalize(w.factors.clone(), w.system, w.log_scalar, &p)
        }
        None => seeded_word(seed, &p),
    };
    let s_times = increasing("s_times", &cfg.grid.s_times, &[0.0, 0.5, 1.0, 2.0, 3.0])?;
    if s_times[0] < 0.0 {
        return Err(CliError::Config("conditioning times must be nonnegative".into()));
    }
    let mut table = Table::new(&["s", "kind", "index", "t", "a_re", "a_im", "b_re", "b_im"])?;
    let mut conditioned = Vec::new();
    for &s in &s_times {
        let c = weyl::conditional_e(&word, s, &p)?;
        let l = c.log_scalar;
        table.row(vec![f(s), "scalar".into(), "0".into(), String::new(), f(l.re), f(l.im), "0".into(), "0".into()])?;
        let (mu, mubar) = c.system;
        table.row(vec![f(s), "system".into(), "0".into(), String::new(), f(mu.re), f(mu.im), f(mubar.re), f(mubar.im)])?;
        for (i, fac) in c.factors.iter().enumerate() {
            table.row(vec![f(s), "factor".into(), i.to_string(), f(fac.t), f(fac.a.re), f(fac.a.im), f(fac.b.re), f(fac.b.im)])?;
        }
        conditioned.push(c);
    }
    let mut gate = Gate::new(check);
    if check {
        let mut tower: f64 = 0.0;
        for (i, &s) in s_times.iter().enumerate() {
            for &t in &s_times[..=i] {
                let twice = weyl::conditional_e(&conditioned[i], t, &p)?;
                tower = tower.max(twice.distance(&weyl::conditional_e(&word, t, &p)?));
            }
            if s >= word.max_time() {
                gate.require(conditioned[i].distance(&word) < 1e-12, || format!("conditioning at s = {s} moved a past word"));
            }
        }
        gate.require(tower < 1e-12, || format!("tower property violated by {tower:e}"));
        let e0 = weyl::conditional_e(&word, 0.0, &p)?;
        let e = WeylWord::from_system(&weyl::expectation_e(&word, &p));
        gate.require(e0.distance(&e) < 1e-12, || format!("conditioning at 0 differs from the expectation by {:e}", e0.distance(&e)));
    }
    let e = weyl::expectation_e(&word, &p);
    Ok(Output {
        csv: table.finish()?,
        summary: json!({"command": "conditional", "factors": word.factors.len(), "expectation_log": [e.log_scalar.re, e.log_scalar.im]}),
        failures: gate.failures,
        warnings: Vec::new(),
    })
}

fn block_ratio(spec: &CatStateSpec, t: f64, l: &Superoperator, probe: (C64, C64)) -> Result<C64, CliError> {
    let dim = l.dim;
    let (va, _) = lb::coherent_state(spec.alpha, dim);
    let (vb, _) = lb::coherent_state(spec.beta, dim);
    let opts = EvolveOptions::default();
    let mut e = [C64::new(0.0, 0.0); 4];
    for (i, block) in CatBlock::ALL.iter().enumerate() {
        let (x, y) = match block {
            CatBlock::AlphaAlpha => (&va, &va),
            CatBlock::AlphaBeta => (&va, &vb),
            CatBlock::BetaAlpha => (&vb, &va),
            CatBlock::BetaBeta => (&vb, &vb),
        };
        let m = lb::propagate(&lb::outer(x, y), t, l, &opts)?;
        e[i] = lb::coherent_element(&m, probe.0, probe.1);
    }
    Ok(e[2] * e[1] / (e[0] * e[3]))
}

pub fn decoherence(cfg: &RunConfig, seed: u64, check: bool) -> Result<Output, CliError> {
    let p = cfg.process_or(default_process(1.0, 0.8, 0.5))?;
    let cat = cat_from(cfg)?;
    if cat.alpha == cat.beta {
        return Err(qbrown::Error::DegenerateInput("decoherence needs alpha != beta".into()).into());
    }
    let times = increasing("times", &cfg.grid.times, &steps(0.0, 1.0 / p.kappa, 10))?;
    if times[0] < 0.0 {
        return Err(CliError::Config("times must be nonnegative".into()));
    }
    let probe = cfg.probe.unwrap_or((C64::new(0.3, 0.0), C64::new(0.0, 0.2)));
    let mut warnings = Vec::new();
    let dim = truncation(cfg, &p, cat.alpha.norm().max(cat.beta.norm()), &mut warnings);
    let l = Superoperator::new(dim, &p)?;
    let rows: Vec<(f64, f64, C64)> = times
        .par_iter()
        .map(|&t| Ok((t, lb::decoherence_ratio(&cat, t, &p)?, block_ratio(&cat, t, &l, probe)?)))
        .collect::<Result<_, CliError>>()?;
    // `ratio` is read off the propagated blocks; `lindblad_check` is its distance to the closed form.
    let mut table = Table::new(&["t", "ratio", "ratio_im", "closed_form", "lindblad_check", "log_closed_form"])?;
    let mut gate = Gate::new(check);
    for &(t, r, prop) in &rows {
        let dev = (prop - r).norm();
        table.row(vec![f(t), f(prop.re), f(prop.im), f(r), f(dev), f(r.ln())])?;
        if t <= 1.0 / p.kappa {
            gate.require(dev < 1e-5, || format!("propagated ratio at t = {t} off by {dev:e}"));
        }
    }
    let fit = fitted_slope(&cat, &p)?;
    let d2 = (cat.alpha - cat.beta).norm_sqr();
    let pred = -2.0 * (p.n0 + 1.0) * p.kappa * d2;
    gate.require((fit / pred - 1.0).abs() < 1e-2, || format!("short-time slope {fit} vs {pred}"));
    if check {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for &t in &times {
            let ev = lb::cat_evolution_closed_form(&cat, t, &p)?;
            let exact = lb::decoherence_ratio(&cat, t, &p)?;
            for _ in 0..8 {
                let b = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let c = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                worst = worst.max((ev.ratio_at(b, c) - exact).norm() / exact);
            }
        }
        gate.require(worst < 1e-8, || format!("ratio depends on the probe: {worst:e}"));
    }
    let (coher, therm) = lb::decoherence_timescales(&cat, &p);
    Ok(Output {
        csv: table.finish()?,
        summary: json!({"command": "decoherence", "dim": dim, "tau_coher": coher, "tau_therm": therm, "slope_fit": fit, "slope_predicted": pred}),
        failures: gate.failures,
        warnings,
    })
}

pub fn discrete(cfg: &RunConfig, seed: u64, check: bool) -> Result<Output, CliError> {
    let chain = ChainSpec { seed, ..cfg.chain.unwrap_or(ChainSpec { lam: C64::new(0.6, 0.0), n0: 0.5, nmax: 1000, seed }) };
    chain.validate()?;
    let samples = cfg.samples.unwrap_or(100_000);
    let trunc = cfg.trunc.unwrap_or_else(|| discrete::default_truncation(chain.n0));
    let mc = discrete::exit_time_montecarlo(&chain, samples, trunc)?;
    let mut warnings = Vec::new();
    if mc.censored == samples as u64 {
        warnings.push(format!("every sample was censored at nmax = {}; the chain never leaves the ground state", chain.nmax));
    }
    let q = mc.q_true;
    let agree = mc.agrees_with(q, 3.0);
    let mut gate = Gate::new(check);
    gate.require(agree, || format!("fitted q = {} is more than 3 standard errors from {q}", mc.q_fit));
    if check {
        let steps = chain.nmax.min(10);
        let run = discrete::survival_oracle_run(&chain, steps, trunc)?;
        let mut dev: f64 = 0.0;
        for n in 0..=steps {
            for m in 0..=steps - n {
                dev = dev.max((run.survival[n + m] - run.survival[n] * run.survival[m]).abs());
            }
        }
        gate.require(dev < 1e-10, || format!("oracle survival is not geometric: {dev:e}"));
    }
    let mut csv = Vec::new();
    mc.write_csv(&mut csv)?;
    Ok(Output {
        csv,
        summary: json!({
            "command": "discrete",
            "samples": samples,
            "q_fit": mc.q_fit,
            "q_stderr": mc.q_stderr,
            "q_oracle": q,
            "agree": agree,
            "mean_exit": if mc.mean_exit.is_finite() { Some(mc.mean_exit) } else { None },
            "mean_exit_expected": 1.0 / (1.0 - q),
            "chi2": mc.chi2,
            "dof": mc.dof,
            "censored": mc.censored,
        }),
        failures: gate.failures,
        warnings,
    })
}
