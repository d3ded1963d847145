use qbrown::discrete::*;
use qbrown::C64;

fn spec(lam: C64, n0: f64) -> ChainSpec {
    ChainSpec { lam, n0, nmax: 1000, seed: 42 }
}

#[test]
fn renewal_property() {
    let s = spec(C64::new(0.36, 0.48), 0.5);
    let run = survival_oracle_run(&s, 12, default_truncation(0.5)).unwrap();
    for n in 0..=6 {
        for m in 0..=6 {
            let lhs = run.survival[n + m];
            assert!((lhs - run.survival[n] * run.survival[m]).abs() < 1e-10);
        }
    }
    let (q, res) = geometric_fit(&run.survival);
    assert!(res < 1e-8);
    assert!((q - run.step_success[0]).abs() < 1e-12);
}

#[test]
fn oracle_confirms_the_single_step_formula() {
    for lam in [0.0, 0.3, 0.6, 0.9] {
        for n0 in [0.1, 0.5, 2.0] {
            let s = spec(C64::from_polar(lam, 0.7), n0);
            let q = survival_probability_oracle(&s, 1, default_truncation(n0)).unwrap();
            assert!((q - s.expected_step_survival()).abs() < 1e-10, "lam = {lam}, n0 = {n0}");
        }
    }
}

#[test]
fn survival_is_monotone_in_n0_and_lam() {
    let lams = [0.0, 0.2, 0.4, 0.6, 0.8];
    let n0s = [0.1, 0.4, 0.8, 1.5, 3.0];
    let q = |l: f64, n: f64| survival_probability_oracle(&spec(C64::new(l, 0.0), n), 1, default_truncation(n)).unwrap();
    for &l in &lams {
        for w in n0s.windows(2) {
            assert!(q(l, w[1]) < q(l, w[0]));
        }
    }
    for &n in &n0s {
        for w in lams.windows(2) {
            assert!(q(w[1], n) > q(w[0], n));
        }
    }
}

#[test]
fn montecarlo_agrees_with_the_oracle() {
    let s = spec(C64::new(0.6, 0.0), 0.5);
    let trunc = default_truncation(0.5);
    let q = survival_probability_oracle(&s, 1, trunc).unwrap();
    let mc = exit_time_montecarlo(&s, 100_000, trunc).unwrap();
    assert!(mc.agrees_with(q, 3.0), "{} vs {q} (se {})", mc.q_fit, mc.q_stderr);
    let mean = 1.0 / (1.0 - q);
    let se_mean = q.sqrt() / (1.0 - q) / (mc.samples as f64).sqrt();
    assert!((mc.mean_exit - mean).abs() < 4.0 * se_mean);
    assert_eq!(mc.censored, 0);
    assert!(mc.dof > 0 && mc.chi2 < 3.0 * mc.dof as f64 + 20.0);
}

#[test]
fn montecarlo_is_reproducible_across_thread_counts() {
    let s = spec(C64::new(0.3, 0.1), 1.0);
    let trunc = default_truncation(1.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| exit_time_montecarlo(&s, 20_000, trunc).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.histogram, b.histogram);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    let other = exit_time_montecarlo(&ChainSpec { seed: 43, ..s }, 20_000, trunc).unwrap();
    assert_ne!(a.histogram, other.histogram);
}

#[test]
fn too_few_samples_is_a_config_error() {
    assert!(exit_time_montecarlo(&spec(C64::new(0.5, 0.0), 0.5), 100, 30).is_err());
}
