mod common;

use common::{c, rand_c};
use nalgebra::DMatrix;
use proptest::prelude::*;
use qbrown::lindblad::*;
use qbrown::weyl::{nested_evaluate, SystemElement};
use qbrown::{ProcessParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn thermal(dim: usize, n: f64) -> TruncatedOperator {
    let p = ProcessParams::new(1.0, 0.0, n).unwrap();
    invariant_state(dim, &p).unwrap()
}

fn random_state<R: Rng>(rng: &mut R, dim: usize, active: usize) -> TruncatedOperator {
    let a = DMatrix::from_fn(dim, dim, |i, j| if i < active && j < active { rand_c(rng, 1.0) } else { c(0.0, 0.0) });
    let m = &a * a.adjoint();
    let tr = m.trace();
    TruncatedOperator::new(m / tr).unwrap()
}

fn weyl_trace(e: &SystemElement, n_rho: f64) -> C64 {
    (e.log_scalar + e.mu * e.mubar * n_rho).exp()
}

#[test]
fn diagonal_spectrum_at_default_parameters() {
    let p = ProcessParams::new(1.0, 0.3, 0.5).unwrap();
    let rep = spectrum_check(60, &p, 3).unwrap();
    for (order, lam, res, nearest) in &rep.modes {
        assert!(*res < 1e-6, "p = {order}: residual {res:e}");
        assert!(*nearest < 1e-6, "p = {order}: no sector eigenvalue near {lam}");
    }
    assert!(rep.alt_first_mode_residual > 1e-2);
}

#[test]
fn invariant_state_is_stationary_with_mean_n0() {
    for n0 in [0.0, 0.5, 2.0] {
        let p = ProcessParams::new(0.7, -0.4, n0).unwrap();
        let dim = choose_truncation(&p, 0.0);
        let inv = invariant_state(dim, &p).unwrap();
        let l = Superoperator::new(dim, &p).unwrap();
        assert!(l.apply(&inv.matrix).camax() < 1e-13);
        let n = DMatrix::from_fn(dim, dim, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.0, 0.0) });
        assert!((inv.expect(&n).re - n0).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_preservation_and_dissipativity(seed in any::<u64>(), k in 0.1f64..2.0, nu in -1.0f64..1.0, n0 in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ProcessParams::new(k, nu, n0).unwrap();
        let l = Superoperator::new(30, &p).unwrap();
        let rho = random_state(&mut rng, 30, 12);
        let out = l.apply(&rho.matrix);
        prop_assert!(out.trace().norm() < 1e-12);
        prop_assert!((&rho.matrix * &out).trace().re <= 1e-10);
    }

    #[test]
    fn duality(seed in any::<u64>(), t in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ProcessParams::new(0.8, 0.5, 0.4).unwrap();
        let l = Superoperator::new(24, &p).unwrap();
        let rho = random_state(&mut rng, 24, 6);
        let x = DMatrix::from_fn(24, 24, |i, j| if i < 8 && j < 8 { rand_c(&mut rng, 1.0) } else { c(0.0, 0.0) });
        let opts = EvolveOptions::default();
        let lhs = (propagate(&rho.matrix, t, &l, &opts).unwrap() * &x).trace();
        let rhs = (&rho.matrix * propagate_dual(&x, t, &l, &opts).unwrap()).trace();
        prop_assert!((lhs - rhs).norm() < 1e-8);
    }
}

#[test]
fn expm_matches_adaptive_propagation() {
    let p = ProcessParams::new(0.5, 1.0, 0.8).unwrap();
    let l = Superoperator::new(16, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = random_state(&mut rng, 16, 5);
    for t in [0.1, 1.0, 3.0] {
        let a = propagate(&rho.matrix, t, &l, &EvolveOptions::default()).unwrap();
        let b = propagate_expm(&rho.matrix, t, &l).unwrap();
        assert!((a - b).camax() < 1e-9);
    }
}

#[test]
fn coherent_state_moments() {
    let p = ProcessParams::new(0.6, 0.9, 0.5).unwrap();
    let alpha = c(1.3, -0.7);
    let dim = choose_truncation(&p, alpha.norm());
    let (psi, leak) = coherent_state(alpha, dim);
    assert!(leak < 1e-15);
    let rho0 = TruncatedOperator::new(outer(&psi, &psi)).unwrap();
    let a = lowering(dim);
    let n = raising(dim) * &a;
    for t in [0.0, 0.5, 1.5] {
        let rho = evolve(&rho0, t, &p, &EvolveOptions::default()).unwrap();
        rho.check_density(1e-10, -1e-10).unwrap();
        assert!((rho.expect(&a) - alpha * (-p.gamma_bar() * t).exp()).norm() < 1e-7);
        let decay = (-2.0 * p.kappa * t).exp();
        let mean = alpha.norm_sqr() * decay + p.n0 * (1.0 - decay);
        assert!((rho.expect(&n).re - mean).abs() < 1e-7);
    }
}

#[test]
fn leakage_is_reported() {
    let p = ProcessParams::new(1.0, 0.0, 3.0).unwrap();
    let rho0 = thermal(12, 0.0);
    let err = evolve(&rho0, 5.0, &p, &EvolveOptions::default()).unwrap_err();
    assert!(err.to_string().contains("leakage"));
}

#[test]
fn weyl_correlators_match_the_closed_form() {
    let p = ProcessParams::new(0.7, 0.6, 0.5).unwrap();
    let dim = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = EvolveOptions::default();
    for n_rho in [0.0, 0.3] {
        let rho0 = thermal(dim, n_rho);
        for len in 1..=3 {
            for _ in 0..4 {
                let mut t = 0.0;
                let elems: Vec<(SystemElement, f64)> = (0..len)
                    .map(|_| {
                        t += rng.gen_range(0.1..0.8);
                        (SystemElement::new(rand_c(&mut rng, 0.5), rand_c(&mut rng, 0.5)), t)
                    })
                    .collect();
                let lind = regression_correlator_weyl(&elems, &rho0, &p, &opts).unwrap();
                let w = nested_evaluate(&elems, 0.0, &p).unwrap();
                let closed = weyl_trace(&w.system_element(), n_rho);
                assert!((lind - closed).norm() < 1e-6, "n_rho = {n_rho}, len = {len}: {lind} vs {closed}");
            }
        }
    }
}

#[test]
fn bilinear_correlator() {
    let p = ProcessParams::new(0.9, 0.4, 0.5).unwrap();
    let dim = 40;
    let n_rho = 0.2;
    let rho0 = thermal(dim, n_rho);
    let (t1, t2) = (0.6, 1.4);
    let ops = vec![(raising(dim), t1), (lowering(dim), t2)];
    let v = regression_correlator(&ops, &rho0, &p, &EvolveOptions::default()).unwrap();
    let d = (-2.0 * p.kappa * t1).exp();
    let expect = (-p.gamma_bar() * (t2 - t1)).exp() * (n_rho * d + p.n0 * (1.0 - d));
    assert!((v - expect).norm() < 1e-8, "{v} vs {expect}");
}

fn cat() -> CatStateSpec {
    CatStateSpec { alpha: c(1.5, 0.3), beta: c(-1.0, 0.5), u: c(1.0, 0.0), v: c(0.6, 0.2) }.normalized()
}

#[test]
fn cat_blocks_match_propagation() {
    let p = ProcessParams::new(1.0, 0.8, 0.5).unwrap();
    let spec = cat();
    let dim = choose_truncation(&p, spec.alpha.norm().max(spec.beta.norm()));
    let l = Superoperator::new(dim, &p).unwrap();
    let (va, _) = coherent_state(spec.alpha, dim);
    let (vb, _) = coherent_state(spec.beta, dim);
    let probes = [(c(0.0, 0.0), c(0.0, 0.0)), (c(0.5, -0.2), c(1.0, 0.3)), (c(-0.8, 0.4), c(0.2, 0.9))];
    for t in [0.25, 0.5, 1.0] {
        let ev = cat_evolution_closed_form(&spec, t, &p).unwrap();
        let mut blocks = Vec::new();
        for block in CatBlock::ALL {
            let (x, y) = match block {
                CatBlock::AlphaAlpha => (&va, &va),
                CatBlock::AlphaBeta => (&va, &vb),
                CatBlock::BetaAlpha => (&vb, &va),
                CatBlock::BetaBeta => (&vb, &vb),
            };
            let m = propagate(&outer(x, y), t, &l, &EvolveOptions::default()).unwrap();
            for (b, cc) in probes {
                let num = coherent_element(&m, b, cc);
                let closed = ev.element(block, b, cc);
                assert!((num - closed).norm() < 1e-5, "t = {t}, {block:?}: {num} vs {closed}");
            }
            blocks.push(m);
        }
        let (b, cc) = probes[1];
        let e = |i: usize| coherent_element(&blocks[i], b, cc);
        let ratio = e(2) * e(1) / (e(0) * e(3));
        let closed = decoherence_ratio(&spec, t, &p).unwrap();
        assert!((ratio.re - closed).abs() < 1e-5 && ratio.im.abs() < 1e-5);
    }
}

#[test]
fn ratio_is_probe_independent() {
    let p = ProcessParams::new(0.5, -0.3, 1.2).unwrap();
    let spec = cat();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in [0.1, 0.7, 2.0] {
        let ev = cat_evolution_closed_form(&spec, t, &p).unwrap();
        let exact = decoherence_ratio(&spec, t, &p).unwrap();
        for _ in 0..20 {
            let r = ev.ratio_at(rand_c(&mut rng, 2.0), rand_c(&mut rng, 2.0));
            assert!((r - exact).norm() < 1e-8 * exact);
        }
    }
}

#[test]
fn short_time_slope_and_timescales() {
    for n0 in [0.0, 0.5, 2.0] {
        let p = ProcessParams::new(0.8, 0.2, n0).unwrap();
        let spec = cat();
        let h = 1e-6;
        let slope = decoherence_ratio(&spec, h, &p).unwrap().ln() / h;
        let d2 = (spec.alpha - spec.beta).norm_sqr();
        let expect = -2.0 * (n0 + 1.0) * p.kappa * d2;
        assert!((slope / expect - 1.0).abs() < 1e-2);
        let (coher, therm) = decoherence_timescales(&spec, &p);
        assert!((coher * -expect / 2.0 - 1.0).abs() < 1e-14 && therm == 1.0 / p.kappa);
    }
}

#[test]
fn even_cat_thermalizes() {
    let p = ProcessParams::new(1.0, 0.5, 0.5).unwrap();
    let spec = CatStateSpec { alpha: c(1.2, 0.0), beta: c(-1.2, 0.0), u: c(1.0, 0.0), v: c(1.0, 0.0) }.normalized();
    let dim = choose_truncation(&p, 1.2);
    let (rho0, _) = spec.density(dim);
    let rho = evolve(&rho0, 8.0 / p.kappa, &p, &EvolveOptions::default()).unwrap();
    let inv = invariant_state(dim, &p).unwrap();
    assert!(rho.trace_distance(&inv) < 1e-6);
}
