use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hfgi::engine::reversibility_defect;
use hfgi::hmc::{run_chain, HmcConfig};
use hfgi::model::{fg_consistency, HmcModel, Model};
use hfgi::models::schwinger::{Schwinger, SchwingerParams};
use hfgi::models::solar::default_initial_data;
use hfgi::models::toy::{AnharmonicChain, Quartic};
use hfgi::scheme::{validate_order_conditions, Stage};
use hfgi::stats::linear_fit;
use hfgi::{build_scheme, catalog, integrate, lookup, PhasePoint, Scheme, StepMode};

#[test]
fn asymmetric_scheme_loses_reversibility_at_second_order() {
    let s = Scheme::from_stages_unchecked(
        "BAB*",
        vec![Stage::Kick { b: 0.6 }, Stage::Drift { a: 1.0 }, Stage::Kick { b: 0.4 }],
    );
    let x0 = PhasePoint::new(vec![0.8], vec![0.3]).unwrap();
    let hs = [0.2, 0.1, 0.05, 0.025];
    let d: Vec<f64> = hs
        .iter()
        .map(|&h| reversibility_defect(&s, &Quartic, &x0, h, StepMode::HessianFree).unwrap())
        .collect();
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    let slope = linear_fit(&x, &y).unwrap().slope;
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    let sym = reversibility_defect(lookup("BAB").unwrap(), &Quartic, &x0, 0.2, StepMode::HessianFree).unwrap();
    assert!(sym < 1e-15);
}

#[test]
fn tampered_badab_fails_order_conditions() {
    let good = build_scheme("BADAB", &[0.5], &[1.0 / 6.0, 2.0 / 3.0], &[1.0 / 72.0]).unwrap();
    assert_eq!(validate_order_conditions(&good.with_order(4)).pass, Some(true));
    let bad = build_scheme("BADAB", &[0.5], &[1.0 / 6.0, 2.0 / 3.0], &[0.02]).unwrap();
    assert_eq!(validate_order_conditions(&bad.with_order(4)).pass, Some(false));
}

#[test]
fn finite_difference_fg_matches_analytic() {
    let (solar, x0) = default_initial_data();
    let chain = AnharmonicChain::new(vec![1.0, 0.5, 2.0]).unwrap();
    let xc = PhasePoint::new(vec![0.4, -0.9, 1.3], vec![0.2, 0.0, -0.5]).unwrap();
    for s in catalog().iter().filter(|s| s.is_gradient()) {
        let a = integrate(s, &solar, &x0, 50.0, 20, StepMode::ExactFg).unwrap().0;
        let b = integrate(s, &solar, &x0, 50.0, 20, StepMode::ExactFgFd).unwrap().0;
        assert!(a.max_distance(&b) < 1e-6 * a.max_norm(), "{} solar", s.name);
        let a = integrate(s, &chain, &xc, 0.05, 20, StepMode::ExactFg).unwrap().0;
        let b = integrate(s, &chain, &xc, 0.05, 20, StepMode::ExactFgFd).unwrap().0;
        assert!(a.max_distance(&b) < 1e-6 * a.max_norm(), "{} chain", s.name);
    }
    let rel = fg_consistency(&solar, &[x0.q.clone()]).unwrap().expect("solar model has an fg term");
    assert!(rel < 1e-5, "{rel}");
}

fn schwinger4() -> Schwinger {
    Schwinger::new(SchwingerParams {
        l: 4,
        t: 4,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn schwinger_trajectories_are_reversible() {
    let mut m = schwinger4();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    m.refresh(&q, &mut rng).unwrap();
    let x0 = PhasePoint {
        p: m.metric().sample_momentum(&mut rng),
        q,
    };
    for name in ["BAB", "BADAB", "ABADABA", "BADADADAB"] {
        let d = hfgi::engine::reversibility_defect_n(lookup(name).unwrap(), &m, &x0, 0.1, 10, StepMode::HessianFree).unwrap();
        assert!(d < 1e-8, "{name}: {d}");
    }
}

#[test]
fn hmc_chains_are_bit_reproducible() {
    let cfg = HmcConfig {
        tau: 1.0,
        n_steps: 5,
        mode: StepMode::HessianFree,
        n_traj: 30,
        n_therm: Some(0),
        seed: 123,
    };
    let run = || {
        let mut m = schwinger4();
        let q0 = vec![0.0; m.dim()];
        run_chain(&mut m, lookup("BADAB").unwrap(), &cfg, &q0).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.final_q, b.final_q);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.dh.to_bits(), x.accepted, x.plaquette.to_bits()), (y.dh.to_bits(), y.accepted, y.plaquette.to_bits()));
    }
}

#[test]
fn large_step_count_approaches_the_exact_flow() {
    let mut m = schwinger4();
    let cfg = HmcConfig {
        tau: 1.0,
        n_steps: 40,
        mode: StepMode::HessianFree,
        n_traj: 20,
        n_therm: Some(0),
        seed: 7,
    };
    let q0 = vec![0.0; m.dim()];
    let r = run_chain(&mut m, lookup("BADAB").unwrap(), &cfg, &q0).unwrap();
    assert!(r.records.iter().all(|t| t.accepted && t.dh.abs() < 1e-4));
}
