mod common;

use common::scenario;
use lamina::hyperbolic::{persist_hyperbolic, HyperbolicResult};
use lamina::scenarios::Scenario;
use lamina::MapSystem;

fn run(sc: &Scenario, sys: &MapSystem) -> HyperbolicResult {
    let (st, un) = sc.thick.as_ref().unwrap();
    persist_hyperbolic(sys, &sc.tube, sc.dynamics.as_ref(), st, un, &sc.cfg).unwrap()
}

#[test]
fn unperturbed_torus_intersects_at_the_base() {
    let sc = scenario("torus", &[], Some(&[16, 8]), None);
    let h = run(&sc, &sc.unperturbed);
    assert_eq!(h.section.sup_norm(), 0.0);
    let lam = sc.lam();
    for (g, link) in h.pullback.iter().enumerate() {
        let link = link.as_ref().unwrap();
        let (c, u) = lam.node_params(g);
        let (c1, mut u1) = sc.dynamics.forward(c, &u).unwrap();
        let c1 = lam.normalize(c1, &mut u1).unwrap();
        assert_eq!(link.code, c1);
        for (a, b) in link.u.iter().zip(&u1) {
            assert!(lamina::dynsys::wrap_pi(a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn perturbed_torus_matches_both_series() {
    let sc = scenario("torus", &[], None, None);
    let h = run(&sc, &sc.sys);
    let lam = sc.lam();
    let scheme = sc.scheme.as_ref().unwrap();
    for g in 0..lam.node_count() {
        let (c, u) = lam.node_params(g);
        let p = sc.tube.node_immersion(g, &h.section);
        let y = -(1..=40)
            .map(|k| 10f64.powi(-k) * 0.05 * (2f64.powi(k - 1) * u[0]).cos())
            .sum::<f64>();
        let hist = scheme.history(&lam.codes()[c], &scheme.base_point(&u[..1])).unwrap();
        assert!((p[3] - y).abs() < 1e-8, "node {g}");
        assert!((p[2] - 0.01 * hist[1][0].sin()).abs() < 1e-8, "node {g}");
        if u[0] == 0.0 {
            assert!((p[3] + 0.05 / 9.0).abs() < 1e-8);
        }
    }
    let s = &h.summary;
    assert!(s.commutation_residual <= 1e-8);
    assert!(s.inclusion_error <= 1e-10);
    assert!(s.min_sigma >= 1e-3);
}

#[test]
fn response_is_linear_in_the_perturbation() {
    let big = scenario("torus", &[("ex", 0.01), ("ey", 0.05)], Some(&[16, 8]), None);
    let small = scenario("torus", &[("ex", 0.005), ("ey", 0.025)], Some(&[16, 8]), None);
    let a = run(&big, &big.sys).section.sup_norm();
    let b = run(&small, &small.sys).section.sup_norm();
    assert!((a / b - 2.0).abs() <= 0.2, "{a} {b}");
}
