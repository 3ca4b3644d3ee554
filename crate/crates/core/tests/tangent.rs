mod common;

use common::{converge, scenario, smooth_field};
use lamina::bundle::tangent_planes_fd;
use lamina::graph_transform::iterate_to_fixed_point;
use lamina::scenarios::stream;
use lamina::tangent::{
    estimate_normal_hyperbolicity, iterate_plane_field, transport_field_once, PlaneField, PlaneTransport,
    RegularityDiagnostic,
};
use std::f64::consts::TAU;

fn series_slope(theta: f64) -> f64 {
    -0.1 * (0..40)
        .map(|k| 10f64.powi(-(k + 1)) * 2f64.powi(k) * (2f64.powi(k) * theta).cos())
        .sum::<f64>()
}

#[test]
fn unperturbed_plane_field_is_zero() {
    let sc = scenario("doubling", &[], Some(&[256]), None);
    let z = sc.tube.zero_section();
    let (p, rep) = iterate_plane_field(
        &sc.unperturbed,
        &sc.tube,
        sc.dynamics.as_ref(),
        &z,
        sc.variant(),
        &sc.cfg,
    )
    .unwrap();
    assert!(rep.converged);
    assert_eq!(p.sup_norm(), 0.0);
}

#[test]
fn doubling_planes_are_the_series_derivative() {
    let sc = scenario("doubling", &[], Some(&[4096]), None);
    let (s, _) = converge(&sc);
    let (p, _) = iterate_plane_field(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, sc.variant(), &sc.cfg).unwrap();
    let fd = tangent_planes_fd(&sc.tube, &s).unwrap();
    let mut worst: f64 = 0.0;
    for g in 0..4096 {
        let theta = sc.lam().node_params(g).1[0];
        worst = worst.max((p.get(g)[0] - series_slope(theta)).abs());
    }
    assert!(worst < 1e-6, "{worst}");
    assert!(p.sup_distance(&fd) < 1e-4);
}

#[test]
fn solenoid_planes_match_finite_differences() {
    let sc = scenario("solenoid", &[], Some(&[512]), Some(4));
    let (s, _) = converge(&sc);
    let (p, rep) = iterate_plane_field(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, sc.variant(), &sc.cfg).unwrap();
    assert!(rep.converged);
    let fd = tangent_planes_fd(&sc.tube, &s).unwrap();
    assert!(p.sup_distance(&fd) < 1e-4, "{}", p.sup_distance(&fd));
}

#[test]
fn converged_field_is_reproduced_by_one_transport() {
    for name in ["doubling", "circle"] {
        let sc = scenario(name, &[], Some(&[512]), None);
        let (s, _) = converge(&sc);
        let (p, _) = iterate_plane_field(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, sc.variant(), &sc.cfg).unwrap();
        let q = transport_field_once(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, &p, sc.variant(), &sc.cfg).unwrap();
        assert!(p.sup_distance(&q) < 1e-9, "{name}");
    }
}

#[test]
fn transports_contract_random_plane_pairs() {
    for (name, depth) in [("doubling", None), ("circle", None), ("solenoid", Some(3))] {
        let sc = scenario(name, &[], Some(&[256]), depth);
        let lam = sc.lam();
        let core = (0..lam.node_count()).filter(|&g| lam.bump(g).0 == 1.0).count();
        let est =
            estimate_normal_hyperbolicity(&sc.sys, lam, sc.dynamics.as_ref(), sc.splitting.as_ref(), 1, core, 1.0)
                .unwrap();
        let (s, _) = converge(&sc);
        let (base, _) =
            iterate_plane_field(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, sc.variant(), &sc.cfg).unwrap();
        let t = PlaneTransport::new(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &s, sc.variant(), &sc.cfg).unwrap();
        let (k, d) = (sc.tube.k(), sc.tube.d());
        let mut rng = stream(3, name);
        // transports are Möbius maps; stay near the fixed field where λ describes them
        let r = 0.1 * sc.cfg.eps_plane;
        for _ in 0..100 {
            let mut random = || PlaneField {
                k,
                d,
                values: base
                    .values
                    .iter()
                    .zip(smooth_field(&sc, r, &mut rng, k * d))
                    .map(|(v, w)| v + w)
                    .collect(),
            };
            let (a, b) = (random(), random());
            let ratio = t
                .apply(&sc.tube, &a)
                .unwrap()
                .sup_distance(&t.apply(&sc.tube, &b).unwrap())
                / a.sup_distance(&b);
            assert!(ratio <= est.lambda_at(1.0) + 0.05, "{name}: {ratio}");
        }
    }
}

#[test]
fn rate_integers_for_doubling_and_torus() {
    let d = scenario("doubling", &[], None, None).estimate(3.0).unwrap();
    assert!(d.hyperbolic);
    assert_eq!(d.r_max, 3);
    assert!((d.lambda - 0.8).abs() < 1e-6, "{}", d.lambda);
    let t = scenario("torus", &[], None, None).estimate(3.0).unwrap();
    assert_eq!(t.r_max, 3);
}

#[test]
fn isometric_normal_direction_is_not_hyperbolic() {
    for name in ["identity_product", "figure_eight"] {
        let e = scenario(name, &[], None, None).estimate(0.0).unwrap();
        assert!(!e.hyperbolic, "{name}");
        assert!(e.lambda >= 1.0);
    }
}

#[test]
fn third_differences_stay_bounded_under_refinement() {
    let mut samples = Vec::new();
    for nodes in [256, 512, 1024] {
        let sc = scenario("doubling", &[], Some(&[nodes]), None);
        let z = sc.tube.zero_section();
        let (s, _) =
            iterate_to_fixed_point(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &z, sc.variant(), &sc.cfg).unwrap();
        samples.push((nodes, s.values.clone(), TAU / nodes as f64));
    }
    let diag = RegularityDiagnostic::new(&samples, &[2, 3]);
    assert!(diag.bounded(2, 1.1));
    assert!(diag.bounded(3, 1.6));
}
