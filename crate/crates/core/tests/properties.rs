mod common;

use common::{converge, scenario, smooth_field};
use lamina::dynsys::wrap_pi;
use lamina::graph_transform::{apply_bump, graph_step};
use lamina::inverse_limit::PreorbitScheme;
use lamina::scenarios::{stream, Scenario};
use lamina::tangent::{transport_plane_contracted, transport_plane_expanded};
use lamina::{Section, TransversalCode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

fn cached(name: &'static str) -> &'static Scenario {
    static DOUBLING: OnceLock<Scenario> = OnceLock::new();
    static SOLENOID: OnceLock<Scenario> = OnceLock::new();
    static TORUS: OnceLock<Scenario> = OnceLock::new();
    static HENON: OnceLock<Scenario> = OnceLock::new();
    let cell = match name {
        "doubling" => &DOUBLING,
        "solenoid" => &SOLENOID,
        "torus" => &TORUS,
        _ => &HENON,
    };
    cell.get_or_init(|| match name {
        "doubling" => scenario(name, &[], Some(&[128]), None),
        "solenoid" => scenario(name, &[], Some(&[64]), Some(4)),
        "torus" => scenario(name, &[], Some(&[16, 8]), None),
        _ => scenario("henon", &[], None, Some(3)),
    })
}

fn code_strategy(depth: usize, branches: u8) -> impl Strategy<Value = TransversalCode> {
    proptest::collection::vec(0..branches, depth).prop_map(TransversalCode::new)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn maps_respect_angle_wrapping(name in prop::sample::select(vec!["doubling", "solenoid", "torus"]),
                                   x in proptest::collection::vec(-3.0f64..3.0, 4), turns in -2i32..=2) {
        let sys = &cached(name).sys;
        let n = sys.n();
        let x = &x[..n];
        let a = sys.eval(x).unwrap();
        for k in (0..n).filter(|&k| sys.space.is_angle(k)) {
            let mut y = x.to_vec();
            y[k] += TAU * turns as f64;
            let b = sys.eval(&y).unwrap();
            for j in 0..n {
                let d = a[j] - b[j];
                let d = if sys.space.is_angle(j) { wrap_pi(d) } else { d };
                prop_assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn henon_family_starts_at_the_base(x in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let sc = cached("henon");
        let f0 = sc.family.as_ref().unwrap().at(Complex64::new(0.0, 0.0)).unwrap();
        let (a, b) = (sc.unperturbed.eval(&x).unwrap(), f0.eval(&x).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn interpolation_reproduces_nodes(g in 0usize..512) {
        let sc = cached("solenoid");
        let lam = sc.lam();
        let (c, u) = lam.node_params(g);
        let p = lam.evaluate_immersion(&lam.codes()[c], &u).unwrap();
        prop_assert_eq!(&p[..], lam.point(g));
    }

    #[test]
    fn immersion_is_affine_in_the_section(c in 0usize..16, u in -PI..PI, seed in 0u64..1000) {
        let sc = cached("solenoid");
        let lam = sc.lam();
        let k = sc.tube.k();
        let mut rng = stream(seed, "affine");
        let s1 = Section { k, values: smooth_field(sc, 0.05, &mut rng, k) };
        let s2 = Section { k, values: smooth_field(sc, 0.05, &mut rng, k) };
        let sum = Section { k, values: s1.values.iter().zip(&s2.values).map(|(a, b)| a + b).collect() };
        let z = sc.tube.zero_section();
        let ev = |s: &Section| sc.tube.section_to_immersion(s).eval(c % lam.codes().len(), &[u]).unwrap();
        let (a, b, ab, o) = (ev(&s1), ev(&s2), ev(&sum), ev(&z));
        for i in 0..a.len() {
            let d = ab[i] - a[i] - b[i] + o[i];
            let d = if sc.sys.space.is_angle(i) { wrap_pi(d) } else { d };
            prop_assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_shift_round_trips(code in code_strategy(6, 2), t in -PI..PI, tail in 0u8..2) {
        let scheme = PreorbitScheme::doubling(6).unwrap();
        let x0 = [t, 0.0];
        let (c1, x1) = scheme.shift_inverse(&code, &x0, tail).unwrap();
        let (c2, x2) = scheme.shift_forward(&c1, &x1).unwrap();
        prop_assert_eq!(&c2, &code);
        prop_assert!(scheme.base_distance(&x2, &x0) < 1e-12);
        let (f1, y1) = scheme.shift_forward(&code, &x0).unwrap();
        let (f2, y2) = scheme.shift_inverse(&f1, &y1, code.symbols[5]).unwrap();
        prop_assert_eq!(&f2, &code);
        prop_assert!(scheme.base_distance(&y2, &x0) < 1e-12);
    }

    #[test]
    fn quadratic_branches_invert_the_map(code in code_strategy(4, 2), r in 0.7f64..0.9, t in -PI..PI) {
        let scheme = cached("henon").scheme.clone().unwrap();
        let x0 = [r * t.cos(), r * t.sin()];
        let h = scheme.history(&code, &x0).unwrap();
        for w in h.windows(2) {
            prop_assert!(scheme.base_distance(&scheme.image(&w[1]), &w[0]) < 1e-10);
        }
    }

    #[test]
    fn history_metric_is_a_metric(a in code_strategy(5, 2), b in code_strategy(5, 2), c in code_strategy(5, 2),
                                  t in -PI..PI) {
        let scheme = PreorbitScheme::doubling(5).unwrap();
        let x0 = [t, 0.0];
        let (ha, hb, hc) = (scheme.history(&a, &x0).unwrap(), scheme.history(&b, &x0).unwrap(), scheme.history(&c, &x0).unwrap());
        let d = |p: &[[f64; 2]], q: &[[f64; 2]]| scheme.history_metric(p, q);
        prop_assert_eq!(d(&ha, &ha), 0.0);
        prop_assert!((d(&ha, &hb) - d(&hb, &ha)).abs() < 1e-15);
        prop_assert!(d(&ha, &hc) <= d(&ha, &hb) + d(&hb, &hc) + 1e-15);
        if a != b {
            prop_assert!(d(&ha, &hb) > 0.0);
        }
        // a deeper truncation moves the metric by at most 2^{-N}
        let deep = PreorbitScheme::doubling(7).unwrap();
        let ext = |c: &TransversalCode| TransversalCode::new([c.symbols.clone(), vec![1, 0]].concat());
        let dd = deep.history_metric(&deep.history(&ext(&a), &x0).unwrap(), &deep.history(&ext(&b), &x0).unwrap());
        prop_assert!((dd - d(&ha, &hb)).abs() <= 0.5f64.powi(5));
    }

    #[test]
    fn block_diagonal_transports(entries in proptest::collection::vec(-1.0f64..1.0, 9), d in 1usize..3) {
        let k = 3 - d;
        let a = DMatrix::from_fn(d, d, |i, j| entries[i * 2 + j] + if i == j { 2.5 } else { 0.0 });
        let b = DMatrix::from_fn(k, k, |i, j| entries[4 + i * 2 + j] + if i == j { 2.5 } else { 0.0 });
        let l = DMatrix::from_fn(k, d, |i, j| 0.5 * entries[(i + j) % 9]);
        let mut df = DMatrix::zeros(3, 3);
        df.view_mut((0, 0), (d, d)).copy_from(&a);
        df.view_mut((d, d), (k, k)).copy_from(&b);
        let id = DMatrix::identity(3, 3);
        let e = transport_plane_expanded(&df, &id, &id, &l).unwrap();
        prop_assert!((e - b.clone().try_inverse().unwrap() * &l * &a).amax() < 1e-12);
        let c = transport_plane_contracted(&df, &id, &id, &l).unwrap();
        prop_assert!((c - &b * &l * a.try_inverse().unwrap()).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn graph_transform_contracts_section_pairs(seed in 0u64..10_000) {
        let sc = cached("doubling");
        let (s, _) = converge(sc);
        let k = sc.tube.k();
        let mut rng = stream(seed, "pairs");
        let amp = 0.2 * sc.cfg.eta;
        let mut near = || Section { k, values: s.values.iter().zip(smooth_field(sc, amp, &mut rng, k)).map(|(a, b)| a + b).collect() };
        let (a, b) = (near(), near());
        let step = |x: &Section| apply_bump(&sc.tube, &graph_step(&sc.sys, &sc.tube, sc.dynamics.as_ref(), x, sc.variant(), &sc.cfg).unwrap().values);
        let ratio = step(&a).sup_distance(&step(&b)) / a.sup_distance(&b);
        prop_assert!(ratio <= 0.1 + 0.1, "{}", ratio);
    }
}
