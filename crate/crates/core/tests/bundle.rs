mod common;

use common::scenario;
use lamina::bundle::tangent_planes_fd;
use lamina::Section;

#[test]
fn catalog_code_counts() {
    assert_eq!(scenario("circle", &[], Some(&[1024]), None).lam().codes().len(), 1);
    assert_eq!(scenario("solenoid", &[], Some(&[64]), Some(3)).lam().codes().len(), 8);
    assert_eq!(scenario("torus", &[], Some(&[16, 8]), Some(2)).lam().codes().len(), 4);
}

#[test]
fn torus_frames_span_the_normal_factor() {
    let sc = scenario("torus", &[], Some(&[16, 8]), None);
    for g in 0..sc.lam().node_count() {
        let n = sc.tube.frames.matrix(g);
        assert!(n.rows(0, 2).amax() < 1e-12);
        let block = n.rows(2, 2).into_owned();
        assert!((block.determinant().abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn constant_section_offsets_the_circle() {
    let sc = scenario("circle", &[], Some(&[256]), None);
    let s = Section::from_fn(256, 1, |_| vec![0.1]);
    for g in 0..256 {
        let base = sc.lam().point(g);
        let p = sc.tube.node_immersion(g, &s);
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        assert!((r - (base[0] * base[0] + base[1] * base[1]).sqrt()).abs() > 0.0999);
    }
}

#[test]
fn zero_section_has_flat_tangents() {
    for name in ["doubling", "solenoid"] {
        let sc = scenario(name, &[], Some(&[512]), Some(2));
        let fd = tangent_planes_fd(&sc.tube, &sc.tube.zero_section()).unwrap();
        assert!(fd.sup_norm() < 1e-12, "{name}");
    }
}

#[test]
fn frames_vary_continuously() {
    let sc = scenario("circle", &[], Some(&[512]), None);
    let lam = sc.lam();
    let h = lam.axes()[0].spacing();
    for g in 0..lam.node_count() {
        let next = lam.neighbor(g, 0, 1).unwrap();
        let (a, b) = (sc.tube.frames.matrix(g), sc.tube.frames.matrix(next));
        assert!((a - b).amax() <= 1.01 * h);
    }
}
