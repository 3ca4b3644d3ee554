#![allow(dead_code)]

use lamina::graph_transform::iterate_to_fixed_point;
use lamina::scenarios::{build, Scenario};
use lamina::{Section, TransformReport};
use std::collections::BTreeMap;

pub fn scenario(name: &str, params: &[(&str, f64)], nodes: Option<&[usize]>, depth: Option<usize>) -> Scenario {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build(name, &p, nodes, depth).unwrap()
}

pub fn converge(sc: &Scenario) -> (Section, TransformReport) {
    let z = sc.tube.zero_section();
    iterate_to_fixed_point(&sc.sys, &sc.tube, sc.dynamics.as_ref(), &z, sc.variant(), &sc.cfg).unwrap()
}

/// `Σ_{n=1}^{N} 2^{-n} sin θ_n` along the coded history of node `g`.
pub fn solenoid_series(sc: &Scenario, g: usize) -> f64 {
    let lam = sc.lam();
    let scheme = sc.scheme.as_ref().unwrap();
    let (c, u) = lam.node_params(g);
    let h = scheme.history(&lam.codes()[c], &scheme.base_point(&u)).unwrap();
    h.iter()
        .enumerate()
        .skip(1)
        .map(|(n, x)| 0.5f64.powi(n as i32) * x[0].sin())
        .sum()
}

pub fn doubling_series(theta: f64, eps: f64, terms: i32) -> f64 {
    -eps * (0..terms)
        .map(|k| 10f64.powi(-(k + 1)) * (2f64.powi(k) * theta).sin())
        .sum::<f64>()
}

/// Random trigonometric field of `width` components per node, sup at most `amp`.
///
/// Rough node-wise noise would measure the overshoot of cubic interpolation
/// at off-grid preimages rather than the dynamics.
pub fn smooth_field(sc: &Scenario, amp: f64, rng: &mut impl rand::Rng, width: usize) -> Vec<f64> {
    use std::f64::consts::TAU;
    let lam = sc.lam();
    let n = lam.n();
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3 * width)
        .map(|_| {
            let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-2i32..=2) as f64).collect();
            (k, rng.gen_range(0.0..TAU), rng.gen_range(-1.0..1.0))
        })
        .collect();
    let mut out = Vec::with_capacity(lam.node_count() * width);
    for g in 0..lam.node_count() {
        let p = lam.point(g);
        for j in 0..width {
            let v: f64 = modes[3 * j..3 * j + 3]
                .iter()
                .map(|(k, ph, c)| c * (k.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + ph).sin())
                .sum();
            out.push(amp * v / 3.0);
        }
    }
    out
}
