//! Built-in catalog of systems, base laminations and pullback rules.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::Tube;
use crate::dynsys::{wrap_angle, CoordKind, DeformationFamily, MapSystem, StateSpace};
use crate::error::{Error, Result};
use crate::graph_transform::{BaseDynamics, FnDynamics, TransformConfig, Variant};
use crate::hyperbolic::ThickSpec;
use crate::inverse_limit::{build_preorbit_space, PreorbitScheme};
use crate::lamination::{Axis, DiscreteLamination, Region, Transversal, TransversalCode};
use crate::tangent::{estimate_normal_hyperbolicity, HyperbolicityEstimate, Splitting};

pub const CATALOG: [&str; 8] = [
    "circle",
    "doubling",
    "solenoid",
    "torus",
    "henon",
    "quadratic_skew",
    "identity_product",
    "figure_eight",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Expanded,
    Contracted,
    Hyperbolic,
}

pub type SplittingRule = dyn Fn(&[f64], &DMatrix<f64>) -> Splitting + Send + Sync;

/// A bounded (pre)orbit found by a sweep: its ambient starting point, or `None` if it escaped.
pub type OrbitSampler = dyn Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + Send + Sync;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub sys: MapSystem,
    pub unperturbed: MapSystem,
    pub tube: Tube,
    pub dynamics: Arc<dyn BaseDynamics>,
    pub pipeline: Pipeline,
    pub cfg: TransformConfig,
    pub splitting: Arc<SplittingRule>,
    pub thick: Option<(ThickSpec, ThickSpec)>,
    pub scheme: Option<Arc<PreorbitScheme>>,
    pub depth: usize,
    pub family: Option<DeformationFamily>,
    /// Bounded-orbit sampler and whether it follows forward orbits.
    pub sampler: Option<(Arc<OrbitSampler>, bool)>,
    /// Leaf charts `(ρ, α)`, or `(Re z, Im z)`, with complex fiber coordinates.
    pub complex_leaf: Option<((usize, usize), (usize, usize))>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("nodes", &self.tube.lam.node_count())
            .finish()
    }
}

impl Scenario {
    pub fn variant(&self) -> Variant {
        match self.pipeline {
            Pipeline::Expanded | Pipeline::Hyperbolic => Variant::Expanded,
            Pipeline::Contracted => Variant::Contracted,
        }
    }

    pub fn lam(&self) -> &Arc<DiscreteLamination> {
        &self.tube.lam
    }

    /// Leaf points whose fibers may contain the ambient point `p`.
    pub fn leaf_candidates(&self, p: &[f64]) -> Vec<(usize, Vec<f64>)> {
        let lam = self.lam();
        match self.name.as_str() {
            "henon" => {
                let z = Complex64::new(p[0], p[1]);
                let u = vec![z.norm().ln(), wrap_angle(z.arg())];
                (0..lam.codes().len()).map(|c| (c, u.clone())).collect()
            }
            "quadratic_skew" => vec![(0, vec![p[0], p[1]])],
            "doubling" => vec![(0, vec![wrap_angle(p[0])])],
            "solenoid" => (0..lam.codes().len()).map(|c| (c, vec![wrap_angle(p[1])])).collect(),
            "torus" => (0..lam.codes().len())
                .map(|c| (c, vec![wrap_angle(p[0]), wrap_angle(p[1])]))
                .collect(),
            _ => {
                let mut best = (0, f64::INFINITY);
                for g in 0..lam.node_count() {
                    let d = lam.space.distance(lam.point(g), p);
                    if d < best.1 {
                        best = (g, d);
                    }
                }
                let (c, u) = lam.node_params(best.0);
                vec![(c, u)]
            }
        }
    }

    /// Truncation depth used for transversal tolerances (`2^{-depth}`).
    /// Rate estimate along orbits of 8 steps, shortened while every orbit leaves the leaf domain.
    pub fn estimate(&self, r_query: f64) -> Result<HyperbolicityEstimate> {
        let mut last = None;
        for len in [8, 4, 2, 1] {
            match estimate_normal_hyperbolicity(
                &self.sys,
                self.lam(),
                self.dynamics.as_ref(),
                self.splitting.as_ref(),
                len,
                64,
                r_query,
            ) {
                Err(Error::Domain(m)) => last = Some(Error::Domain(m)),
                other => return other,
            }
        }
        Err(last.expect("at least one orbit length"))
    }

    pub fn resolution_depth(&self) -> usize {
        if self.depth == 0 {
            8
        } else {
            self.depth
        }
    }
}

fn lookup(params: &BTreeMap<String, f64>, defaults: &[(&str, f64)]) -> Result<BTreeMap<String, f64>> {
    for k in params.keys() {
        if !defaults.iter().any(|(n, _)| n == k) {
            return Err(Error::Input(format!("unknown parameter {k:?}")));
        }
    }
    let mut out = BTreeMap::new();
    for (n, v) in defaults {
        let val = params.get(*n).copied().unwrap_or(*v);
        if !val.is_finite() {
            return Err(Error::Input(format!("parameter {n} is not finite")));
        }
        out.insert(n.to_string(), val);
    }
    Ok(out)
}

fn nodes_or(nodes: Option<&[usize]>, default: &[usize]) -> Result<Vec<usize>> {
    match nodes {
        None => Ok(default.to_vec()),
        Some(v) if v.len() == 1 && default.len() > 1 => Ok(vec![v[0]; default.len()]),
        Some(v) if v.len() == default.len() => Ok(v.to_vec()),
        Some(v) => Err(Error::Input(format!(
            "expected {} node counts, got {}",
            default.len(),
            v.len()
        ))),
    }
}

/// Names of the tunable parameters of a catalog scenario.
pub fn parameter_names(name: &str) -> Result<Vec<&'static str>> {
    Ok(defaults(name)?.iter().map(|(n, _)| *n).collect())
}

fn defaults(name: &str) -> Result<&'static [(&'static str, f64)]> {
    Ok(match name {
        "circle" => &[("alpha", 1.0), ("eps", 0.05)],
        "doubling" => &[("eps", 0.1), ("base", 0.0)],
        "solenoid" => &[("eps", 0.5)],
        "torus" => &[("alpha", 1.0), ("ex", 0.01), ("ey", 0.05)],
        "henon" => &[("b", 0.01), ("c", -0.1)],
        "quadratic_skew" => &[("delta", 0.05), ("eps", 0.1)],
        "identity_product" => &[],
        "figure_eight" => &[],
        other => return Err(Error::Input(format!("unknown scenario {other:?}"))),
    })
}

fn shift_forward(scheme: &PreorbitScheme, c: usize, u: &[f64]) -> Result<(usize, Vec<f64>)> {
    let (code, x) = scheme.shift_forward(&scheme.code(c), &scheme.base_point(u))?;
    Ok((scheme.index(&code), scheme.leaf_params(&x)))
}

fn shift_inverse(scheme: &PreorbitScheme, c: usize, u: &[f64]) -> Result<(usize, Vec<f64>)> {
    let (code, x) = scheme.shift_inverse(&scheme.code(c), &scheme.base_point(u), 0)?;
    Ok((scheme.index(&code), scheme.leaf_params(&x)))
}

fn col(n: usize, idx: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

fn unit_tangent_splitting(stable: &[usize], unstable: &[usize], n: usize) -> Arc<SplittingRule> {
    let s = stable.to_vec();
    let u = unstable.to_vec();
    Arc::new(move |_, t| Splitting {
        stable: col(n, &s),
        center: t.clone(),
        unstable: col(n, &u),
    })
}

pub fn build(
    name: &str,
    params: &BTreeMap<String, f64>,
    nodes: Option<&[usize]>,
    depth: Option<usize>,
) -> Result<Scenario> {
    let p = lookup(params, defaults(name)?)?;
    match name {
        "circle" => circle(p, nodes),
        "doubling" => doubling(p, nodes),
        "solenoid" => solenoid(p, nodes, depth),
        "torus" => torus(p, nodes, depth),
        "henon" => henon(p, nodes, depth),
        "quadratic_skew" => quadratic_skew(p, nodes),
        "identity_product" => identity_product(nodes),
        "figure_eight" => figure_eight(nodes),
        _ => unreachable!("names are checked by defaults"),
    }
}

fn base_cfg(eta: f64) -> TransformConfig {
    TransformConfig {
        eta,
        ..TransformConfig::default()
    }
}

fn circle(p: BTreeMap<String, f64>, nodes: Option<&[usize]>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[256])?;
    let alpha = p["alpha"];
    let eps = p["eps"];
    let radial = move |x: &[f64], o: &mut [f64], e: f64| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let k = (1.0 + r) / (2.0 * r);
        let (ca, sa) = (alpha.cos(), alpha.sin());
        let a = k * x[0];
        let b = k * x[1];
        o[0] = ca * a - sa * b + e * 0.3 * x[1] * x[1];
        o[1] = sa * a + ca * b + e * 0.5 * x[0];
    };
    let sys = MapSystem::new("circle", StateSpace::lines(2)?, move |x, o| radial(x, o, eps))
        .with_param("alpha", alpha)
        .with_param("eps", eps);
    let unperturbed = MapSystem::new("circle", StateSpace::lines(2)?, move |x, o| radial(x, o, 0.0));
    let lam = DiscreteLamination::new(
        StateSpace::lines(2)?,
        vec![Axis::angle(nodes[0])],
        vec![TransversalCode::default()],
        vec![None],
        |_, u| vec![u[0].cos(), u[0].sin()],
        Region::Everything,
        Transversal::Ambient,
    )?
    .with_exact(Arc::new(|_, u| vec![u[0].cos(), u[0].sin()]))?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let dynamics =
        FnDynamics::new(move |c, u| Ok((c, vec![u[0] + alpha]))).with_inverse(move |c, u| Ok((c, vec![u[0] - alpha])));
    let splitting: Arc<SplittingRule> = Arc::new(|x, t| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        Splitting {
            stable: DMatrix::from_column_slice(2, 1, &[x[0] / r, x[1] / r]),
            center: t.clone(),
            unstable: DMatrix::zeros(2, 0),
        }
    });
    Ok(Scenario {
        name: "circle".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Contracted,
        cfg: base_cfg(0.25),
        splitting,
        thick: None,
        scheme: None,
        depth: 0,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

fn doubling_system(eps: f64, base: f64) -> Result<MapSystem> {
    let space = StateSpace::new(vec![CoordKind::Angle, CoordKind::Line], vec![])?;
    Ok(MapSystem::new("doubling", space, move |x, o| {
        o[0] = 2.0 * x[0] + TAU * base * x[0].sin();
        o[1] = 10.0 * x[1] + eps * x[0].sin();
    })
    .with_jacobian(move |x, j| {
        j[(0, 0)] = 2.0 + TAU * base * x[0].cos();
        j[(0, 1)] = 0.0;
        j[(1, 0)] = eps * x[0].cos();
        j[(1, 1)] = 10.0;
    })
    .with_param("eps", eps)
    .with_param("base", base))
}

fn doubling(p: BTreeMap<String, f64>, nodes: Option<&[usize]>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[1024])?;
    let sys = doubling_system(p["eps"], p["base"])?;
    let unperturbed = doubling_system(0.0, 0.0)?;
    let lam = DiscreteLamination::new(
        sys.space.clone(),
        vec![Axis::angle(nodes[0])],
        vec![TransversalCode::default()],
        vec![None],
        |_, u| vec![u[0], 0.0],
        Region::Everything,
        Transversal::Ambient,
    )?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let dynamics = FnDynamics::new(|c, u| Ok((c, vec![2.0 * u[0]])));
    Ok(Scenario {
        name: "doubling".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Expanded,
        cfg: base_cfg(0.25),
        splitting: unit_tangent_splitting(&[], &[1], 2),
        thick: None,
        scheme: None,
        depth: 0,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

fn solenoid_system(eps: f64) -> Result<MapSystem> {
    let space = StateSpace::new(vec![CoordKind::Line, CoordKind::Angle], vec![])?;
    Ok(MapSystem::new("solenoid", space, move |x, o| {
        o[0] = 0.5 * x[0] + eps * x[1].sin();
        o[1] = 2.0 * x[1];
    })
    .with_jacobian(move |x, j| {
        j[(0, 0)] = 0.5;
        j[(0, 1)] = eps * x[1].cos();
        j[(1, 0)] = 0.0;
        j[(1, 1)] = 2.0;
    })
    .with_param("eps", eps))
}

fn solenoid(p: BTreeMap<String, f64>, nodes: Option<&[usize]>, depth: Option<usize>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[512])?;
    let depth = depth.unwrap_or(8);
    let sys = solenoid_system(p["eps"])?;
    let unperturbed = solenoid_system(0.0)?;
    let scheme = Arc::new(PreorbitScheme::doubling(depth)?);
    let lam = build_preorbit_space(scheme.clone(), sys.space.clone(), &nodes, |x| vec![0.0, x[0]])?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let (s1, s2) = (scheme.clone(), scheme.clone());
    let dynamics = FnDynamics::new(move |c, u| shift_forward(&s1, c, u))
        .with_inverse(move |c, u| shift_inverse(&s2, c, u))
        .truncated(depth);
    let eta = (3.0 * p["eps"].abs()).max(0.25);
    Ok(Scenario {
        name: "solenoid".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Contracted,
        cfg: base_cfg(eta),
        splitting: unit_tangent_splitting(&[0], &[], 2),
        thick: None,
        scheme: Some(scheme),
        depth,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

fn torus_system(alpha: f64, ex: f64, ey: f64) -> Result<MapSystem> {
    let space = StateSpace::new(
        vec![CoordKind::Angle, CoordKind::Angle, CoordKind::Line, CoordKind::Line],
        vec![],
    )?;
    Ok(MapSystem::new("torus", space, move |x, o| {
        o[0] = 2.0 * x[0];
        o[1] = x[1] + alpha;
        o[2] = ex * x[0].sin();
        o[3] = 10.0 * x[3] + ey * x[0].cos();
    })
    .with_jacobian(move |x, j| {
        j.fill(0.0);
        j[(0, 0)] = 2.0;
        j[(1, 1)] = 1.0;
        j[(2, 0)] = ex * x[0].cos();
        j[(3, 0)] = -ey * x[0].sin();
        j[(3, 3)] = 10.0;
    })
    .with_param("alpha", alpha)
    .with_param("ex", ex)
    .with_param("ey", ey))
}

fn torus(p: BTreeMap<String, f64>, nodes: Option<&[usize]>, depth: Option<usize>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[32, 8])?;
    let depth = depth.unwrap_or(2);
    let alpha = p["alpha"];
    let sys = torus_system(alpha, p["ex"], p["ey"])?;
    let unperturbed = torus_system(alpha, 0.0, 0.0)?;
    let scheme = Arc::new(PreorbitScheme::doubling(depth)?);
    let lam = DiscreteLamination::new(
        sys.space.clone(),
        vec![Axis::angle(nodes[0]), Axis::angle(nodes[1])],
        scheme.codes(),
        vec![Some(scheme.seam_map()), None],
        |_, u| vec![u[0], u[1], 0.0, 0.0],
        Region::Everything,
        Transversal::Preorbit(scheme.clone()),
    )?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let eta = 0.5;
    let (s1, s2) = (scheme.clone(), scheme.clone());
    let dynamics = FnDynamics::new(move |c, u| {
        let (c1, t) = shift_forward(&s1, c, &u[..1])?;
        Ok((c1, vec![t[0], u[1] + alpha]))
    })
    .with_inverse(move |c, u| {
        let (c1, t) = shift_inverse(&s2, c, &u[..1])?;
        Ok((c1, vec![t[0], u[1] - alpha]))
    });
    let (s3, s4, s5) = (scheme.clone(), scheme.clone(), scheme.clone());
    let stable_dyn = FnDynamics::new(move |c, u| {
        let (c1, t) = shift_forward(&s3, c, &u[..1])?;
        Ok((c1, vec![t[0], u[1] + alpha, 0.0]))
    });
    let unstable_dyn = FnDynamics::new(move |c, u| {
        let (c1, t) = shift_forward(&s4, c, &u[..1])?;
        Ok((c1, vec![t[0], u[1] + alpha, 10.0 * u[2]]))
    })
    .with_inverse(move |c, u| {
        let (c1, t) = shift_inverse(&s5, c, &u[..1])?;
        Ok((c1, vec![t[0], u[1] - alpha, u[2] / 10.0]))
    });
    let radius = eta / 2.0;
    let stable = ThickSpec::new(Arc::new(|_, _| col(4, &[2])), 1, radius).with_dynamics(Arc::new(stable_dyn));
    let unstable = ThickSpec::new(Arc::new(|_, _| col(4, &[3])), 1, radius).with_dynamics(Arc::new(unstable_dyn));
    Ok(Scenario {
        name: "torus".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Hyperbolic,
        cfg: base_cfg(eta),
        splitting: unit_tangent_splitting(&[2], &[3], 4),
        thick: Some((stable, unstable)),
        scheme: Some(scheme),
        depth,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

pub fn henon_system(b: Complex64, c: f64) -> Result<MapSystem> {
    Ok(MapSystem::new("henon", StateSpace::complex(2)?, move |x, o| {
        let z = Complex64::new(x[0], x[1]);
        let w = Complex64::new(x[2], x[3]);
        let a = z * z + c + w;
        let e = b * z;
        o[0] = a.re;
        o[1] = a.im;
        o[2] = e.re;
        o[3] = e.im;
    })
    .with_jacobian(move |x, j| {
        j.fill(0.0);
        let (zr, zi) = (2.0 * x[0], 2.0 * x[1]);
        j[(0, 0)] = zr;
        j[(0, 1)] = -zi;
        j[(1, 0)] = zi;
        j[(1, 1)] = zr;
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 0)] = b.re;
        j[(2, 1)] = -b.im;
        j[(3, 0)] = b.im;
        j[(3, 1)] = b.re;
    })
    .with_param("b", b)
    .with_param("c", c))
}

pub const HENON_ANNULUS: (f64, f64) = (0.3, 1.5);

fn henon(p: BTreeMap<String, f64>, nodes: Option<&[usize]>, depth: Option<usize>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[10, 24])?;
    let depth = depth.unwrap_or(6);
    let b = p["b"];
    let c = p["c"];
    let sys = henon_system(Complex64::new(b, 0.0), c)?;
    let unperturbed = henon_system(Complex64::new(0.0, 0.0), c)?;
    let scheme = Arc::new(PreorbitScheme::quadratic(
        Complex64::new(c, 0.0),
        HENON_ANNULUS.0,
        HENON_ANNULUS.1,
        depth,
    )?);
    let lam = build_preorbit_space(scheme.clone(), sys.space.clone(), &nodes, |x| {
        vec![x[0], x[1], 0.0, 0.0]
    })?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let (s1, s2) = (scheme.clone(), scheme.clone());
    let dynamics = FnDynamics::new(move |k, u| shift_forward(&s1, k, u))
        .with_inverse(move |k, u| shift_inverse(&s2, k, u))
        .truncated(depth);
    let family = DeformationFamily::new(
        &unperturbed,
        0.02,
        move |t| henon_system(t, c).expect("complex space of dimension 2"),
        &[vec![0.5, 0.2, 0.01, -0.02], vec![-1.0, 0.7, 0.0, 0.0]],
    )?;
    let sampler: Arc<OrbitSampler> = {
        let bb = Complex64::new(b, 0.0);
        Arc::new(move |rng: &mut ChaCha8Rng| henon_backward_sweep(bb, c, rng))
    };
    Ok(Scenario {
        name: "henon".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Contracted,
        cfg: base_cfg(0.25),
        splitting: unit_tangent_splitting(&[2, 3], &[], 4),
        thick: None,
        scheme: Some(scheme),
        depth,
        family: Some(family),
        sampler: Some((sampler, false)),
        complex_leaf: Some(((0, 1), (0, 1))),
    })
}

pub const HENON_SWEEP_STEPS: usize = 30;

/// A point with a bounded 30-step preorbit along random branches, by
/// alternating a backward sweep in `z` and a forward sweep in `w`.
pub fn henon_backward_sweep(b: Complex64, c: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let (r_in, r_out) = HENON_ANNULUS;
    let r = rng.gen_range(r_in + 0.02..r_out - 0.02);
    let a = rng.gen_range(0.0..TAU);
    let z0 = Complex64::from_polar(r, a);
    let m = HENON_SWEEP_STEPS;
    let branches: Vec<u8> = (0..m).map(|_| rng.gen_range(0..2)).collect();
    let mut z = vec![Complex64::new(0.0, 0.0); m + 1];
    let mut w = vec![Complex64::new(0.0, 0.0); m + 1];
    z[0] = z0;
    for _ in 0..60 {
        let w_old = w[0];
        for k in 0..m {
            let q = z[k] - c - w[k + 1];
            let arg = wrap_angle(q.arg());
            z[k + 1] = Complex64::from_polar(q.norm().sqrt(), (arg + TAU * branches[k] as f64) / 2.0);
            if !(z[k + 1].norm() < 4.0) {
                return None;
            }
        }
        for k in 0..m {
            w[k] = b * z[k + 1];
        }
        w[m] = Complex64::new(0.0, 0.0);
        if (w[0] - w_old).norm() < 1e-15 {
            break;
        }
    }
    Some(vec![z0.re, z0.im, w[0].re, w[0].im])
}

fn skew_system(delta: f64, eps: f64) -> Result<MapSystem> {
    Ok(MapSystem::new("quadratic_skew", StateSpace::complex(2)?, move |x, o| {
        let z = Complex64::new(x[0], x[1]);
        let w = Complex64::new(x[2], x[3]);
        let a = z * (z + 1.0) + delta * w;
        let e = 4.0 * w + eps * z;
        o[0] = a.re;
        o[1] = a.im;
        o[2] = e.re;
        o[3] = e.im;
    })
    .with_jacobian(move |x, j| {
        j.fill(0.0);
        let (dr, di) = (2.0 * x[0] + 1.0, 2.0 * x[1]);
        j[(0, 0)] = dr;
        j[(0, 1)] = -di;
        j[(1, 0)] = di;
        j[(1, 1)] = dr;
        j[(0, 2)] = delta;
        j[(1, 3)] = delta;
        j[(2, 0)] = eps;
        j[(3, 1)] = eps;
        j[(2, 2)] = 4.0;
        j[(3, 3)] = 4.0;
    })
    .with_param("delta", delta)
    .with_param("eps", eps))
}

pub const SKEW_LEAF: [(f64, f64); 2] = [(-3.0, 2.0), (-3.5, 3.5)];
pub const SKEW_INNER: [(f64, f64); 2] = [(-1.45, 0.45), (-1.2, 1.2)];
pub const SKEW_OUTER: [(f64, f64); 2] = [(-1.6, 0.6), (-1.35, 1.35)];
pub const SKEW_SAMPLE_BOX: [(f64, f64); 2] = [(-1.4, 0.4), (-1.15, 1.15)];
pub const SKEW_SWEEP_STEPS: usize = 50;
pub const ESCAPE_RADIUS: f64 = 4.0;

/// Forward `z`-sweep alternated with a backward `z'`-sweep (`z'_50 = 0`);
/// `None` when the `z`-orbit leaves the disk of radius 4.
pub fn skew_forward_sweep(delta: f64, eps: f64, z0: Complex64) -> Option<Vec<f64>> {
    let m = SKEW_SWEEP_STEPS;
    let mut z = vec![Complex64::new(0.0, 0.0); m + 1];
    let mut w = vec![Complex64::new(0.0, 0.0); m + 1];
    z[0] = z0;
    for _ in 0..80 {
        let w_old = w[0];
        for k in 0..m {
            z[k + 1] = z[k] * (z[k] + 1.0) + delta * w[k];
            if !(z[k + 1].norm() <= ESCAPE_RADIUS) {
                return None;
            }
        }
        w[m] = Complex64::new(0.0, 0.0);
        for k in (0..m).rev() {
            w[k] = (w[k + 1] - eps * z[k]) / 4.0;
        }
        if (w[0] - w_old).norm() < 1e-15 {
            break;
        }
    }
    Some(vec![z0.re, z0.im, w[0].re, w[0].im])
}

fn quadratic_skew(p: BTreeMap<String, f64>, nodes: Option<&[usize]>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[126, 176])?;
    let (delta, eps) = (p["delta"], p["eps"]);
    let sys = skew_system(delta, eps)?;
    let unperturbed = skew_system(0.0, 0.0)?;
    let lam = DiscreteLamination::new(
        sys.space.clone(),
        vec![
            Axis::line(SKEW_LEAF[0].0, SKEW_LEAF[0].1, nodes[0]),
            Axis::line(SKEW_LEAF[1].0, SKEW_LEAF[1].1, nodes[1]),
        ],
        vec![TransversalCode::default()],
        vec![None, None],
        |_, u| vec![u[0], u[1], 0.0, 0.0],
        Region::Boxes {
            inner: SKEW_INNER.to_vec(),
            outer: SKEW_OUTER.to_vec(),
        },
        Transversal::Ambient,
    )?;
    let tube = Tube::build(Arc::new(lam), None)?;
    let dynamics = FnDynamics::new(|c, u| {
        let z = Complex64::new(u[0], u[1]);
        let w = z * (z + 1.0);
        Ok((c, vec![w.re, w.im]))
    });
    let sampler: Arc<OrbitSampler> = Arc::new(move |rng: &mut ChaCha8Rng| {
        let x = rng.gen_range(SKEW_SAMPLE_BOX[0].0..SKEW_SAMPLE_BOX[0].1);
        let y = rng.gen_range(SKEW_SAMPLE_BOX[1].0..SKEW_SAMPLE_BOX[1].1);
        skew_forward_sweep(delta, eps, Complex64::new(x, y))
    });
    Ok(Scenario {
        name: "quadratic_skew".into(),
        params: p,
        sys,
        unperturbed,
        tube,
        dynamics: Arc::new(dynamics),
        pipeline: Pipeline::Expanded,
        cfg: TransformConfig {
            eps_plane: 1.0,
            ..base_cfg(0.25)
        },
        splitting: unit_tangent_splitting(&[], &[2, 3], 4),
        thick: None,
        scheme: None,
        depth: 0,
        family: None,
        sampler: Some((sampler, true)),
        complex_leaf: Some(((0, 1), (0, 1))),
    })
}

pub const PRODUCT_LEAVES: usize = 4;
pub const PRODUCT_OFFSET: f64 = 0.01;

fn identity_product(nodes: Option<&[usize]>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[128])?;
    let space = StateSpace::lines(2)?;
    let sys = MapSystem::identity(space.clone());
    let codes = (0..PRODUCT_LEAVES)
        .map(|k| TransversalCode::new(vec![k as u8]))
        .collect();
    let lam = DiscreteLamination::new(
        space,
        vec![Axis::angle(nodes[0])],
        codes,
        vec![None],
        |c, u| {
            let r = 1.0 + PRODUCT_OFFSET * c as f64;
            vec![r * u[0].cos(), r * u[0].sin()]
        },
        Region::Everything,
        Transversal::Ambient,
    )?;
    let eta = default_eta(&lam, 0.25);
    let tube = Tube::build(Arc::new(lam), None)?;
    Ok(Scenario {
        name: "identity_product".into(),
        params: BTreeMap::new(),
        unperturbed: sys.clone(),
        sys,
        tube,
        dynamics: Arc::new(FnDynamics::identity()),
        pipeline: Pipeline::Contracted,
        cfg: base_cfg(eta),
        splitting: Arc::new(|x, t| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            Splitting {
                stable: DMatrix::from_column_slice(2, 1, &[x[0] / r, x[1] / r]),
                center: t.clone(),
                unstable: DMatrix::zeros(2, 0),
            }
        }),
        thick: None,
        scheme: None,
        depth: 0,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

fn figure_eight(nodes: Option<&[usize]>) -> Result<Scenario> {
    let nodes = nodes_or(nodes, &[256])?;
    let space = StateSpace::lines(2)?;
    let sys = MapSystem::identity(space.clone());
    let lam = DiscreteLamination::new(
        space,
        vec![Axis::angle(nodes[0])],
        vec![TransversalCode::default()],
        vec![None],
        |_, u| vec![(2.0 * u[0]).sin(), u[0].sin()],
        Region::Everything,
        Transversal::Ambient,
    )?;
    let tube = Tube::build(Arc::new(lam), None)?;
    Ok(Scenario {
        name: "figure_eight".into(),
        params: BTreeMap::new(),
        unperturbed: sys.clone(),
        sys,
        tube,
        dynamics: Arc::new(FnDynamics::identity()),
        pipeline: Pipeline::Contracted,
        cfg: base_cfg(0.25),
        splitting: Arc::new(|_, t| {
            let n = DMatrix::from_column_slice(2, 1, &[-t[(1, 0)], t[(0, 0)]]);
            Splitting {
                stable: n,
                center: t.clone(),
                unstable: DMatrix::zeros(2, 0),
            }
        }),
        thick: None,
        scheme: None,
        depth: 0,
        family: None,
        sampler: None,
        complex_leaf: None,
    })
}

/// A quarter of the smallest distance between distinct-code leaves at equal
/// parameters, floored at `1e-3`; `fallback` for single-leaf or coded transversals.
pub fn default_eta(lam: &DiscreteLamination, fallback: f64) -> f64 {
    match lam.transversal {
        Transversal::Ambient if lam.codes().len() > 1 => (0.25 * lam.min_cross_code_distance()).max(1e-3),
        _ => fallback,
    }
}

/// All catalog scenarios with perturbations switched off.
pub fn unperturbed_params(name: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (k, v) in defaults(name)? {
        let zero = matches!(
            (name, *k),
            ("circle", "eps")
                | ("doubling", "eps")
                | ("doubling", "base")
                | ("solenoid", "eps")
                | ("torus", "ex")
                | ("torus", "ey")
                | ("henon", "b")
                | ("quadratic_skew", "delta")
                | ("quadratic_skew", "eps")
        );
        out.insert(k.to_string(), if zero { 0.0 } else { *v });
    }
    Ok(out)
}

/// Deterministic generator for a named stream under a root seed.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        for name in CATALOG {
            let s = build(name, &BTreeMap::new(), None, None).unwrap();
            assert!(s.lam().node_count() > 0, "{name}");
        }
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            build("nope", &BTreeMap::new(), None, None),
            Err(Error::Input(_))
        ));
        let mut p = BTreeMap::new();
        p.insert("zzz".to_string(), 1.0);
        assert!(matches!(build("doubling", &p, None, None), Err(Error::Input(_))));
        assert!(matches!(
            build("doubling", &BTreeMap::new(), Some(&[4]), None),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn code_counts() {
        let s = build("solenoid", &BTreeMap::new(), Some(&[64]), Some(3)).unwrap();
        assert_eq!(s.lam().codes().len(), 8);
        let t = build("torus", &BTreeMap::new(), None, None).unwrap();
        assert_eq!(t.lam().codes().len(), 4);
        assert_eq!(t.lam().d(), 2);
    }

    #[test]
    fn skew_boxes_map_into_leaf() {
        let (lo, hi) = SKEW_OUTER[0];
        let (lo2, hi2) = SKEW_OUTER[1];
        for i in 0..=40 {
            for j in 0..=40 {
                let z = Complex64::new(lo + (hi - lo) * i as f64 / 40.0, lo2 + (hi2 - lo2) * j as f64 / 40.0);
                let w = z * (z + 1.0);
                assert!(w.re > SKEW_LEAF[0].0 && w.re < SKEW_LEAF[0].1);
                assert!(w.im > SKEW_LEAF[1].0 && w.im < SKEW_LEAF[1].1);
            }
        }
    }

    #[test]
    fn sweeps_escape_and_stay() {
        assert!(skew_forward_sweep(0.05, 0.1, Complex64::new(1.5, 1.5)).is_none());
        let p = skew_forward_sweep(0.05, 0.1, Complex64::new(-0.5, 0.0)).unwrap();
        assert!(p[2].abs() < 0.1);
        let mut rng = stream(1, "henon");
        let q = henon_backward_sweep(Complex64::new(0.01, 0.0), -0.1, &mut rng).unwrap();
        assert!((q[2] * q[2] + q[3] * q[3]).sqrt() < 0.02);
    }
}
