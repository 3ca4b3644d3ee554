//! The graph transform S⁰ in its two variants, the bump-localized S, and the
//! fixed-point iteration.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{Section, Tube};
use crate::dynsys::MapSystem;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Expanded,
    Contracted,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Expanded => "expanded",
            Variant::Contracted => "contracted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub eta: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub fixpoint_tol: f64,
    pub fixpoint_max: usize,
    pub eps_plane: f64,
    pub plane_tol: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            eta: 0.25,
            newton_tol: 1e-12,
            newton_max: 30,
            fixpoint_tol: 1e-11,
            fixpoint_max: 200,
            eps_plane: 0.5,
            plane_tol: 1e-10,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.newton_tol < self.eta) {
            return Err(Error::Input("need 0 < newton_tol < eta".into()));
        }
        if self.newton_max == 0 || self.fixpoint_max == 0 {
            return Err(Error::Input("iteration caps must be positive".into()));
        }
        if !(self.fixpoint_tol > 0.0 && self.eps_plane > 0.0 && self.plane_tol > 0.0) {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The pullback f* on codes and leaf parameters.
pub trait BaseDynamics: Send + Sync {
    fn forward(&self, code: usize, u: &[f64]) -> Result<(usize, Vec<f64>)>;

    fn inverse(&self, _code: usize, _u: &[f64]) -> Result<(usize, Vec<f64>)> {
        Err(Error::Input("base dynamics has no inverse rule".into()))
    }

    fn has_inverse(&self) -> bool {
        false
    }

    /// Depth `N` when `f*` is the shift of a preorbit space truncated at `N`.
    fn truncation_depth(&self) -> Option<usize> {
        None
    }
}

type LeafRule = dyn Fn(usize, &[f64]) -> Result<(usize, Vec<f64>)> + Send + Sync;

#[derive(Clone)]
pub struct FnDynamics {
    fwd: Arc<LeafRule>,
    inv: Option<Arc<LeafRule>>,
    depth: Option<usize>,
}

impl FnDynamics {
    pub fn new(fwd: impl Fn(usize, &[f64]) -> Result<(usize, Vec<f64>)> + Send + Sync + 'static) -> Self {
        Self {
            fwd: Arc::new(fwd),
            inv: None,
            depth: None,
        }
    }

    /// Marks `f*` as a shift on codes of length `depth`.
    pub fn truncated(mut self, depth: usize) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_inverse(
        mut self,
        inv: impl Fn(usize, &[f64]) -> Result<(usize, Vec<f64>)> + Send + Sync + 'static,
    ) -> Self {
        self.inv = Some(Arc::new(inv));
        self
    }

    pub fn identity() -> Self {
        Self::new(|c, u| Ok((c, u.to_vec()))).with_inverse(|c, u| Ok((c, u.to_vec())))
    }
}

impl BaseDynamics for FnDynamics {
    fn forward(&self, code: usize, u: &[f64]) -> Result<(usize, Vec<f64>)> {
        (self.fwd)(code, u)
    }

    fn inverse(&self, code: usize, u: &[f64]) -> Result<(usize, Vec<f64>)> {
        match &self.inv {
            Some(f) => f(code, u),
            None => Err(Error::Input("base dynamics has no inverse rule".into())),
        }
    }

    fn has_inverse(&self) -> bool {
        self.inv.is_some()
    }

    fn truncation_depth(&self) -> Option<usize> {
        self.depth
    }
}

/// Leaf point `(code, u)` a node is linked to by the last transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub code: usize,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Step {
    /// Unbumped S⁰ values; nodes with ρ = 0 keep the input value.
    pub values: Section,
    /// Target leaf point (expanded) or source leaf point (contracted); `None` where ρ = 0.
    pub links: Vec<Option<Link>>,
    pub max_iters: usize,
}

struct NodeSolution {
    v: Vec<f64>,
    link: Link,
    iters: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn accept(res: f64, step: f64, tol: f64) -> bool {
    res <= tol || (step <= 1e-14 && res <= 1e3 * tol)
}

fn solve_square(j: DMatrix<f64>, rhs: &[f64]) -> Option<DVector<f64>> {
    let b = DVector::from_column_slice(rhs);
    j.lu().solve(&b)
}

fn solve_expanded(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    g: usize,
    seed: Option<&Link>,
    cfg: &TransformConfig,
) -> Result<NodeSolution> {
    let lam = &tube.lam;
    let n = tube.n();
    let d = tube.d();
    let k = tube.k();
    let (c, k_idx) = lam.split(g);
    let (mut ct, mut ut) = match seed {
        Some(l) => (l.code, l.u.clone()),
        None => dynamics.forward(c, &lam.params(k_idx))?,
    };
    ct = lam.normalize(ct, &mut ut)?;
    let mut v = s.get(g).to_vec();
    let x = lam.point(g).to_vec();
    let nx = tube.frames.matrix(g);
    let mut y = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut res = vec![0.0; n];
    let mut last_step = f64::INFINITY;
    for it in 0..=cfg.newton_max {
        for i in 0..n {
            y[i] = x[i];
            for j in 0..k {
                y[i] += nx[(i, j)] * v[j];
            }
        }
        sys.eval_into(&y, &mut fy)?;
        let loc = tube.local(ct, &ut, Some(s), true)?;
        ct = loc.code;
        let p = loc.immersed();
        lam.space.delta(&fy, &p, &mut res);
        let r = norm(&res);
        if accept(r, last_step, cfg.newton_tol) {
            if norm(&v) > cfg.eta {
                return Err(Error::Transversality {
                    node: g,
                    msg: format!("fiber solution |v| = {} exceeds eta = {}", norm(&v), cfg.eta),
                });
            }
            return Ok(NodeSolution {
                v,
                link: Link { code: ct, u: ut },
                iters: it,
            });
        }
        if it == cfg.newton_max {
            break;
        }
        let df = sys.jacobian(&y)?;
        let dn = &df * &nx;
        let lt = loc.leaf_derivative(&loc.section, true);
        let mut jm = DMatrix::zeros(n, d + k);
        for i in 0..n {
            for a in 0..d {
                jm[(i, a)] = -lt[(i, a)];
            }
            for j in 0..k {
                jm[(i, d + j)] = dn[(i, j)];
            }
        }
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = solve_square(jm, &neg).ok_or_else(|| Error::Transversality {
            node: g,
            msg: "singular Newton system".into(),
        })?;
        for a in 0..d {
            ut[a] += delta[a];
        }
        for j in 0..k {
            v[j] += delta[d + j];
        }
        last_step = delta.norm();
        if !last_step.is_finite() || norm(&v) > 4.0 * cfg.eta.max(1.0) {
            break;
        }
        ct = lam.normalize(ct, &mut ut).map_err(|e| Error::Transversality {
            node: g,
            msg: format!("target left the leaf domain: {e}"),
        })?;
    }
    Err(Error::Transversality {
        node: g,
        msg: "Newton did not converge".into(),
    })
}

fn solve_contracted(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    g: usize,
    seed: Option<&Link>,
    cfg: &TransformConfig,
) -> Result<NodeSolution> {
    let lam = &tube.lam;
    let n = tube.n();
    let d = tube.d();
    let k = tube.k();
    let (c, k_idx) = lam.split(g);
    let (mut cs, mut us) = match seed {
        Some(l) => (l.code, l.u.clone()),
        None => dynamics.inverse(c, &lam.params(k_idx))?,
    };
    cs = lam.normalize(cs, &mut us)?;
    let mut w = s.get(g).to_vec();
    let x = lam.point(g).to_vec();
    let nx = tube.frames.matrix(g);
    let mut fq = vec![0.0; n];
    let mut target = vec![0.0; n];
    let mut res = vec![0.0; n];
    let mut last_step = f64::INFINITY;
    for it in 0..=cfg.newton_max {
        let loc = tube.local(cs, &us, Some(s), true)?;
        cs = loc.code;
        let q = loc.immersed();
        sys.eval_into(&q, &mut fq)?;
        for i in 0..n {
            target[i] = x[i];
            for j in 0..k {
                target[i] += nx[(i, j)] * w[j];
            }
        }
        lam.space.delta(&fq, &target, &mut res);
        let r = norm(&res);
        if accept(r, last_step, cfg.newton_tol) {
            if norm(&w) > cfg.eta {
                return Err(Error::Transversality {
                    node: g,
                    msg: format!("fiber solution |w| = {} exceeds eta = {}", norm(&w), cfg.eta),
                });
            }
            return Ok(NodeSolution {
                v: w,
                link: Link { code: cs, u: us },
                iters: it,
            });
        }
        if it == cfg.newton_max {
            break;
        }
        let df = sys.jacobian(&q)?;
        let lt = &df * loc.leaf_derivative(&loc.section, true);
        let mut jm = DMatrix::zeros(n, d + k);
        for i in 0..n {
            for a in 0..d {
                jm[(i, a)] = lt[(i, a)];
            }
            for j in 0..k {
                jm[(i, d + j)] = -nx[(i, j)];
            }
        }
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = solve_square(jm, &neg).ok_or_else(|| Error::Transversality {
            node: g,
            msg: "singular Newton system".into(),
        })?;
        for a in 0..d {
            us[a] += delta[a];
        }
        for j in 0..k {
            w[j] += delta[d + j];
        }
        last_step = delta.norm();
        if !last_step.is_finite() || norm(&w) > 4.0 * cfg.eta.max(1.0) {
            break;
        }
        cs = lam.normalize(cs, &mut us).map_err(|e| Error::Transversality {
            node: g,
            msg: format!("source left the leaf domain: {e}"),
        })?;
    }
    Err(Error::Transversality {
        node: g,
        msg: "Newton did not converge".into(),
    })
}

/// One application of S⁰ at every node of the bump support.
pub fn graph_step(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<Step> {
    graph_step_seeded(sys, tube, dynamics, s, variant, None, cfg)
}

/// As [`graph_step`], starting each node's Newton solve from `seeds` when given.
pub fn graph_step_seeded(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    seeds: Option<&[Option<Link>]>,
    cfg: &TransformConfig,
) -> Result<Step> {
    if sys.n() != tube.n() {
        return Err(Error::Input("system and lamination dimensions differ".into()));
    }
    if variant == Variant::Contracted && !dynamics.has_inverse() {
        return Err(Error::Input("contracted transform needs an inverse rule for f*".into()));
    }
    let lam = &tube.lam;
    let total = lam.node_count();
    let solved: Vec<Result<Option<NodeSolution>>> = (0..total)
        .into_par_iter()
        .map(|g| {
            if lam.bump(g).0 == 0.0 {
                return Ok(None);
            }
            let seed = seeds.and_then(|l| l[g].as_ref());
            match variant {
                Variant::Expanded => solve_expanded(sys, tube, dynamics, s, g, seed, cfg).map(Some),
                Variant::Contracted => solve_contracted(sys, tube, dynamics, s, g, seed, cfg).map(Some),
            }
        })
        .collect();
    let mut values = s.clone();
    let mut links = Vec::with_capacity(total);
    let mut max_iters = 0;
    for (g, r) in solved.into_iter().enumerate() {
        match r? {
            Some(sol) => {
                values.get_mut(g).copy_from_slice(&sol.v);
                max_iters = max_iters.max(sol.iters);
                links.push(Some(sol.link));
            }
            None => links.push(None),
        }
    }
    Ok(Step {
        values,
        links,
        max_iters,
    })
}

pub fn transform_expanded(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    cfg: &TransformConfig,
) -> Result<Section> {
    graph_step(sys, tube, dynamics, s, Variant::Expanded, cfg).map(|st| st.values)
}

pub fn transform_contracted(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    cfg: &TransformConfig,
) -> Result<Section> {
    graph_step(sys, tube, dynamics, s, Variant::Contracted, cfg).map(|st| st.values)
}

/// `ρ·s_new`, which vanishes outside the bump support.
pub fn apply_bump(tube: &Tube, s_new: &Section) -> Section {
    let lam = &tube.lam;
    let mut out = s_new.clone();
    for g in 0..lam.node_count() {
        let rho = lam.bump(g).0;
        if rho != 1.0 {
            for v in out.get_mut(g) {
                *v *= rho;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub sup_distance: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonStats {
    pub max_iters: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub scenario: String,
    pub variant: Variant,
    pub iterations: Vec<IterationRecord>,
    pub final_residual: f64,
    pub newton: NewtonStats,
    pub converged: bool,
    /// Stopped after `N` contracted steps on a depth-`N` preorbit space.
    #[serde(default)]
    pub truncated: bool,
}

impl TransformReport {
    pub fn last_ratio(&self) -> Option<f64> {
        self.iterations.iter().rev().find_map(|r| r.ratio)
    }
}

pub const NON_CONTRACTION_RUN: usize = 5;

pub fn iterate_to_fixed_point(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s0: &Section,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<(Section, TransformReport)> {
    cfg.validate()?;
    let mut report = TransformReport {
        scenario: sys.name.clone(),
        variant,
        iterations: Vec::new(),
        final_residual: 0.0,
        newton: NewtonStats::default(),
        converged: false,
        truncated: false,
    };
    if tube.k() == 0 {
        report.iterations.push(IterationRecord {
            k: 1,
            sup_distance: 0.0,
            ratio: None,
        });
        report.converged = true;
        return Ok((s0.clone(), report));
    }
    let mut s = s0.clone();
    let mut prev: Option<f64> = None;
    let mut run = 0;
    let mut ratios = Vec::new();
    let mut links: Option<Vec<Option<Link>>> = None;
    // A depth-N code records N preimages; further contracted steps would only
    // feed in the invented tail symbols of the inverse shift.
    let depth_cap = match (variant, dynamics.truncation_depth()) {
        (Variant::Contracted, Some(n)) if n > 0 => Some(n),
        _ => None,
    };
    for it in 1..=cfg.fixpoint_max {
        let step = graph_step_seeded(sys, tube, dynamics, &s, variant, links.as_deref(), cfg)?;
        links = Some(step.links.clone());
        report.newton.max_iters = report.newton.max_iters.max(step.max_iters);
        let next = apply_bump(tube, &step.values);
        let dist = next.sup_distance(&s);
        let ratio = prev.and_then(|p| if p > 0.0 { Some(dist / p) } else { None });
        report.iterations.push(IterationRecord {
            k: it,
            sup_distance: dist,
            ratio,
        });
        s = next;
        if dist <= cfg.fixpoint_tol {
            report.converged = true;
            break;
        }
        if depth_cap == Some(it) {
            report.converged = true;
            report.truncated = true;
            break;
        }
        if let Some(r) = ratio {
            ratios.push(r);
            if r >= 1.0 {
                run += 1;
                if run >= NON_CONTRACTION_RUN {
                    return Err(Error::NonContraction {
                        ratios: ratios[ratios.len() - NON_CONTRACTION_RUN..].to_vec(),
                    });
                }
            } else {
                run = 0;
            }
        }
        prev = Some(dist);
    }
    report.final_residual = residual_seeded(sys, tube, dynamics, &s, variant, links.as_deref(), cfg)?;
    Ok((s, report))
}

/// Sup over nodes with ρ = 1 of `|S⁰(s) − s|`.
pub fn invariance_residual(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<f64> {
    residual_seeded(sys, tube, dynamics, s, variant, None, cfg)
}

fn residual_seeded(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    seeds: Option<&[Option<Link>]>,
    cfg: &TransformConfig,
) -> Result<f64> {
    if tube.k() == 0 {
        return Ok(0.0);
    }
    let step = graph_step_seeded(sys, tube, dynamics, s, variant, seeds, cfg)?;
    let lam = &tube.lam;
    let mut worst: f64 = 0.0;
    for g in 0..lam.node_count() {
        if lam.bump(g).0 == 1.0 {
            let d = step
                .values
                .get(g)
                .iter()
                .zip(s.get(g))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Projection of an ambient point onto the immersed section near `(code, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub code: usize,
    pub u: Vec<f64>,
    /// Fiber coordinate `w` with `i(u) + N(u)·w = p`.
    pub fiber: Vec<f64>,
    /// `|w − s(u)|`, the distance to the immersed section along the fiber.
    pub distance: f64,
}

/// Newton solve of `i(u) + N(u)·w = p` starting at `(code, u)` with `w = s(u)`.
pub fn project_onto_immersion(
    tube: &Tube,
    s: &Section,
    code: usize,
    u0: &[f64],
    p: &[f64],
    cfg: &TransformConfig,
) -> Result<Projection> {
    let lam = &tube.lam;
    let n = tube.n();
    let d = tube.d();
    let k = tube.k();
    let mut u = u0.to_vec();
    let mut c = lam.normalize(code, &mut u)?;
    let mut w = tube.local(c, &u, Some(s), false)?.section;
    let mut res = vec![0.0; n];
    let mut last_step = f64::INFINITY;
    for _ in 0..=cfg.newton_max {
        let loc = tube.local(c, &u, Some(s), true)?;
        c = loc.code;
        let q = loc.offset(&w);
        lam.space.delta(&q, p, &mut res);
        let r = norm(&res);
        if accept(r, last_step, cfg.newton_tol) {
            let dist = w
                .iter()
                .zip(&loc.section)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            return Ok(Projection {
                code: c,
                u,
                fiber: w,
                distance: dist,
            });
        }
        let lt = loc.leaf_derivative(&w, false);
        let mut jm = DMatrix::zeros(n, d + k);
        for i in 0..n {
            for a in 0..d {
                jm[(i, a)] = lt[(i, a)];
            }
            for j in 0..k {
                jm[(i, d + j)] = loc.frame[(i, j)];
            }
        }
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = solve_square(jm, &neg).ok_or_else(|| Error::Transversality {
            node: c,
            msg: "singular projection system".into(),
        })?;
        for a in 0..d {
            u[a] += delta[a];
        }
        for j in 0..k {
            w[j] += delta[d + j];
        }
        last_step = delta.norm();
        if !last_step.is_finite() {
            break;
        }
        c = lam.normalize(c, &mut u)?;
    }
    Err(Error::Transversality {
        node: code,
        msg: "projection onto the immersion did not converge".into(),
    })
}

/// `f'*(x)`: the leaf point near `f*(x)` whose fiber contains `f'(i'(x))`.
pub fn induced_pullback(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    g: usize,
    cfg: &TransformConfig,
) -> Result<(usize, Vec<f64>, f64)> {
    let lam = &tube.lam;
    let (c, k) = lam.split(g);
    let (ct, ut) = dynamics.forward(c, &lam.params(k))?;
    let y = sys.eval(&tube.node_immersion(g, s))?;
    let pr = project_onto_immersion(tube, s, ct, &ut, &y, cfg).map_err(|e| match e {
        Error::Transversality { msg, .. } => Error::Transversality { node: g, msg },
        Error::Domain(msg) => Error::Transversality { node: g, msg },
        other => other,
    })?;
    Ok((pr.code, pr.u, pr.distance))
}

/// The induced pullback at every node, with the diagram-commutation residual.
pub fn pullback_table(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    cfg: &TransformConfig,
    only_core: bool,
) -> Result<(Vec<Option<Link>>, f64)> {
    let lam = &tube.lam;
    let rows: Vec<Result<Option<(Link, f64)>>> = (0..lam.node_count())
        .into_par_iter()
        .map(|g| {
            if only_core && lam.bump(g).0 < 1.0 {
                return Ok(None);
            }
            let (c, u, r) = induced_pullback(sys, tube, dynamics, s, g, cfg)?;
            Ok(Some((Link { code: c, u }, r)))
        })
        .collect();
    let mut out = Vec::with_capacity(rows.len());
    let mut worst: f64 = 0.0;
    for r in rows {
        match r? {
            Some((l, res)) => {
                worst = worst.max(res);
                out.push(Some(l));
            }
            None => out.push(None),
        }
    }
    Ok((out, worst))
}
