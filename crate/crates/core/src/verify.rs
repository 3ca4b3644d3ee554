//! Injectivity margins, shadowing conclusions and containment of bounded orbits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{Section, Tube};
use crate::dynsys::MapSystem;
use crate::error::{Error, Result};
use crate::graph_transform::{project_onto_immersion, BaseDynamics, TransformConfig};
use crate::lamination::{AxisKind, DiscreteLamination};

pub type Evaluator<'a> = &'a (dyn Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync);

/// Margins at or below this value flag a non-injective immersion.
pub const NON_INJECTIVE: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LeafPoint {
    pub code: usize,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Margin {
    pub eps0: f64,
    pub margin: f64,
    pub pair: Option<(LeafPoint, LeafPoint)>,
    pub lamination_distance: f64,
    pub samples: usize,
    pub non_injective: bool,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn sample_nodes(lam: &DiscreteLamination, count: usize, seed: u64) -> Vec<usize> {
    let total = lam.node_count();
    let mut idx: Vec<usize> = (0..total).collect();
    if count < total {
        let mut rng = rng_for(seed, 0x5a);
        idx.shuffle(&mut rng);
        idx.truncate(count);
        idx.sort_unstable();
    }
    idx
}

/// Parameter offset along `axis` (sign `dir`) reaching leaf distance `eps`, if the leaf allows it.
fn boundary_partner(
    lam: &DiscreteLamination,
    code: usize,
    u: &[f64],
    axis: usize,
    dir: f64,
    eps: f64,
) -> Option<Vec<f64>> {
    let scale = lam.metric_scale()[axis].max(1e-300);
    let cap = match lam.axes()[axis].kind {
        AxisKind::Angle => std::f64::consts::PI,
        AxisKind::Line { lo, hi } => {
            if dir > 0.0 {
                hi - u[axis]
            } else {
                u[axis] - lo
            }
        }
    };
    let dist = |t: f64| -> Option<f64> {
        let mut v = u.to_vec();
        v[axis] += dir * t;
        lam.leaf_distance(code, u, &v).ok()
    };
    if dist(cap)? < eps {
        return None;
    }
    let mut t = (eps / scale).min(cap);
    for _ in 0..12 {
        let dt = dist(t)?;
        if dt <= 0.0 {
            return None;
        }
        let next = (t * eps / dt).min(cap);
        if (next - t).abs() <= 1e-14 * t {
            t = next;
            break;
        }
        t = next;
    }
    let mut v = u.to_vec();
    v[axis] += dir * t;
    // Nudge outward until the separation is at least eps.
    let mut guard = 0;
    while dist(t)? < eps && guard < 64 {
        t *= 1.0 + 1e-13;
        v[axis] = u[axis] + dir * t;
        guard += 1;
    }
    Some(v)
}

/// `min |i(x) − i(y)|` over sampled pairs with lamination distance at least `eps0`.
pub fn injectivity_margin(
    lam: &DiscreteLamination,
    imm: Evaluator<'_>,
    eps0: f64,
    sample_count: usize,
    seed: u64,
) -> Result<Margin> {
    if !(eps0 > 0.0) {
        return Err(Error::Input("eps0 must be positive".into()));
    }
    if let crate::lamination::Transversal::Preorbit(s) = &lam.transversal {
        let res = 0.5f64.powi(s.depth as i32);
        if eps0 <= res {
            return Err(Error::Input(format!(
                "eps0 = {eps0} is below the truncation resolution {res}"
            )));
        }
    }
    let nodes = sample_nodes(lam, sample_count.max(2), seed);
    let pts: Vec<LeafPoint> = nodes
        .iter()
        .map(|&g| {
            let (code, u) = lam.node_params(g);
            LeafPoint { code, u }
        })
        .collect();
    let imgs: Vec<Vec<f64>> = pts.iter().map(|p| imm(p.code, &p.u)).collect::<Result<_>>()?;
    let space = &lam.space;
    let d = lam.d();

    // Same-leaf pairs at exactly the separation eps0.
    let boundary: Vec<Option<(f64, LeafPoint, LeafPoint, f64)>> = pts
        .par_iter()
        .zip(imgs.par_iter())
        .map(|(p, ip)| {
            let mut best: Option<(f64, LeafPoint, LeafPoint, f64)> = None;
            for a in 0..d {
                for dir in [1.0, -1.0] {
                    let Some(v) = boundary_partner(lam, p.code, &p.u, a, dir, eps0) else {
                        continue;
                    };
                    let Ok(iq) = imm(p.code, &v) else { continue };
                    let dist = space.distance(ip, &iq);
                    if best.as_ref().map_or(true, |b| dist < b.0) {
                        let ld = lam.leaf_distance(p.code, &p.u, &v).unwrap_or(eps0);
                        best = Some((dist, p.clone(), LeafPoint { code: p.code, u: v }, ld));
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(f64, LeafPoint, LeafPoint, f64)> = None;
    for b in boundary.into_iter().flatten() {
        if best.as_ref().map_or(true, |x| b.0 < x.0) {
            best = Some(b);
        }
    }

    // Node pairs by a sweep along one ambient line coordinate.
    let sweep_axis = (0..lam.n()).find(|&i| !space.is_angle(i));
    let mut order: Vec<usize> = (0..pts.len()).collect();
    if let Some(ax) = sweep_axis {
        order.sort_by(|&a, &b| imgs[a][ax].partial_cmp(&imgs[b][ax]).unwrap());
    }
    let mut bound = best.as_ref().map_or(f64::INFINITY, |b| b.0);
    let mut candidates: Vec<(f64, usize, usize, f64)> = Vec::new();
    for oi in 0..order.len() {
        let i = order[oi];
        for &j in &order[oi + 1..] {
            if let Some(ax) = sweep_axis {
                if imgs[j][ax] - imgs[i][ax] >= bound {
                    break;
                }
            }
            let dist = space.distance(&imgs[i], &imgs[j]);
            if dist >= bound {
                continue;
            }
            let (p, q) = (&pts[i], &pts[j]);
            let ld = if p.code == q.code && dist > eps0 {
                // chords never exceed arclength
                f64::INFINITY
            } else {
                lam.lamination_distance(p.code, &p.u, q.code, &q.u)?
            };
            if ld > eps0 {
                bound = dist;
                candidates.push((dist, i, j, ld));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    candidates.truncate(8);

    let refined: Vec<Option<(f64, LeafPoint, LeafPoint, f64)>> = candidates
        .par_iter()
        .map(|&(dist, i, j, ld)| {
            let start = (dist, pts[i].clone(), pts[j].clone(), ld);
            Some(refine_pair(lam, imm, eps0, start))
        })
        .collect();
    for r in refined.into_iter().flatten() {
        if best.as_ref().map_or(true, |x| r.0 < x.0) {
            best = Some(r);
        }
    }
    let (margin, pair, ld) = match best {
        Some((m, p, q, ld)) => (m, Some((p, q)), ld),
        None => (f64::INFINITY, None, f64::INFINITY),
    };
    Ok(Margin {
        eps0,
        margin,
        pair,
        lamination_distance: ld,
        samples: pts.len(),
        non_injective: margin <= NON_INJECTIVE,
    })
}

/// Damped Gauss–Newton descent of `|i(x) − i(y)|` keeping the pair `eps0`-separated.
fn refine_pair(
    lam: &DiscreteLamination,
    imm: Evaluator<'_>,
    eps0: f64,
    start: (f64, LeafPoint, LeafPoint, f64),
) -> (f64, LeafPoint, LeafPoint, f64) {
    let d = lam.d();
    let n = lam.n();
    let space = &lam.space;
    let mut cur = start;
    let residual = |p: &LeafPoint, q: &LeafPoint| -> Option<Vec<f64>> {
        let a = imm(p.code, &p.u).ok()?;
        let b = imm(q.code, &q.u).ok()?;
        let mut r = vec![0.0; n];
        space.delta(&b, &a, &mut r);
        Some(r)
    };
    let mut mu = 1e-6;
    for _ in 0..40 {
        let Some(r) = residual(&cur.1, &cur.2) else { break };
        let h = 1e-7;
        let mut jm = nalgebra::DMatrix::zeros(n, 2 * d);
        let mut ok = true;
        for c in 0..2 * d {
            let (mut p, mut q) = (cur.1.clone(), cur.2.clone());
            if c < d {
                p.u[c] += h;
            } else {
                q.u[c - d] += h;
            }
            match residual(&p, &q) {
                Some(rp) => {
                    for i in 0..n {
                        jm[(i, c)] = (rp[i] - r[i]) / h;
                    }
                }
                None => ok = false,
            }
        }
        if !ok {
            break;
        }
        let rv = nalgebra::DVector::from_column_slice(&r);
        let jtj = jm.transpose() * &jm;
        let jtr = jm.transpose() * rv;
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for c in 0..2 * d {
                a[(c, c)] += mu * (1.0 + jtj[(c, c)]);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let (mut p, mut q) = (cur.1.clone(), cur.2.clone());
            for c in 0..d {
                p.u[c] += step[c];
                q.u[c] += step[d + c];
            }
            let (Ok(cp), Ok(cq)) = (lam.normalize(p.code, &mut p.u), lam.normalize(q.code, &mut q.u)) else {
                mu *= 10.0;
                continue;
            };
            p.code = cp;
            q.code = cq;
            let Some(rn) = residual(&p, &q) else {
                mu *= 10.0;
                continue;
            };
            let dist = rn.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ld = lam.lamination_distance(p.code, &p.u, q.code, &q.u).unwrap_or(0.0);
            if dist < cur.0 && ld > eps0 {
                cur = (dist, p, q, ld);
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved || cur.0 <= 1e-14 {
            break;
        }
    }
    cur
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowReport {
    pub z0: LeafPoint,
    pub residual: f64,
    pub leaf_distance: f64,
    pub bound: f64,
    pub eps: f64,
    pub ok: bool,
}

/// `f'*(x)` by projecting `f'(i'(x))` onto the immersion near `f*(x)`.
pub fn induced_image(
    sys: &MapSystem,
    tube: &Tube,
    s: &Section,
    dynamics: &dyn BaseDynamics,
    x: &LeafPoint,
    cfg: &TransformConfig,
) -> Result<LeafPoint> {
    let (c, u) = dynamics.forward(x.code, &x.u)?;
    let y = sys.eval(&tube.section_to_immersion(s).eval(x.code, &x.u)?)?;
    let pr = project_onto_immersion(tube, s, c, &u, &y, cfg)?;
    Ok(LeafPoint { code: pr.code, u: pr.u })
}

/// Checks the closeness hypotheses; `backward` reads both sequences as preorbits.
#[allow(clippy::too_many_arguments)]
pub fn check_hypotheses(
    sys: &MapSystem,
    tube: &Tube,
    s: &Section,
    dynamics: &dyn BaseDynamics,
    pseudo: &[LeafPoint],
    ambient: &[Vec<f64>],
    eps: f64,
    backward: bool,
    cfg: &TransformConfig,
) -> Result<()> {
    if pseudo.len() < 10 || ambient.len() != pseudo.len() {
        return Err(Error::Hypothesis(
            "need two sequences of equal length at least 10".into(),
        ));
    }
    let lam = &tube.lam;
    let imm = tube.section_to_immersion(s);
    let space = &lam.space;
    for k in 0..pseudo.len() {
        let p = imm.eval(pseudo[k].code, &pseudo[k].u)?;
        let gap = space.distance(&p, &ambient[k]);
        if gap > eps {
            return Err(Error::Hypothesis(format!(
                "ambient point {k} is {gap:e} from the immersion"
            )));
        }
    }
    for k in 0..pseudo.len() - 1 {
        let (from, to) = if backward { (k + 1, k) } else { (k, k + 1) };
        let img = induced_image(sys, tube, s, dynamics, &pseudo[from], cfg)?;
        let jump = lam.lamination_distance(img.code, &img.u, pseudo[to].code, &pseudo[to].u)?;
        if jump > eps {
            return Err(Error::Hypothesis(format!("plaque jump {jump:e} at step {k}")));
        }
        let fy = sys.eval(&ambient[from])?;
        let step = space.distance(&fy, &ambient[to]);
        if step > eps {
            return Err(Error::Hypothesis(format!("ambient step {k} misses by {step:e}")));
        }
    }
    Ok(())
}

/// Largest of `0.2·2^{-j}` passing `check`.
pub fn largest_passing_eps(check: impl Fn(f64) -> Result<()>) -> Result<f64> {
    let mut eps = 0.2;
    let mut last = None;
    for _ in 0..40 {
        match check(eps) {
            Ok(()) => return Ok(eps),
            Err(e) => last = Some(e),
        }
        eps *= 0.5;
    }
    Err(last.unwrap_or_else(|| Error::Hypothesis("no admissible eps".into())))
}

#[allow(clippy::too_many_arguments)]
fn shadow(
    sys: &MapSystem,
    tube: &Tube,
    s: &Section,
    dynamics: &dyn BaseDynamics,
    pseudo: &[LeafPoint],
    ambient: &[Vec<f64>],
    eps: f64,
    lambda: f64,
    backward: bool,
    cfg: &TransformConfig,
) -> Result<ShadowReport> {
    check_hypotheses(sys, tube, s, dynamics, pseudo, ambient, eps, backward, cfg)?;
    let lam = &tube.lam;
    let x0 = &pseudo[0];
    let y0 = &ambient[0];
    let pr = project_onto_immersion(tube, s, x0.code, &x0.u, y0, cfg)
        .map_err(|e| Error::Containment(format!("projection of y0 failed: {e}")))?;
    let z = tube.section_to_immersion(s).eval(pr.code, &pr.u)?;
    let residual = lam.space.distance(&z, y0);
    let leaf_distance = lam.lamination_distance(pr.code, &pr.u, x0.code, &x0.u)?;
    let bound = eps / (1.0 - lambda.clamp(0.0, 0.99));
    let ok = residual <= 10.0 * cfg.newton_tol && leaf_distance <= bound;
    Ok(ShadowReport {
        z0: LeafPoint { code: pr.code, u: pr.u },
        residual,
        leaf_distance,
        bound,
        eps,
        ok,
    })
}

/// Shadowing of an ambient f'-orbit by the immersed lamination along a plaque pseudo-orbit.
#[allow(clippy::too_many_arguments)]
pub fn shadow_check_forward(
    sys: &MapSystem,
    tube: &Tube,
    s: &Section,
    dynamics: &dyn BaseDynamics,
    pseudo: &[LeafPoint],
    ambient: &[Vec<f64>],
    eps: f64,
    lambda: f64,
    cfg: &TransformConfig,
) -> Result<ShadowReport> {
    shadow(sys, tube, s, dynamics, pseudo, ambient, eps, lambda, false, cfg)
}

/// Preorbit version: `pseudo[k+1]` and `ambient[k+1]` precede index `k`.
#[allow(clippy::too_many_arguments)]
pub fn shadow_check_backward(
    sys: &MapSystem,
    tube: &Tube,
    s: &Section,
    dynamics: &dyn BaseDynamics,
    pseudo: &[LeafPoint],
    ambient: &[Vec<f64>],
    eps: f64,
    lambda: f64,
    cfg: &TransformConfig,
) -> Result<ShadowReport> {
    shadow(sys, tube, s, dynamics, pseudo, ambient, eps, lambda, true, cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainmentReport {
    pub bounded: usize,
    pub within: usize,
    pub unresolved: usize,
    pub fraction: f64,
    pub worst: f64,
    pub tol: f64,
}

pub type Candidates<'a> = &'a (dyn Fn(&[f64]) -> Vec<(usize, Vec<f64>)> + Sync);

/// Distance of each point to the immersed section, minimized over candidate leaf points.
pub fn containment(
    tube: &Tube,
    s: &Section,
    points: &[Vec<f64>],
    candidates: Candidates<'_>,
    tol: f64,
    cfg: &TransformConfig,
) -> ContainmentReport {
    let imm = tube.section_to_immersion(s);
    let dists: Vec<Option<f64>> = points
        .par_iter()
        .map(|p| {
            let mut best: Option<f64> = None;
            for (c, u) in candidates(p) {
                let Ok(pr) = project_onto_immersion(tube, s, c, &u, p, cfg) else {
                    continue;
                };
                let Ok(z) = imm.eval(pr.code, &pr.u) else { continue };
                let dist = tube.lam.space.distance(&z, p);
                best = Some(best.map_or(dist, |b: f64| b.min(dist)));
            }
            best
        })
        .collect();
    let mut rep = ContainmentReport {
        bounded: points.len(),
        within: 0,
        unresolved: 0,
        fraction: 0.0,
        worst: 0.0,
        tol,
    };
    for d in dists {
        match d {
            Some(d) => {
                if d <= tol {
                    rep.within += 1;
                }
                rep.worst = rep.worst.max(d);
            }
            None => rep.unresolved += 1,
        }
    }
    rep.fraction = if rep.bounded == 0 {
        1.0
    } else {
        rep.within as f64 / rep.bounded as f64
    };
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeConfig {
    pub eps: f64,
    pub eta: f64,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    /// Collapse threshold for the terminal profile value.
    pub collapse_below: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficientCheck {
    pub delta: Option<f64>,
    pub diameters: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansivenessReport {
    /// `profile[n]`: largest root distance among pairs still ε-close after `n` steps.
    pub profile: Vec<f64>,
    pub kept: usize,
    pub trials: usize,
    pub collapsed: bool,
    pub verdict: String,
    pub sufficient: SufficientCheck,
}

fn random_leaf_point(lam: &DiscreteLamination, rng: &mut ChaCha8Rng) -> LeafPoint {
    let code = rng.gen_range(0..lam.codes().len());
    let u = lam
        .axes()
        .iter()
        .map(|a| match a.kind {
            AxisKind::Angle => rng.gen_range(0.0..std::f64::consts::TAU),
            AxisKind::Line { lo, hi } => {
                let m = 0.1 * (hi - lo);
                rng.gen_range(lo + m..hi - m)
            }
        })
        .collect();
    LeafPoint { code, u }
}

fn jump(lam: &DiscreteLamination, p: &LeafPoint, eta: f64, rng: &mut ChaCha8Rng) -> Result<LeafPoint> {
    let mut q = p.clone();
    let d = lam.d().max(1) as f64;
    for a in 0..lam.d() {
        let scale = lam.metric_scale()[a].max(1e-300);
        q.u[a] += rng.gen_range(-1.0..1.0) * eta / (scale * d.sqrt());
    }
    q.code = lam.normalize(q.code, &mut q.u)?;
    Ok(q)
}

/// Random pseudo-orbit pairs under the pullback, and a plaque-growth search.
pub fn plaque_expansiveness_probe(
    lam: &DiscreteLamination,
    dynamics: &dyn BaseDynamics,
    cfg: &ProbeConfig,
) -> Result<ExpansivenessReport> {
    if !(cfg.eta <= cfg.eps) || !(cfg.eps > 0.0) || cfg.steps == 0 {
        return Err(Error::Input("need 0 < eta <= eps and steps > 0".into()));
    }
    let trials: Vec<Option<(f64, usize)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(cfg.seed, t as u64 + 1);
            let x0 = random_leaf_point(lam, &mut rng);
            let mut y0 = x0.clone();
            if lam.codes().len() > 1 && rng.gen_bool(0.5) {
                y0.code = rng.gen_range(0..lam.codes().len());
            }
            let r = cfg.eps * 10f64.powf(-6.0 * rng.gen::<f64>());
            let y0 = jump(lam, &y0, r, &mut rng).ok()?;
            let root = lam.lamination_distance(x0.code, &x0.u, y0.code, &y0.u).ok()?;
            if root > cfg.eps {
                return Some((root, 0));
            }
            let (mut x, mut y) = (x0, y0);
            let mut survived = 0;
            for _ in 0..cfg.steps {
                let (cx, ux) = dynamics.forward(x.code, &x.u).ok()?;
                let (cy, uy) = dynamics.forward(y.code, &y.u).ok()?;
                x = jump(lam, &LeafPoint { code: cx, u: ux }, cfg.eta, &mut rng).ok()?;
                y = jump(lam, &LeafPoint { code: cy, u: uy }, cfg.eta, &mut rng).ok()?;
                let dist = lam.lamination_distance(x.code, &x.u, y.code, &y.u).ok()?;
                if dist > cfg.eps {
                    break;
                }
                survived += 1;
            }
            Some((root, survived + 1))
        })
        .collect();
    let mut profile = vec![0.0f64; cfg.steps + 1];
    let mut kept = 0;
    for (root, levels) in trials.into_iter().flatten() {
        if levels == cfg.steps + 1 {
            kept += 1;
        }
        for p in profile.iter_mut().take(levels) {
            *p = p.max(root);
        }
    }
    let collapsed = profile[cfg.steps] < cfg.collapse_below;
    let sufficient = sufficient_condition(lam, dynamics, cfg)?;
    Ok(ExpansivenessReport {
        profile,
        kept,
        trials: cfg.trials,
        collapsed,
        verdict: if collapsed { "collapsed" } else { "inconclusive" }.into(),
        sufficient,
    })
}

/// Largest `δ = ε·2^{-j}` with `f*ⁿ(plaque_δ(x))` inside the ε-plaque of `f*ⁿ(x)` for `n ≤ steps`.
fn sufficient_condition(
    lam: &DiscreteLamination,
    dynamics: &dyn BaseDynamics,
    cfg: &ProbeConfig,
) -> Result<SufficientCheck> {
    let mut rng = rng_for(cfg.seed, 0);
    let roots: Vec<LeafPoint> = (0..8).map(|_| random_leaf_point(lam, &mut rng)).collect();
    let diameters_for = |delta: f64| -> Option<Vec<f64>> {
        let mut diam = vec![0.0f64; cfg.steps + 1];
        for x0 in &roots {
            for a in 0..lam.d() {
                for dir in [1.0, -1.0] {
                    let mut y = x0.clone();
                    y.u[a] += dir * delta / lam.metric_scale()[a].max(1e-300);
                    y.code = lam.normalize(y.code, &mut y.u).ok()?;
                    let mut x = x0.clone();
                    for slot in diam.iter_mut() {
                        let dist = lam.lamination_distance(x.code, &x.u, y.code, &y.u).ok()?;
                        *slot = slot.max(dist);
                        let (cx, ux) = dynamics.forward(x.code, &x.u).ok()?;
                        let (cy, uy) = dynamics.forward(y.code, &y.u).ok()?;
                        x = LeafPoint { code: cx, u: ux };
                        y = LeafPoint { code: cy, u: uy };
                        x.code = lam.normalize(x.code, &mut x.u).ok()?;
                        y.code = lam.normalize(y.code, &mut y.u).ok()?;
                    }
                }
            }
        }
        Some(diam)
    };
    let mut delta = cfg.eps;
    for _ in 0..40 {
        if let Some(diam) = diameters_for(delta) {
            if diam.iter().all(|v| *v <= cfg.eps) {
                return Ok(SufficientCheck {
                    delta: Some(delta),
                    diameters: diam,
                    pass: true,
                });
            }
        }
        delta *= 0.5;
    }
    Ok(SufficientCheck {
        delta: None,
        diameters: Vec::new(),
        pass: false,
    })
}
