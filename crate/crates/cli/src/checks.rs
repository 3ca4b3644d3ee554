//! Configured assertions over a computed section.

use crate::config::{Check, Resolved};
use crate::report::{error_info, CheckResult};
use lamina::bundle::tangent_planes_fd;
use lamina::complex::{holomorphy_residual_section, j_invariance_residual};
use lamina::dynsys::wrap_pi;
use lamina::graph_transform::{invariance_residual, iterate_to_fixed_point, pullback_table};
use lamina::hyperbolic::persist_hyperbolic;
use lamina::scenarios::{stream, Scenario};
use lamina::tangent::iterate_plane_field;
use lamina::verify::{
    check_hypotheses, containment, induced_image, injectivity_margin, largest_passing_eps, plaque_expansiveness_probe,
    shadow_check_backward, shadow_check_forward, LeafPoint, ProbeConfig,
};
use lamina::{MapSystem, PlaneField, Section, TransformConfig};
use rand::seq::SliceRandom;
use serde_json::{json, Map, Value};

use crate::config::PipelineName;

pub const INVARIANCE_TOL: f64 = 1e-8;
pub const UNPERTURBED_TOL: f64 = 1e-11;
pub const PLANE_TOL: f64 = 1e-4;
pub const COMMUTATION_TOL: f64 = 1e-8;
pub const CONTAINMENT_TOL: f64 = 1e-3;
pub const CONTAINMENT_FRACTION: f64 = 0.99;
pub const CONTAINMENT_DRAWS: usize = 2000;
pub const SHADOW_RESIDUAL: f64 = 1e-10;
pub const ORBIT_LEN: usize = 12;

/// Pipeline by-products some checks reuse.
#[derive(Default)]
pub struct Extras {
    pub planes: Option<PlaneField>,
    pub commutation: Option<f64>,
    pub family: Option<Value>,
}

pub struct Ctx<'a> {
    pub r: &'a Resolved,
    pub s: &'a Section,
    pub seed: u64,
    pub extras: &'a Extras,
}

impl Ctx<'_> {
    fn sc(&self) -> &Scenario {
        &self.r.scenario
    }

    fn cfg(&self) -> &TransformConfig {
        &self.r.cfg
    }
}

fn result(name: Check, pass: bool, value: Option<f64>, tolerance: Option<f64>, detail: Value) -> CheckResult {
    CheckResult {
        name: name.as_str().into(),
        pass,
        value: value.filter(|v| v.is_finite()),
        tolerance,
        detail,
    }
}

fn failed(name: Check, e: &lamina::Error) -> CheckResult {
    result(name, false, None, None, json!({ "error": error_info(e) }))
}

/// Runs `checks` in order; the second value collects the verification block.
pub fn run_checks(ctx: &Ctx<'_>, checks: &[Check]) -> (Vec<CheckResult>, Value) {
    let mut out = Vec::new();
    let mut verification = Map::new();
    for &c in checks {
        let r = match one(ctx, c, &mut verification) {
            Ok(r) => r,
            Err(e) => failed(c, &e),
        };
        out.push(r);
    }
    let v = if verification.is_empty() {
        Value::Null
    } else {
        Value::Object(verification)
    };
    (out, v)
}

fn one(ctx: &Ctx<'_>, c: Check, verification: &mut Map<String, Value>) -> lamina::Result<CheckResult> {
    let sc = ctx.sc();
    let cfg = ctx.cfg();
    let tube = &sc.tube;
    match c {
        Check::Invariance => {
            let value = if ctx.r.pipeline == PipelineName::Hyperbolic {
                pullback_table(&sc.sys, tube, sc.dynamics.as_ref(), ctx.s, cfg, true)?.1
            } else {
                invariance_residual(&sc.sys, tube, sc.dynamics.as_ref(), ctx.s, sc.variant(), cfg)?
            };
            // On a depth-N preorbit space the section is the N-step truncation.
            let tol = match (sc.variant(), sc.dynamics.truncation_depth()) {
                (lamina::Variant::Contracted, Some(n)) if n > 0 => INVARIANCE_TOL + 0.5f64.powi(n as i32),
                _ => INVARIANCE_TOL,
            };
            Ok(result(c, value <= tol, Some(value), Some(tol), Value::Null))
        }
        Check::Unperturbed => unperturbed(ctx),
        Check::Planes => {
            let own;
            let planes = match &ctx.extras.planes {
                Some(p) => p,
                None => {
                    own = iterate_plane_field(&sc.sys, tube, sc.dynamics.as_ref(), ctx.s, sc.variant(), cfg)?.0;
                    &own
                }
            };
            let fd = tangent_planes_fd(tube, ctx.s)?;
            let lam = &tube.lam;
            let mut worst: f64 = 0.0;
            for g in 0..lam.node_count() {
                if lam.bump(g).0 == 1.0 {
                    for (a, b) in planes.get(g).iter().zip(fd.get(g)) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            Ok(result(c, worst <= PLANE_TOL, Some(worst), Some(PLANE_TOL), Value::Null))
        }
        Check::Hyperbolicity => {
            let e = sc.estimate(1.0)?;
            let detail = json!({ "r_max": e.r_max, "samples": e.samples, "lambda_c0": e.lambda_at(0.0) });
            verification.insert("hyperbolicity".into(), serde_json::to_value(&e).unwrap_or(Value::Null));
            Ok(result(c, e.hyperbolic, Some(e.lambda), Some(1.0), detail))
        }
        Check::Injectivity => {
            let eps0 = 4.0 * 0.5f64.powi(sc.resolution_depth() as i32);
            let imm = tube.section_to_immersion(ctx.s);
            let ev = |code: usize, u: &[f64]| imm.eval(code, u);
            let m = injectivity_margin(sc.lam(), &ev, eps0, 4096, ctx.seed)?;
            let pass = m.margin > 0.0 && !m.non_injective;
            let detail = json!({ "eps0": eps0, "non_injective": m.non_injective });
            verification.insert("margins".into(), serde_json::to_value(&m).unwrap_or(Value::Null));
            Ok(result(c, pass, Some(m.margin), Some(0.0), detail))
        }
        Check::Shadow => {
            let lambda = sc.estimate(0.0).map(|e| e.lambda_at(0.0)).unwrap_or(0.5);
            // Forward orbits for the expanded case, preorbits for the contracted one.
            let (fwd, bwd) = match sc.variant() {
                lamina::Variant::Expanded => (Some(shadow_exact(ctx, lambda, false)), None),
                lamina::Variant::Contracted => (None, Some(shadow_exact(ctx, lambda, true))),
            };
            let mut pass = true;
            let mut worst: f64 = 0.0;
            let mut block = Map::new();
            for (name, r) in [("forward", fwd), ("backward", bwd)] {
                let v = match r {
                    None => Value::Null,
                    Some(Ok(rep)) => {
                        pass &= rep.ok && rep.residual <= SHADOW_RESIDUAL;
                        worst = worst.max(rep.residual);
                        serde_json::to_value(&rep).unwrap_or(Value::Null)
                    }
                    Some(Err(e)) => {
                        pass = false;
                        json!({ "error": error_info(&e) })
                    }
                };
                block.insert(name.into(), v);
            }
            verification.insert("shadow".into(), Value::Object(block));
            Ok(result(
                c,
                pass,
                Some(worst),
                Some(SHADOW_RESIDUAL),
                json!({ "lambda": lambda }),
            ))
        }
        Check::Containment => {
            let (sampler, forward) = sc.sampler.clone().expect("checked at resolve");
            let mut rng = stream(ctx.seed, &format!("containment/{}", sc.name));
            let pts: Vec<Vec<f64>> = (0..CONTAINMENT_DRAWS).filter_map(|_| sampler(&mut rng)).collect();
            let cand = |p: &[f64]| sc.leaf_candidates(p);
            let rep = containment(tube, ctx.s, &pts, &cand, CONTAINMENT_TOL, cfg);
            let pass = rep.bounded > 0 && rep.fraction >= CONTAINMENT_FRACTION;
            let mut detail = serde_json::to_value(&rep).unwrap_or(Value::Null);
            detail["orbits"] = json!(if forward { "forward" } else { "backward" });
            Ok(result(c, pass, Some(rep.fraction), Some(CONTAINMENT_FRACTION), detail))
        }
        Check::Holomorphy => {
            let (_, fiber) = sc.complex_leaf.expect("checked at resolve");
            let own;
            let planes = match &ctx.extras.planes {
                Some(p) => p,
                None => {
                    own = iterate_plane_field(&sc.sys, tube, sc.dynamics.as_ref(), ctx.s, sc.variant(), cfg)?.0;
                    &own
                }
            };
            let j = j_invariance_residual(tube, Some(planes))?;
            let cr = holomorphy_residual_section(tube, ctx.s, &[fiber])?;
            let bound = f64::max(1e-6, 10.0 * cr.h * cr.h);
            let value = j.sup.max(cr.sup);
            let detail = json!({
                "j_sup": j.sup,
                "j_frame_sup": j.frame_sup,
                "cr_sup": cr.sup,
                "cr_error_bar": cr.error_bar,
                "h": cr.h,
            });
            Ok(result(c, value <= bound, Some(value), Some(bound), detail))
        }
        Check::Expansiveness => {
            let pc = ProbeConfig {
                eps: 0.1,
                eta: 0.05,
                trials: 200,
                steps: 8,
                seed: ctx.seed,
                collapse_below: 1e-3,
            };
            let rep = plaque_expansiveness_probe(sc.lam(), sc.dynamics.as_ref(), &pc)?;
            let pass = rep.collapsed || rep.sufficient.pass;
            let last = rep.profile.last().copied();
            let detail = json!({ "verdict": rep.verdict });
            verification.insert(
                "expansiveness_profile".into(),
                serde_json::to_value(&rep).unwrap_or(Value::Null),
            );
            Ok(result(c, pass, last, Some(pc.collapse_below), detail))
        }
        Check::Commutation => {
            let v = ctx.extras.commutation.unwrap_or(f64::INFINITY);
            Ok(result(
                c,
                v <= COMMUTATION_TOL,
                Some(v),
                Some(COMMUTATION_TOL),
                Value::Null,
            ))
        }
        Check::Deformation => {
            let fam = ctx.extras.family.clone().unwrap_or(Value::Null);
            let cr = fam["parameter_cr"].as_f64();
            let bound = fam["cr_bound"].as_f64();
            let pass = fam["failure"].is_null() && matches!((cr, bound), (Some(a), Some(b)) if a <= b);
            let detail = json!({ "largest_ring": fam["largest_ring"], "linear_response": fam["linear_response"] });
            Ok(result(c, pass, cr, bound, detail))
        }
    }
}

fn unperturbed(ctx: &Ctx<'_>) -> lamina::Result<CheckResult> {
    let sc = ctx.sc();
    let cfg = ctx.cfg();
    let reports = if ctx.r.pipeline == PipelineName::Hyperbolic {
        let (st, un) = sc.thick.as_ref().expect("checked at resolve");
        let h = persist_hyperbolic(&sc.unperturbed, &sc.tube, sc.dynamics.as_ref(), st, un, cfg)?;
        vec![h.summary.stable, h.summary.unstable]
    } else {
        let zero = sc.tube.zero_section();
        vec![
            iterate_to_fixed_point(
                &sc.unperturbed,
                &sc.tube,
                sc.dynamics.as_ref(),
                &zero,
                sc.variant(),
                cfg,
            )?
            .1,
        ]
    };
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut iters = Vec::new();
    for r in &reports {
        let d = r.iterations.last().map(|i| i.sup_distance).unwrap_or(f64::INFINITY);
        worst = worst.max(d);
        pass &= r.iterations.len() == 1 && d <= UNPERTURBED_TOL;
        iters.push(r.iterations.len());
    }
    Ok(result(
        Check::Unperturbed,
        pass,
        Some(worst),
        Some(UNPERTURBED_TOL),
        json!({ "iterations": iters }),
    ))
}

fn chart_delta(lam: &lamina::DiscreteLamination, a: &[f64], b: &[f64]) -> Vec<f64> {
    lam.axes()
        .iter()
        .enumerate()
        .map(|(i, ax)| {
            if ax.is_angle() {
                wrap_pi(a[i] - b[i])
            } else {
                a[i] - b[i]
            }
        })
        .collect()
}

/// Preimage of `x` under the induced map, by correcting the base inverse.
fn induced_preimage(
    sys: &MapSystem,
    sc: &Scenario,
    s: &Section,
    x: &LeafPoint,
    cfg: &TransformConfig,
) -> lamina::Result<LeafPoint> {
    let lam = sc.lam();
    let (c0, u0) = sc.dynamics.inverse(x.code, &x.u)?;
    let mut p = LeafPoint { code: c0, u: u0 };
    let mut target = x.u.clone();
    for _ in 0..30 {
        let img = induced_image(sys, &sc.tube, s, sc.dynamics.as_ref(), &p, cfg)?;
        if img.code != x.code {
            break;
        }
        let miss = chart_delta(lam, &x.u, &img.u);
        if miss.iter().map(|m| m * m).sum::<f64>().sqrt() < 1e-14 {
            break;
        }
        for (t, m) in target.iter_mut().zip(&miss) {
            *t += m;
        }
        let (c, u) = sc.dynamics.inverse(x.code, &target)?;
        p = LeafPoint { code: c, u };
    }
    Ok(p)
}

fn exact_orbit(ctx: &Ctx<'_>, backward: bool, start: usize) -> lamina::Result<(Vec<LeafPoint>, Vec<Vec<f64>>)> {
    let sc = ctx.sc();
    let lam = sc.lam();
    let (code, u) = lam.node_params(start);
    let mut pseudo = vec![LeafPoint { code, u }];
    for _ in 1..ORBIT_LEN {
        let x = pseudo.last().expect("non-empty");
        let next = if backward {
            induced_preimage(&sc.sys, sc, ctx.s, x, ctx.cfg())?
        } else {
            induced_image(&sc.sys, &sc.tube, ctx.s, sc.dynamics.as_ref(), x, ctx.cfg())?
        };
        pseudo.push(next);
    }
    let imm = sc.tube.section_to_immersion(ctx.s);
    let ambient = pseudo
        .iter()
        .map(|p| imm.eval(p.code, &p.u))
        .collect::<lamina::Result<Vec<_>>>()?;
    Ok((pseudo, ambient))
}

fn shadow_exact(ctx: &Ctx<'_>, lambda: f64, backward: bool) -> lamina::Result<lamina::verify::ShadowReport> {
    let sc = ctx.sc();
    let lam = sc.lam();
    let mut core: Vec<usize> = (0..lam.node_count()).filter(|&g| lam.bump(g).0 == 1.0).collect();
    let mut rng = stream(ctx.seed, if backward { "shadow/backward" } else { "shadow/forward" });
    core.shuffle(&mut rng);
    let mut last = None;
    for &g in core.iter().take(64) {
        let (pseudo, ambient) = match exact_orbit(ctx, backward, g) {
            Ok(o) => o,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let hyp = |eps: f64| {
            check_hypotheses(
                &sc.sys,
                &sc.tube,
                ctx.s,
                sc.dynamics.as_ref(),
                &pseudo,
                &ambient,
                eps,
                backward,
                ctx.cfg(),
            )
        };
        let eps = match largest_passing_eps(hyp) {
            Ok(mut e) => {
                while e > 1e-12 && hyp(0.5 * e).is_ok() {
                    e *= 0.5;
                }
                e
            }
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let args = (
            &sc.sys,
            &sc.tube,
            ctx.s,
            sc.dynamics.as_ref(),
            &pseudo[..],
            &ambient[..],
        );
        return if backward {
            shadow_check_backward(args.0, args.1, args.2, args.3, args.4, args.5, eps, lambda, ctx.cfg())
        } else {
            shadow_check_forward(args.0, args.1, args.2, args.3, args.4, args.5, eps, lambda, ctx.cfg())
        };
    }
    Err(last.unwrap_or_else(|| lamina::Error::Hypothesis("no core node to start an orbit".into())))
}
