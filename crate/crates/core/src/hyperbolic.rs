//! Stable and unstable thickenings of a lamination and the recovery of the
//! persistent lamination as their transverse intersection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{FrameHint, Section, Tube};
use crate::dynsys::MapSystem;
use crate::error::{Error, Result};
use crate::graph_transform::{
    iterate_to_fixed_point, pullback_table, BaseDynamics, Link, TransformConfig, TransformReport, Variant,
};
use crate::lamination::{Axis, DiscreteLamination, Region};

pub const THICK_NODES: usize = 17;
pub const MIN_TRANSVERSALITY: f64 = 1e-6;

/// Disk directions `n × m` attached to the base leaf point `(code, u)`.
pub type DirectionRule = dyn Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
pub struct ThickSpec {
    pub directions: Arc<DirectionRule>,
    pub thickness: usize,
    pub radius: f64,
    pub nodes: usize,
    /// Pullback on the thickened lamination; unused when the fiber is trivial.
    pub dynamics: Option<Arc<dyn BaseDynamics>>,
}

impl ThickSpec {
    pub fn new(directions: Arc<DirectionRule>, thickness: usize, radius: f64) -> Self {
        Self {
            directions,
            thickness,
            radius,
            nodes: THICK_NODES,
            dynamics: None,
        }
    }

    pub fn with_dynamics(mut self, dynamics: Arc<dyn BaseDynamics>) -> Self {
        self.dynamics = Some(dynamics);
        self
    }
}

#[derive(Clone, Debug)]
pub struct ThickenedLamination {
    pub base: Arc<DiscreteLamination>,
    pub tube: Tube,
    pub section: Section,
    pub thickness: usize,
    pub radius: f64,
    pub report: TransformReport,
}

impl ThickenedLamination {
    /// Largest distance between the zero-thickness slice and the base immersion.
    pub fn inclusion_error(&self) -> Result<f64> {
        let d = self.base.d();
        let mut worst: f64 = 0.0;
        for g in 0..self.base.node_count() {
            let (c, u) = self.base.node_params(g);
            let mut v = u.clone();
            v.extend(std::iter::repeat(0.0).take(self.thickness));
            let p = self.tube.lam.immersion_at(c, &v)?;
            worst = worst.max(self.base.space.distance(&p, self.base.point(g)));
            debug_assert_eq!(v.len(), d + self.thickness);
        }
        Ok(worst)
    }
}

/// Leaves extended by `thickness` line axes over `[−radius, radius]`.
pub fn thicken(base: &Arc<DiscreteLamination>, spec: &ThickSpec) -> Result<DiscreteLamination> {
    let d = base.d();
    let m = spec.thickness;
    let n = base.n();
    if spec.radius <= 0.0 {
        return Err(Error::Input("disk radius must be positive".into()));
    }
    let mut axes: Vec<Axis> = base.axes().to_vec();
    let mut seams: Vec<Option<Vec<usize>>> = (0..d).map(|a| base.seam(a).map(|s| s.to_vec())).collect();
    for _ in 0..m {
        axes.push(Axis::line(-spec.radius, spec.radius, spec.nodes));
        seams.push(None);
    }
    let region = match &base.region {
        Region::Everything => Region::Everything,
        Region::Boxes { inner, outer } => {
            let mut inner = inner.clone();
            let mut outer = outer.clone();
            for _ in 0..m {
                inner.push((-spec.radius, spec.radius));
                outer.push((-spec.radius, spec.radius));
            }
            Region::Boxes { inner, outer }
        }
    };
    let dirs = spec.directions.clone();
    let b = base.clone();
    DiscreteLamination::new(
        base.space.clone(),
        axes,
        base.codes().to_vec(),
        seams,
        move |c, u| {
            let mut p = b.immersion_at(c, &u[..d]).unwrap_or_else(|_| vec![f64::NAN; n]);
            let e = dirs(c, &u[..d]);
            for i in 0..n {
                for j in 0..m {
                    p[i] += e[(i, j)] * u[d + j];
                }
            }
            p
        },
        region,
        base.transversal.clone(),
    )
}

fn build_thickened(
    sys: &MapSystem,
    base: &Arc<DiscreteLamination>,
    spec: &ThickSpec,
    frame_hint: Option<FrameHint<'_>>,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<ThickenedLamination> {
    let lam = Arc::new(thicken(base, spec)?);
    let tube = Tube::build(lam, frame_hint)?;
    let zero = tube.zero_section();
    let (section, report) = if tube.k() == 0 {
        iterate_to_fixed_point(
            sys,
            &tube,
            &crate::graph_transform::FnDynamics::identity(),
            &zero,
            variant,
            cfg,
        )?
    } else {
        let dynamics = spec
            .dynamics
            .as_ref()
            .ok_or_else(|| Error::Input("thickened lamination needs its pullback rule".into()))?;
        iterate_to_fixed_point(sys, &tube, dynamics.as_ref(), &zero, variant, cfg)?
    };
    Ok(ThickenedLamination {
        base: base.clone(),
        tube,
        section,
        thickness: spec.thickness,
        radius: spec.radius,
        report,
    })
}

/// Thickening along E^s, made invariant by the expanded transform.
pub fn build_stable_lamination(
    sys: &MapSystem,
    base: &Arc<DiscreteLamination>,
    spec: &ThickSpec,
    frame_hint: Option<FrameHint<'_>>,
    cfg: &TransformConfig,
) -> Result<ThickenedLamination> {
    build_thickened(sys, base, spec, frame_hint, Variant::Expanded, cfg)
}

/// Thickening along E^u, made invariant by the contracted transform.
pub fn build_unstable_lamination(
    sys: &MapSystem,
    base: &Arc<DiscreteLamination>,
    spec: &ThickSpec,
    frame_hint: Option<FrameHint<'_>>,
    cfg: &TransformConfig,
) -> Result<ThickenedLamination> {
    if let Some(dy) = &spec.dynamics {
        if !dy.has_inverse() {
            return Err(Error::Input("unstable thickening needs a bijective pullback".into()));
        }
    }
    build_thickened(sys, base, spec, frame_hint, Variant::Contracted, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub fiber: Vec<f64>,
    pub point: Vec<f64>,
    pub sigma_min: f64,
    pub stable_param: Vec<f64>,
    pub unstable_param: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Common point of `i^s` and `i^u` inside the fiber over node `g` of the base tube.
pub fn intersect_transverse(
    ls: &ThickenedLamination,
    lu: &ThickenedLamination,
    base: &Tube,
    g: usize,
    cfg: &TransformConfig,
) -> Result<Intersection> {
    let lam = &base.lam;
    let n = base.n();
    let d = base.d();
    let ms = ls.thickness;
    let mu = lu.thickness;
    if ms + mu != base.k() {
        return Err(Error::Input(
            "thickness dimensions must add up to the fiber dimension".into(),
        ));
    }
    let (c, k) = lam.split(g);
    let u = lam.params(k);
    let mut us = u.clone();
    us.extend(std::iter::repeat(0.0).take(ms));
    let mut uu = u.clone();
    uu.extend(std::iter::repeat(0.0).take(mu));
    let mut cs = c;
    let mut cu = c;
    let x = lam.point(g).to_vec();
    let q = base.node_split(g);
    let qlu = q.clone().lu();
    let m = n + d;
    let mut last_step = f64::INFINITY;
    let mut diff = vec![0.0; n];
    let mut off = vec![0.0; n];
    for it in 0..=cfg.newton_max {
        let a = ls.tube.local(cs, &us, Some(&ls.section), true)?;
        let b = lu.tube.local(cu, &uu, Some(&lu.section), true)?;
        cs = a.code;
        cu = b.code;
        let pa = a.immersed();
        let pb = b.immersed();
        lam.space.delta(&pa, &pb, &mut diff);
        lam.space.delta(&pa, &x, &mut off);
        let local = qlu
            .solve(&DVector::from_column_slice(&off))
            .ok_or_else(|| Error::Geometry {
                node: g,
                msg: "singular splitting at node".into(),
            })?;
        let mut f = diff.clone();
        f.extend(local.iter().take(d));
        let la = a.leaf_derivative(&a.section, true);
        let lb = b.leaf_derivative(&b.section, true);
        let mut jm = DMatrix::zeros(m, m);
        for i in 0..n {
            for j in 0..d + ms {
                jm[(i, j)] = la[(i, j)];
            }
            for j in 0..d + mu {
                jm[(i, d + ms + j)] = -lb[(i, j)];
            }
        }
        let proj = qlu.solve(&la).ok_or_else(|| Error::Geometry {
            node: g,
            msg: "singular splitting at node".into(),
        })?;
        for r in 0..d {
            for j in 0..d + ms {
                jm[(n + r, j)] = proj[(r, j)];
            }
        }
        let res = norm(&f);
        if res <= cfg.newton_tol || (last_step <= 1e-14 && res <= 1e3 * cfg.newton_tol) {
            let sv = jm.singular_values();
            let sigma_min = sv.min();
            if sigma_min < MIN_TRANSVERSALITY * sv.max() {
                return Err(Error::Geometry {
                    node: g,
                    msg: format!("stable and unstable leaves are not transverse (σ_min {sigma_min:e})"),
                });
            }
            let fiber: Vec<f64> = local.iter().skip(d).copied().collect();
            if norm(&fiber) > cfg.eta {
                return Err(Error::Locality {
                    node: g,
                    msg: format!("intersection at fiber distance {} beyond eta", norm(&fiber)),
                });
            }
            return Ok(Intersection {
                fiber,
                point: pa,
                sigma_min,
                stable_param: us,
                unstable_param: uu,
            });
        }
        if it == cfg.newton_max {
            break;
        }
        let neg = DVector::from_iterator(m, f.iter().map(|v| -v));
        let delta = jm.lu().solve(&neg).ok_or_else(|| Error::Geometry {
            node: g,
            msg: "singular intersection system".into(),
        })?;
        for j in 0..d + ms {
            us[j] += delta[j];
        }
        for j in 0..d + mu {
            uu[j] += delta[d + ms + j];
        }
        last_step = delta.norm();
        let locality = |e: Error| Error::Locality {
            node: g,
            msg: format!("intersection search left the disks: {e}"),
        };
        cs = ls.tube.lam.normalize(cs, &mut us).map_err(locality)?;
        cu = lu.tube.lam.normalize(cu, &mut uu).map_err(locality)?;
    }
    Err(Error::Locality {
        node: g,
        msg: "no intersection found near the node".into(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HyperbolicSummary {
    pub stable: TransformReport,
    pub unstable: TransformReport,
    pub commutation_residual: f64,
    pub min_sigma: f64,
    pub inclusion_error: f64,
}

#[derive(Clone, Debug)]
pub struct HyperbolicResult {
    pub section: Section,
    pub pullback: Vec<Option<Link>>,
    pub stable: ThickenedLamination,
    pub unstable: ThickenedLamination,
    pub summary: HyperbolicSummary,
}

pub fn persist_hyperbolic(
    sys: &MapSystem,
    base: &Tube,
    base_dynamics: &dyn BaseDynamics,
    stable: &ThickSpec,
    unstable: &ThickSpec,
    cfg: &TransformConfig,
) -> Result<HyperbolicResult> {
    let lam = &base.lam;
    let (ls, lu) = rayon::join(
        || build_stable_lamination(sys, lam, stable, None, cfg),
        || build_unstable_lamination(sys, lam, unstable, None, cfg),
    );
    let (ls, lu) = (ls?, lu?);
    let rows: Vec<Result<Intersection>> = (0..lam.node_count())
        .into_par_iter()
        .map(|g| intersect_transverse(&ls, &lu, base, g, cfg))
        .collect();
    let mut section = base.zero_section();
    let mut min_sigma = f64::INFINITY;
    for (g, r) in rows.into_iter().enumerate() {
        let it = r?;
        min_sigma = min_sigma.min(it.sigma_min);
        section.get_mut(g).copy_from_slice(&it.fiber);
    }
    let (pullback, residual) = pullback_table(sys, base, base_dynamics, &section, cfg, true)?;
    let inclusion_error = ls.inclusion_error()?.max(lu.inclusion_error()?);
    let summary = HyperbolicSummary {
        stable: ls.report.clone(),
        unstable: lu.report.clone(),
        commutation_residual: residual,
        min_sigma,
        inclusion_error,
    };
    Ok(HyperbolicResult {
        section,
        pullback,
        stable: ls,
        unstable: lu,
        summary,
    })
}
