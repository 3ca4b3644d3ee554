//! Holomorphy certificates and complex-parameter continuation.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{Section, Tube};
use crate::dynsys::StateSpace;
use crate::error::{Error, Result};
use crate::graph_transform::{iterate_to_fixed_point, BaseDynamics, TransformConfig, Variant};
use crate::tangent::PlaneField;

/// Tolerance for the warm/cold agreement of continued sections.
pub const CONTINUATION_TOL: f64 = 1e-8;

fn require_pairs(space: &StateSpace) -> Result<DMatrix<f64>> {
    if space.pairs().is_empty() {
        return Err(Error::Input("no complex pairs declared".into()));
    }
    Ok(space.j_matrix())
}

fn orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = basis.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|v| **v > 1e-12 * smax.max(1e-300))
        .count();
    u.columns(0, rank).into_owned()
}

/// Sine of the largest principal angle between `span(J·P)` and `span(P)`.
pub fn plane_j_residual(j: &DMatrix<f64>, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return 0.0;
    }
    let q = orthonormal(basis);
    let jq = j * &q;
    let out = &jq - &q * (q.transpose() * &jq);
    out.singular_values().max()
}

#[derive(Clone, Debug, Serialize)]
pub struct JReport {
    pub per_node: Vec<f64>,
    pub sup: f64,
    pub worst_node: usize,
    /// Defect of the normal frames as complex subspaces.
    pub frame_sup: f64,
}

/// J-invariance of the planes `span(T + N·l)` at every node; `planes = None` uses the leaf tangents.
pub fn j_invariance_residual(tube: &Tube, planes: Option<&PlaneField>) -> Result<JReport> {
    let lam = &tube.lam;
    let j = require_pairs(&lam.space)?;
    let mut covered = vec![false; lam.n()];
    for &(a, b) in lam.space.pairs() {
        covered[a] = true;
        covered[b] = true;
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::Input("complex pairs do not cover every coordinate".into()));
    }
    let rows: Vec<(f64, f64)> = (0..lam.node_count())
        .into_par_iter()
        .map(|g| {
            let t = lam.node_tangent(g);
            let f = tube.frames.matrix(g);
            let p = match planes {
                Some(pl) => &t + &f * pl.matrix(g),
                None => t,
            };
            (plane_j_residual(&j, &p), plane_j_residual(&j, &f))
        })
        .collect();
    let mut report = JReport {
        per_node: Vec::with_capacity(rows.len()),
        sup: 0.0,
        worst_node: 0,
        frame_sup: 0.0,
    };
    for (g, (r, fr)) in rows.into_iter().enumerate() {
        if r > report.sup {
            report.sup = r;
            report.worst_node = g;
        }
        report.frame_sup = report.frame_sup.max(fr);
        report.per_node.push(r);
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct CrReport {
    pub sup: f64,
    pub error_bar: f64,
    pub h: f64,
    pub worst_node: usize,
    pub nodes_checked: usize,
}

/// `‖∂i'/∂z̄‖` in the leaf coordinates `z = u_a + i·u_b`, by central differences at one grid step.
pub fn holomorphy_residual_section(tube: &Tube, s: &Section, leaf_pairs: &[(usize, usize)]) -> Result<CrReport> {
    let lam = &tube.lam;
    require_pairs(&lam.space)?;
    let d = lam.d();
    if d == 0 || d % 2 != 0 || leaf_pairs.len() * 2 != d {
        return Err(Error::Input("leaf dimension must be even and fully paired".into()));
    }
    let pairs = lam.space.pairs().to_vec();
    let imm = tube.section_to_immersion(s);
    let steps: Vec<f64> = lam.axes().iter().map(|a| a.spacing()).collect();
    let h = steps.iter().cloned().fold(0.0, f64::max);

    let dbar = |code: usize, u: &[f64], scale: f64| -> Option<f64> {
        let mut worst: f64 = 0.0;
        for &(a, b) in leaf_pairs {
            let diff = |axis: usize| -> Option<Vec<f64>> {
                let step = scale * steps[axis];
                let mut up = u.to_vec();
                let mut dn = u.to_vec();
                up[axis] += step;
                dn[axis] -= step;
                if lam.bump_at(&up).0 < 1.0 || lam.bump_at(&dn).0 < 1.0 {
                    return None;
                }
                let p = imm.eval(code, &up).ok()?;
                let q = imm.eval(code, &dn).ok()?;
                Some((0..p.len()).map(|i| (p[i] - q[i]) / (2.0 * step)).collect())
            };
            let da = diff(a)?;
            let db = diff(b)?;
            for &(re, im) in &pairs {
                let za = Complex64::new(da[re], da[im]);
                let zb = Complex64::new(db[re], db[im]);
                worst = worst.max((0.5 * (za + Complex64::i() * zb)).norm());
            }
        }
        Some(worst)
    };

    let rows: Vec<Option<(f64, Option<f64>)>> = (0..lam.node_count())
        .into_par_iter()
        .map(|g| {
            let (code, u) = lam.node_params(g);
            let r1 = dbar(code, &u, 1.0)?;
            let r2 = dbar(code, &u, 2.0);
            Some((r1, r2.map(|r2| (r2 - r1).abs() / 3.0)))
        })
        .collect();
    let mut out = CrReport {
        sup: 0.0,
        error_bar: 0.0,
        h,
        worst_node: 0,
        nodes_checked: 0,
    };
    for (g, row) in rows.into_iter().enumerate() {
        if let Some((r, e)) = row {
            out.nodes_checked += 1;
            if r > out.sup {
                out.sup = r;
                out.worst_node = g;
            }
            if let Some(e) = e {
                out.error_bar = out.error_bar.max(e);
            }
        }
    }
    if out.nodes_checked == 0 {
        return Err(Error::Input("no node has a full stencil inside the core region".into()));
    }
    Ok(out)
}

/// Center plus `rings` concentric rings of `angles` points, ring `j` at radius `(j+1)·radius/rings`.
#[derive(Clone, Debug, Serialize)]
pub struct ParamGrid {
    pub radius: f64,
    pub rings: usize,
    pub angles: usize,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            radius: 0.02,
            rings: 2,
            angles: 8,
        }
    }
}

impl ParamGrid {
    /// Points in spiral order: center, then each ring by increasing angle.
    pub fn points(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        for j in 0..self.rings {
            let r = self.ring_radius(j);
            for k in 0..self.angles {
                out.push(Complex64::from_polar(r, TAU * k as f64 / self.angles as f64));
            }
        }
        out
    }

    pub fn ring_radius(&self, j: usize) -> f64 {
        self.radius * (j + 1) as f64 / self.rings as f64
    }

    pub fn index(&self, ring: usize, angle: usize) -> usize {
        1 + ring * self.angles + angle % self.angles
    }

    /// Index of the warm start for point `i`.
    pub fn parent(&self, i: usize) -> Option<usize> {
        if i == 0 {
            return None;
        }
        let ring = (i - 1) / self.angles;
        Some(if ring == 0 { 0 } else { i - self.angles })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyEntry {
    pub t_re: f64,
    pub t_im: f64,
    pub ring: usize,
    pub converged: bool,
    pub iterations: usize,
    pub sup_distance: f64,
    pub final_residual: f64,
    pub sup_norm: f64,
    pub cold_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub entries: Vec<FamilyEntry>,
    /// Outermost ring on which every point continued; `None` if only the center did.
    pub largest_ring: Option<usize>,
    pub failure: Option<String>,
    pub parameter_cr: Option<f64>,
    pub linear_response: Option<f64>,
    pub cr_bound: f64,
    /// `max sup|s_t − s_t'| / |t − t'|` over warm-start links.
    pub coherence: f64,
    #[serde(skip)]
    pub sections: Vec<Option<Section>>,
}

pub struct FamilyProblem<'a> {
    pub family: &'a crate::dynsys::DeformationFamily,
    pub tube: &'a Tube,
    pub dynamics: &'a dyn BaseDynamics,
    pub variant: Variant,
    pub cfg: &'a TransformConfig,
    /// Complex pairs among the fiber coordinates of the section.
    pub fiber_pairs: &'a [(usize, usize)],
    pub cold_check: ColdCheck,
}

/// Which grid points are also solved from the zero section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ColdCheck {
    All,
    OuterRing,
    Off,
}

fn run_at(p: &FamilyProblem<'_>, t: Complex64, start: &Section, cold: bool) -> Result<(Section, FamilyEntry)> {
    let tag = |e: Error| Error::Continuation {
        re: t.re,
        im: t.im,
        msg: e.to_string(),
    };
    let sys = p.family.at(t).map_err(tag)?;
    let (s, rep) = iterate_to_fixed_point(&sys, p.tube, p.dynamics, start, p.variant, p.cfg).map_err(tag)?;
    if !rep.converged {
        return Err(tag(Error::NonContraction {
            ratios: rep.iterations.iter().filter_map(|r| r.ratio).collect(),
        }));
    }
    let cold_distance = if cold {
        let (c, _) =
            iterate_to_fixed_point(&sys, p.tube, p.dynamics, &p.tube.zero_section(), p.variant, p.cfg).map_err(tag)?;
        let dist = c.sup_distance(&s);
        if dist > CONTINUATION_TOL {
            return Err(Error::Continuation {
                re: t.re,
                im: t.im,
                msg: format!("warm and cold starts differ by {dist:e}"),
            });
        }
        Some(dist)
    } else {
        None
    };
    let entry = FamilyEntry {
        t_re: t.re,
        t_im: t.im,
        ring: 0,
        converged: rep.converged,
        iterations: rep.iterations.len(),
        sup_distance: rep.iterations.last().map(|r| r.sup_distance).unwrap_or(0.0),
        final_residual: rep.final_residual,
        sup_norm: s.sup_norm(),
        cold_distance,
    };
    Ok((s, entry))
}

/// Continues the fixed point over `grid` and measures `∂s/∂t̄` on the first ring.
pub fn deform_family(p: &FamilyProblem<'_>, grid: &ParamGrid) -> Result<FamilyReport> {
    if grid.rings < 2 || grid.angles < 4 {
        return Err(Error::Input("need at least 2 rings of 4 angles".into()));
    }
    if grid.radius > p.family.disk_radius * (1.0 + 1e-12) {
        return Err(Error::Input("grid leaves the parameter disk".into()));
    }
    let k = p.tube.k();
    for &(a, b) in p.fiber_pairs {
        if a >= k || b >= k || a == b {
            return Err(Error::Input(format!("bad fiber pair ({a}, {b})")));
        }
    }
    let pts = grid.points();
    let mut sections: Vec<Option<Section>> = vec![None; pts.len()];
    let mut entries: Vec<FamilyEntry> = Vec::new();
    let (s0, e0) = run_at(p, pts[0], &p.tube.zero_section(), false)?;
    sections[0] = Some(s0);
    entries.push(e0);
    let mut largest_ring = None;
    let mut failure = None;
    for ring in 0..grid.rings {
        let idx: Vec<usize> = (0..grid.angles).map(|a| grid.index(ring, a)).collect();
        let cold = match p.cold_check {
            ColdCheck::All => true,
            ColdCheck::OuterRing => ring + 1 == grid.rings,
            ColdCheck::Off => false,
        };
        let results: Vec<Result<(Section, FamilyEntry)>> = idx
            .par_iter()
            .map(|&i| {
                let start = sections[grid.parent(i).expect("ring points have parents")]
                    .as_ref()
                    .expect("inner ring done");
                run_at(p, pts[i], start, cold)
            })
            .collect();
        let mut ok = true;
        for (&i, r) in idx.iter().zip(results) {
            match r {
                Ok((s, mut e)) => {
                    e.ring = ring + 1;
                    sections[i] = Some(s);
                    entries.push(e);
                }
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e.to_string());
                    }
                    ok = false;
                }
            }
        }
        if !ok {
            break;
        }
        largest_ring = Some(ring + 1);
    }

    let mut coherence: f64 = 0.0;
    for i in 1..pts.len() {
        if let (Some(a), Some(b)) = (&sections[i], &sections[grid.parent(i).unwrap()]) {
            let dt = (pts[i] - pts[grid.parent(i).unwrap()]).norm();
            coherence = coherence.max(a.sup_distance(b) / dt);
        }
    }

    let (parameter_cr, linear_response) = if largest_ring.map_or(false, |r| r >= 2) {
        let (cr, lr) = parameter_cr(grid, &sections, p.fiber_pairs);
        (Some(cr), Some(lr))
    } else {
        (None, None)
    };
    let dt = grid.ring_radius(0);
    Ok(FamilyReport {
        entries,
        largest_ring,
        failure,
        parameter_cr,
        linear_response,
        cr_bound: (10.0 * dt * dt).max(1e-6),
        coherence,
        sections,
    })
}

impl FamilyReport {
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            Some(msg) => {
                let t = self.entries.last().map(|e| (e.t_re, e.t_im)).unwrap_or((0.0, 0.0));
                Err(Error::Continuation {
                    re: t.0,
                    im: t.1,
                    msg: msg.clone(),
                })
            }
            None => Ok(self),
        }
    }
}

/// Sup of `|∂s/∂t̄|` and `|∂s/∂t|` on ring 1: spectral angular derivative,
/// radial central difference between the center and ring 2.
fn parameter_cr(grid: &ParamGrid, sections: &[Option<Section>], pairs: &[(usize, usize)]) -> (f64, f64) {
    let m = grid.angles;
    let r = grid.ring_radius(0);
    let r2 = grid.ring_radius(1);
    let center = sections[0].as_ref().unwrap();
    let ring1: Vec<&Section> = (0..m).map(|a| sections[grid.index(0, a)].as_ref().unwrap()).collect();
    let ring2: Vec<&Section> = (0..m).map(|a| sections[grid.index(1, a)].as_ref().unwrap()).collect();
    let nodes = center.len();
    // Spectral differentiation matrix on m equispaced angles.
    let mut dmat = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for (a, row) in dmat.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for f in 0..m {
                let mut freq = f as i64;
                if freq > (m / 2) as i64 {
                    freq -= m as i64;
                }
                if 2 * freq.unsigned_abs() as usize == m {
                    continue;
                }
                let phase = TAU * freq as f64 * (a as f64 - b as f64) / m as f64;
                acc += Complex64::new(0.0, freq as f64) * Complex64::from_polar(1.0, phase);
            }
            *entry = acc / m as f64;
        }
    }
    let rows: Vec<(f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|g| {
            let mut cr: f64 = 0.0;
            let mut lr: f64 = 0.0;
            for &(pa, pb) in pairs {
                let val = |s: &Section| Complex64::new(s.get(g)[pa], s.get(g)[pb]);
                let c = val(center);
                let v1: Vec<Complex64> = ring1.iter().map(|s| val(s)).collect();
                let v2: Vec<Complex64> = ring2.iter().map(|s| val(s)).collect();
                for a in 0..m {
                    let theta = TAU * a as f64 / m as f64;
                    let dth: Complex64 = (0..m).map(|b| dmat[a][b] * v1[b]).sum();
                    let drad = (v2[a] - c) / r2;
                    let rot = Complex64::from_polar(0.5, theta);
                    let dbar = rot * (drad + Complex64::i() * dth / r);
                    let dt = rot.conj() * (drad - Complex64::i() * dth / r);
                    cr = cr.max(dbar.norm());
                    lr = lr.max(dt.norm());
                }
            }
            (cr, lr)
        })
        .collect();
    rows.into_iter().fold((0.0, 0.0), |(a, b), (c, d)| (a.max(c), b.max(d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2_j() -> DMatrix<f64> {
        StateSpace::complex(2).unwrap().j_matrix()
    }

    #[test]
    fn complex_linear_plane() {
        let a = Complex64::new(0.3, -1.2);
        // columns: d/dx and d/dy of (z, a z)
        let p = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, a.re, a.im, 0.0, 1.0, -a.im, a.re]);
        assert!(plane_j_residual(&c2_j(), &p) <= 1e-12);
    }

    #[test]
    fn conjugate_plane() {
        let p = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        assert!((plane_j_residual(&c2_j(), &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_order() {
        let g = ParamGrid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 17);
        assert_eq!(g.parent(3), Some(0));
        assert_eq!(g.parent(12), Some(4));
        assert!((pts[9].norm() - 0.02).abs() < 1e-15);
    }
}
