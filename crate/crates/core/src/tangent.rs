//! Plane fields over the lamination, their transport under Df, and the
//! normal-hyperbolicity estimator.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::{condition_number, Section, Tube};
use crate::dynsys::MapSystem;
use crate::error::{Error, Result};
use crate::graph_transform::{graph_step, BaseDynamics, Link, TransformConfig, Variant};
use crate::lamination::{DiscreteLamination, Field};

pub const MAX_BLOCK_CONDITION: f64 = 1e8;

/// Per-node `k × d` graph matrices, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneField {
    pub k: usize,
    pub d: usize,
    pub values: Vec<f64>,
}

impl PlaneField {
    pub fn zeros(nodes: usize, k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            values: vec![0.0; nodes * k * d],
        }
    }

    pub fn width(&self) -> usize {
        self.k * self.d
    }

    pub fn len(&self) -> usize {
        if self.width() == 0 {
            0
        } else {
            self.values.len() / self.width()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, g: usize) -> &[f64] {
        let w = self.width();
        &self.values[g * w..(g + 1) * w]
    }

    pub fn matrix(&self, g: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.d, self.get(g))
    }

    pub fn set(&mut self, g: usize, l: &DMatrix<f64>) {
        let w = self.width();
        for r in 0..self.k {
            for c in 0..self.d {
                self.values[g * w + r * self.d + c] = l[(r, c)];
            }
        }
    }

    pub fn field(&self) -> Field<'_> {
        Field::plain(&self.values, self.width())
    }

    /// Largest per-node operator norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|g| op_norm(&self.matrix(g))).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &PlaneField) -> f64 {
        (0..self.len())
            .map(|g| op_norm(&(self.matrix(g) - other.matrix(g))))
            .fold(0.0, f64::max)
    }

    pub fn interpolate(&self, lam: &DiscreteLamination, code: usize, u: &[f64]) -> Result<DMatrix<f64>> {
        let mut v = vec![0.0; self.width()];
        lam.interpolate(self.field(), code, u, &mut v, None)?;
        Ok(DMatrix::from_row_slice(self.k, self.d, &v))
    }
}

pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `(A, B, C, D)` of `M = Q_t⁻¹·Df·Q_s` with `A` horizontal→horizontal,
/// `B` vertical→vertical, `C` vertical→horizontal, `D` horizontal→vertical.
pub fn blocks(
    df: &DMatrix<f64>,
    qs: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    d: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = df.nrows();
    let m = qt.clone().lu().solve(&(df * qs)).ok_or_else(|| Error::Geometry {
        node: 0,
        msg: "singular target splitting".into(),
    })?;
    let k = n - d;
    Ok((
        m.view((0, 0), (d, d)).into_owned(),
        m.view((d, d), (k, k)).into_owned(),
        m.view((0, d), (d, k)).into_owned(),
        m.view((d, 0), (k, d)).into_owned(),
    ))
}

/// Plane at the target pulled back to the source: `(B − lC)⁻¹(lA − D)`.
pub fn transport_plane_expanded(
    df: &DMatrix<f64>,
    qs: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = l.ncols();
    let (a, b, c, dd) = blocks(df, qs, qt, d)?;
    let vert = &b - l * &c;
    let cond = condition_number(&vert);
    if !(cond <= MAX_BLOCK_CONDITION) {
        return Err(Error::Hyperbolicity(format!(
            "vertical block is singular (condition {cond:e})"
        )));
    }
    let rhs = l * &a - &dd;
    vert.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Hyperbolicity("vertical block is singular".into()))
}

/// Plane at the source pushed forward: `(D + Bl)(A + Cl)⁻¹`.
pub fn transport_plane_contracted(
    df: &DMatrix<f64>,
    qs: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = l.ncols();
    let (a, b, c, dd) = blocks(df, qs, qt, d)?;
    let hor = &a + &c * l;
    let cond = condition_number(&hor);
    if !(cond <= MAX_BLOCK_CONDITION) {
        return Err(Error::Immersion(format!(
            "horizontal block is singular (condition {cond:e})"
        )));
    }
    let inv = hor
        .try_inverse()
        .ok_or_else(|| Error::Immersion("horizontal block is singular".into()))?;
    Ok((&dd + &b * l) * inv)
}

/// `ρ·l + s_new ⊗ ∇ρ`.
pub fn bump_leibniz(rho: f64, grad_rho: &[f64], s_new: &[f64], l: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = l * rho;
    for j in 0..out.nrows() {
        for a in 0..out.ncols() {
            out[(j, a)] += s_new[j] * grad_rho[a];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneReport {
    pub iterations: usize,
    pub sup_changes: Vec<f64>,
    pub converged: bool,
    #[serde(default)]
    pub truncated: bool,
}

/// `[T | N]` at a leaf point: base tangent and interpolated frame.
fn split_at(tube: &Tube, code: usize, u: &[f64]) -> Result<DMatrix<f64>> {
    let loc = tube.local(code, u, None, true)?;
    let n = tube.n();
    let d = tube.d();
    let mut q = DMatrix::zeros(n, n);
    for a in 0..d {
        q.set_column(a, &loc.tangent.column(a));
    }
    for j in 0..tube.k() {
        q.set_column(d + j, &loc.frame.column(j));
    }
    Ok(q)
}

struct PlaneLink {
    df: DMatrix<f64>,
    qs: DMatrix<f64>,
    qt: DMatrix<f64>,
    link: Link,
    rho: f64,
    grad: Vec<f64>,
    s_new: Vec<f64>,
}

fn plane_links(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<Vec<Option<PlaneLink>>> {
    let step = graph_step(sys, tube, dynamics, s, variant, cfg)?;
    let lam = &tube.lam;
    let rows: Vec<Result<Option<PlaneLink>>> = (0..lam.node_count())
        .into_par_iter()
        .map(|g| {
            let link = match &step.links[g] {
                Some(l) => l.clone(),
                None => return Ok(None),
            };
            let (rho, grad) = lam.bump(g);
            let s_new = step.values.get(g).to_vec();
            let here = tube.node_split(g);
            let there = split_at(tube, link.code, &link.u)?;
            let (df, qs, qt) = match variant {
                Variant::Expanded => {
                    let y = tube.node_offset(g, &s_new);
                    (sys.jacobian(&y)?, here, there)
                }
                Variant::Contracted => {
                    let loc = tube.local(link.code, &link.u, Some(s), false)?;
                    let q = loc.immersed();
                    (sys.jacobian(&q)?, there, here)
                }
            };
            Ok(Some(PlaneLink {
                df,
                qs,
                qt,
                link,
                rho,
                grad,
                s_new,
            }))
        })
        .collect();
    rows.into_iter().collect()
}

fn plane_update(
    tube: &Tube,
    links: &[Option<PlaneLink>],
    field: &PlaneField,
    variant: Variant,
    eps_plane: f64,
) -> Result<PlaneField> {
    let lam = &tube.lam;
    let rows: Vec<Result<DMatrix<f64>>> = links
        .par_iter()
        .enumerate()
        .map(|(g, pl)| {
            let pl = match pl {
                Some(p) => p,
                None => return Ok(DMatrix::zeros(field.k, field.d)),
            };
            let l = field.interpolate(lam, pl.link.code, &pl.link.u)?;
            let moved = match variant {
                Variant::Expanded => transport_plane_expanded(&pl.df, &pl.qs, &pl.qt, &l)?,
                Variant::Contracted => transport_plane_contracted(&pl.df, &pl.qs, &pl.qt, &l)?,
            };
            let out = bump_leibniz(pl.rho, &pl.grad, &pl.s_new, &moved);
            let nrm = op_norm(&out);
            if nrm > eps_plane {
                return Err(Error::Hyperbolicity(format!(
                    "plane at node {g} left the {eps_plane}-ball (norm {nrm})"
                )));
            }
            Ok(out)
        })
        .collect();
    let mut next = PlaneField::zeros(lam.node_count(), field.k, field.d);
    for (g, r) in rows.into_iter().enumerate() {
        next.set(g, &r?);
    }
    Ok(next)
}

/// Plane transport along the links of a fixed section, reusable across fields.
pub struct PlaneTransport {
    links: Vec<Option<PlaneLink>>,
    variant: Variant,
    eps_plane: f64,
}

impl PlaneTransport {
    pub fn new(
        sys: &MapSystem,
        tube: &Tube,
        dynamics: &dyn BaseDynamics,
        s: &Section,
        variant: Variant,
        cfg: &TransformConfig,
    ) -> Result<Self> {
        Ok(Self {
            links: plane_links(sys, tube, dynamics, s, variant, cfg)?,
            variant,
            eps_plane: cfg.eps_plane,
        })
    }

    pub fn apply(&self, tube: &Tube, field: &PlaneField) -> Result<PlaneField> {
        plane_update(tube, &self.links, field, self.variant, self.eps_plane)
    }
}

/// One transport step of a plane field along the links of the converged section.
pub fn transport_field_once(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    field: &PlaneField,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<PlaneField> {
    let links = plane_links(sys, tube, dynamics, s, variant, cfg)?;
    plane_update(tube, &links, field, variant, cfg.eps_plane)
}

pub fn iterate_plane_field(
    sys: &MapSystem,
    tube: &Tube,
    dynamics: &dyn BaseDynamics,
    s: &Section,
    variant: Variant,
    cfg: &TransformConfig,
) -> Result<(PlaneField, PlaneReport)> {
    let lam = &tube.lam;
    let links = plane_links(sys, tube, dynamics, s, variant, cfg)?;
    let mut field = PlaneField::zeros(lam.node_count(), tube.k(), tube.d());
    let mut report = PlaneReport {
        iterations: 0,
        sup_changes: Vec::new(),
        converged: false,
        truncated: false,
    };
    // same truncation as the section iteration: N steps resolve a depth-N code
    let depth_cap = match (variant, dynamics.truncation_depth()) {
        (Variant::Contracted, Some(n)) if n > 0 => Some(n),
        _ => None,
    };
    let mut run = 0;
    for it in 1..=cfg.fixpoint_max {
        let next = plane_update(tube, &links, &field, variant, cfg.eps_plane)?;
        let change = next.sup_distance(&field);
        if let Some(&prev) = report.sup_changes.last() {
            if prev > 0.0 && change / prev >= 1.0 {
                run += 1;
                if run >= crate::graph_transform::NON_CONTRACTION_RUN {
                    let k = report.sup_changes.len();
                    let ratios = (k - 4..k)
                        .map(|i| report.sup_changes[i] / report.sup_changes[i - 1])
                        .chain(std::iter::once(change / prev))
                        .collect();
                    return Err(Error::NonContraction { ratios });
                }
            } else {
                run = 0;
            }
        }
        report.sup_changes.push(change);
        report.iterations = it;
        field = next;
        if change <= cfg.plane_tol || depth_cap == Some(it) {
            report.converged = true;
            report.truncated = change > cfg.plane_tol;
            break;
        }
    }
    Ok((field, report))
}

/// Raw splitting `(E^s, T𝓛, E^u)` at an ambient point with leaf tangent `T`.
pub type SplittingHint<'a> = &'a (dyn Fn(&[f64], &DMatrix<f64>) -> Splitting + Sync);

#[derive(Clone, Debug, PartialEq)]
pub struct Splitting {
    pub stable: DMatrix<f64>,
    pub center: DMatrix<f64>,
    pub unstable: DMatrix<f64>,
}

impl Splitting {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.stable.ncols(), self.center.ncols(), self.unstable.ncols())
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.center.nrows();
        let (s, c, u) = self.dims();
        let mut m = DMatrix::zeros(n, s + c + u);
        for j in 0..s {
            m.set_column(j, &self.stable.column(j));
        }
        for j in 0..c {
            m.set_column(s + j, &self.center.column(j));
        }
        for j in 0..u {
            m.set_column(s + c + j, &self.unstable.column(j));
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub node: usize,
    pub stable_max: f64,
    pub center_min: f64,
    pub center_max: f64,
    pub unstable_min: f64,
}

impl RateSample {
    pub fn ratio(&self, r: f64) -> f64 {
        let r1 = if self.stable_max == 0.0 {
            0.0
        } else {
            self.stable_max / self.center_min.powf(r).min(1.0)
        };
        let r2 = if self.unstable_min.is_infinite() {
            0.0
        } else {
            self.center_max.powf(r).max(1.0) / self.unstable_min
        };
        r1.max(r2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityEstimate {
    pub lambda: f64,
    pub r_query: f64,
    pub r_max: u32,
    pub hyperbolic: bool,
    pub samples: usize,
    pub worst: Vec<usize>,
    pub rates: Vec<RateSample>,
}

impl HyperbolicityEstimate {
    pub fn lambda_at(&self, r: f64) -> f64 {
        self.rates.iter().map(|s| s.ratio(r)).fold(0.0, f64::max)
    }
}

pub const R_MAX_CAP: u32 = 16;
pub const RATE_MARGIN: f64 = 1.05;

fn sv_extremes(m: &DMatrix<f64>, steps: usize) -> (f64, f64) {
    if m.is_empty() {
        return (f64::INFINITY, 0.0);
    }
    let sv = m.singular_values();
    let p = 1.0 / steps as f64;
    (sv.min().max(0.0).powf(p), sv.max().powf(p))
}

/// Normal hyperbolicity rates sampled along f*-orbits.
#[allow(clippy::too_many_arguments)]
pub fn estimate_normal_hyperbolicity(
    sys: &MapSystem,
    lam: &DiscreteLamination,
    dynamics: &dyn BaseDynamics,
    hint: SplittingHint<'_>,
    orbit_len: usize,
    samples: usize,
    r_query: f64,
) -> Result<HyperbolicityEstimate> {
    if orbit_len == 0 || samples == 0 {
        return Err(Error::Input("orbit length and sample count must be positive".into()));
    }
    let core: Vec<usize> = (0..lam.node_count()).filter(|&g| lam.bump(g).0 == 1.0).collect();
    // golden-ratio sampling avoids locking onto one grid line
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut nodes: Vec<usize> = (0..samples.min(core.len()))
        .map(|i| core[((i as f64 * golden).fract() * core.len() as f64) as usize])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let n = lam.n();
    let rates: Vec<Result<Option<RateSample>>> = nodes
        .par_iter()
        .map(|&g| {
            let (mut c, k) = lam.split(g);
            let mut u = lam.params(k);
            let mut p = lam.immersion_at(c, &u)?;
            let mut split = hint(&p, &lam.tangent_at(c, &u)?);
            let (ds, dc, du) = split.dims();
            if ds + dc + du != n || dc != lam.d() {
                return Err(Error::Input("splitting dimensions do not match".into()));
            }
            let mut ps = DMatrix::<f64>::identity(ds, ds);
            let mut pc = DMatrix::<f64>::identity(dc, dc);
            let mut pu = DMatrix::<f64>::identity(du, du);
            for _ in 0..orbit_len {
                let e0 = split.matrix();
                if !(condition_number(&e0) <= 1e6) {
                    return Err(Error::Geometry {
                        node: g,
                        msg: "splitting hint is not transverse".into(),
                    });
                }
                let df = sys.jacobian(&p)?;
                let (c1, mut u1) = dynamics.forward(c, &u)?;
                // orbits leaving the leaf domain say nothing about the invariant part
                let c1 = match lam.normalize(c1, &mut u1) {
                    Ok(c1) => c1,
                    Err(Error::Domain(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let p1 = lam.immersion_at(c1, &u1)?;
                let split1 = hint(&p1, &lam.tangent_at(c1, &u1)?);
                let e1 = split1.matrix();
                let m = e1.lu().solve(&(&df * &e0)).ok_or_else(|| Error::Geometry {
                    node: g,
                    msg: "singular splitting along the orbit".into(),
                })?;
                ps = m.view((0, 0), (ds, ds)) * ps;
                pc = m.view((ds, ds), (dc, dc)) * pc;
                pu = m.view((ds + dc, ds + dc), (du, du)) * pu;
                c = c1;
                u = u1;
                p = p1;
                split = split1;
            }
            let (_, smax) = sv_extremes(&ps, orbit_len);
            let (cmin, cmax) = sv_extremes(&pc, orbit_len);
            let (umin, _) = sv_extremes(&pu, orbit_len);
            Ok(Some(RateSample {
                node: g,
                stable_max: if ds == 0 { 0.0 } else { smax },
                center_min: if dc == 0 { 1.0 } else { cmin },
                center_max: if dc == 0 { 1.0 } else { cmax },
                unstable_min: if du == 0 { f64::INFINITY } else { umin },
            }))
        })
        .collect();
    let rates: Vec<RateSample> = rates
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if rates.is_empty() {
        return Err(Error::Domain("every sampled orbit left the leaf domain".into()));
    }
    let mut est = HyperbolicityEstimate {
        lambda: 0.0,
        r_query,
        r_max: 0,
        hyperbolic: false,
        samples: rates.len(),
        worst: Vec::new(),
        rates,
    };
    est.lambda = est.lambda_at(r_query);
    est.hyperbolic = est.lambda_at(0.0) * RATE_MARGIN < 1.0;
    if est.hyperbolic {
        let mut r = 0;
        while r < R_MAX_CAP && est.lambda_at((r + 1) as f64) * RATE_MARGIN < 1.0 {
            r += 1;
        }
        est.r_max = r;
    }
    let mut order: Vec<usize> = (0..est.rates.len()).collect();
    order.sort_by(|&a, &b| {
        est.rates[b]
            .ratio(r_query)
            .partial_cmp(&est.rates[a].ratio(r_query))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    est.worst = order.iter().take(5).map(|&i| est.rates[i].node).collect();
    Ok(est)
}

/// Sup of the order-`m` central divided difference of periodic samples on a uniform grid.
pub fn periodic_difference_sup(values: &[f64], h: f64, order: usize) -> f64 {
    let n = values.len();
    let mut binom = vec![1.0f64; order + 1];
    for j in 1..=order {
        binom[j] = binom[j - 1] * (order + 1 - j) as f64 / j as f64;
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for (j, b) in binom.iter().enumerate() {
            let idx = (i + j) % n;
            let sign = if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * b * values[idx];
        }
        worst = worst.max(acc.abs());
    }
    worst / h.powi(order as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityDiagnostic {
    pub nodes: Vec<usize>,
    /// `sups[o][j]`: order-`orders[o]` difference sup at refinement `j`.
    pub orders: Vec<usize>,
    pub sups: Vec<Vec<f64>>,
    pub growth: Vec<Vec<f64>>,
}

impl RegularityDiagnostic {
    pub fn new(samples: &[(usize, Vec<f64>, f64)], orders: &[usize]) -> Self {
        let sups: Vec<Vec<f64>> = orders
            .iter()
            .map(|&o| {
                samples
                    .iter()
                    .map(|(_, v, h)| periodic_difference_sup(v, *h, o))
                    .collect()
            })
            .collect();
        let growth = sups
            .iter()
            .map(|row| row.windows(2).map(|w| w[1] / w[0]).collect())
            .collect();
        Self {
            nodes: samples.iter().map(|s| s.0).collect(),
            orders: orders.to_vec(),
            sups,
            growth,
        }
    }

    /// Bounded: no growth factor above `limit`.
    pub fn bounded(&self, order: usize, limit: f64) -> bool {
        self.row(order).map(|g| g.iter().all(|&x| x <= limit)).unwrap_or(false)
    }

    /// Growing: every growth factor at least `factor`.
    pub fn growing(&self, order: usize, factor: f64) -> bool {
        self.row(order).map(|g| g.iter().all(|&x| x >= factor)).unwrap_or(false)
    }

    fn row(&self, order: usize) -> Option<&Vec<f64>> {
        self.orders.iter().position(|&o| o == order).map(|i| &self.growth[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn expanded_diagonal() {
        let df = m(2, 2, &[2.0, 0.0, 0.0, 10.0]);
        let q = DMatrix::identity(2, 2);
        let l = transport_plane_expanded(&df, &q, &q, &m(1, 1, &[0.5])).unwrap();
        assert!((l[(0, 0)] - 0.1).abs() < 1e-15);
        let z = transport_plane_expanded(&df, &q, &q, &m(1, 1, &[0.0])).unwrap();
        assert_eq!(z[(0, 0)], 0.0);
    }

    #[test]
    fn expanded_shear() {
        let df = m(2, 2, &[2.0, 0.0, 1.0, 10.0]);
        let q = DMatrix::identity(2, 2);
        let l = transport_plane_expanded(&df, &q, &q, &m(1, 1, &[0.2])).unwrap();
        assert!((l[(0, 0)] + 0.06).abs() < 1e-15);
    }

    #[test]
    fn contracted_diagonal_and_solenoid() {
        let df = m(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let q = DMatrix::identity(2, 2);
        let l = transport_plane_contracted(&df, &q, &q, &m(1, 1, &[0.4])).unwrap();
        assert!((l[(0, 0)] - 0.1).abs() < 1e-15);
        let th = std::f64::consts::FRAC_PI_2;
        let sol = m(2, 2, &[0.5, th.cos() / 2.0, 0.0, 2.0]);
        let swap = m(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let l = transport_plane_contracted(&sol, &swap, &swap, &m(1, 1, &[0.0])).unwrap();
        assert!(l[(0, 0)].abs() < 1e-16);
    }

    #[test]
    fn singular_blocks() {
        let df = m(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let q = DMatrix::identity(2, 2);
        assert!(matches!(
            transport_plane_expanded(&df, &q, &q, &m(1, 1, &[0.0])),
            Err(Error::Hyperbolicity(_))
        ));
        let df = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            transport_plane_contracted(&df, &q, &q, &m(1, 1, &[0.0])),
            Err(Error::Immersion(_))
        ));
    }

    #[test]
    fn leibniz() {
        let l = m(1, 1, &[0.3]);
        assert_eq!(bump_leibniz(1.0, &[0.0], &[0.2], &l), l);
        assert_eq!(bump_leibniz(0.0, &[0.0], &[0.2], &l)[(0, 0)], 0.0);
        assert!((bump_leibniz(0.5, &[1.0], &[0.2], &l)[(0, 0)] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn divided_differences_of_sine() {
        let n = 256;
        let h = std::f64::consts::TAU / n as f64;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        for o in 1..=4 {
            assert!((periodic_difference_sup(&v, h, o) - 1.0).abs() < 1e-3);
        }
    }
}
