//! Discrete laminations: finite transversal codes times uniform leaf grids,
//! immersed by stored ambient points.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{wrap_angle, wrap_pi, StateSpace};
use crate::error::{Error, Result};
use crate::inverse_limit::PreorbitScheme;

pub const MIN_AXIS_NODES: usize = 8;
const MAX_D: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TransversalCode {
    pub symbols: Vec<u8>,
}

impl TransversalCode {
    pub fn new(symbols: Vec<u8>) -> Self {
        Self { symbols }
    }

    pub fn depth(&self) -> usize {
        self.symbols.len()
    }
}

impl fmt::Display for TransversalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for TransversalCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Self::default());
        }
        s.split('.')
            .map(|p| {
                p.parse::<u8>()
                    .map_err(|_| Error::Input(format!("bad code symbol {p:?}")))
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self::new)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AxisKind {
    Line { lo: f64, hi: f64 },
    Angle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub nodes: usize,
}

impl Axis {
    pub fn line(lo: f64, hi: f64, nodes: usize) -> Self {
        Self {
            kind: AxisKind::Line { lo, hi },
            nodes,
        }
    }

    pub fn angle(nodes: usize) -> Self {
        Self {
            kind: AxisKind::Angle,
            nodes,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.kind {
            AxisKind::Line { lo, hi } => (hi - lo) / (self.nodes - 1) as f64,
            AxisKind::Angle => TAU / self.nodes as f64,
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        match self.kind {
            AxisKind::Line { lo, hi } => {
                if j + 1 == self.nodes {
                    hi
                } else {
                    lo + j as f64 * self.spacing()
                }
            }
            AxisKind::Angle => j as f64 * self.spacing(),
        }
    }

    pub fn is_angle(&self) -> bool {
        matches!(self.kind, AxisKind::Angle)
    }
}

/// Marked region: the core L' ⊂ V' and the bump support V, as parameter boxes.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Everything,
    Boxes {
        inner: Vec<(f64, f64)>,
        outer: Vec<(f64, f64)>,
    },
}

pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

pub fn smoothstep_slope(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

#[derive(Clone, Debug)]
pub enum Transversal {
    Ambient,
    Preorbit(Arc<PreorbitScheme>),
}

/// Borrowed per-node data of fixed width, with optional angle components.
#[derive(Clone, Copy)]
pub struct Field<'a> {
    pub values: &'a [f64],
    pub width: usize,
    pub angle: Option<&'a [bool]>,
}

impl<'a> Field<'a> {
    pub fn plain(values: &'a [f64], width: usize) -> Self {
        Self {
            values,
            width,
            angle: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub full: bool,
}

#[derive(Clone, Copy)]
struct AxisStencil {
    start: isize,
    w: [f64; 6],
    dw: [f64; 6],
    base: usize,
}

const C_FD: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

fn hermite(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            2.0 * t3 - 3.0 * t2 + 1.0,
            t3 - 2.0 * t2 + t,
            -2.0 * t3 + 3.0 * t2,
            t3 - t2,
        ],
        [
            6.0 * t2 - 6.0 * t,
            3.0 * t2 - 4.0 * t + 1.0,
            -6.0 * t2 + 6.0 * t,
            3.0 * t2 - 2.0 * t,
        ],
    )
}

/// Grid coordinates within rounding of an integer are treated as exact nodes.
fn snap(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() <= 64.0 * f64::EPSILON * s.abs().max(1.0) {
        r
    } else {
        s
    }
}

const GAUSS5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS5_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

pub type PointRule = dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync;

/// Closed-form immersion used off the grid in place of interpolation.
#[derive(Clone)]
pub struct ExactImmersion(pub Arc<PointRule>);

impl fmt::Debug for ExactImmersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ExactImmersion")
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteLamination {
    pub space: StateSpace,
    axes: Vec<Axis>,
    strides: Vec<usize>,
    per_leaf: usize,
    codes: Vec<TransversalCode>,
    index: HashMap<TransversalCode, usize>,
    seams_fwd: Vec<Option<Vec<usize>>>,
    seams_bwd: Vec<Option<Vec<usize>>>,
    points: Vec<f64>,
    angle_mask: Vec<bool>,
    metric_scale: Vec<f64>,
    pub region: Region,
    pub transversal: Transversal,
    exact: Option<ExactImmersion>,
}

impl DiscreteLamination {
    /// `seams[a]`, for an angle axis, maps a code to the code reached by crossing 2π upward.
    pub fn new(
        space: StateSpace,
        axes: Vec<Axis>,
        codes: Vec<TransversalCode>,
        seams: Vec<Option<Vec<usize>>>,
        point: impl Fn(usize, &[f64]) -> Vec<f64>,
        region: Region,
        transversal: Transversal,
    ) -> Result<Self> {
        if axes.len() > MAX_D {
            return Err(Error::Input(format!("at most {MAX_D} leaf axes")));
        }
        for (a, ax) in axes.iter().enumerate() {
            if ax.nodes < MIN_AXIS_NODES {
                return Err(Error::Input(format!(
                    "axis {a} has {} nodes, need at least {MIN_AXIS_NODES}",
                    ax.nodes
                )));
            }
            if let AxisKind::Line { lo, hi } = ax.kind {
                if !(hi > lo) {
                    return Err(Error::Input(format!("axis {a} has empty interval")));
                }
            }
        }
        if codes.is_empty() {
            return Err(Error::Input("lamination needs at least one code".into()));
        }
        let mut index = HashMap::new();
        for (i, c) in codes.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate code {c}")));
            }
        }
        if seams.len() != axes.len() {
            return Err(Error::Input("one seam entry per axis required".into()));
        }
        let mut seams_bwd = Vec::with_capacity(seams.len());
        for (a, s) in seams.iter().enumerate() {
            match s {
                None => seams_bwd.push(None),
                Some(map) => {
                    if !axes[a].is_angle() {
                        return Err(Error::Input(format!("seam on line axis {a}")));
                    }
                    if map.len() != codes.len() {
                        return Err(Error::Input("seam map length mismatch".into()));
                    }
                    let mut inv = vec![usize::MAX; codes.len()];
                    for (c, &t) in map.iter().enumerate() {
                        if t >= codes.len() || inv[t] != usize::MAX {
                            return Err(Error::Input("seam map is not a permutation".into()));
                        }
                        inv[t] = c;
                    }
                    seams_bwd.push(Some(inv));
                }
            }
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].nodes;
        }
        let per_leaf: usize = axes.iter().map(|a| a.nodes).product();
        let n = space.n();
        let mut points = Vec::with_capacity(per_leaf * codes.len() * n);
        let mut lam = Self {
            angle_mask: space.angle_mask(),
            space,
            axes,
            strides,
            per_leaf,
            codes,
            index,
            seams_fwd: seams,
            seams_bwd,
            points: Vec::new(),
            metric_scale: Vec::new(),
            region,
            transversal,
            exact: None,
        };
        for c in 0..lam.codes.len() {
            for k in 0..per_leaf {
                let u = lam.params(k);
                let mut p = point(c, &u);
                if p.len() != n {
                    return Err(Error::Input("immersion point has wrong dimension".into()));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric {
                        msg: "non-finite immersion point".into(),
                        at: u,
                    });
                }
                lam.space.wrap(&mut p);
                points.extend_from_slice(&p);
            }
        }
        lam.points = points;
        lam.metric_scale = lam.measure_speeds()?;
        Ok(lam)
    }

    /// Evaluates points off the grid by `rule`; it must agree with the node points.
    pub fn with_exact(mut self, rule: Arc<PointRule>) -> Result<Self> {
        for g in 0..self.node_count() {
            let (c, u) = self.node_params(g);
            let mut p = rule(c, &u);
            self.space.wrap(&mut p);
            if self.space.distance(&p, self.point(g)) > 1e-12 {
                return Err(Error::Input(format!("exact immersion disagrees with node {g}")));
            }
        }
        self.exact = Some(ExactImmersion(rule));
        Ok(self)
    }

    /// The closed-form point at normalized `(code, u)`, if one was supplied.
    pub fn exact_point(&self, code: usize, u: &[f64]) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| {
            let mut p = (e.0)(code, u);
            self.space.wrap(&mut p);
            p
        })
    }

    fn measure_speeds(&self) -> Result<Vec<f64>> {
        let d = self.d();
        let mut acc = vec![0.0; d];
        let n = self.n();
        let mut val = vec![0.0; n];
        let mut grad = vec![0.0; n * d];
        let count = self.node_count();
        let step = (count / 512).max(1);
        let mut m = 0usize;
        for g in (0..count).step_by(step) {
            let (c, k) = self.split(g);
            self.interpolate(self.points_field(), c, &self.params(k), &mut val, Some(&mut grad))?;
            for a in 0..d {
                acc[a] += grad[a * n..(a + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            m += 1;
        }
        Ok(acc.into_iter().map(|s| (s / m as f64).max(1e-12)).collect())
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn d(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn codes(&self) -> &[TransversalCode] {
        &self.codes
    }

    pub fn code_index(&self, c: &TransversalCode) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn nodes_per_leaf(&self) -> usize {
        self.per_leaf
    }

    pub fn node_count(&self) -> usize {
        self.per_leaf * self.codes.len()
    }

    pub fn metric_scale(&self) -> &[f64] {
        &self.metric_scale
    }

    pub fn seam(&self, axis: usize) -> Option<&[usize]> {
        self.seams_fwd[axis].as_deref()
    }

    /// Global node index → (code index, node index within the leaf grid).
    pub fn split(&self, g: usize) -> (usize, usize) {
        (g / self.per_leaf, g % self.per_leaf)
    }

    pub fn global(&self, code: usize, k: usize) -> usize {
        code * self.per_leaf + k
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        (0..self.d())
            .map(|a| (k / self.strides[a]) % self.axes[a].nodes)
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn params(&self, k: usize) -> Vec<f64> {
        (0..self.d())
            .map(|a| self.axes[a].coord((k / self.strides[a]) % self.axes[a].nodes))
            .collect()
    }

    pub fn node_params(&self, g: usize) -> (usize, Vec<f64>) {
        let (c, k) = self.split(g);
        (c, self.params(k))
    }

    pub fn point(&self, g: usize) -> &[f64] {
        let n = self.n();
        &self.points[g * n..(g + 1) * n]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn angle_mask(&self) -> &[bool] {
        &self.angle_mask
    }

    pub fn points_field(&self) -> Field<'_> {
        Field {
            values: &self.points,
            width: self.n(),
            angle: Some(&self.angle_mask),
        }
    }

    /// Brings periodic parameters into `[0, 2π)`, following seams; checks line domains.
    pub fn normalize(&self, code: usize, u: &mut [f64]) -> Result<usize> {
        let mut c = code;
        for (a, ax) in self.axes.iter().enumerate() {
            match ax.kind {
                AxisKind::Angle => {
                    if !u[a].is_finite() {
                        return Err(Error::Domain(format!("non-finite parameter on axis {a}")));
                    }
                    let turns = (u[a] / TAU).floor();
                    let mut w = u[a] - turns * TAU;
                    let mut turns = turns as i64;
                    if w >= TAU {
                        w -= TAU;
                        turns += 1;
                    }
                    if w < 0.0 {
                        w = 0.0;
                    }
                    u[a] = w;
                    if let (Some(f), Some(b)) = (&self.seams_fwd[a], &self.seams_bwd[a]) {
                        if turns.unsigned_abs() > self.codes.len() as u64 {
                            turns %= self.codes.len() as i64;
                        }
                        for _ in 0..turns.max(0) {
                            c = f[c];
                        }
                        for _ in 0..(-turns).max(0) {
                            c = b[c];
                        }
                    }
                }
                AxisKind::Line { lo, hi } => {
                    let tol = 1e-9 * (hi - lo);
                    if !(u[a] >= lo - tol && u[a] <= hi + tol) {
                        return Err(Error::Domain(format!(
                            "parameter {} outside axis {a} domain [{lo}, {hi}]",
                            u[a]
                        )));
                    }
                    u[a] = u[a].clamp(lo, hi);
                }
            }
        }
        Ok(c)
    }

    fn stencil(&self, a: usize, x: f64) -> AxisStencil {
        let ax = &self.axes[a];
        let nn = ax.nodes;
        let h = ax.spacing();
        let mut w = [0.0; 6];
        let mut dw = [0.0; 6];
        match ax.kind {
            AxisKind::Angle => {
                let s = snap(x / h);
                let j = (s.floor() as isize).clamp(0, nn as isize - 1);
                let t = s - j as f64;
                let (hv, hd) = hermite(t);
                let c = &C_FD[2];
                w[2] += hv[0];
                w[3] += hv[2];
                dw[2] += hd[0];
                dw[3] += hd[2];
                for i in 0..5 {
                    w[i] += hv[1] * c[i] / 12.0;
                    dw[i] += hd[1] * c[i] / 12.0;
                    w[i + 1] += hv[3] * c[i] / 12.0;
                    dw[i + 1] += hd[3] * c[i] / 12.0;
                }
                for v in dw.iter_mut() {
                    *v /= h;
                }
                AxisStencil {
                    start: j - 2,
                    w,
                    dw,
                    base: 2,
                }
            }
            AxisKind::Line { lo, .. } => {
                let s = snap((x - lo) / h).clamp(0.0, (nn - 1) as f64);
                let j = (s.floor() as usize).min(nn - 2);
                let t = s - j as f64;
                let (hv, hd) = hermite(t);
                let win = |m: usize| -> (usize, usize) {
                    let st = m.saturating_sub(2).min(nn - 5);
                    (st, m - st)
                };
                let (s0, p0) = win(j);
                let (s1, p1) = win(j + 1);
                let start = s0;
                w[j - start] += hv[0];
                dw[j - start] += hd[0];
                w[j + 1 - start] += hv[2];
                dw[j + 1 - start] += hd[2];
                for i in 0..5 {
                    w[s0 + i - start] += hv[1] * C_FD[p0][i] / 12.0;
                    dw[s0 + i - start] += hd[1] * C_FD[p0][i] / 12.0;
                    w[s1 + i - start] += hv[3] * C_FD[p1][i] / 12.0;
                    dw[s1 + i - start] += hd[3] * C_FD[p1][i] / 12.0;
                }
                for v in dw.iter_mut() {
                    *v /= h;
                }
                AxisStencil {
                    start: start as isize,
                    w,
                    dw,
                    base: j - start,
                }
            }
        }
    }

    /// Resolves a possibly out-of-range periodic index, returning the code reached.
    fn resolve_axis(&self, a: usize, code: usize, i: isize) -> (usize, usize) {
        let nn = self.axes[a].nodes as isize;
        if !self.axes[a].is_angle() {
            return (code, i.clamp(0, nn - 1) as usize);
        }
        let mut c = code;
        let mut i = i;
        while i >= nn {
            i -= nn;
            if let Some(f) = &self.seams_fwd[a] {
                c = f[c];
            }
        }
        while i < 0 {
            i += nn;
            if let Some(b) = &self.seams_bwd[a] {
                c = b[c];
            }
        }
        (c, i as usize)
    }

    /// Hermite interpolation of `field` at `(code, u)`; `grad[a·width + j]` receives ∂/∂u_a.
    pub fn interpolate(
        &self,
        field: Field<'_>,
        code: usize,
        u: &[f64],
        val: &mut [f64],
        mut grad: Option<&mut [f64]>,
    ) -> Result<usize> {
        let d = self.d();
        let wd = field.width;
        if u.len() != d {
            return Err(Error::Input(format!("expected {d} leaf parameters, got {}", u.len())));
        }
        let mut uu = [0.0; MAX_D];
        uu[..d].copy_from_slice(u);
        let code = self.normalize(code, &mut uu[..d])?;
        for v in val.iter_mut().take(wd) {
            *v = 0.0;
        }
        if let Some(g) = grad.as_deref_mut() {
            for v in g.iter_mut().take(wd * d) {
                *v = 0.0;
            }
        }
        if d == 0 {
            let base = code * self.per_leaf * wd;
            val[..wd].copy_from_slice(&field.values[base..base + wd]);
            return Ok(code);
        }
        let mut st = [AxisStencil {
            start: 0,
            w: [0.0; 6],
            dw: [0.0; 6],
            base: 0,
        }; MAX_D];
        for a in 0..d {
            st[a] = self.stencil(a, uu[a]);
        }
        let lookup = |k: &[usize; MAX_D]| -> usize {
            let mut c = code;
            let mut flat = 0usize;
            for a in 0..d {
                let (c2, i) = self.resolve_axis(a, c, st[a].start + k[a] as isize);
                c = c2;
                flat += i * self.strides[a];
            }
            (c * self.per_leaf + flat) * wd
        };
        let mut reference = [0.0; 64];
        let has_angle = field.angle.map(|m| m.iter().any(|&b| b)).unwrap_or(false);
        if has_angle {
            let mut kb = [0usize; MAX_D];
            for a in 0..d {
                kb[a] = st[a].base;
            }
            let off = lookup(&kb);
            reference[..wd].copy_from_slice(&field.values[off..off + wd]);
        }
        let mask = field.angle.unwrap_or(&[]);
        let mut k = [0usize; MAX_D];
        loop {
            let mut w = 1.0;
            let mut zero = false;
            for a in 0..d {
                let wa = st[a].w[k[a]];
                if wa == 0.0 && st[a].dw[k[a]] == 0.0 {
                    zero = true;
                    break;
                }
                w *= wa;
            }
            if !zero {
                let off = lookup(&k);
                let vals = &field.values[off..off + wd];
                let mut gw = [0.0; MAX_D];
                if grad.is_some() {
                    for a in 0..d {
                        let mut p = st[a].dw[k[a]];
                        for b in 0..d {
                            if b != a {
                                p *= st[b].w[k[b]];
                            }
                        }
                        gw[a] = p;
                    }
                }
                for j in 0..wd {
                    let mut v = vals[j];
                    if has_angle && mask[j] {
                        v = reference[j] + wrap_pi(v - reference[j]);
                    }
                    val[j] += w * v;
                    if let Some(g) = grad.as_deref_mut() {
                        for a in 0..d {
                            g[a * wd + j] += gw[a] * v;
                        }
                    }
                }
            }
            let mut a = d;
            loop {
                if a == 0 {
                    if has_angle {
                        for j in 0..wd {
                            if mask[j] {
                                val[j] = wrap_angle(val[j]);
                            }
                        }
                    }
                    return Ok(code);
                }
                a -= 1;
                k[a] += 1;
                if k[a] < 6 {
                    break;
                }
                k[a] = 0;
            }
        }
    }

    pub fn evaluate_immersion(&self, code: &TransversalCode, u: &[f64]) -> Result<Vec<f64>> {
        let c = self
            .code_index(code)
            .ok_or_else(|| Error::Input(format!("unknown code {code}")))?;
        self.immersion_at(c, u)
    }

    pub fn immersion_at(&self, code: usize, u: &[f64]) -> Result<Vec<f64>> {
        if self.exact.is_some() {
            let mut uu = u.to_vec();
            let c = self.normalize(code, &mut uu)?;
            return Ok(self.exact_point(c, &uu).expect("exact rule present"));
        }
        let mut v = vec![0.0; self.n()];
        self.interpolate(self.points_field(), code, u, &mut v, None)?;
        Ok(v)
    }

    /// Leaf tangent `∂i/∂u` (n×d) of the interpolated base immersion.
    pub fn tangent_at(&self, code: usize, u: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let d = self.d();
        let mut v = vec![0.0; n];
        let mut g = vec![0.0; n * d];
        self.interpolate(self.points_field(), code, u, &mut v, Some(&mut g))?;
        Ok(DMatrix::from_fn(n, d, |i, a| g[a * n + i]))
    }

    pub fn node_tangent(&self, g: usize) -> DMatrix<f64> {
        let (c, k) = self.split(g);
        self.tangent_at(c, &self.params(k))
            .expect("grid nodes are always in the domain")
    }

    /// Neighbor of a node along one axis (periodic axes follow seams).
    pub fn neighbor(&self, g: usize, axis: usize, step: isize) -> Option<usize> {
        let (c, k) = self.split(g);
        let mut idx = self.multi_index(k);
        let nn = self.axes[axis].nodes as isize;
        let target = idx[axis] as isize + step;
        if !self.axes[axis].is_angle() && (target < 0 || target >= nn) {
            return None;
        }
        let (c2, i) = self.resolve_axis(axis, c, target);
        idx[axis] = i;
        Some(self.global(c2, self.flat_index(&idx)))
    }

    /// Bump value and leaf gradient at a parameter point.
    pub fn bump_at(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let d = self.d();
        match &self.region {
            Region::Everything => (1.0, vec![0.0; d]),
            Region::Boxes { inner, outer } => {
                let mut tmin = 1.0;
                let mut arg = None;
                let mut slope = 0.0;
                for a in 0..d {
                    if self.axes[a].is_angle() {
                        continue;
                    }
                    let (li, hi) = inner[a];
                    let (lo, ho) = outer[a];
                    let x = u[a];
                    let (t, s) = if x < li {
                        ((x - lo) / (li - lo), 1.0 / (li - lo))
                    } else if x > hi {
                        ((ho - x) / (ho - hi), -1.0 / (ho - hi))
                    } else {
                        (1.0, 0.0)
                    };
                    let t = t.clamp(0.0, 1.0);
                    if t < tmin {
                        tmin = t;
                        arg = Some(a);
                        slope = s;
                    }
                }
                let mut grad = vec![0.0; d];
                if let Some(a) = arg {
                    grad[a] = smoothstep_slope(tmin) * slope;
                }
                (smoothstep(tmin), grad)
            }
        }
    }

    pub fn bump(&self, g: usize) -> (f64, Vec<f64>) {
        let (_, k) = self.split(g);
        self.bump_at(&self.params(k))
    }

    /// Arclength along the straight parameter path, minimized over the two
    /// directions of every periodic axis.
    pub fn leaf_distance(&self, code: usize, u1: &[f64], u2: &[f64]) -> Result<f64> {
        let d = self.d();
        if d == 0 {
            return Ok(0.0);
        }
        let mut a1 = u1.to_vec();
        let mut a2 = u2.to_vec();
        self.normalize(code, &mut a1)?;
        self.normalize(code, &mut a2)?;
        let angle_axes: Vec<usize> = (0..d).filter(|&a| self.axes[a].is_angle()).collect();
        let mut best = f64::INFINITY;
        for mask in 0..(1usize << angle_axes.len()) {
            let mut delta: Vec<f64> = (0..d).map(|a| u2[a] - u1[a]).collect();
            for (bit, &a) in angle_axes.iter().enumerate() {
                let w = wrap_pi(delta[a]);
                delta[a] = if mask >> bit & 1 == 0 {
                    w
                } else if w > 0.0 {
                    w - TAU
                } else {
                    w + TAU
                };
            }
            if delta.iter().all(|v| *v == 0.0) {
                return Ok(0.0);
            }
            best = best.min(self.path_length(code, u1, &delta)?);
        }
        Ok(best)
    }

    /// Length of `s ↦ i(u0 + s·delta)`, `s ∈ [0,1]`, split at grid lines.
    pub fn path_length(&self, code: usize, u0: &[f64], delta: &[f64]) -> Result<f64> {
        let d = self.d();
        let n = self.n();
        let mut breaks = vec![0.0, 1.0];
        for a in 0..d {
            if delta[a] == 0.0 {
                continue;
            }
            let h = self.axes[a].spacing();
            let lo = match self.axes[a].kind {
                AxisKind::Line { lo, .. } => lo,
                AxisKind::Angle => 0.0,
            };
            let x0 = (u0[a] - lo) / h;
            let x1 = (u0[a] + delta[a] - lo) / h;
            let (xa, xb) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
            let mut m = xa.floor() + 1.0;
            while m < xb {
                breaks.push((m - x0) / (x1 - x0));
                m += 1.0;
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let mut total = 0.0;
        let mut val = vec![0.0; n];
        let mut grad = vec![0.0; n * d];
        let mut u = vec![0.0; d];
        for win in breaks.windows(2) {
            let (s0, s1) = (win[0], win[1]);
            let half = 0.5 * (s1 - s0);
            let mid = 0.5 * (s1 + s0);
            for q in 0..5 {
                let s = mid + half * GAUSS5_X[q];
                for a in 0..d {
                    u[a] = u0[a] + s * delta[a];
                }
                self.interpolate(self.points_field(), code, &u, &mut val, Some(&mut grad))?;
                let mut sp = 0.0;
                for j in 0..n {
                    let mut c = 0.0;
                    for a in 0..d {
                        c += grad[a * n + j] * delta[a];
                    }
                    sp += c * c;
                }
                total += GAUSS5_W[q] * half * sp.sqrt();
            }
        }
        Ok(total)
    }

    /// Largest centered parameter box whose corner-to-corner leaf length is at most `eps`.
    pub fn plaque_neighborhood(&self, code: usize, u: &[f64], eps: f64) -> Result<ParamBox> {
        let d = self.d();
        let mut center = u.to_vec();
        self.normalize(code, &mut center)?;
        let scale = &self.metric_scale;
        let mut limit = f64::INFINITY;
        let mut full = true;
        for a in 0..d {
            let cap = match self.axes[a].kind {
                AxisKind::Angle => PI,
                AxisKind::Line { lo, hi } => (center[a] - lo).min(hi - center[a]),
            };
            limit = limit.min(cap * scale[a]);
        }
        let diam = |t: f64| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for mask in 0..(1usize << d.saturating_sub(1)) {
                let mut lo = vec![0.0; d];
                let mut delta = vec![0.0; d];
                for a in 0..d {
                    let sgn = if a > 0 && mask >> (a - 1) & 1 == 1 { -1.0 } else { 1.0 };
                    let w = t / scale[a];
                    lo[a] = center[a] - sgn * w;
                    delta[a] = 2.0 * sgn * w;
                }
                worst = worst.max(self.path_length(code, &lo, &delta)?);
            }
            Ok(worst)
        };
        let half_width;
        if d == 0 {
            half_width = Vec::new();
        } else if diam(limit)? <= eps {
            half_width = (0..d).map(|a| limit / scale[a]).collect();
        } else {
            full = false;
            let (mut lo, mut hi) = (0.0, limit);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if diam(mid)? <= eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            half_width = (0..d).map(|a| lo / scale[a]).collect();
        }
        if !full {
            // A periodic leaf whose half loop is shorter than eps is covered entirely.
            let mut loops_small = d > 0;
            for a in 0..d {
                if !self.axes[a].is_angle() {
                    loops_small = false;
                    break;
                }
                let mut x = center.clone();
                x[a] = 0.0;
                let mut dl = vec![0.0; d];
                dl[a] = TAU;
                if self.path_length(code, &x, &dl)? / 2.0 > eps {
                    loops_small = false;
                }
            }
            if loops_small {
                return Ok(ParamBox {
                    center,
                    half_width: vec![PI; d],
                    full: true,
                });
            }
        }
        Ok(ParamBox {
            center,
            half_width,
            full,
        })
    }

    /// Distance in the lamination: leaf metric within a code, transversal metric across codes.
    pub fn lamination_distance(&self, c1: usize, u1: &[f64], c2: usize, u2: &[f64]) -> Result<f64> {
        if c1 == c2 {
            return self.leaf_distance(c1, u1, u2);
        }
        match &self.transversal {
            Transversal::Preorbit(s) => {
                let h1 = s.history(&self.codes[c1], &s.base_point(u1))?;
                let h2 = s.history(&self.codes[c2], &s.base_point(u2))?;
                Ok(s.history_metric(&h1, &h2))
            }
            Transversal::Ambient => {
                let p = self.immersion_at(c1, u1)?;
                let q = self.immersion_at(c2, u2)?;
                Ok(self.space.distance(&p, &q))
            }
        }
    }

    /// Minimum ambient distance between base points of distinct codes at equal parameters.
    pub fn min_cross_code_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        if self.codes.len() < 2 {
            return best;
        }
        let step = (self.per_leaf / 64).max(1);
        for k in (0..self.per_leaf).step_by(step) {
            for c1 in 0..self.codes.len() {
                for c2 in (c1 + 1)..self.codes.len() {
                    let p = self.point(self.global(c1, k));
                    let q = self.point(self.global(c2, k));
                    best = best.min(self.space.distance(p, q));
                }
            }
        }
        best
    }
}
