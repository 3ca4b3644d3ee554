//! Normal frames, sections and the tubular map `I(x, v) = i(x) + N(x)·v`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lamination::{DiscreteLamination, Field};
use crate::tangent::PlaneField;

pub const MAX_FRAME_CONDITION: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalFrame {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl NormalFrame {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Column-major `n × k` block of node `g`.
    pub fn at(&self, g: usize) -> &[f64] {
        let w = self.n * self.k;
        &self.data[g * w..(g + 1) * w]
    }

    pub fn matrix(&self, g: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.k, self.at(g))
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.n * self.k).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

fn gram_schmidt(cols: &mut Vec<nalgebra::DVector<f64>>, against: &[nalgebra::DVector<f64>]) -> bool {
    let mut out: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(cols.len());
    for c in cols.iter() {
        let mut v = c.clone();
        for _ in 0..2 {
            for q in against.iter().chain(out.iter()) {
                let p = q.dot(&v);
                v -= q * p;
            }
        }
        let nrm = v.norm();
        if nrm < 1e-12 {
            return false;
        }
        out.push(v / nrm);
    }
    *cols = out;
    true
}

fn tangent_basis(t: &DMatrix<f64>) -> Vec<nalgebra::DVector<f64>> {
    let mut q: Vec<nalgebra::DVector<f64>> = Vec::new();
    for a in 0..t.ncols() {
        let mut v = t.column(a).into_owned();
        for _ in 0..2 {
            for b in &q {
                let p = b.dot(&v);
                v -= b * p;
            }
        }
        let nrm = v.norm();
        if nrm > 1e-14 {
            q.push(v / nrm);
        }
    }
    q
}

fn from_standard_basis(n: usize, k: usize, tq: &[nalgebra::DVector<f64>]) -> Vec<nalgebra::DVector<f64>> {
    let mut chosen: Vec<nalgebra::DVector<f64>> = Vec::new();
    for threshold in [0.5, 1e-3] {
        for i in 0..n {
            if chosen.len() == k {
                break;
            }
            let mut v = nalgebra::DVector::zeros(n);
            v[i] = 1.0;
            for _ in 0..2 {
                for q in tq.iter().chain(chosen.iter()) {
                    let p = q.dot(&v);
                    v -= q * p;
                }
            }
            let nrm = v.norm();
            if nrm > threshold {
                chosen.push(v / nrm);
            }
        }
        if chosen.len() == k {
            break;
        }
    }
    chosen
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let mx = sv.max();
    let mn = sv.min();
    if mn <= 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub type FrameHint<'a> = &'a (dyn Fn(usize) -> DMatrix<f64> + Sync);

/// Orthonormal transverse frames; propagated node to node so signs stay continuous.
pub fn build_normal_frames(lam: &DiscreteLamination, hint: Option<FrameHint<'_>>) -> Result<NormalFrame> {
    let n = lam.n();
    let d = lam.d();
    if d > n {
        return Err(Error::Input("leaf dimension exceeds ambient dimension".into()));
    }
    let k = n - d;
    let total = lam.node_count();
    let mut data = vec![0.0; total * n * k];
    for c in 0..lam.codes().len() {
        for idx in 0..lam.nodes_per_leaf() {
            let g = lam.global(c, idx);
            let t = lam.node_tangent(g);
            let tq = tangent_basis(&t);
            if tq.len() < d {
                return Err(Error::Geometry {
                    node: g,
                    msg: "degenerate leaf tangent".into(),
                });
            }
            let mut cols: Vec<nalgebra::DVector<f64>>;
            if let Some(h) = hint {
                let m = h(g);
                if m.nrows() != n || m.ncols() != k {
                    return Err(Error::Input(format!("hint at node {g} has wrong shape")));
                }
                cols = (0..k).map(|j| m.column(j).into_owned()).collect();
                if !gram_schmidt(&mut cols, &[]) {
                    return Err(Error::Geometry {
                        node: g,
                        msg: "hint columns are dependent".into(),
                    });
                }
            } else {
                let multi = lam.multi_index(idx);
                let prev = (0..d).rev().find(|&a| multi[a] > 0).map(|a| {
                    let mut m2 = multi.clone();
                    m2[a] -= 1;
                    lam.global(c, lam.flat_index(&m2))
                });
                cols = match prev {
                    Some(p) => {
                        let w = n * k;
                        let block = &data[p * w..(p + 1) * w];
                        let mut cs: Vec<nalgebra::DVector<f64>> = (0..k)
                            .map(|j| nalgebra::DVector::from_column_slice(&block[j * n..(j + 1) * n]))
                            .collect();
                        if gram_schmidt(&mut cs, &tq) {
                            cs
                        } else {
                            from_standard_basis(n, k, &tq)
                        }
                    }
                    None => from_standard_basis(n, k, &tq),
                };
                if cols.len() != k {
                    return Err(Error::Geometry {
                        node: g,
                        msg: "no transverse complement found".into(),
                    });
                }
            }
            let mut full = DMatrix::zeros(n, n);
            for a in 0..d {
                full.set_column(a, &t.column(a));
            }
            for j in 0..k {
                full.set_column(d + j, &cols[j]);
            }
            let cond = condition_number(&full);
            if !(cond <= MAX_FRAME_CONDITION) {
                return Err(Error::Geometry {
                    node: g,
                    msg: format!("frame not transverse (condition {cond:e})"),
                });
            }
            let w = n * k;
            for j in 0..k {
                data[g * w + j * n..g * w + (j + 1) * n].copy_from_slice(cols[j].as_slice());
            }
        }
    }
    Ok(NormalFrame { n, k, data })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub k: usize,
    pub values: Vec<f64>,
}

impl Section {
    pub fn zeros(nodes: usize, k: usize) -> Self {
        Self {
            k,
            values: vec![0.0; nodes * k],
        }
    }

    pub fn from_fn(nodes: usize, k: usize, f: impl Fn(usize) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(nodes * k);
        for g in 0..nodes {
            let v = f(g);
            values.extend_from_slice(&v[..k]);
        }
        Self { k, values }
    }

    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.values.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, g: usize) -> &[f64] {
        &self.values[g * self.k..(g + 1) * self.k]
    }

    pub fn get_mut(&mut self, g: usize) -> &mut [f64] {
        &mut self.values[g * self.k..(g + 1) * self.k]
    }

    pub fn node_norm(&self, g: usize) -> f64 {
        self.get(g).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|g| self.node_norm(g)).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &Section) -> f64 {
        let k = self.k;
        let mut best: f64 = 0.0;
        for g in 0..self.len() {
            let mut s = 0.0;
            for j in 0..k {
                let d = self.values[g * k + j] - other.values[g * k + j];
                s += d * d;
            }
            best = best.max(s.sqrt());
        }
        best
    }

    pub fn field(&self) -> Field<'_> {
        Field::plain(&self.values, self.k)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Interpolated local data of the tube around one leaf point.
#[derive(Clone, Debug)]
pub struct LocalTube {
    pub code: usize,
    pub point: Vec<f64>,
    pub frame: DMatrix<f64>,
    pub tangent: DMatrix<f64>,
    /// `∂N/∂u_a` for each axis.
    pub dframe: Vec<DMatrix<f64>>,
    pub section: Vec<f64>,
    /// `∂s/∂u`, `k × d`.
    pub dsection: DMatrix<f64>,
}

impl LocalTube {
    pub fn immersed(&self) -> Vec<f64> {
        let mut p = self.point.clone();
        for i in 0..p.len() {
            for j in 0..self.section.len() {
                p[i] += self.frame[(i, j)] * self.section[j];
            }
        }
        p
    }

    pub fn offset(&self, w: &[f64]) -> Vec<f64> {
        let mut p = self.point.clone();
        for i in 0..p.len() {
            for j in 0..w.len() {
                p[i] += self.frame[(i, j)] * w[j];
            }
        }
        p
    }

    /// `∂/∂u [i + N·v]` at fixed `v`, plus `N·∂s` when `with_section` holds.
    pub fn leaf_derivative(&self, v: &[f64], with_section: bool) -> DMatrix<f64> {
        let n = self.point.len();
        let d = self.tangent.ncols();
        let mut m = self.tangent.clone();
        for a in 0..d {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..v.len() {
                    s += self.dframe[a][(i, j)] * v[j];
                }
                m[(i, a)] += s;
            }
        }
        if with_section {
            m += &self.frame * &self.dsection;
        }
        m
    }
}

/// Lamination, frames and the combined interpolation data for `(i, N)`.
#[derive(Clone, Debug)]
pub struct Tube {
    pub lam: Arc<DiscreteLamination>,
    pub frames: NormalFrame,
    data: Vec<f64>,
    mask: Vec<bool>,
}

impl Tube {
    pub fn new(lam: Arc<DiscreteLamination>, frames: NormalFrame) -> Result<Self> {
        let n = lam.n();
        let k = frames.k();
        if frames.len() != lam.node_count() && k > 0 {
            return Err(Error::Input("frame count does not match node count".into()));
        }
        let w = n + n * k;
        let mut data = Vec::with_capacity(lam.node_count() * w);
        for g in 0..lam.node_count() {
            data.extend_from_slice(lam.point(g));
            data.extend_from_slice(frames.at(g));
        }
        let mut mask = lam.angle_mask().to_vec();
        mask.extend(std::iter::repeat(false).take(n * k));
        Ok(Self {
            lam,
            frames,
            data,
            mask,
        })
    }

    pub fn build(lam: Arc<DiscreteLamination>, hint: Option<FrameHint<'_>>) -> Result<Self> {
        let frames = build_normal_frames(&lam, hint)?;
        Self::new(lam, frames)
    }

    pub fn n(&self) -> usize {
        self.lam.n()
    }

    pub fn d(&self) -> usize {
        self.lam.d()
    }

    pub fn k(&self) -> usize {
        self.frames.k()
    }

    pub fn zero_section(&self) -> Section {
        Section::zeros(self.lam.node_count(), self.k())
    }

    /// `I(x, s(x))` at node `g`.
    pub fn node_immersion(&self, g: usize, s: &Section) -> Vec<f64> {
        self.node_offset(g, s.get(g))
    }

    pub fn node_offset(&self, g: usize, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut p = self.lam.point(g).to_vec();
        let f = self.frames.at(g);
        for j in 0..v.len() {
            for i in 0..n {
                p[i] += f[j * n + i] * v[j];
            }
        }
        self.lam.space.wrap(&mut p);
        p
    }

    pub fn local(&self, code: usize, u: &[f64], s: Option<&Section>, grads: bool) -> Result<LocalTube> {
        let n = self.n();
        let d = self.d();
        let k = self.k();
        let w = n + n * k;
        let mut val = vec![0.0; w];
        let mut g = vec![0.0; if grads { w * d } else { 0 }];
        let field = Field {
            values: &self.data,
            width: w,
            angle: Some(&self.mask),
        };
        let input_code = code;
        let code = self
            .lam
            .interpolate(field, code, u, &mut val, grads.then_some(&mut g[..]))?;
        let mut point = val[..n].to_vec();
        let mut uu = u.to_vec();
        if let Ok(c) = self.lam.normalize(input_code, &mut uu) {
            if let Some(p) = self.lam.exact_point(c, &uu) {
                point = p;
            }
        }
        let frame = DMatrix::from_column_slice(n, k, &val[n..]);
        let (tangent, dframe) = if grads {
            (
                DMatrix::from_fn(n, d, |i, a| g[a * w + i]),
                (0..d)
                    .map(|a| DMatrix::from_column_slice(n, k, &g[a * w + n..(a + 1) * w]))
                    .collect(),
            )
        } else {
            (DMatrix::zeros(n, d), Vec::new())
        };
        let (section, dsection) = match s {
            Some(s) => {
                let mut sv = vec![0.0; k];
                let mut sg = vec![0.0; if grads { k * d } else { 0 }];
                self.lam
                    .interpolate(s.field(), code, u, &mut sv, grads.then_some(&mut sg[..]))?;
                let ds = if grads {
                    DMatrix::from_fn(k, d, |j, a| sg[a * k + j])
                } else {
                    DMatrix::zeros(k, d)
                };
                (sv, ds)
            }
            None => (vec![0.0; k], DMatrix::zeros(k, d)),
        };
        Ok(LocalTube {
            code,
            point,
            frame,
            tangent,
            dframe,
            section,
            dsection,
        })
    }

    /// The immersion evaluator of a section.
    pub fn section_to_immersion<'a>(&'a self, s: &'a Section) -> Immersion<'a> {
        Immersion { tube: self, section: s }
    }

    /// `[T | N]` at node `g`.
    pub fn node_split(&self, g: usize) -> DMatrix<f64> {
        let t = self.lam.node_tangent(g);
        let f = self.frames.matrix(g);
        let n = self.n();
        let d = self.d();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..d {
            m.set_column(a, &t.column(a));
        }
        for j in 0..self.k() {
            m.set_column(d + j, &f.column(j));
        }
        m
    }
}

#[derive(Clone, Copy)]
pub struct Immersion<'a> {
    pub tube: &'a Tube,
    pub section: &'a Section,
}

impl<'a> Immersion<'a> {
    pub fn eval(&self, code: usize, u: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.tube.local(code, u, Some(self.section), false)?.immersed();
        self.tube.lam.space.wrap(&mut p);
        Ok(p)
    }

    pub fn node(&self, g: usize) -> Vec<f64> {
        self.tube.node_immersion(g, self.section)
    }
}

/// Graph coordinates of the ambient tangent plane from central differences of node values.
pub fn tangent_planes_fd(tube: &Tube, s: &Section) -> Result<PlaneField> {
    let lam = &tube.lam;
    let n = tube.n();
    let d = tube.d();
    let k = tube.k();
    let mut out = PlaneField::zeros(lam.node_count(), k, d);
    let mut delta = vec![0.0; n];
    let mut delta2 = vec![0.0; n];
    for g in 0..lam.node_count() {
        let p0 = tube.node_immersion(g, s);
        let mut w = DMatrix::zeros(n, d);
        for a in 0..d {
            let h = lam.axes()[a].spacing();
            match (lam.neighbor(g, a, 1), lam.neighbor(g, a, -1)) {
                (Some(gp), Some(gm)) => {
                    let pp = tube.node_immersion(gp, s);
                    let pm = tube.node_immersion(gm, s);
                    lam.space.delta(&pp, &pm, &mut delta);
                    for i in 0..n {
                        w[(i, a)] = delta[i] / (2.0 * h);
                    }
                }
                (Some(g1), None) => {
                    let g2 = lam
                        .neighbor(g1, a, 1)
                        .ok_or_else(|| Error::Input("axis too short".into()))?;
                    let p1 = tube.node_immersion(g1, s);
                    let p2 = tube.node_immersion(g2, s);
                    lam.space.delta(&p1, &p0, &mut delta);
                    lam.space.delta(&p2, &p0, &mut delta2);
                    for i in 0..n {
                        w[(i, a)] = (4.0 * delta[i] - delta2[i]) / (2.0 * h);
                    }
                }
                (None, Some(g1)) => {
                    let g2 = lam
                        .neighbor(g1, a, -1)
                        .ok_or_else(|| Error::Input("axis too short".into()))?;
                    let p1 = tube.node_immersion(g1, s);
                    let p2 = tube.node_immersion(g2, s);
                    lam.space.delta(&p0, &p1, &mut delta);
                    lam.space.delta(&p0, &p2, &mut delta2);
                    for i in 0..n {
                        w[(i, a)] = (4.0 * delta[i] - delta2[i]) / (2.0 * h);
                    }
                }
                (None, None) => return Err(Error::Input("isolated node".into())),
            }
        }
        let split = tube.node_split(g);
        let hv = split.lu().solve(&w).ok_or_else(|| Error::Geometry {
            node: g,
            msg: "singular [T|N] split".into(),
        })?;
        let hmat = hv.rows(0, d).into_owned();
        let vmat = hv.rows(d, k).into_owned();
        let hinv = hmat
            .try_inverse()
            .ok_or_else(|| Error::Immersion(format!("tangent plane at node {g} is not a graph over the leaf")))?;
        out.set(g, &(vmat * hinv));
    }
    Ok(out)
}
