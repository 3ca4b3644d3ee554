//! Ambient systems on flat charts: products of lines and circles, optionally
//! paired into complex coordinates.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordKind {
    Line,
    Angle,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_pi(t: f64) -> f64 {
    let w = wrap_angle(t + PI) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    kinds: Vec<CoordKind>,
    pairs: Vec<(usize, usize)>,
}

impl StateSpace {
    pub fn new(kinds: Vec<CoordKind>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Input("state space needs n >= 1".into()));
        }
        let mut seen = vec![false; kinds.len()];
        for &(re, im) in &pairs {
            for k in [re, im] {
                if k >= kinds.len() {
                    return Err(Error::Input(format!("complex pair index {k} out of range")));
                }
                if seen[k] {
                    return Err(Error::Input(format!("coordinate {k} in two complex pairs")));
                }
                if kinds[k] == CoordKind::Angle {
                    return Err(Error::Input(format!("angle coordinate {k} in a complex pair")));
                }
                seen[k] = true;
            }
            if re == im {
                return Err(Error::Input("degenerate complex pair".into()));
            }
        }
        Ok(Self { kinds, pairs })
    }

    pub fn lines(n: usize) -> Result<Self> {
        Self::new(vec![CoordKind::Line; n], Vec::new())
    }

    /// `m` complex coordinates laid out as (re, im) pairs.
    pub fn complex(m: usize) -> Result<Self> {
        Self::new(
            vec![CoordKind::Line; 2 * m],
            (0..m).map(|k| (2 * k, 2 * k + 1)).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[CoordKind] {
        &self.kinds
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn is_angle(&self, k: usize) -> bool {
        self.kinds[k] == CoordKind::Angle
    }

    pub fn angle_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k == CoordKind::Angle).collect()
    }

    pub fn wrap(&self, x: &mut [f64]) {
        for (v, k) in x.iter_mut().zip(&self.kinds) {
            if *k == CoordKind::Angle {
                *v = wrap_angle(*v);
            }
        }
    }

    /// Chart difference `a - b`, angle components taken in `(-π, π]`.
    pub fn delta(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for k in 0..self.kinds.len() {
            let d = a[k] - b[k];
            out[k] = if self.kinds[k] == CoordKind::Angle {
                wrap_pi(d)
            } else {
                d
            };
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.kinds.len() {
            let mut d = a[k] - b[k];
            if self.kinds[k] == CoordKind::Angle {
                d = wrap_pi(d);
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// The complex structure; zero on unpaired coordinates.
    pub fn j_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut j = DMatrix::zeros(n, n);
        for &(re, im) in &self.pairs {
            j[(im, re)] = 1.0;
            j[(re, im)] = -1.0;
        }
        j
    }
}

pub type EvalRule = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
pub type JacRule = dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync;

#[derive(Clone)]
pub struct MapSystem {
    pub name: String,
    pub space: StateSpace,
    rule: Arc<EvalRule>,
    jac: Option<Arc<JacRule>>,
    pub params: BTreeMap<String, Complex64>,
}

impl fmt::Debug for MapSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSystem")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("params", &self.params)
            .finish()
    }
}

impl MapSystem {
    pub fn new(
        name: impl Into<String>,
        space: StateSpace,
        rule: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            space,
            rule: Arc::new(rule),
            jac: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_param(mut self, name: &str, value: impl Into<Complex64>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn identity(space: StateSpace) -> Self {
        let n = space.n();
        Self::new("identity", space, |x, out| out.copy_from_slice(x)).with_jacobian(move |_, m| {
            *m = DMatrix::identity(n, n);
        })
    }

    /// Affine map `x ↦ A x + c` on a line space.
    pub fn affine(a: DMatrix<f64>, c: Vec<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.len() != n {
            return Err(Error::Input("affine map needs square A and matching c".into()));
        }
        let space = StateSpace::lines(n)?;
        let a2 = a.clone();
        Ok(Self::new("affine", space, move |x, out| {
            for i in 0..n {
                let mut s = c[i];
                for j in 0..n {
                    s += a[(i, j)] * x[j];
                }
                out[i] = s;
            }
        })
        .with_jacobian(move |_, m| {
            *m = a2.clone();
        }))
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Same system, analytic Jacobian dropped so the finite-difference path is used.
    pub fn without_jacobian(&self) -> Self {
        let mut s = self.clone();
        s.jac = None;
        s
    }

    pub fn param(&self, name: &str) -> Option<Complex64> {
        self.params.get(name).copied()
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// Raw evaluation: no dimension or finiteness checks, angles wrapped.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], out: &mut [f64]) {
        (self.rule)(x, out);
        self.space.wrap(out);
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n();
        if x.len() != n || out.len() != n {
            return Err(Error::Input(format!(
                "dimension mismatch: expected {n}, got {}",
                x.len()
            )));
        }
        self.eval_unchecked(x, out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                msg: "non-finite map value".into(),
                at: x.to_vec(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::Input(format!(
                "dimension mismatch: expected {n}, got {}",
                x.len()
            )));
        }
        let m = match &self.jac {
            Some(j) => {
                let mut m = DMatrix::zeros(n, n);
                j(x, &mut m);
                m
            }
            None => self.fd_jacobian_with(x, None),
        };
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                msg: "non-finite Jacobian entry".into(),
                at: x.to_vec(),
            });
        }
        Ok(m)
    }

    /// Central differences, step `cbrt(eps)·max(1,|x_k|)` unless `step` overrides the base.
    pub fn fd_jacobian_with(&self, x: &[f64], step: Option<f64>) -> DMatrix<f64> {
        let n = self.n();
        let base = step.unwrap_or_else(|| f64::EPSILON.cbrt());
        let mut m = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        let mut d = vec![0.0; n];
        for k in 0..n {
            let h = base * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            (self.rule)(&xp, &mut fp);
            xp[k] = x[k] - h;
            (self.rule)(&xp, &mut fm);
            xp[k] = x[k];
            self.space.delta(&fp, &fm, &mut d);
            for i in 0..n {
                m[(i, k)] = d[i] / (2.0 * h);
            }
        }
        m
    }

    /// Largest operator-norm defect `‖J·Df − Df·J‖` restricted to paired coordinates.
    pub fn check_holomorphy(&self, x: &[f64], h: f64) -> Result<f64> {
        if self.space.pairs().is_empty() {
            return Err(Error::Input("no complex pairs declared".into()));
        }
        let df = if self.jac.is_some() {
            self.jacobian(x)?
        } else {
            self.fd_jacobian_with(x, (h > 0.0).then_some(h))
        };
        let j = self.space.j_matrix();
        let defect = &j * &df - &df * &j;
        let idx: Vec<usize> = self.space.pairs().iter().flat_map(|&(a, b)| [a, b]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| defect[(idx[r], idx[c])]);
        Ok(sub.singular_values().max())
    }
}

/// Complex-parameter family `t ↦ f_t` on a disk around 0.
#[derive(Clone)]
pub struct DeformationFamily {
    rule: Arc<dyn Fn(Complex64) -> MapSystem + Send + Sync>,
    pub disk_radius: f64,
}

impl DeformationFamily {
    /// Builds the family and checks `family(0)` against `base` on `samples`.
    pub fn new(
        base: &MapSystem,
        disk_radius: f64,
        rule: impl Fn(Complex64) -> MapSystem + Send + Sync + 'static,
        samples: &[Vec<f64>],
    ) -> Result<Self> {
        if !(disk_radius > 0.0) {
            return Err(Error::Input("disk radius must be positive".into()));
        }
        let f0 = rule(Complex64::new(0.0, 0.0));
        for x in samples {
            let a = base.eval(x)?;
            let b = f0.eval(x)?;
            let err = base.space.distance(&a, &b);
            if err > 1e-14 * (1.0 + a.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Err(Error::Input(format!(
                    "family(0) differs from the base system by {err:e}"
                )));
            }
        }
        Ok(Self {
            rule: Arc::new(rule),
            disk_radius,
        })
    }

    pub fn at(&self, t: Complex64) -> Result<MapSystem> {
        if t.norm() > self.disk_radius * (1.0 + 1e-12) {
            return Err(Error::Input(format!("|t| = {} outside the disk", t.norm())));
        }
        Ok((self.rule)(t))
    }
}
