//! Preorbit spaces of circle and plane endomorphisms, truncated at a finite depth.
//!
//! A code `b_1 … b_N` at a base point `x_0` names the preorbit
//! `x_k = branch_{b_k}(x_{k-1})`. Codes are indexed by the binary number with
//! `b_1` as least significant digit, so crossing the angular seam of the
//! base chart is the increment map.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::dynsys::{wrap_angle, wrap_pi, CoordKind, MapSystem, StateSpace};
use crate::error::{Error, Result};
use crate::lamination::{Axis, DiscreteLamination, Region, Transversal, TransversalCode};

pub type BasePoint = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum BaseKind {
    /// θ ↦ 2θ on the circle; leaf chart is the angle itself.
    Doubling,
    /// z ↦ z² + c on an annulus `r_in ≤ |z| ≤ r_out`; leaf chart is `(ln|z|, arg z)`.
    Quadratic { c: Complex64, r_in: f64, r_out: f64 },
}

#[derive(Clone, Debug)]
pub struct PreorbitScheme {
    pub kind: BaseKind,
    pub depth: usize,
    pub base_map: MapSystem,
}

impl PreorbitScheme {
    pub fn doubling(depth: usize) -> Result<Self> {
        let space = StateSpace::new(vec![CoordKind::Angle], vec![])?;
        let base_map = MapSystem::new("doubling", space, |x, o| o[0] = 2.0 * x[0]);
        Self::checked(BaseKind::Doubling, depth, base_map)
    }

    pub fn quadratic(c: Complex64, r_in: f64, r_out: f64, depth: usize) -> Result<Self> {
        let base_map = MapSystem::new("quadratic", StateSpace::complex(1)?, move |x, o| {
            let z = Complex64::new(x[0], x[1]);
            let w = z * z + c;
            o[0] = w.re;
            o[1] = w.im;
        });
        let s = Self::checked(BaseKind::Quadratic { c, r_in, r_out }, depth, base_map)?;
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::Scheme("annulus radii must satisfy 0 < r_in < r_out".into()));
        }
        if c.im != 0.0 || c.norm() > r_in - 1e-3 {
            return Err(Error::Scheme(
                "critical value must be real and inside the inner disk by a 1e-3 margin".into(),
            ));
        }
        if (r_out + c.norm()).sqrt() > r_out || (r_in - c.norm()).sqrt() < r_in {
            return Err(Error::Scheme("annulus is not preimage-invariant".into()));
        }
        Ok(s)
    }

    fn checked(kind: BaseKind, depth: usize, base_map: MapSystem) -> Result<Self> {
        if depth > 16 {
            return Err(Error::Input("truncation depth above 16 is not supported".into()));
        }
        Ok(Self { kind, depth, base_map })
    }

    pub fn branch_count(&self) -> usize {
        2
    }

    pub fn code_count(&self) -> usize {
        1 << self.depth
    }

    pub fn code(&self, index: usize) -> TransversalCode {
        TransversalCode::new((0..self.depth).map(|k| ((index >> k) & 1) as u8).collect())
    }

    pub fn index(&self, code: &TransversalCode) -> usize {
        code.symbols.iter().enumerate().map(|(k, &b)| (b as usize) << k).sum()
    }

    pub fn codes(&self) -> Vec<TransversalCode> {
        (0..self.code_count()).map(|i| self.code(i)).collect()
    }

    /// Code reached by crossing the seam of the angular chart upward.
    pub fn seam_map(&self) -> Vec<usize> {
        let m = self.code_count();
        (0..m).map(|i| (i + 1) % m).collect()
    }

    pub fn base_point(&self, u: &[f64]) -> BasePoint {
        match self.kind {
            BaseKind::Doubling => [wrap_angle(u[0]), 0.0],
            BaseKind::Quadratic { .. } => {
                let z = Complex64::from_polar(u[0].exp(), u[1]);
                [z.re, z.im]
            }
        }
    }

    pub fn leaf_params(&self, x: &BasePoint) -> Vec<f64> {
        match self.kind {
            BaseKind::Doubling => vec![wrap_angle(x[0])],
            BaseKind::Quadratic { .. } => {
                let z = Complex64::new(x[0], x[1]);
                vec![z.norm().ln(), wrap_angle(z.arg())]
            }
        }
    }

    pub fn leaf_axes(&self, nodes: &[usize]) -> Result<Vec<Axis>> {
        match self.kind {
            BaseKind::Doubling => {
                let n = *nodes.first().ok_or_else(|| Error::Input("missing node count".into()))?;
                Ok(vec![Axis::angle(n)])
            }
            BaseKind::Quadratic { r_in, r_out, .. } => {
                if nodes.len() < 2 {
                    return Err(Error::Input("quadratic scheme needs (radial, angular) nodes".into()));
                }
                Ok(vec![Axis::line(r_in.ln(), r_out.ln(), nodes[0]), Axis::angle(nodes[1])])
            }
        }
    }

    /// Index of the angular leaf axis carrying the seam.
    pub fn seam_axis(&self) -> usize {
        match self.kind {
            BaseKind::Doubling => 0,
            BaseKind::Quadratic { .. } => 1,
        }
    }

    pub fn image(&self, x: &BasePoint) -> BasePoint {
        match self.kind {
            BaseKind::Doubling => [wrap_angle(2.0 * x[0]), 0.0],
            BaseKind::Quadratic { c, .. } => {
                let z = Complex64::new(x[0], x[1]);
                let w = z * z + c;
                [w.re, w.im]
            }
        }
    }

    pub fn preimage(&self, x: &BasePoint, b: u8) -> BasePoint {
        match self.kind {
            BaseKind::Doubling => [(wrap_angle(x[0]) + TAU * b as f64) / 2.0, 0.0],
            BaseKind::Quadratic { c, .. } => {
                let w = Complex64::new(x[0], x[1]) - c;
                let arg = wrap_angle(w.arg());
                let z = Complex64::from_polar(w.norm().sqrt(), (arg + TAU * b as f64) / 2.0);
                [z.re, z.im]
            }
        }
    }

    /// The branch `b` with `preimage(image(x), b) = x`.
    pub fn branch_of(&self, x: &BasePoint) -> u8 {
        let y = self.image(x);
        let d0 = self.base_distance(&self.preimage(&y, 0), x);
        let d1 = self.base_distance(&self.preimage(&y, 1), x);
        if d1 < d0 {
            1
        } else {
            0
        }
    }

    pub fn base_distance(&self, a: &BasePoint, b: &BasePoint) -> f64 {
        match self.kind {
            BaseKind::Doubling => wrap_pi(a[0] - b[0]).abs(),
            BaseKind::Quadratic { .. } => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
        }
    }

    /// `x_0, …, x_N` along the coded branches.
    pub fn history(&self, code: &TransversalCode, x0: &BasePoint) -> Result<Vec<BasePoint>> {
        let mut h = Vec::with_capacity(code.depth() + 1);
        h.push(*x0);
        let mut x = *x0;
        for &b in &code.symbols {
            if b as usize >= self.branch_count() {
                return Err(Error::Input(format!("branch symbol {b} out of range")));
            }
            x = self.preimage(&x, b);
            h.push(x);
        }
        Ok(h)
    }

    /// `Σ_n min(d(x_n, y_n), 1) / 2ⁿ` over the common length.
    pub fn history_metric(&self, a: &[BasePoint], b: &[BasePoint]) -> f64 {
        let mut s = 0.0;
        let mut w = 1.0;
        for (x, y) in a.iter().zip(b) {
            s += self.base_distance(x, y).min(1.0) * w;
            w *= 0.5;
        }
        s
    }

    /// Forward shift: `(x_0; b_1…b_N) ↦ (f(x_0); β(x_0), b_1…b_{N-1})`.
    pub fn shift_forward(&self, code: &TransversalCode, x0: &BasePoint) -> Result<(TransversalCode, BasePoint)> {
        if code.depth() == 0 {
            return Err(Error::Truncation("forward shift of a depth-0 code".into()));
        }
        let beta = self.branch_of(x0);
        let mut s = Vec::with_capacity(code.depth());
        s.push(beta);
        s.extend_from_slice(&code.symbols[..code.depth() - 1]);
        Ok((TransversalCode::new(s), self.image(x0)))
    }

    /// Inverse shift: `(x_0; b_1…b_N) ↦ (x_1; b_2…b_N, tail)`.
    pub fn shift_inverse(
        &self,
        code: &TransversalCode,
        x0: &BasePoint,
        tail: u8,
    ) -> Result<(TransversalCode, BasePoint)> {
        if code.depth() == 0 {
            return Err(Error::Truncation("inverse shift of a depth-0 code".into()));
        }
        let x1 = self.preimage(x0, code.symbols[0]);
        let mut s = code.symbols[1..].to_vec();
        s.push(tail);
        Ok((TransversalCode::new(s), x1))
    }

    /// Checks the branch solver at every node of the given axes.
    pub fn validate(&self, axes: &[Axis]) -> Result<()> {
        let probe = DiscreteLamination::new(
            StateSpace::lines(2)?,
            axes.to_vec(),
            vec![TransversalCode::default()],
            vec![None; axes.len()],
            |_, u| self.base_point(u).to_vec(),
            Region::Everything,
            Transversal::Ambient,
        )?;
        for k in 0..probe.nodes_per_leaf() {
            let x = self.base_point(&probe.params(k));
            for b in 0..self.branch_count() as u8 {
                let y = self.preimage(&x, b);
                let back = self.image(&y);
                if self.base_distance(&back, &x) > 1e-10 {
                    return Err(Error::Scheme(format!("branch {b} fails at {x:?}")));
                }
                if let BaseKind::Quadratic { r_in, r_out, .. } = self.kind {
                    let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
                    if r < r_in || r > r_out {
                        return Err(Error::Scheme(format!("preimage {y:?} leaves the annulus")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Preorbit lamination: one leaf grid per code, each node immersed at `embed(x_0)`.
pub fn build_preorbit_space(
    scheme: std::sync::Arc<PreorbitScheme>,
    space: StateSpace,
    nodes: &[usize],
    embed: impl Fn(&BasePoint) -> Vec<f64>,
) -> Result<DiscreteLamination> {
    let axes = scheme.leaf_axes(nodes)?;
    scheme.validate(&axes)?;
    let mut seams = vec![None; axes.len()];
    seams[scheme.seam_axis()] = Some(scheme.seam_map());
    let s2 = scheme.clone();
    DiscreteLamination::new(
        space,
        axes,
        scheme.codes(),
        seams,
        move |_, u| embed(&s2.base_point(u)),
        Region::Everything,
        Transversal::Preorbit(scheme),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn depth_three_has_eight_codes() {
        let s = PreorbitScheme::doubling(3).unwrap();
        let codes = s.codes();
        assert_eq!(codes.len(), 8);
        for (i, c) in codes.iter().enumerate() {
            assert_eq!(s.index(c), i);
        }
    }

    #[test]
    fn all_zero_vs_all_one_metric() {
        let s = PreorbitScheme::doubling(3).unwrap();
        let x = [0.0, 0.0];
        let a = s.history(&s.code(0), &x).unwrap();
        let b = s.history(&s.code(7), &x).unwrap();
        // x_n: 0,0,0,0 against 0, π, 3π/2, 7π/4.
        let oracle = 0.0 + 1.0 / 2.0 + (PI / 2.0).min(1.0) / 4.0 + (PI / 4.0).min(1.0) / 8.0;
        assert!((s.history_metric(&a, &b) - oracle).abs() < 1e-14);
    }

    #[test]
    fn quadratic_sixteen_codes() {
        let s = PreorbitScheme::quadratic(Complex64::new(-0.1, 0.0), 0.3, 1.5, 4).unwrap();
        assert_eq!(s.codes().len(), 16);
        let x = [0.7, -0.2];
        for b in 0..2 {
            let y = s.preimage(&x, b);
            let z = Complex64::new(y[0], y[1]);
            let w = z * z - 0.1;
            assert!((w.re - 0.7).abs() < 1e-14 && (w.im + 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn depth_zero_is_base() {
        let s = PreorbitScheme::doubling(0).unwrap();
        assert_eq!(s.codes().len(), 1);
        assert!(matches!(
            s.shift_forward(&s.code(0), &[1.0, 0.0]),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn shift_recodes_consistently() {
        let s = PreorbitScheme::doubling(2).unwrap();
        // θ₁ = π, θ₂ = π/2 at θ = 0.
        let code = TransversalCode::new(vec![1, 0]);
        let h = s.history(&code, &[0.0, 0.0]).unwrap();
        assert!((h[1][0] - PI).abs() < 1e-15 && (h[2][0] - PI / 2.0).abs() < 1e-15);
        let (c2, x) = s.shift_forward(&code, &[0.0, 0.0]).unwrap();
        let h2 = s.history(&c2, &x).unwrap();
        assert!(s.base_distance(&h2[1], &h[0]) < 1e-15);
        assert!(s.base_distance(&h2[2], &h[1]) < 1e-15);
    }

    #[test]
    fn seam_is_counter_increment() {
        for scheme in [
            PreorbitScheme::doubling(4).unwrap(),
            PreorbitScheme::quadratic(Complex64::new(-0.1, 0.0), 0.3, 1.5, 4).unwrap(),
        ] {
            let seam = scheme.seam_map();
            let ax = scheme.seam_axis();
            let mut below = vec![0.0; ax + 1];
            let mut above = vec![0.0; ax + 1];
            if ax == 1 {
                below[0] = 0.1;
                above[0] = 0.1;
            }
            below[ax] = TAU - 1e-9;
            above[ax] = 1e-9;
            let xb = scheme.base_point(&below);
            let xa = scheme.base_point(&above);
            for i in 0..scheme.code_count() {
                let hb = scheme.history(&scheme.code(i), &xb).unwrap();
                let ha = scheme.history(&scheme.code(seam[i]), &xa).unwrap();
                for k in 0..=scheme.depth {
                    assert!(scheme.base_distance(&hb[k], &ha[k]) < 1e-6, "code {i}, level {k}");
                }
            }
        }
    }

    #[test]
    fn rejects_critical_value_in_region() {
        assert!(PreorbitScheme::quadratic(Complex64::new(-0.5, 0.0), 0.3, 1.5, 2).is_err());
    }
}
