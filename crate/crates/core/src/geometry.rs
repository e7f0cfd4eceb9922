//! Parametrized closed curves, trigonometric shape functions and the layered
//! core-shell geometry.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const TWO_PI: f64 = 2.0 * PI;

/// Clockwise quarter rotation, R(a, b) = (b, -a).
#[inline]
pub fn rotate_cw(v: Point) -> Point {
    [v[1], -v[0]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// m-th derivative of a cos(kt) + b sin(kt).
#[inline]
fn trig_derivative(k: f64, a: f64, b: f64, c: f64, s: f64, order: u32) -> f64 {
    match order % 4 {
        0 => k.powi(order as i32) * (a * c + b * s),
        1 => k.powi(order as i32) * (-a * s + b * c),
        2 => k.powi(order as i32) * (-a * c - b * s),
        _ => k.powi(order as i32) * (a * s - b * c),
    }
}

/// h(t) = sum a_k cos(kt) + sum b_k sin(kt).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    #[serde(default)]
    pub cos: Vec<(u32, f64)>,
    #[serde(default)]
    pub sin: Vec<(u32, f64)>,
}

impl ShapeFunction {
    pub fn new(cos: Vec<(u32, f64)>, sin: Vec<(u32, f64)>) -> Self {
        Self { cos, sin }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![(0, c)], vec![])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// Derivative of the given order with respect to the parameter t.
    pub fn derivative(&self, t: f64, order: u32) -> f64 {
        let t = t.rem_euclid(TWO_PI);
        let mut acc = 0.0;
        for &(k, a) in &self.cos {
            if order > 0 && k == 0 {
                continue;
            }
            let kt = k as f64 * t;
            acc += trig_derivative(k as f64, a, 0.0, kt.cos(), kt.sin(), order);
        }
        for &(k, b) in &self.sin {
            if k == 0 {
                continue;
            }
            let kt = k as f64 * t;
            acc += trig_derivative(k as f64, 0.0, b, kt.cos(), kt.sin(), order);
        }
        acc
    }

    pub fn max_frequency(&self) -> u32 {
        self.cos
            .iter()
            .chain(self.sin.iter())
            .filter(|(_, a)| *a != 0.0)
            .map(|(k, _)| *k)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().all(|(_, a)| *a == 0.0)
            && self.sin.iter().all(|(k, b)| *b == 0.0 || *k == 0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            cos: self.cos.iter().map(|&(k, a)| (k, c * a)).collect(),
            sin: self.sin.iter().map(|&(k, b)| (k, c * b)).collect(),
        }
    }

    /// Samples of h at the nodes t_j = 2 pi j / n.
    pub fn sample(&self, n: usize, order: u32) -> Vec<f64> {
        (0..n)
            .map(|j| self.derivative(TWO_PI * j as f64 / n as f64, order))
            .collect()
    }

    /// (min, max) over a dense uniform sampling of [0, 2 pi).
    pub fn extrema(&self) -> (f64, f64) {
        let m = (64 * (self.max_frequency() as usize + 1)).max(4096);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..m {
            let v = self.eval(TWO_PI * j as f64 / m as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn max_abs(&self) -> f64 {
        let (lo, hi) = self.extrema();
        lo.abs().max(hi.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierTerm {
    pub k: u32,
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
}

/// Planar curve with trigonometric-polynomial coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierCurve {
    pub terms: Vec<FourierTerm>,
}

impl FourierCurve {
    pub fn circle(radius: f64) -> Self {
        Self {
            terms: vec![FourierTerm {
                k: 1,
                ax: radius,
                bx: 0.0,
                ay: 0.0,
                by: radius,
            }],
        }
    }

    /// x = cos t + 0.65 cos 2t - 0.65, y = 1.5 sin t.
    pub fn kite() -> Self {
        Self {
            terms: vec![
                FourierTerm { k: 0, ax: -0.65, bx: 0.0, ay: 0.0, by: 0.0 },
                FourierTerm { k: 1, ax: 1.0, bx: 0.0, ay: 0.0, by: 1.5 },
                FourierTerm { k: 2, ax: 0.65, bx: 0.0, ay: 0.0, by: 0.0 },
            ],
        }
    }

    pub fn derivative(&self, t: f64, order: u32) -> Point {
        let mut p = [0.0, 0.0];
        for term in &self.terms {
            if order > 0 && term.k == 0 {
                continue;
            }
            let k = term.k as f64;
            let (s, c) = (k * t).sin_cos();
            p[0] += trig_derivative(k, term.ax, term.bx, c, s, order);
            p[1] += trig_derivative(k, term.ay, term.by, c, s, order);
        }
        p
    }

    pub fn is_circle(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [t] if t.k == 1 && t.bx == 0.0 && t.ay == 0.0 && t.ax == t.by && t.ax > 0.0 => {
                Some(t.ax)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Fourier(FourierCurve),
    /// base(t) + eps h(t) nu_base(t)
    Perturbed {
        base: FourierCurve,
        h: ShapeFunction,
        eps: f64,
    },
}

/// Position and first two parameter derivatives at one parameter value.
#[derive(Clone, Copy, Debug)]
pub struct CurveJet {
    pub x: Point,
    pub dx: Point,
    pub ddx: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parametrization {
    pub shape: Shape,
    pub scale: f64,
}

impl Parametrization {
    pub fn circle(radius: f64) -> Self {
        Self {
            shape: Shape::Fourier(FourierCurve::circle(radius)),
            scale: 1.0,
        }
    }

    pub fn jet(&self, t: f64) -> CurveJet {
        let (x, dx, ddx) = match &self.shape {
            Shape::Fourier(f) => (f.derivative(t, 0), f.derivative(t, 1), f.derivative(t, 2)),
            Shape::Perturbed { base, h, eps } => perturbed_jet(base, h, *eps, t),
        };
        let s = self.scale;
        CurveJet {
            x: [s * x[0], s * x[1]],
            dx: [s * dx[0], s * dx[1]],
            ddx: [s * ddx[0], s * ddx[1]],
        }
    }
}

fn perturbed_jet(base: &FourierCurve, h: &ShapeFunction, eps: f64, t: f64) -> (Point, Point, Point) {
    let b0 = base.derivative(t, 0);
    let b1 = base.derivative(t, 1);
    let b2 = base.derivative(t, 2);
    let b3 = base.derivative(t, 3);
    let (h0, h1, h2) = (h.derivative(t, 0), h.derivative(t, 1), h.derivative(t, 2));
    // nu = R(b1) / sigma with sigma = |b1|; write the offset as g R(b1) with g = h / sigma.
    let sig = norm(b1);
    let sig1 = dot(b1, b2) / sig;
    let sig2 = (dot(b2, b2) + dot(b1, b3)) / sig - dot(b1, b2).powi(2) / sig.powi(3);
    let g0 = h0 / sig;
    let g1 = h1 / sig - h0 * sig1 / (sig * sig);
    let g2 = h2 / sig - 2.0 * h1 * sig1 / (sig * sig) - h0 * sig2 / (sig * sig)
        + 2.0 * h0 * sig1 * sig1 / sig.powi(3);
    let (r1, r2, r3) = (rotate_cw(b1), rotate_cw(b2), rotate_cw(b3));
    let x = [b0[0] + eps * g0 * r1[0], b0[1] + eps * g0 * r1[1]];
    let dx = [
        b1[0] + eps * (g1 * r1[0] + g0 * r2[0]),
        b1[1] + eps * (g1 * r1[1] + g0 * r2[1]),
    ];
    let ddx = [
        b2[0] + eps * (g2 * r1[0] + 2.0 * g1 * r2[0] + g0 * r3[0]),
        b2[1] + eps * (g2 * r1[1] + 2.0 * g1 * r2[1] + g0 * r3[1]),
    ];
    (x, dx, ddx)
}

/// Frame data sampled at n equispaced parameter nodes.
#[derive(Clone, Debug)]
pub(crate) struct Frames {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub tangents: Vec<Point>,
    pub curvature: Vec<f64>,
    pub speed: Vec<f64>,
    pub weights: Vec<f64>,
}

pub(crate) fn sample_frames(param: &Parametrization, n: usize) -> Frames {
    let mut f = Frames {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        tangents: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
    };
    for j in 0..n {
        let t = TWO_PI * j as f64 / n as f64;
        let jet = param.jet(t);
        let sp = norm(jet.dx);
        let tan = [jet.dx[0] / sp, jet.dx[1] / sp];
        f.points.push(jet.x);
        f.tangents.push(tan);
        f.normals.push(rotate_cw(tan));
        f.curvature.push(cross(jet.dx, jet.ddx) / sp.powi(3));
        f.speed.push(sp);
        f.weights.push(TWO_PI * sp / n as f64);
    }
    f
}

/// Discretized smooth closed curve. Curvature is positive on convex
/// counterclockwise curves (1/r on a circle).
#[derive(Clone, Debug)]
pub struct Curve {
    param: Parametrization,
    nodes: Vec<f64>,
    frames: Frames,
}

impl Curve {
    pub fn new(param: Parametrization, n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "node count must be even and at least 16, got {n}"
            )));
        }
        if !(param.scale > 0.0) || !param.scale.is_finite() {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {}", param.scale)));
        }
        let frames = sample_frames(&param, n);
        let nodes = (0..n).map(|j| TWO_PI * j as f64 / n as f64).collect();
        let curve = Self { param, nodes, frames };
        curve.check_simple()?;
        Ok(curve)
    }

    fn check_simple(&self) -> Result<()> {
        let n = self.n();
        let scale = self.radius_scale();
        let finite = self.frames.points.iter().all(|p| p[0].is_finite() && p[1].is_finite())
            && self.frames.curvature.iter().all(|k| k.is_finite());
        if !finite || !(scale > 0.0) {
            return Err(Error::GeometryDegenerate("non-finite frame data".into()));
        }
        if let Some(j) = self.frames.speed.iter().position(|&s| !(s > 1e-12 * scale)) {
            return Err(Error::GeometryDegenerate(format!("vanishing speed at node {j}")));
        }
        let tol = 1e-3 * scale;
        let gap = n / 8;
        let pts = &self.frames.points;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = j - i;
                if d.min(n - d) <= gap {
                    continue;
                }
                let dist = norm([pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]]);
                if dist < tol {
                    return Err(Error::GeometryDegenerate(format!(
                        "self-intersection: nodes {i} and {j} are {dist:.3e} apart"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn points(&self) -> &[Point] {
        &self.frames.points
    }
    pub fn normals(&self) -> &[Point] {
        &self.frames.normals
    }
    pub fn tangents(&self) -> &[Point] {
        &self.frames.tangents
    }
    pub fn curvature(&self) -> &[f64] {
        &self.frames.curvature
    }
    pub fn speed(&self) -> &[f64] {
        &self.frames.speed
    }
    pub fn weights(&self) -> &[f64] {
        &self.frames.weights
    }
    pub fn parametrization(&self) -> &Parametrization {
        &self.param
    }
    pub fn length(&self) -> f64 {
        self.frames.weights.iter().sum()
    }
    /// Length / 2 pi.
    pub fn radius_scale(&self) -> f64 {
        self.length() / TWO_PI
    }
    /// Largest arclength gap between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.frames.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub(crate) fn resampled_frames(&self, m: usize) -> Frames {
        sample_frames(&self.param, m)
    }

    /// Weighted mean of node samples.
    pub fn mean(&self, values: &[f64]) -> f64 {
        let w = self.weights();
        values.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / self.length()
    }
}

pub fn make_circle(radius: f64, n: usize) -> Result<Curve> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    Curve::new(Parametrization::circle(radius), n)
}

/// x + eps h(t) nu(x) with the frame of the result computed from the
/// analytic parametrization.
pub fn perturb_curve(base: &Curve, h: &ShapeFunction, eps: f64) -> Result<Curve> {
    if !eps.is_finite() {
        return Err(Error::InvalidArgument("eps must be finite".into()));
    }
    if eps == 0.0 || h.is_zero() {
        return Ok(base.clone());
    }
    let p = base.parametrization();
    let fc = match &p.shape {
        Shape::Fourier(fc) => fc.clone(),
        Shape::Perturbed { .. } => {
            return Err(Error::InvalidArgument(
                "perturbing an already perturbed curve is not supported".into(),
            ))
        }
    };
    let param = Parametrization {
        shape: Shape::Perturbed {
            base: fc,
            h: h.clone(),
            eps: eps / p.scale,
        },
        scale: p.scale,
    };
    Curve::new(param, base.n())
}

pub fn scaled_curve(c: &Curve, delta: f64) -> Result<Curve> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let mut param = c.parametrization().clone();
    param.scale *= delta;
    Curve::new(param, c.n())
}

/// First-order factors of the length element under x + eps h nu:
/// dsigma_eps = (zeroth + eps first) dsigma + O(eps^2).
#[derive(Clone, Debug)]
pub struct LengthElementExpansion {
    pub zeroth: Vec<f64>,
    pub first: Vec<f64>,
}

pub fn length_element_expansion(base: &Curve, h: &ShapeFunction) -> LengthElementExpansion {
    let hv = h.sample(base.n(), 0);
    LengthElementExpansion {
        zeroth: vec![1.0; base.n()],
        first: base.curvature().iter().zip(&hv).map(|(k, h)| k * h).collect(),
    }
}

/// First-order normal correction: nu_eps = nu + eps * (returned) + O(eps^2),
/// equal to -h' T with h' the arclength derivative.
pub fn normal_first_order(base: &Curve, h: &ShapeFunction) -> Vec<Point> {
    let hp = h.sample(base.n(), 1);
    base.tangents()
        .iter()
        .zip(&hp)
        .zip(base.speed())
        .map(|((t, hp), sp)| [-hp / sp * t[0], -hp / sp * t[1]])
        .collect()
}

/// Benchmark shape pairs (h1, h2), numbered 1 to 4.
pub fn shape_set(index: usize) -> Option<(ShapeFunction, ShapeFunction)> {
    let (h1, h2) = match index {
        1 => (
            ShapeFunction::new(vec![(4, 0.5)], vec![]),
            ShapeFunction::new(vec![], vec![(3, -1.0)]),
        ),
        2 => (
            ShapeFunction::new(vec![], vec![(3, 0.5), (6, 1.0), (7, -0.5)]),
            ShapeFunction::new(vec![(4, -0.5), (5, 1.0), (7, 0.5)], vec![]),
        ),
        3 => (
            ShapeFunction::new(vec![], vec![(1, 0.5), (3, 0.5), (8, -1.0)]),
            ShapeFunction::new(vec![(1, -0.5), (5, -1.0), (12, 0.5)], vec![]),
        ),
        4 => (
            ShapeFunction::new(vec![(6, -1.0)], vec![]),
            ShapeFunction::new(vec![], vec![(4, -1.0)]),
        ),
        _ => return None,
    };
    Some((h1, h2))
}

/// Core-shell geometry: boundary i is delta_i times the circle of radius r_i
/// perturbed by eps_i h_i along its normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredGeometry {
    pub r1: f64,
    pub r2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub h1: ShapeFunction,
    pub h2: ShapeFunction,
    pub n: usize,
}

impl LayeredGeometry {
    pub fn disks(r1: f64, r2: f64, delta1: f64, delta2: f64, n: usize) -> Self {
        Self {
            r1,
            r2,
            delta1,
            delta2,
            eps1: 0.0,
            eps2: 0.0,
            h1: ShapeFunction::zero(),
            h2: ShapeFunction::zero(),
            n,
        }
    }

    pub fn with_shapes(mut self, h1: ShapeFunction, eps1: f64, h2: ShapeFunction, eps2: f64) -> Self {
        self.h1 = h1;
        self.h2 = h2;
        self.eps1 = eps1;
        self.eps2 = eps2;
        self
    }

    /// s = delta1 / delta2.
    pub fn ratio(&self) -> f64 {
        self.delta1 / self.delta2
    }

    /// delta1 r1 / (delta2 r2).
    pub fn rho(&self) -> f64 {
        self.delta1 * self.r1 / (self.delta2 * self.r2)
    }

    pub fn is_unperturbed(&self) -> bool {
        (self.eps1 == 0.0 || self.h1.is_zero()) && (self.eps2 == 0.0 || self.h2.is_zero())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n < 16 || self.n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "node count must be even and at least 16, got {}",
                self.n
            )));
        }
        for (name, h) in [("h1", &self.h1), ("h2", &self.h2)] {
            if h.max_frequency() as usize > self.n / 4 {
                return Err(Error::InvalidArgument(format!(
                    "{name} frequency {} exceeds N/4 = {}",
                    h.max_frequency(),
                    self.n / 4
                )));
            }
        }
        let (_, hi1) = self.h1.extrema();
        let (lo2, _) = self.h2.extrema();
        let outer_core = self.delta1 * (self.r1 + self.eps1 * hi1);
        let inner_shell = self.delta2 * (self.r2 + self.eps2 * lo2);
        if !(outer_core < inner_shell) {
            return Err(Error::GeometryDegenerate(format!(
                "core (max radius {outer_core:.6e}) is not strictly inside shell (min radius {inner_shell:.6e})"
            )));
        }
        Ok(())
    }

    /// The perturbation path is trusted when eps max|h| <= 0.1 min(r, gap)
    /// on each boundary, measured in the base frame.
    pub fn perturbation_budget_ok(&self) -> bool {
        let gap = (self.delta2 * self.r2 - self.delta1 * self.r1).max(0.0);
        let ok1 = self.eps1 * self.h1.max_abs() * self.delta1 <= 0.1 * (self.delta1 * self.r1).min(gap);
        let ok2 = self.eps2 * self.h2.max_abs() * self.delta2 <= 0.1 * (self.delta2 * self.r2).min(gap);
        ok1 && ok2
    }

    pub fn base_curves(&self) -> Result<(Curve, Curve)> {
        self.validate()?;
        Ok((make_circle(self.r1, self.n)?, make_circle(self.r2, self.n)?))
    }

    pub fn perturbed_curves(&self) -> Result<(Curve, Curve)> {
        let (c1, c2) = self.base_curves()?;
        Ok((perturb_curve(&c1, &self.h1, self.eps1)?, perturb_curve(&c2, &self.h2, self.eps2)?))
    }

    pub fn curves(&self, use_perturbed: bool) -> Result<(Curve, Curve)> {
        if use_perturbed {
            self.perturbed_curves()
        } else {
            self.base_curves()
        }
    }

    /// Curves in physical coordinates, each multiplied by its delta.
    pub fn physical_curves(&self, use_perturbed: bool) -> Result<(Curve, Curve)> {
        let (c1, c2) = self.curves(use_perturbed)?;
        Ok((scaled_curve(&c1, self.delta1)?, scaled_curve(&c2, self.delta2)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn circle_basics() {
        let c = make_circle(2.0, 64).unwrap();
        assert!(close(c.length(), 4.0 * PI, 1e-12 * 4.0 * PI));
        assert!(close(c.normals()[0][0], 1.0, 1e-15) && close(c.normals()[0][1], 0.0, 1e-15));
        assert!(close(c.points()[0][0], 2.0, 1e-15));
        let u = make_circle(1.0, 32).unwrap();
        assert!(u.curvature().iter().all(|&k| close(k, 1.0, 1e-13)));
        assert!(u.speed().iter().all(|&s| close(s, 1.0, 1e-14)));
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(make_circle(0.0, 32), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_circle(1.0, 31), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_circle(1.0, 8), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn uniform_inflation_is_a_circle() {
        let c = make_circle(1.0, 64).unwrap();
        let p = perturb_curve(&c, &ShapeFunction::constant(1.0), 0.1).unwrap();
        let q = make_circle(1.1, 64).unwrap();
        for j in 0..64 {
            for d in 0..2 {
                assert!(close(p.points()[j][d], q.points()[j][d], 1e-12));
                assert!(close(p.normals()[j][d], q.normals()[j][d], 1e-12));
            }
            assert!(close(p.curvature()[j], q.curvature()[j], 1e-12));
            assert!(close(p.weights()[j], q.weights()[j], 1e-12));
        }
    }

    #[test]
    fn zero_eps_is_identity() {
        let c = make_circle(1.0, 32).unwrap();
        let p = perturb_curve(&c, &ShapeFunction::new(vec![(4, 1.0)], vec![]), 0.0).unwrap();
        assert_eq!(p.points(), c.points());
    }

    #[test]
    fn scaled_composition() {
        let c = make_circle(1.0, 32).unwrap();
        let p = perturb_curve(&c, &ShapeFunction::constant(1.0), 0.1).unwrap();
        let s = scaled_curve(&p, 3.0).unwrap();
        for q in s.points() {
            assert!(close(norm(*q), 3.3, 1e-12));
        }
        let u = scaled_curve(&c, 2.0).unwrap();
        assert!(close(u.length(), 4.0 * PI, 1e-12));
        let same = scaled_curve(&p, 1.0).unwrap();
        assert_eq!(same.points(), p.points());
    }

    #[test]
    fn perturbed_normal_matches_closed_form_on_circle() {
        let c = make_circle(1.0, 64).unwrap();
        let h = ShapeFunction::new(vec![(4, 1.0)], vec![]);
        let eps = 0.01;
        let p = perturb_curve(&c, &h, eps).unwrap();
        for j in 0..64 {
            let t = c.nodes()[j];
            let (hv, hp) = (1.0 + eps * h.eval(t), eps * h.derivative(t, 1));
            let (nu, tan) = (c.normals()[j], c.tangents()[j]);
            let v = [hv * nu[0] - hp * tan[0], hv * nu[1] - hp * tan[1]];
            let m = norm(v);
            assert!(close(p.normals()[j][0], v[0] / m, 1e-14));
            assert!(close(p.normals()[j][1], v[1] / m, 1e-14));
        }
    }

    #[test]
    fn length_element_examples() {
        let u = make_circle(1.0, 32).unwrap();
        let e = length_element_expansion(&u, &ShapeFunction::constant(1.0));
        assert!(e.first.iter().all(|&v| close(v, 1.0, 1e-13)));
        let c = make_circle(2.0, 32).unwrap();
        let e = length_element_expansion(&c, &ShapeFunction::new(vec![(1, 1.0)], vec![]));
        for (j, v) in e.first.iter().enumerate() {
            assert!(close(*v, c.nodes()[j].cos() / 2.0, 1e-13));
        }
    }

    #[test]
    fn kite_frames_are_orthonormal() {
        let c = Curve::new(
            Parametrization { shape: Shape::Fourier(FourierCurve::kite()), scale: 1.0 },
            64,
        )
        .unwrap();
        for j in 0..64 {
            let (nu, t) = (c.normals()[j], c.tangents()[j]);
            assert!(dot(nu, t).abs() < 1e-12);
            assert!(close(norm(nu), 1.0, 1e-12));
        }
    }

    #[test]
    fn self_intersection_is_rejected() {
        let c = make_circle(1.0, 64).unwrap();
        let pinch = ShapeFunction::new(vec![(0, -1.0), (2, -1.0)], vec![]);
        assert!(matches!(perturb_curve(&c, &pinch, 0.5), Err(Error::GeometryDegenerate(_))));
    }

    #[test]
    fn layered_separation() {
        let g = LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 32);
        assert!(g.validate().is_ok());
        let bad = LayeredGeometry::disks(1.0, 2.0, 3.0, 1.0, 32);
        assert!(matches!(bad.validate(), Err(Error::GeometryDegenerate(_))));
        let alias = LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, 32).with_shapes(
            ShapeFunction::new(vec![(9, 1.0)], vec![]),
            0.01,
            ShapeFunction::zero(),
            0.0,
        );
        assert!(matches!(alias.validate(), Err(Error::InvalidArgument(_))));
    }
}
