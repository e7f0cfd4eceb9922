//! Nystrom discretization of the 2D Laplace layer potentials with kernel
//! Gamma(x, y) = ln|x - y| / (2 pi).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{dot, Curve, Frames, Point};
use crate::linalg::scale_rows;

const INV_2PI: f64 = 1.0 / (2.0 * PI);

/// Finest node count used by off-boundary evaluation.
pub const MAX_UPSAMPLED_NODES: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    SingleLayer,
    NpAdjointStar,
    NpAdjoint,
    DoubleLayer,
    DsdnCross,
    DsdtCross,
    D2snnCross,
    DddnCross,
    SingleLayerCross,
    Hypersingular,
    Dsdt,
    D2snn,
    TangentialDerivative,
    Composite,
}

/// Which boundary trace of grad S enters the second normal derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trace {
    #[serde(rename = "pv")]
    PrincipalValue,
    Interior,
    Exterior,
}

impl Trace {
    fn jump(self) -> f64 {
        match self {
            Trace::PrincipalValue => 0.0,
            Trace::Interior => -0.5,
            Trace::Exterior => 0.5,
        }
    }
}

/// Dense target-by-source matrix acting on density samples.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub matrix: Mat<f64>,
    pub kind: OperatorKind,
}

impl DenseOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::matvec(&self.matrix, x)
    }

    pub fn is_finite(&self) -> bool {
        (0..self.matrix.ncols()).all(|j| (0..self.matrix.nrows()).all(|i| self.matrix[(i, j)].is_finite()))
    }
}

fn op(matrix: Mat<f64>, kind: OperatorKind) -> DenseOperator {
    DenseOperator { matrix, kind }
}

/// Product-quadrature weights for the periodic kernel ln(4 sin^2((t - s)/2)),
/// indexed by the node offset k = (i - j) mod n.
fn log_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let hf = half as f64;
    (0..n)
        .map(|k| {
            let sum: f64 = (1..half)
                .map(|m| ((m * k) as f64 * 2.0 * PI / n as f64).cos() / m as f64)
                .sum();
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            -(2.0 * PI / hf) * sum - PI / (hf * hf) * alt
        })
        .collect()
}

pub fn assemble_single_layer_self(c: &Curve) -> DenseOperator {
    let n = c.n();
    let r = log_weights(n);
    let (x, sp, t) = (c.points(), c.speed(), c.nodes());
    let h = 2.0 * PI / n as f64;
    let m = Mat::from_fn(n, n, |i, j| {
        let smooth = if i == j {
            sp[i].ln()
        } else {
            let d = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
            let s2 = 4.0 * ((t[i] - t[j]) / 2.0).sin().powi(2);
            0.5 * dot(d, d).ln() - 0.5 * s2.ln()
        };
        INV_2PI * (0.5 * r[(i + n - j) % n] + h * smooth) * sp[j]
    });
    op(m, OperatorKind::SingleLayer)
}

pub fn assemble_np_self(c: &Curve) -> DenseOperator {
    let (x, nu, w, k) = (c.points(), c.normals(), c.weights(), c.curvature());
    let m = Mat::from_fn(c.n(), c.n(), |i, j| {
        if i == j {
            k[i] / (4.0 * PI) * w[j]
        } else {
            let d = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
            INV_2PI * dot(d, nu[i]) / dot(d, d) * w[j]
        }
    });
    op(m, OperatorKind::NpAdjointStar)
}

pub fn assemble_np_adjoint_self(c: &Curve) -> DenseOperator {
    let (x, nu, w, k) = (c.points(), c.normals(), c.weights(), c.curvature());
    let m = Mat::from_fn(c.n(), c.n(), |i, j| {
        if i == j {
            k[j] / (4.0 * PI) * w[j]
        } else {
            let d = [x[j][0] - x[i][0], x[j][1] - x[i][1]];
            INV_2PI * dot(d, nu[j]) / dot(d, d) * w[j]
        }
    });
    op(m, OperatorKind::NpAdjoint)
}

/// Fourier differentiation in the parameter t on n equispaced nodes.
pub fn spectral_derivative_matrix(n: usize) -> Mat<f64> {
    let h = 2.0 * PI / n as f64;
    Mat::from_fn(n, n, |j, k| {
        if j == k {
            0.0
        } else {
            let d = j as i64 - k as i64;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (d as f64 * h / 2.0).tan()
        }
    })
}

/// Arclength derivative d/dT = diag(1/|x'|) d/dt.
pub fn assemble_tangential_derivative(c: &Curve) -> DenseOperator {
    let inv: Vec<f64> = c.speed().iter().map(|s| 1.0 / s).collect();
    op(scale_rows(&inv, &spectral_derivative_matrix(c.n())), OperatorKind::TangentialDerivative)
}

/// Normal derivative of the double layer, d/dT S d/dT.
pub fn assemble_hypersingular_self(c: &Curve) -> DenseOperator {
    let dt = assemble_tangential_derivative(c).matrix;
    let s = assemble_single_layer_self(c).matrix;
    op(&(&dt * &s) * &dt, OperatorKind::Hypersingular)
}

/// Tangential derivative of S[phi] along the curve.
pub fn assemble_dsdt_self(c: &Curve) -> DenseOperator {
    let dt = assemble_tangential_derivative(c).matrix;
    let s = assemble_single_layer_self(c).matrix;
    op(&dt * &s, OperatorKind::Dsdt)
}

/// On-boundary normal-normal second derivative of S via harmonicity:
/// -d_TT S - kappa d_nu S, with d_nu S taken from the selected trace.
pub fn assemble_d2s_nn_self(c: &Curve, trace: Trace) -> DenseOperator {
    let dt = assemble_tangential_derivative(c).matrix;
    let s = assemble_single_layer_self(c).matrix;
    let mut kstar = assemble_np_self(c).matrix;
    let jump = trace.jump();
    for i in 0..c.n() {
        kstar[(i, i)] += jump;
    }
    let tt = &(&dt * &dt) * &s;
    let ks = scale_rows(c.curvature(), &kstar);
    op(Mat::from_fn(c.n(), c.n(), |i, j| -tt[(i, j)] - ks[(i, j)]), OperatorKind::D2snn)
}

fn check_separation(source: &Curve, target: &Curve, s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("scale argument must be positive, got {s}")));
    }
    let tol = 1e-3 * source.radius_scale();
    let mut best = f64::INFINITY;
    for p in target.points() {
        for y in source.points() {
            let d = [s * p[0] - y[0], s * p[1] - y[1]];
            best = best.min(dot(d, d));
        }
    }
    if best.sqrt() < tol {
        return Err(Error::GeometryDegenerate(format!(
            "scaled target comes within {:.3e} of the source curve",
            best.sqrt()
        )));
    }
    Ok(())
}

/// Kernel evaluated at z = s x_target - y with the target frame and source normal.
struct CrossGeom {
    z: Point,
    nu_t: Point,
    tan_t: Point,
    nu_y: Point,
}

fn cross_assemble(
    source: &Curve,
    target: &Curve,
    s: f64,
    kind: OperatorKind,
    kernel: impl Fn(&CrossGeom) -> f64,
) -> Result<DenseOperator> {
    check_separation(source, target, s)?;
    let (xt, nt, tt) = (target.points(), target.normals(), target.tangents());
    let (ys, ns, w) = (source.points(), source.normals(), source.weights());
    let m = Mat::from_fn(target.n(), source.n(), |i, j| {
        let g = CrossGeom {
            z: [s * xt[i][0] - ys[j][0], s * xt[i][1] - ys[j][1]],
            nu_t: nt[i],
            tan_t: tt[i],
            nu_y: ns[j],
        };
        INV_2PI * kernel(&g) * w[j]
    });
    Ok(op(m, kind))
}

/// Normal derivative of S_source evaluated at s x on the target.
pub fn assemble_dsdn_cross(source: &Curve, target: &Curve, target_scale_arg: f64) -> Result<DenseOperator> {
    cross_assemble(source, target, target_scale_arg, OperatorKind::DsdnCross, |g| {
        dot(g.z, g.nu_t) / dot(g.z, g.z)
    })
}

pub fn assemble_dsdt_cross(source: &Curve, target: &Curve, target_scale_arg: f64) -> Result<DenseOperator> {
    cross_assemble(source, target, target_scale_arg, OperatorKind::DsdtCross, |g| {
        dot(g.z, g.tan_t) / dot(g.z, g.z)
    })
}

/// <D^2 S nu, nu> of the source single layer at the scaled target.
pub fn assemble_d2s_nn_cross(source: &Curve, target: &Curve, target_scale_arg: f64) -> Result<DenseOperator> {
    cross_assemble(source, target, target_scale_arg, OperatorKind::D2snnCross, |g| {
        let r2 = dot(g.z, g.z);
        1.0 / r2 - 2.0 * dot(g.z, g.nu_t).powi(2) / (r2 * r2)
    })
}

/// Normal derivative of the source double layer at the scaled target.
pub fn assemble_dddn_cross(source: &Curve, target: &Curve, target_scale_arg: f64) -> Result<DenseOperator> {
    cross_assemble(source, target, target_scale_arg, OperatorKind::DddnCross, |g| {
        let r2 = dot(g.z, g.z);
        -(dot(g.nu_t, g.nu_y) / r2 - 2.0 * dot(g.z, g.nu_y) * dot(g.z, g.nu_t) / (r2 * r2))
    })
}

pub fn assemble_single_layer_cross(source: &Curve, target: &Curve, target_scale_arg: f64) -> Result<DenseOperator> {
    cross_assemble(source, target, target_scale_arg, OperatorKind::SingleLayerCross, |g| {
        0.5 * dot(g.z, g.z).ln()
    })
}

/// Density carried by one curve.
#[derive(Clone, Copy, Debug)]
pub struct LayerDensity<'a> {
    pub curve: &'a Curve,
    pub density: &'a [Complex64],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FieldKind {
    SingleLayer,
    SingleLayerGradient,
    DoubleLayer,
    DoubleLayerGradient,
}

/// Trigonometric interpolation of n samples onto m >= n equispaced nodes.
fn upsample(values: &[Complex64], m: usize, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let n = values.len();
    if m == n {
        return values.to_vec();
    }
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(m);
    let mut spec = values.to_vec();
    fwd.process(&mut spec);
    let mut pad = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..half {
        pad[k] = spec[k];
    }
    for k in (half + 1)..n {
        pad[m - (n - k)] = spec[k];
    }
    pad[half] = spec[half] * 0.5;
    pad[m - half] += spec[half] * 0.5;
    inv.process(&mut pad);
    let scale = 1.0 / n as f64;
    pad.iter().map(|v| v * scale).collect()
}

struct Level {
    frames: Frames,
    density: Vec<Complex64>,
    spacing: f64,
}

fn min_distance(p: Point, pts: &[Point]) -> f64 {
    pts.iter()
        .map(|y| {
            let d = [p[0] - y[0], p[1] - y[1]];
            dot(d, d)
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn eval_field(layers: &[LayerDensity], points: &[Point], kind: FieldKind) -> Result<Vec<[Complex64; 2]>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![[zero, zero]; points.len()];
    let mut planner = FftPlanner::new();
    for layer in layers {
        let c = layer.curve;
        if layer.density.len() != c.n() {
            return Err(Error::InvalidArgument("density length differs from node count".into()));
        }
        let mut levels: BTreeMap<usize, Level> = BTreeMap::new();
        let base = Level {
            frames: c.resampled_frames(c.n()),
            density: layer.density.to_vec(),
            spacing: c.max_spacing(),
        };
        levels.insert(c.n(), base);
        for (pi, p) in points.iter().enumerate() {
            let mut m = c.n();
            loop {
                if !levels.contains_key(&m) {
                    let frames = c.resampled_frames(m);
                    let spacing = frames.weights.iter().cloned().fold(0.0, f64::max);
                    let density = upsample(layer.density, m, &mut planner);
                    levels.insert(m, Level { frames, density, spacing });
                }
                let lv = &levels[&m];
                let d = min_distance(*p, &lv.frames.points) - 0.5 * lv.spacing;
                if d >= 3.0 * lv.spacing {
                    break;
                }
                if 2 * m > MAX_UPSAMPLED_NODES {
                    return Err(Error::AccuracyWarning(format!(
                        "point ({:.6e}, {:.6e}) is too close to a boundary for quadrature",
                        p[0], p[1]
                    )));
                }
                m *= 2;
            }
            let lv = &levels[&m];
            let f = &lv.frames;
            let mut acc = [zero, zero];
            for j in 0..m {
                let z = [p[0] - f.points[j][0], p[1] - f.points[j][1]];
                let r2 = dot(z, z);
                let q = lv.density[j] * (f.weights[j] * INV_2PI);
                let nu = f.normals[j];
                match kind {
                    FieldKind::SingleLayer => acc[0] += q * (0.5 * r2.ln()),
                    FieldKind::SingleLayerGradient => {
                        acc[0] += q * (z[0] / r2);
                        acc[1] += q * (z[1] / r2);
                    }
                    FieldKind::DoubleLayer => acc[0] += q * (-dot(z, nu) / r2),
                    FieldKind::DoubleLayerGradient => {
                        let zn = dot(z, nu);
                        acc[0] += q * (-nu[0] / r2 + 2.0 * zn * z[0] / (r2 * r2));
                        acc[1] += q * (-nu[1] / r2 + 2.0 * zn * z[1] / (r2 * r2));
                    }
                }
            }
            out[pi][0] += acc[0];
            out[pi][1] += acc[1];
        }
    }
    Ok(out)
}

/// Sum of single-layer potentials of the given densities at off-boundary
/// points. Densities are refined by trigonometric interpolation until each
/// point lies at least three node spacings away from the curve.
pub fn eval_potentials_offboundary(layers: &[LayerDensity], points: &[Point]) -> Result<Vec<Complex64>> {
    Ok(eval_field(layers, points, FieldKind::SingleLayer)?.into_iter().map(|v| v[0]).collect())
}

pub fn eval_single_layer_gradient(layers: &[LayerDensity], points: &[Point]) -> Result<Vec<[Complex64; 2]>> {
    eval_field(layers, points, FieldKind::SingleLayerGradient)
}

pub fn eval_double_layer(layers: &[LayerDensity], points: &[Point]) -> Result<Vec<Complex64>> {
    Ok(eval_field(layers, points, FieldKind::DoubleLayer)?.into_iter().map(|v| v[0]).collect())
}

pub fn eval_double_layer_gradient(layers: &[LayerDensity], points: &[Point]) -> Result<Vec<[Complex64; 2]>> {
    eval_field(layers, points, FieldKind::DoubleLayerGradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_circle;

    fn cos_density(c: &Curve, n: u32) -> Vec<f64> {
        c.nodes().iter().map(|t| (n as f64 * t).cos()).collect()
    }

    #[test]
    fn single_layer_of_constant_on_circle() {
        let c = make_circle(2.0, 64).unwrap();
        let s = assemble_single_layer_self(&c);
        let out = s.apply(&vec![1.0; 64]);
        for v in out {
            assert!((v - 2.0 * 2f64.ln()).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn single_layer_fourier_symbol() {
        let c = make_circle(2.0, 64).unwrap();
        let s = assemble_single_layer_self(&c);
        for n in 1..6u32 {
            let out = s.apply(&cos_density(&c, n));
            for (v, t) in out.iter().zip(c.nodes()) {
                assert!((v + 2.0 / (2.0 * n as f64) * (n as f64 * t).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn np_on_disk() {
        let c = make_circle(1.5, 64).unwrap();
        let k = assemble_np_self(&c);
        for i in 0..64 {
            for j in 0..64 {
                assert!((k.matrix[(i, j)] - c.weights()[j] / (4.0 * PI * 1.5)).abs() < 1e-14);
            }
        }
        let one = k.apply(&vec![1.0; 64]);
        assert!(one.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let kk = assemble_np_adjoint_self(&c);
        assert!(kk.apply(&vec![1.0; 64]).iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn zero_density_gives_zero() {
        let c = make_circle(1.0, 32).unwrap();
        let z = vec![0.0; 32];
        for o in [assemble_single_layer_self(&c), assemble_np_self(&c), assemble_hypersingular_self(&c)] {
            assert!(o.apply(&z).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn hypersingular_symbol_on_circle() {
        let r0 = 1.5;
        let c = make_circle(r0, 64).unwrap();
        let hyp = assemble_hypersingular_self(&c);
        for n in 0..6u32 {
            let out = hyp.apply(&cos_density(&c, n));
            for (v, t) in out.iter().zip(c.nodes()) {
                let expect = n as f64 / (2.0 * r0) * (n as f64 * t).cos();
                assert!((v - expect).abs() < 1e-10, "n={n}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn second_normal_derivative_symbols() {
        let r0 = 2.0;
        let c = make_circle(r0, 64).unwrap();
        let d2 = assemble_d2s_nn_self(&c, Trace::PrincipalValue);
        for n in 1..5u32 {
            let out = d2.apply(&cos_density(&c, n));
            for (v, t) in out.iter().zip(c.nodes()) {
                let expect = -(n as f64) / (2.0 * r0) * (n as f64 * t).cos();
                assert!((v - expect).abs() < 1e-10);
            }
        }
        let out = d2.apply(&vec![1.0; 64]);
        assert!(out.iter().all(|v| (v + 1.0 / (2.0 * r0)).abs() < 1e-11));
    }

    #[test]
    fn interior_cross_normal_derivative() {
        let src = make_circle(2.0, 64).unwrap();
        let tgt = make_circle(1.0, 64).unwrap();
        let op = assemble_dsdn_cross(&src, &tgt, 1.0).unwrap();
        let out = op.apply(&cos_density(&src, 1));
        for (v, t) in out.iter().zip(tgt.nodes()) {
            assert!((v + 0.5 * t.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_separation_violation() {
        let src = make_circle(1.0, 32).unwrap();
        let tgt = make_circle(1.0, 32).unwrap();
        assert!(matches!(assemble_dsdn_cross(&src, &tgt, 1.0), Err(Error::GeometryDegenerate(_))));
    }

    #[test]
    fn upsample_reproduces_band_limited_data() {
        let n = 32;
        let v: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                Complex64::new((3.0 * t).cos(), (5.0 * t).sin())
            })
            .collect();
        let mut planner = FftPlanner::new();
        let u = upsample(&v, 128, &mut planner);
        for (j, x) in u.iter().enumerate() {
            let t = 2.0 * PI * j as f64 / 128.0;
            assert!((x - Complex64::new((3.0 * t).cos(), (5.0 * t).sin())).norm() < 1e-13);
        }
    }

    #[test]
    fn offboundary_examples() {
        let c = make_circle(2.0, 64).unwrap();
        let one = vec![Complex64::new(1.0, 0.0); 64];
        let v = eval_potentials_offboundary(&[LayerDensity { curve: &c, density: &one }], &[[4.0, 0.0]]).unwrap();
        assert!((v[0].re - 2.0 * 4f64.ln()).abs() < 1e-12);
        let u = make_circle(1.0, 64).unwrap();
        let e: Vec<Complex64> = u.nodes().iter().map(|t| Complex64::new(t.cos(), t.sin())).collect();
        let th = 0.7f64;
        let v = eval_potentials_offboundary(
            &[LayerDensity { curve: &u, density: &e }],
            &[[2.0 * th.cos(), 2.0 * th.sin()]],
        )
        .unwrap();
        assert!((v[0] - Complex64::new(th.cos(), th.sin()) * -0.25).norm() < 1e-12);
    }
}
