//! First-order perturbation blocks and eigenvalue corrections.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, LayeredGeometry, ShapeFunction};
use crate::linalg::{block2, scale_cols, scale_rows};
use crate::np_spectrum::{
    assemble_block_operator, assemble_gram, spectrum, Branch, EigenMode, GramMatrix, Spectrum,
};
use crate::potentials::{
    assemble_d2s_nn_cross, assemble_dddn_cross, assemble_dsdn_cross, assemble_dsdt_cross,
    assemble_np_self, assemble_single_layer_self, assemble_tangential_derivative, DenseOperator,
    OperatorKind, Trace,
};

/// Eigenvalue clusters closer than this to another eigenvalue cannot be
/// resolved by first-order theory.
pub const MIN_CLUSTER_GAP: f64 = 1e-10;

fn composite(matrix: Mat<f64>) -> DenseOperator {
    DenseOperator { matrix, kind: OperatorKind::Composite }
}

/// Arclength derivative of h at the nodes.
fn arclength_derivative(c: &Curve, h: &ShapeFunction) -> Vec<f64> {
    h.sample(c.n(), 1).iter().zip(c.speed()).map(|(d, s)| d / s).collect()
}

/// First-order coefficient of the pulled-back K* under x + eps h nu, with
/// on-boundary traces in principal-value form.
pub fn assemble_k1_self(c: &Curve, h: &ShapeFunction) -> DenseOperator {
    assemble_k1_self_with_trace(c, h, Trace::PrincipalValue)
}

pub fn assemble_k1_self_with_trace(c: &Curve, h: &ShapeFunction, trace: Trace) -> DenseOperator {
    let n = c.n();
    if h.is_zero() {
        return composite(Mat::zeros(n, n));
    }
    let hv = h.sample(n, 0);
    let hs = arclength_derivative(c, h);
    let kh: Vec<f64> = c.curvature().iter().zip(&hv).map(|(k, h)| k * h).collect();
    let dt = assemble_tangential_derivative(c).matrix;
    let s = assemble_single_layer_self(c).matrix;
    let mut kstar = assemble_np_self(c).matrix;
    let ds = &dt * &s;
    let dds = &dt * &ds;
    let dsd = &ds * &dt;
    // (a) K*[kappa h phi]
    let a = scale_cols(&kstar, &kh);
    // (b) h <D^2 S[phi] nu, nu> = h (-d_TT S - kappa (K* + jump))
    for i in 0..n {
        kstar[(i, i)] += match trace {
            Trace::PrincipalValue => 0.0,
            Trace::Interior => -0.5,
            Trace::Exterior => 0.5,
        };
    }
    let k = c.curvature();
    let m = Mat::from_fn(n, n, |i, j| {
        let b = hv[i] * (-dds[(i, j)] - k[i] * kstar[(i, j)]);
        // (c) d_nu D[h phi] = d_T S d_T [h phi]
        let cc = dsd[(i, j)] * hv[j];
        // (d) -h' d_T S[phi]
        let d = -hs[i] * ds[(i, j)];
        a[(i, j)] + b + cc + d
    });
    composite(m)
}

/// Source-side perturbation of the cross normal derivative:
/// d_nu D[h phi] + d_nu S[kappa h phi] at the scaled target.
pub fn assemble_cross_l(source: &Curve, source_h: &ShapeFunction, target: &Curve, scale_arg: f64) -> Result<DenseOperator> {
    if source_h.is_zero() {
        return Ok(composite(Mat::zeros(target.n(), source.n())));
    }
    let hv = source_h.sample(source.n(), 0);
    let kh: Vec<f64> = source.curvature().iter().zip(&hv).map(|(k, h)| k * h).collect();
    let dd = assemble_dddn_cross(source, target, scale_arg)?.matrix;
    let ds = assemble_dsdn_cross(source, target, scale_arg)?.matrix;
    let a = scale_cols(&dd, &hv);
    let b = scale_cols(&ds, &kh);
    Ok(composite(Mat::from_fn(target.n(), source.n(), |i, j| a[(i, j)] + b[(i, j)])))
}

/// Target-side perturbation of the cross normal derivative:
/// -h' d_T S[phi] + s h <D^2 S[phi] nu, nu> at the scaled target, where the
/// factor s is the chain-rule factor of the scaled argument.
pub fn assemble_cross_r(source: &Curve, target: &Curve, target_h: &ShapeFunction, scale_arg: f64) -> Result<DenseOperator> {
    if target_h.is_zero() {
        return Ok(composite(Mat::zeros(target.n(), source.n())));
    }
    let hv = target_h.sample(target.n(), 0);
    let hs = arclength_derivative(target, target_h);
    let dt = assemble_dsdt_cross(source, target, scale_arg)?.matrix;
    let hn = assemble_d2s_nn_cross(source, target, scale_arg)?.matrix;
    let a = scale_rows(&hs, &dt);
    let b = scale_rows(&hv, &hn);
    Ok(composite(Mat::from_fn(target.n(), source.n(), |i, j| -a[(i, j)] + scale_arg * b[(i, j)])))
}

/// Coefficients of eps1 and eps2 in the expansion of the block operator.
#[derive(Clone, Debug)]
pub struct PerturbationBlocks {
    pub k1: Mat<f64>,
    pub k2: Mat<f64>,
    pub trace: Trace,
}

pub fn assemble_perturbation_blocks(g: &LayeredGeometry) -> Result<PerturbationBlocks> {
    assemble_perturbation_blocks_with_trace(g, Trace::PrincipalValue)
}

pub fn assemble_perturbation_blocks_with_trace(g: &LayeredGeometry, trace: Trace) -> Result<PerturbationBlocks> {
    let (c1, c2) = g.base_curves()?;
    let s = g.ratio();
    let n = g.n;
    let neg = |m: Mat<f64>| Mat::from_fn(n, n, |i, j| -m[(i, j)]);
    let zero = Mat::<f64>::zeros(n, n);
    let (k1, k2) = rayon::join(
        || -> Result<Mat<f64>> {
            let a = neg(assemble_k1_self_with_trace(&c1, &g.h1, trace).matrix);
            let b = neg(assemble_cross_r(&c2, &c1, &g.h1, s)?.matrix);
            let c = assemble_cross_l(&c1, &g.h1, &c2, 1.0 / s)?.matrix;
            Ok(block2(&a, &b, &c, &zero))
        },
        || -> Result<Mat<f64>> {
            let b = neg(assemble_cross_l(&c2, &g.h2, &c1, s)?.matrix);
            let c = assemble_cross_r(&c1, &c2, &g.h2, 1.0 / s)?.matrix;
            let d = assemble_k1_self_with_trace(&c2, &g.h2, trace).matrix;
            Ok(block2(&zero, &b, &c, &d))
        },
    );
    Ok(PerturbationBlocks { k1: k1?, k2: k2?, trace })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectedMode {
    pub index: usize,
    pub harmonic: usize,
    pub branch: Branch,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_tilde: f64,
    /// Largest antisymmetric part of the projected correction matrices.
    pub asymmetry: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

fn projected(b: &[&EigenMode], k: &Mat<f64>, g: &GramMatrix) -> Mat<f64> {
    let m = b.len();
    let bm = Mat::from_fn(k.ncols(), m, |i, j| b[j].vector[i]);
    let kb = k * &bm;
    let gkb = &g.matrix * &kb;
    bm.transpose() * &gkb
}

fn symmetric_part(m: &Mat<f64>) -> (Mat<f64>, f64) {
    let n = m.nrows();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs() * 0.5);
        }
    }
    (Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])), asym)
}

fn quad(u: &[f64], m: &Mat<f64>) -> f64 {
    let n = u.len();
    (0..n).map(|i| (0..n).map(|j| u[i] * m[(i, j)] * u[j]).sum::<f64>()).sum()
}

/// Degenerate first-order theory on each cluster: the corrections are the
/// eigenvalues of M_ij = <(eps1 K1 + eps2 K2) Phi_j, Phi_i>_{H^2}.
pub fn first_order_corrections(
    sp: &Spectrum,
    blocks: &PerturbationBlocks,
    g: &GramMatrix,
    eps1: f64,
    eps2: f64,
) -> Result<Vec<CorrectedMode>> {
    let mut out = Vec::new();
    for cl in sp.clusters() {
        let lambda = cl[0].lambda;
        if cl.iter().any(|m| m.harmonic != cl[0].harmonic) {
            return Err(Error::DegeneracyResolution(format!(
                "eigenvalue {lambda:.6e} mixes harmonics {:?}",
                cl.iter().map(|m| m.harmonic).collect::<Vec<_>>()
            )));
        }
        let size = cl.len();
        let mut others = sp.eigenvalues.iter().map(|z| z.re).collect::<Vec<_>>();
        // remove the cluster members themselves (closest values)
        others.sort_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()));
        if let Some(next) = others.get(size) {
            if (next - lambda).abs() < MIN_CLUSTER_GAP {
                return Err(Error::DegeneracyResolution(format!(
                    "eigenvalue {lambda:.6e} is within {:.1e} of a distinct eigenvalue",
                    (next - lambda).abs()
                )));
            }
        }
        let (m1, a1) = symmetric_part(&projected(&cl, &blocks.k1, g));
        let (m2, a2) = symmetric_part(&projected(&cl, &blocks.k2, g));
        let mut m = Mat::from_fn(size, size, |i, j| eps1 * m1[(i, j)] + eps2 * m2[(i, j)]);
        if eps1 == 0.0 && eps2 == 0.0 {
            m = Mat::from_fn(size, size, |i, j| m1[(i, j)] + m2[(i, j)]);
        }
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("cluster eigendecomposition failed: {e:?}")))?;
        let uu = evd.U();
        for r in (0..size).rev() {
            let u: Vec<f64> = (0..size).map(|i| uu[(i, r)]).collect();
            let l1 = quad(&u, &m1);
            let l2 = quad(&u, &m2);
            let vector = (0..cl[0].vector.len())
                .map(|p| (0..size).map(|i| u[i] * cl[i].vector[p]).sum())
                .collect();
            out.push(CorrectedMode {
                index: out.len() + 1,
                harmonic: cl[0].harmonic,
                branch: cl[0].branch,
                lambda,
                lambda1: l1,
                lambda2: l2,
                lambda_tilde: lambda + eps1 * l1 + eps2 * l2,
                asymmetry: a1.max(a2),
                vector,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrectedFrequency {
    pub index: usize,
    pub harmonic: usize,
    pub branch: Branch,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub omega: f64,
    /// (w_p / sqrt 2) sqrt(1 - 2 lambda) [1 - (eps1 l1 + eps2 l2) / (1 - 2 lambda)]
    pub omega_tilde: f64,
    /// (w_p / sqrt 2) sqrt(1 - 2 lambda_tilde)
    pub omega_tilde_sqrt: f64,
    pub difference: f64,
}

pub fn corrected_frequencies(corrected: &[CorrectedMode], omega_p: f64) -> Result<Vec<CorrectedFrequency>> {
    if !(omega_p > 0.0) {
        return Err(Error::InvalidArgument(format!("omega_p must be positive, got {omega_p}")));
    }
    let pref = omega_p / 2f64.sqrt();
    corrected
        .iter()
        .map(|c| {
            let a = 1.0 - 2.0 * c.lambda;
            let at = 1.0 - 2.0 * c.lambda_tilde;
            if !(a > 0.0) || !(at > 0.0) {
                return Err(Error::ExcludedMode(format!("eigenvalue {} is not below 1/2", c.lambda)));
            }
            let omega = pref * a.sqrt();
            let omega_tilde = omega * (1.0 - (c.lambda_tilde - c.lambda) / a);
            let omega_tilde_sqrt = pref * at.sqrt();
            Ok(CorrectedFrequency {
                index: c.index,
                harmonic: c.harmonic,
                branch: c.branch,
                lambda: c.lambda,
                lambda_tilde: c.lambda_tilde,
                omega,
                omega_tilde,
                omega_tilde_sqrt,
                difference: omega_tilde - omega_tilde_sqrt,
            })
        })
        .collect()
}

/// Base spectrum with its first-order corrections.
#[derive(Clone, Debug)]
pub struct FirstOrderAnalysis {
    pub spectrum: Spectrum,
    pub corrected: Vec<CorrectedMode>,
    pub gram: GramMatrix,
    pub blocks: PerturbationBlocks,
}

/// Leading `n_modes` modes of the unperturbed geometry and their corrections
/// for the geometry's eps1, eps2.
pub fn first_order_analysis(g: &LayeredGeometry, n_modes: usize, trace: Trace) -> Result<FirstOrderAnalysis> {
    g.validate()?;
    let (kg, blocks) = rayon::join(
        || -> Result<_> { Ok((assemble_block_operator(g, false)?, assemble_gram(g, false)?)) },
        || assemble_perturbation_blocks_with_trace(g, trace),
    );
    let (k, gram) = kg?;
    let blocks = blocks?;
    let sp = spectrum(&k, &gram, n_modes)?;
    let corrected = first_order_corrections(&sp, &blocks, &gram, g.eps1, g.eps2)?;
    Ok(FirstOrderAnalysis { spectrum: sp, corrected, gram, blocks })
}

/// Leading real eigenvalues (by magnitude) of the operator assembled directly
/// on the perturbed curves.
pub fn direct_eigenvalues(g: &LayeredGeometry, count: usize) -> Result<Vec<f64>> {
    let k = assemble_block_operator(g, true)?;
    let gram = assemble_gram(g, true)?;
    let sp = spectrum(&k, &gram, 0)?;
    Ok(sp.eigenvalues.iter().take(count).map(|z| z.re).collect())
}

/// Largest mismatch between corrected and directly computed eigenvalues. Each
/// base cluster of size m is compared, sorted, against the m direct
/// eigenvalues closest to its mean corrected value, so that eigenvalues the
/// perturbation splits off the zero cluster do not take part.
pub fn direct_oracle_error(g: &LayeredGeometry, n_modes: usize, trace: Trace) -> Result<f64> {
    let an = first_order_analysis(g, n_modes, trace)?;
    let mut direct = direct_eigenvalues(g, usize::MAX)?;
    let mut worst: f64 = 0.0;
    let mut start = 0;
    while start < an.corrected.len() {
        let lambda = an.corrected[start].lambda;
        let end = start + an.corrected[start..].iter().take_while(|c| c.lambda == lambda).count();
        let mut pert: Vec<f64> = an.corrected[start..end].iter().map(|c| c.lambda_tilde).collect();
        let centre = pert.iter().sum::<f64>() / pert.len() as f64;
        direct.sort_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()));
        let mut near: Vec<f64> = direct.drain(..pert.len().min(direct.len())).collect();
        if near.len() < pert.len() {
            return Err(Error::InvalidArgument("fewer direct eigenvalues than corrected modes".into()));
        }
        pert.sort_by(|a, b| a.total_cmp(b));
        near.sort_by(|a, b| a.total_cmp(b));
        worst = pert.iter().zip(&near).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        start = end;
    }
    Ok(worst)
}
