//! Block operator, H^2 Gram matrix and the mean-zero spectrum.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, LayeredGeometry};
use crate::linalg::{block2, complement_basis, spectral_norm};
use crate::potentials::{
    assemble_dsdn_cross, assemble_np_self, assemble_single_layer_cross, assemble_single_layer_self,
};

/// Relative and absolute tolerances for grouping numerically equal eigenvalues.
pub const CLUSTER_REL_TOL: f64 = 1e-7;
pub const CLUSTER_ABS_TOL: f64 = 1e-12;
/// Imaginary parts above this abort the decomposition.
pub const MAX_IMAG: f64 = 1e-6;

/// Discretized block operator on two boundaries of N nodes each, acting on
/// [boundary 1 samples, boundary 2 samples].
#[derive(Clone, Debug)]
pub struct BlockOperator {
    pub matrix: Mat<f64>,
    pub n: usize,
    /// delta1 / delta2
    pub ratio: f64,
    pub curves: [Curve; 2],
}

impl BlockOperator {
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.curves[0].weights().to_vec();
        w.extend_from_slice(self.curves[1].weights());
        w
    }
}

/// Symmetric matrix of <Phi, -S Psi> with quadrature weights folded in.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub matrix: Mat<f64>,
    pub n: usize,
}

impl GramMatrix {
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::bilinear(a, &self.matrix, b)
    }
}

/// Sign of the eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn of(lambda: f64) -> Self {
        if lambda >= 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenMode {
    /// 1-based rank in the |lambda|-descending order.
    pub index: usize,
    pub lambda: f64,
    /// Largest imaginary part within the eigenvalue cluster before it was discarded.
    pub imag: f64,
    /// H^2-normalized block eigenvector (2N samples).
    pub vector: Vec<f64>,
    /// Dominant Fourier frequency of the samples.
    pub harmonic: usize,
    pub branch: Branch,
    /// Modes sharing an id span one numerically degenerate eigenspace.
    pub cluster: usize,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// All eigenvalues of the mean-zero restriction, sorted by |lambda| descending.
    pub eigenvalues: Vec<Complex64>,
    pub modes: Vec<EigenMode>,
}

impl Spectrum {
    /// Modes grouped by cluster, in order.
    pub fn clusters(&self) -> Vec<Vec<&EigenMode>> {
        let mut out: Vec<Vec<&EigenMode>> = Vec::new();
        for m in &self.modes {
            match out.last_mut() {
                Some(last) if last[0].cluster == m.cluster => last.push(m),
                _ => out.push(vec![m]),
            }
        }
        out
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

pub fn assemble_block_operator(g: &LayeredGeometry, use_perturbed_curves: bool) -> Result<BlockOperator> {
    let (c1, c2) = g.curves(use_perturbed_curves)?;
    let s = g.ratio();
    let (k11, k22) = rayon::join(|| assemble_np_self(&c1), || assemble_np_self(&c2));
    // The printed ratio prefactors multiply derivatives of x -> S[.](s x); the
    // chain rule contributes the reciprocal factor, leaving the plain kernel
    // evaluated at the scaled targets.
    let (k12, k21) = rayon::join(
        || assemble_dsdn_cross(&c2, &c1, s),
        || assemble_dsdn_cross(&c1, &c2, 1.0 / s),
    );
    let (k12, k21) = (k12?, k21?);
    let n = g.n;
    let neg = |m: &Mat<f64>| Mat::from_fn(n, n, |i, j| -m[(i, j)]);
    let matrix = block2(&neg(&k11.matrix), &neg(&k12.matrix), &k21.matrix, &k22.matrix);
    Ok(BlockOperator { matrix, n, ratio: s, curves: [c1, c2] })
}

/// Gram matrix of the H^2 inner product, assembled on the physical curves
/// delta_i * boundary_i including the cross-boundary single-layer blocks.
pub fn assemble_gram(g: &LayeredGeometry, use_perturbed_curves: bool) -> Result<GramMatrix> {
    let (p1, p2) = g.physical_curves(use_perturbed_curves)?;
    let (s11, s22) = rayon::join(|| assemble_single_layer_self(&p1), || assemble_single_layer_self(&p2));
    let s12 = assemble_single_layer_cross(&p2, &p1, 1.0)?;
    let s21 = assemble_single_layer_cross(&p1, &p2, 1.0)?;
    let s = block2(&s11.matrix, &s12.matrix, &s21.matrix, &s22.matrix);
    let mut w = p1.weights().to_vec();
    w.extend_from_slice(p2.weights());
    let n2 = 2 * g.n;
    let matrix = Mat::from_fn(n2, n2, |i, j| -0.5 * (w[i] * s[(i, j)] + w[j] * s[(j, i)]));
    Ok(GramMatrix { matrix, n: g.n })
}

/// Orthonormal basis of the block mean-zero subspace, 2N x (2N - 2).
pub fn mean_zero_basis(k: &BlockOperator) -> Mat<f64> {
    let n = k.n;
    let q1 = complement_basis(k.curves[0].weights());
    let q2 = complement_basis(k.curves[1].weights());
    Mat::from_fn(2 * n, 2 * n - 2, |i, j| match (i < n, j < n - 1) {
        (true, true) => q1[(i, j)],
        (false, false) => q2[(i - n, j - (n - 1))],
        _ => 0.0,
    })
}

/// Subtract the weighted mean on each boundary.
pub fn project_mean_zero(k: &BlockOperator, f: &[f64]) -> Vec<f64> {
    let n = k.n;
    let mut out = f.to_vec();
    for (b, c) in k.curves.iter().enumerate() {
        let m = c.mean(&f[b * n..(b + 1) * n]);
        out[b * n..(b + 1) * n].iter_mut().for_each(|v| *v -= m);
    }
    out
}

/// ||G K - K^T G||_2 / ||G||_2.
pub fn calderon_residual(k: &BlockOperator, g: &GramMatrix) -> f64 {
    let gk = &g.matrix * &k.matrix;
    let n = gk.nrows();
    let r = Mat::from_fn(n, n, |i, j| gk[(i, j)] - gk[(j, i)]);
    spectral_norm(&r) / spectral_norm(&g.matrix)
}

/// Dominant Fourier frequency of the block samples.
pub fn dominant_harmonic(v: &[f64], n: usize) -> usize {
    let mut best = (0usize, -1.0f64);
    for k in 0..=n / 2 {
        let mut e = 0.0;
        for b in 0..2 {
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..n {
                let a = 2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                re += v[b * n + j] * a.cos();
                im -= v[b * n + j] * a.sin();
            }
            e += re * re + im * im;
        }
        if e > best.1 * (1.0 + 1e-9) {
            best = (k, e);
        }
    }
    best.0
}

struct RawCluster {
    lambda: f64,
    imag: f64,
    members: Vec<usize>,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLUSTER_REL_TOL * a.abs().max(b.abs()) + CLUSTER_ABS_TOL
}

/// Nonsymmetric eigendecomposition on the mean-zero subspace; returns at
/// least `n_max` leading modes (completing the last degenerate cluster).
pub fn spectrum(k: &BlockOperator, g: &GramMatrix, n_max: usize) -> Result<Spectrum> {
    let q = mean_zero_basis(k);
    let kr = &(q.transpose() * &k.matrix) * &q;
    let eig = kr.eigen().map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let m = kr.nrows();
    let values: Vec<Complex64> = (0..m).map(|i| s[i]).collect();
    let worst = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > MAX_IMAG {
        return Err(Error::SelfAdjointnessViolation(format!(
            "eigenvalue with imaginary part {worst:.3e}"
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].re.total_cmp(&values[a].re).then(a.cmp(&b)));
    let mut raw: Vec<RawCluster> = Vec::new();
    for &i in &order {
        match raw.last_mut() {
            Some(c) if same_value(values[*c.members.last().unwrap()].re, values[i].re) => c.members.push(i),
            _ => raw.push(RawCluster { lambda: 0.0, imag: 0.0, members: vec![i] }),
        }
    }
    for c in &mut raw {
        c.lambda = c.members.iter().map(|&i| values[i].re).sum::<f64>() / c.members.len() as f64;
        c.imag = c.members.iter().map(|&i| values[i].im.abs()).fold(0.0, f64::max);
    }
    // |lambda| descending; values equal in magnitude keep the positive one first
    raw.sort_by(|a, b| b.lambda.abs().total_cmp(&a.lambda.abs()));
    let mut i = 0;
    while i < raw.len() {
        let mut j = i + 1;
        while j < raw.len() && same_value(raw[i].lambda.abs(), raw[j].lambda.abs()) {
            j += 1;
        }
        raw[i..j].sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        i = j;
    }

    let mut modes = Vec::new();
    for (cid, c) in raw.iter().enumerate() {
        if modes.len() >= n_max {
            break;
        }
        let mut cand: Vec<Vec<f64>> = Vec::new();
        for &col in &c.members {
            let (mut re, mut im) = (vec![0.0; 2 * k.n], vec![0.0; 2 * k.n]);
            for r in 0..2 * k.n {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..m {
                    acc += u[(l, col)] * q[(r, l)];
                }
                re[r] = acc.re;
                im[r] = acc.im;
            }
            cand.push(re);
            cand.push(im);
        }
        let basis = g_orthonormal_basis(&cand, c.members.len(), g)?;
        for v in basis {
            let harmonic = dominant_harmonic(&v, k.n);
            modes.push(EigenMode {
                index: modes.len() + 1,
                lambda: c.lambda,
                imag: c.imag,
                vector: v,
                harmonic,
                branch: Branch::of(c.lambda),
                cluster: cid,
            });
        }
    }
    let eigenvalues = raw
        .iter()
        .flat_map(|c| c.members.iter().map(|&i| values[i]))
        .collect();
    Ok(Spectrum { eigenvalues, modes })
}

/// G-orthonormal basis of dimension `dim` for the span of the candidates,
/// rotated to a canonical orientation.
fn g_orthonormal_basis(cand: &[Vec<f64>], dim: usize, g: &GramMatrix) -> Result<Vec<Vec<f64>>> {
    let c = cand.len();
    let gv: Vec<Vec<f64>> = cand.iter().map(|v| crate::linalg::matvec(&g.matrix, v)).collect();
    let gram = Mat::from_fn(c, c, |a, b| {
        let s: f64 = cand[a].iter().zip(&gv[b]).map(|(x, y)| x * y).sum();
        let t: f64 = cand[b].iter().zip(&gv[a]).map(|(x, y)| x * y).sum();
        0.5 * (s + t)
    });
    let evd = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("Gram eigendecomposition failed: {e:?}")))?;
    let mu = evd.S().column_vector();
    let uu = evd.U();
    let top = mu[c - 1];
    if !(top > 0.0) {
        return Err(Error::DegeneracyResolution("eigenvectors have no H^2 content".into()));
    }
    let mut basis = Vec::with_capacity(dim);
    for r in 0..dim {
        let idx = c - 1 - r;
        if !(mu[idx] > 1e-13 * top) {
            return Err(Error::DegeneracyResolution(format!(
                "cluster of size {dim} spans only {r} H^2-independent directions"
            )));
        }
        let scale = 1.0 / mu[idx].sqrt();
        let len = cand[0].len();
        let v: Vec<f64> = (0..len)
            .map(|p| (0..c).map(|a| uu[(a, idx)] * cand[a][p]).sum::<f64>() * scale)
            .collect();
        basis.push(v);
    }
    Ok(canonical_rotation(basis))
}

fn first_near_max(values: &[f64], rel: f64) -> usize {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values.iter().position(|&v| v >= max * (1.0 - rel)).unwrap_or(0)
}

/// Fix the free rotation of an orthonormal basis: the first vector
/// concentrates the basis energy at the first node where that energy is
/// maximal, the rest span its complement; each vector's largest component is
/// made positive.
fn canonical_rotation(mut basis: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(basis.len());
    while basis.len() > 1 {
        let m = basis.len();
        let len = basis[0].len();
        let energy: Vec<f64> = (0..len).map(|p| basis.iter().map(|b| b[p] * b[p]).sum()).collect();
        let jstar = first_near_max(&energy, 1e-6);
        let a: Vec<f64> = basis.iter().map(|b| b[jstar]).collect();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let first: Vec<f64> = (0..len).map(|p| (0..m).map(|k| a[k] * basis[k][p]).sum::<f64>() / na).collect();
        out.push(first);
        let comp = complement_basis(&a);
        basis = (0..m - 1)
            .map(|l| (0..len).map(|p| (0..m).map(|k| comp[(k, l)] * basis[k][p]).sum()).collect())
            .collect();
    }
    out.extend(basis);
    for v in &mut out {
        let mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        let p = first_near_max(&mags, 1e-9);
        if v[p] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    out
}

/// Closed-form disk eigenvalue with the ratio of the boundary-2 to the
/// boundary-1 eigenvector amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskEigen {
    pub n: usize,
    pub branch: Branch,
    pub lambda: f64,
    pub ratio: f64,
}

/// lambda = +-(1/2) rho^n with rho = delta1 r1 / (delta2 r2), n = 1..=n_max.
pub fn disk_oracle_eigs(r1: f64, r2: f64, delta1: f64, delta2: f64, n_max: usize) -> Result<Vec<DiskEigen>> {
    for (name, v) in [("r1", r1), ("r2", r2), ("delta1", delta1), ("delta2", delta2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    let rho = delta1 * r1 / (delta2 * r2);
    if !(rho < 1.0) {
        return Err(Error::GeometryDegenerate(format!("delta1 r1 must be below delta2 r2 (rho = {rho})")));
    }
    let mut out = Vec::with_capacity(2 * n_max);
    for n in 1..=n_max {
        let l = 0.5 * rho.powi(n as i32);
        out.push(DiskEigen { n, branch: Branch::Plus, lambda: l, ratio: rho });
        out.push(DiskEigen { n, branch: Branch::Minus, lambda: -l, ratio: -rho });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disks(n: usize) -> LayeredGeometry {
        LayeredGeometry::disks(1.0, 2.0, 1.0, 1.0, n)
    }

    #[test]
    fn oracle_list() {
        let l = disk_oracle_eigs(1.0, 2.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!((l[0].n, l[0].branch, l[0].lambda), (1, Branch::Plus, 0.25));
        assert_eq!((l[1].n, l[1].branch, l[1].lambda), (1, Branch::Minus, -0.25));
        assert_eq!((l[2].n, l[2].lambda), (2, 0.125));
        assert_eq!(l[0].ratio, 0.5);
        assert!(disk_oracle_eigs(2.0, 1.0, 1.0, 1.0, 2).is_err());
        let tiny = disk_oracle_eigs(1.0, 2.0, 1e-9, 1.0, 3).unwrap();
        assert!(tiny.iter().all(|e| e.lambda.abs() < 1e-9));
    }

    #[test]
    fn disk_spectrum_and_eigenvectors() {
        let g = disks(64);
        let k = assemble_block_operator(&g, false).unwrap();
        let gm = assemble_gram(&g, false).unwrap();
        let sp = spectrum(&k, &gm, 12).unwrap();
        for (i, m) in sp.modes.iter().enumerate() {
            let n = i / 4 + 1;
            let expect = if (i / 2) % 2 == 0 { 0.5 } else { -0.5 } * 0.5f64.powi(n as i32);
            assert!((m.lambda - expect).abs() < 1e-10, "{i}: {} vs {expect}", m.lambda);
            assert_eq!(m.harmonic, n);
            // block ratio +-rho at the node where boundary 1 peaks
            let p = (0..64).max_by(|&a, &b| m.vector[a].abs().total_cmp(&m.vector[b].abs())).unwrap();
            let ratio = m.vector[64 + p] / m.vector[p];
            assert!((ratio - m.branch.sign() * 0.5).abs() < 1e-8, "ratio {ratio}");
        }
        for a in &sp.modes[..6] {
            for b in &sp.modes[..6] {
                let e = if a.index == b.index { 1.0 } else { 0.0 };
                assert!((gm.inner(&a.vector, &b.vector) - e).abs() < 1e-8);
            }
        }
        assert!(calderon_residual(&k, &gm) < 1e-6);
    }

    #[test]
    fn scale_and_ratio_examples() {
        let k = assemble_block_operator(&LayeredGeometry::disks(1.0, 2.0, 3.0, 3.0, 64), false).unwrap();
        let gm = assemble_gram(&LayeredGeometry::disks(1.0, 2.0, 3.0, 3.0, 64), false).unwrap();
        let sp = spectrum(&k, &gm, 4).unwrap();
        assert!((sp.modes[0].lambda - 0.25).abs() < 1e-10);
        let g = LayeredGeometry::disks(1.0, 2.0, 0.5, 1.0, 64);
        let sp = spectrum(&assemble_block_operator(&g, false).unwrap(), &assemble_gram(&g, false).unwrap(), 4).unwrap();
        assert!((sp.modes[0].lambda - 0.125).abs() < 1e-10);
        assert!((sp.modes[2].lambda + 0.125).abs() < 1e-10);
    }

    #[test]
    fn gram_rayleigh_quotients() {
        let g = disks(64);
        let gm = assemble_gram(&g, false).unwrap();
        let (c1, _) = g.base_curves().unwrap();
        let mut v = vec![0.0; 128];
        for j in 0..64 {
            v[j] = c1.nodes()[j].cos();
        }
        assert!((gm.inner(&v, &v) - std::f64::consts::PI / 2.0).abs() < 1e-12);
        let sym = (0..128).all(|i| (0..128).all(|j| gm.matrix[(i, j)] == gm.matrix[(j, i)]));
        assert!(sym);
    }
}
