//! Incident-field right-hand sides, density solves and intensity spectra.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, Curve, LayeredGeometry, Point};
use crate::linalg::{matvec, ShiftedSolver};
use crate::np_spectrum::{
    assemble_block_operator, assemble_gram, mean_zero_basis, BlockOperator, GramMatrix, Spectrum,
};
use crate::potentials::{eval_potentials_offboundary, LayerDensity};
use crate::resonance::DrudeModel;

/// Number of probe points on the measurement circle.
pub const PROBE_POINTS: usize = 64;
/// Smallest admissible |z + lambda| in a solve.
pub const MIN_RESOLVENT_GAP: f64 = 1e-12;

/// Uniform field H(x) = E0 (d . x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentField {
    pub direction: [f64; 2],
    pub amplitude: f64,
}

impl Default for IncidentField {
    fn default() -> Self {
        Self { direction: [1.0, 0.0], amplitude: 1.0 }
    }
}

impl IncidentField {
    /// The direction is normalized to unit length.
    pub fn uniform(direction: [f64; 2], amplitude: f64) -> Result<Self> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0) || !n.is_finite() || !amplitude.is_finite() {
            return Err(Error::InvalidArgument("incident direction must be a non-zero finite vector".into()));
        }
        Ok(Self { direction: [direction[0] / n, direction[1] / n], amplitude })
    }

    pub fn value(&self, x: Point) -> f64 {
        self.amplitude * dot(self.direction, x)
    }

    fn normal_derivative(&self, nu: Point) -> f64 {
        self.amplitude * dot(self.direction, nu)
    }
}

fn project(curve: &Curve, v: &mut [f64]) {
    let m = curve.mean(v);
    v.iter_mut().for_each(|x| *x -= m);
}

/// Block right-hand side on the base curves, optionally with the first-order
/// boundary corrections R_H = -h' (dH/dT) (the Hessian of a uniform field
/// vanishes), projected to mean zero on each boundary.
pub fn assemble_rhs(inc: &IncidentField, g: &LayeredGeometry, include_corrections: bool) -> Result<Vec<f64>> {
    let (c1, c2) = g.base_curves()?;
    let n = g.n;
    let mut f = vec![0.0; 2 * n];
    for (b, (c, h, eps, sign)) in [(&c1, &g.h1, g.eps1, 1.0), (&c2, &g.h2, g.eps2, -1.0)].into_iter().enumerate() {
        let hp = h.sample(n, 1);
        let block = &mut f[b * n..(b + 1) * n];
        for j in 0..n {
            let mut v = inc.normal_derivative(c.normals()[j]);
            if include_corrections {
                let tang = inc.normal_derivative(c.tangents()[j]);
                v += eps * (-hp[j] / c.speed()[j] * tang);
            }
            block[j] = sign * v;
        }
        project(c, block);
    }
    Ok(f)
}

/// Block right-hand side sampled on the perturbed curves themselves.
pub fn assemble_rhs_exact(inc: &IncidentField, g: &LayeredGeometry) -> Result<Vec<f64>> {
    let (c1, c2) = g.perturbed_curves()?;
    let n = g.n;
    let mut f = vec![0.0; 2 * n];
    for (b, (c, sign)) in [(&c1, 1.0), (&c2, -1.0)].into_iter().enumerate() {
        let block = &mut f[b * n..(b + 1) * n];
        for j in 0..n {
            block[j] = sign * inc.normal_derivative(c.normals()[j]);
        }
        project(c, block);
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    Direct,
    Spectral { n_modes: usize },
}

/// Operator, mean-zero basis and a Hessenberg factorization reused across
/// many values of z.
pub struct TransmissionSystem {
    q: Mat<f64>,
    solver: ShiftedSolver,
    spectrum: Spectrum,
    gram_modes: Vec<Vec<f64>>,
}

impl TransmissionSystem {
    /// `n_modes` leading modes are kept for spectral solves.
    pub fn new(k: &BlockOperator, g: &GramMatrix, n_modes: usize) -> Result<Self> {
        let q = mean_zero_basis(k);
        let kr = &(q.transpose() * &k.matrix) * &q;
        let spectrum = crate::np_spectrum::spectrum(k, g, n_modes)?;
        let gram_modes = spectrum.modes.iter().map(|m| matvec(&g.matrix, &m.vector)).collect();
        Ok(Self { q, solver: ShiftedSolver::new(&kr), spectrum, gram_modes })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Solve (z I + K) Phi = f on the mean-zero subspace.
    pub fn solve(&self, z: Complex64, f: &[f64], method: SolveMethod) -> Result<Vec<Complex64>> {
        let n2 = self.q.nrows();
        if f.len() != n2 {
            return Err(Error::InvalidArgument(format!("right-hand side has length {}, expected {n2}", f.len())));
        }
        match method {
            SolveMethod::Direct => {
                let gap = self
                    .spectrum
                    .eigenvalues
                    .iter()
                    .map(|l| (z + l.re).norm())
                    .fold(f64::INFINITY, f64::min);
                if gap < MIN_RESOLVENT_GAP {
                    return Err(Error::ResonanceSingular(format!("|z + lambda| = {gap:.3e}")));
                }
                let m = self.q.ncols();
                let b: Vec<Complex64> = (0..m)
                    .map(|j| Complex64::new((0..n2).map(|i| self.q[(i, j)] * f[i]).sum(), 0.0))
                    .collect();
                let y = self.solver.solve(z, &b)?;
                Ok((0..n2).map(|i| (0..m).map(|j| y[j] * self.q[(i, j)]).sum()).collect())
            }
            SolveMethod::Spectral { n_modes } => {
                let modes = &self.spectrum.modes;
                let count = n_modes.min(modes.len());
                let mut out = vec![Complex64::new(0.0, 0.0); n2];
                for (m, gm) in modes.iter().zip(&self.gram_modes).take(count) {
                    let denom = z + m.lambda;
                    if denom.norm() < MIN_RESOLVENT_GAP {
                        return Err(Error::ResonanceSingular(format!("|z + lambda| = {:.3e}", denom.norm())));
                    }
                    let coef: f64 = f.iter().zip(gm).map(|(a, b)| a * b).sum();
                    let c = coef / denom;
                    for (o, v) in out.iter_mut().zip(&m.vector) {
                        *o += c * v;
                    }
                }
                Ok(out)
            }
        }
    }
}

pub fn solve_densities(
    k: &BlockOperator,
    g: &GramMatrix,
    z: Complex64,
    f: &[f64],
    method: SolveMethod,
) -> Result<Vec<Complex64>> {
    let n_modes = match method {
        SolveMethod::Direct => 0,
        SolveMethod::Spectral { n_modes } => n_modes,
    };
    TransmissionSystem::new(k, g, n_modes)?.solve(z, f, method)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    pub gamma: f64,
    pub probe_radius: f64,
    pub probe_points: usize,
    pub incident: IncidentField,
    pub geometry: LayeredGeometry,
}

impl SpectrumCurve {
    /// Indices of interior local maxima.
    pub fn peaks(&self) -> Vec<usize> {
        let v = &self.intensity;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
            .collect()
    }

    /// Local maxima whose value is at least `fraction` of the curve maximum.
    pub fn peaks_above(&self, fraction: f64) -> Vec<usize> {
        let max = self.intensity.iter().cloned().fold(0.0, f64::max);
        self.peaks().into_iter().filter(|&i| self.intensity[i] >= fraction * max).collect()
    }
}

/// Mean |u^s|^2 over the probe circle for each frequency, with u^s the sum of
/// the single-layer potentials of the solved densities on the physical curves.
pub fn intensity_spectrum(
    g: &LayeredGeometry,
    inc: &IncidentField,
    model: &DrudeModel,
    omega_grid: &[f64],
    probe_radius_factor: f64,
) -> Result<SpectrumCurve> {
    model.validate()?;
    if !(probe_radius_factor > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probe radius factor must exceed 1, got {probe_radius_factor}"
        )));
    }
    let perturbed = !g.is_unperturbed();
    let k = assemble_block_operator(g, perturbed)?;
    let gram = assemble_gram(g, perturbed)?;
    let f = if perturbed { assemble_rhs_exact(inc, g)? } else { assemble_rhs(inc, g, false)? };
    let system = TransmissionSystem::new(&k, &gram, 0)?;
    let (p1, p2) = g.physical_curves(perturbed)?;
    let (_, hi2) = g.h2.extrema();
    let probe_radius = probe_radius_factor * g.delta2 * (g.r2 + g.eps2 * hi2);
    let probes: Vec<Point> = (0..PROBE_POINTS)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / PROBE_POINTS as f64;
            [probe_radius * a.cos(), probe_radius * a.sin()]
        })
        .collect();
    let n = g.n;
    let intensity = omega_grid
        .par_iter()
        .map(|&w| {
            let z = model.contrast(w)?;
            let phi = system.solve(z, &f, SolveMethod::Direct)?;
            let u = eval_potentials_offboundary(
                &[
                    LayerDensity { curve: &p1, density: &phi[..n] },
                    LayerDensity { curve: &p2, density: &phi[n..] },
                ],
                &probes,
            )?;
            Ok(u.iter().map(|v| v.norm_sqr()).sum::<f64>() / PROBE_POINTS as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpectrumCurve {
        omega: omega_grid.to_vec(),
        intensity,
        gamma: model.gamma,
        probe_radius,
        probe_points: PROBE_POINTS,
        incident: *inc,
        geometry: g.clone(),
    })
}
