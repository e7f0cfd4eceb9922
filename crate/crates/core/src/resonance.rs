//! Drude permittivity, contrast parameter, resonance frequencies and scans.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LayeredGeometry;
use crate::np_spectrum::{disk_oracle_eigs, Branch};

/// Default threshold on |z + lambda| for declaring a resonance.
pub const RESONANCE_THRESHOLD: f64 = 1e-2;

/// Frequencies in eV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrudeModel {
    pub omega_p: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub eps_m: f64,
}

fn one() -> f64 {
    1.0
}

impl DrudeModel {
    pub fn lossless(omega_p: f64) -> Self {
        Self { omega_p, gamma: 0.0, eps_m: 1.0 }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p > 0.0) || !self.omega_p.is_finite() {
            return Err(Error::InvalidArgument(format!("omega_p must be positive, got {}", self.omega_p)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.eps_m > 0.0) || !self.eps_m.is_finite() {
            return Err(Error::InvalidArgument(format!("eps_m must be positive, got {}", self.eps_m)));
        }
        Ok(())
    }

    pub fn permittivity(&self, omega: f64) -> Result<Complex64> {
        drude_permittivity(self, omega)
    }

    /// z(omega) for this model's metal against its background.
    pub fn contrast(&self, omega: f64) -> Result<Complex64> {
        contrast_z(self.eps_m, self.permittivity(omega)?)
    }
}

/// 1 - w_p^2 / (w^2 + i gamma w)
pub fn drude_permittivity(model: &DrudeModel, omega: f64) -> Result<Complex64> {
    model.validate()?;
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let denom = Complex64::new(omega * omega, model.gamma * omega);
    Ok(Complex64::new(1.0, 0.0) - model.omega_p * model.omega_p / denom)
}

/// (eps_m + eps_s) / (2 (eps_m - eps_s))
pub fn contrast_z(eps_m: f64, eps_s: Complex64) -> Result<Complex64> {
    let d = Complex64::new(eps_m, 0.0) - eps_s;
    if d.norm() <= f64::EPSILON * eps_m.abs().max(eps_s.norm()) {
        return Err(Error::ContrastSingular(format!("eps_s = {eps_s} equals eps_m = {eps_m}")));
    }
    Ok((eps_s + eps_m) / (d * 2.0))
}

/// (w_p / sqrt 2) sqrt(1 - 2 lambda) for each lambda.
pub fn frequencies_from_eigenvalues(lams: &[f64], omega_p: f64) -> Result<Vec<f64>> {
    if !(omega_p > 0.0) {
        return Err(Error::InvalidArgument(format!("omega_p must be positive, got {omega_p}")));
    }
    lams.iter()
        .map(|&l| {
            if !(l < 0.5) {
                Err(Error::ExcludedMode(format!("eigenvalue {l} is not below 1/2")))
            } else {
                Ok(omega_p / 2f64.sqrt() * (1.0 - 2.0 * l).sqrt())
            }
        })
        .collect()
}

/// One resonance; `branch` is the sign of the eigenvalue, so the higher
/// (antibonding) frequency belongs to `Branch::Minus`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRow {
    pub n: usize,
    pub branch: Branch,
    pub lambda: f64,
    pub lambda_tilde: f64,
    pub omega: f64,
    pub omega_tilde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTable {
    pub rows: Vec<ResonanceRow>,
    pub omega_p: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub geometry: Option<LayeredGeometry>,
}

impl ResonanceTable {
    /// Higher frequency of harmonic n (negative eigenvalue).
    pub fn antibonding(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.branch == Branch::Minus).map(|r| r.omega_tilde)
    }

    /// Lower frequency of harmonic n (positive eigenvalue).
    pub fn bonding(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n && r.branch == Branch::Plus).map(|r| r.omega_tilde)
    }

    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.n.cmp(&b.n)
                .then(a.branch.cmp(&b.branch))
                .then(b.lambda_tilde.total_cmp(&a.lambda_tilde))
        });
    }
}

/// w_{n-+} = (w_p / sqrt 2) sqrt(1 -+ rho^n) for n = 1..=n_max.
pub fn disk_closed_form_frequencies(
    r1: f64,
    r2: f64,
    delta1: f64,
    delta2: f64,
    omega_p: f64,
    n_max: usize,
) -> Result<ResonanceTable> {
    let eigs = disk_oracle_eigs(r1, r2, delta1, delta2, n_max)?;
    let lams: Vec<f64> = eigs.iter().map(|e| e.lambda).collect();
    let omegas = frequencies_from_eigenvalues(&lams, omega_p)?;
    let rows = eigs
        .iter()
        .zip(omegas)
        .map(|(e, w)| ResonanceRow {
            n: e.n,
            branch: e.branch,
            lambda: e.lambda,
            lambda_tilde: e.lambda,
            omega: w,
            omega_tilde: w,
        })
        .collect();
    let mut t = ResonanceTable {
        rows,
        omega_p,
        eps1: 0.0,
        eps2: 0.0,
        geometry: Some(LayeredGeometry::disks(r1, r2, delta1, delta2, 16)),
    };
    t.sort();
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub omega: Vec<f64>,
    /// min over lambda of |z(omega) + lambda|, or |z| when no eigenvalues are given.
    pub value: Vec<f64>,
    /// Indices of interior local minima.
    pub minima: Vec<usize>,
}

impl ScanResult {
    /// Frequencies of local minima below the threshold.
    pub fn resonances(&self, threshold: f64) -> Vec<f64> {
        self.minima
            .iter()
            .filter(|&&i| self.value[i] < threshold)
            .map(|&i| self.omega[i])
            .collect()
    }
}

pub fn resonance_scan(lams: &[f64], model: &DrudeModel, omega_grid: &[f64]) -> Result<ScanResult> {
    let value = omega_grid
        .iter()
        .map(|&w| {
            let z = model.contrast(w)?;
            Ok(if lams.is_empty() {
                z.norm()
            } else {
                lams.iter().map(|&l| (z + l).norm()).fold(f64::INFINITY, f64::min)
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let minima = (1..value.len().saturating_sub(1))
        .filter(|&i| value[i] < value[i - 1] && value[i] <= value[i + 1])
        .collect();
    Ok(ScanResult { omega: omega_grid.to_vec(), value, minima })
}

/// Spread between the highest and lowest frequency of the table.
pub fn bandwidth(table: &ResonanceTable) -> Result<f64> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let hi = table.rows.iter().map(|r| r.omega_tilde).fold(f64::NEG_INFINITY, f64::max);
    let lo = table.rows.iter().map(|r| r.omega_tilde).fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// `points` equispaced values from `min` to `max` inclusive.
pub fn uniform_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![min];
    }
    (0..points)
        .map(|i| min + (max - min) * i as f64 / (points - 1) as f64)
        .collect()
}
